"""Exception hierarchy shared by every pipeline stage."""


class DeepFeatError(Exception):
    """Base class for all errors raised by deepfeat."""


# dataset ------------------------------------------------------------------

class DatasetError(DeepFeatError):
    pass


class PathNotFound(DatasetError, FileNotFoundError):
    pass


class ClassNotFound(DatasetError):
    pass


class EmptyClass(DatasetError):
    pass


class InvalidFraction(DatasetError, ValueError):
    pass


class DegenerateSplit(DatasetError):
    pass


class InvalidK(DatasetError, ValueError):
    pass


class InsufficientClassSize(DatasetError):
    pass


# extractor ----------------------------------------------------------------

class DecodeError(DeepFeatError):
    pass


class InvalidImage(DeepFeatError, ValueError):
    pass


class ContractViolation(DeepFeatError):
    """Backbone output does not have the promised shape."""


class NumericError(DeepFeatError, ArithmeticError):
    pass


class FormatError(DeepFeatError):
    pass


class TruncationError(FormatError):
    pass


class CapacityError(DeepFeatError):
    pass


# linear head --------------------------------------------------------------

class ShapeError(DeepFeatError, ValueError):
    pass


class DegenerateLabels(DeepFeatError, ValueError):
    pass


class TrainingError(DeepFeatError):
    pass


class ConvergenceWarning(UserWarning):
    pass


# evaluation ---------------------------------------------------------------

class EmptyInput(DeepFeatError, ValueError):
    pass


class LabelRange(DeepFeatError, ValueError):
    pass


class DegenerateFold(DeepFeatError):
    pass
