"""Image preprocessing, frozen-backbone inference and flattened feature matrices."""

import hashlib
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ContractViolation, DecodeError, InvalidImage, NumericError
from .rng import philox_words, words_to_unit_float32


IMAGENET_MEANS = (0.485, 0.456, 0.406)
IMAGENET_STDS = (0.229, 0.224, 0.225)

# final conv block of ResNet50 at 224x224 input
RESNET50_OUTPUT = (2048, 7, 7)
RESNET50_FEATURE_DIM = 2048 * 7 * 7


@dataclass(frozen=True)
class PreprocessConfig:
    target_size: int = 224
    channel_means: tuple = IMAGENET_MEANS
    channel_stds: tuple = IMAGENET_STDS
    grayscale_policy: str = "replicate"

    def __post_init__(self):
        if int(self.target_size) <= 0:
            raise ValueError("target_size must be positive")
        if len(self.channel_means) != 3 or len(self.channel_stds) != 3:
            raise ValueError("need exactly three channel means and stds")
        if any(s <= 0 for s in self.channel_stds):
            raise ValueError("channel stds must be strictly positive")
        if self.grayscale_policy != "replicate":
            raise ValueError(f"unsupported grayscale policy {self.grayscale_policy!r}")


@dataclass
class FeatureMatrix:
    """n x d float32 features, one row per sample, with aligned labels."""

    values: np.ndarray
    labels: np.ndarray
    class_names: tuple

    def __post_init__(self):
        self.values = np.asarray(self.values)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.class_names = tuple(self.class_names)
        if self.values.ndim != 2:
            raise ValueError("feature values must be a 2-D array")
        if self.labels.shape != (self.values.shape[0],):
            raise ValueError("one label per feature row required")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= len(self.class_names)):
            raise ValueError("label outside the class table")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]

    @property
    def n_classes(self):
        return len(self.class_names)

    def subset(self, indices):
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureMatrix(self.values[idx], self.labels[idx], self.class_names)


def _canonical(img):
    """Reduce any decoded mode to L, RGB, or F (grayscale already scaled to [0, 255])."""
    if img.mode in ("L", "RGB"):
        return img
    if img.mode.startswith("I"):
        arr = np.asarray(img, dtype=np.float32)
        hi = 65535.0 if img.mode.startswith("I;16") else max(float(arr.max()), 1.0)
        return Image.fromarray(arr * np.float32(255.0 / hi), mode="F")
    if img.mode in ("1", "LA"):
        return img.convert("L")
    return img.convert("RGB")


def preprocess_pil(img, config=PreprocessConfig()):
    w, h = img.size
    if w < 1 or h < 1:
        raise InvalidImage(f"image has zero dimension ({w}x{h})")
    img = _canonical(img)
    size = int(config.target_size)
    if (w, h) != (size, size):
        img = img.resize((size, size), Image.BILINEAR)
    arr = np.asarray(img, dtype=np.float32)
    if arr.ndim == 2:
        arr = np.repeat(arr[None, :, :], 3, axis=0)
    else:
        arr = np.ascontiguousarray(arr.transpose(2, 0, 1))
    means = np.asarray(config.channel_means, dtype=np.float32)[:, None, None]
    stds = np.asarray(config.channel_stds, dtype=np.float32)[:, None, None]
    return ((arr / np.float32(255.0) - means) / stds).astype(np.float32)


def preprocess_image(image_bytes, config=PreprocessConfig()):
    """Encoded image bytes -> normalized float32 tensor of shape (3, S, S).

    Bilinear resize to S x S, grayscale replicated to three channels, then
    ``(p / 255 - mean_c) / std_c`` per channel.
    """
    try:
        img = Image.open(io.BytesIO(image_bytes))
        img.load()
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"cannot decode image: {exc}") from exc
    return preprocess_pil(img, config)


def load_preprocessed(path, config=PreprocessConfig()):
    data = Path(path).read_bytes()
    try:
        return preprocess_image(data, config)
    except DecodeError as exc:
        raise DecodeError(f"{path}: {exc}") from exc


# backbones ----------------------------------------------------------------

def tensor_hash64(tensor):
    """64-bit blake2b digest of a float32 tensor's little-endian C-order bytes."""
    buf = np.ascontiguousarray(tensor, dtype="<f4").tobytes()
    return int.from_bytes(hashlib.blake2b(buf, digest_size=8).digest(), "little")


class MockBackbone:
    """Deterministic stand-in producing (2048, 7, 7) activations per input.

    Output element i of a sample is word i of the Philox stream keyed by
    ``(seed, tensor_hash64(sample))``, mapped to [0, 1).  Identical inputs
    give identical outputs regardless of batching.
    """

    output_shape = RESNET50_OUTPUT

    def __init__(self, seed=0):
        self.seed = int(seed)
        self.input_size = 224

    def __call__(self, batch):
        batch = np.asarray(batch, dtype=np.float32)
        if batch.ndim != 4 or batch.shape[1] != 3:
            raise ContractViolation(f"mock backbone expects (N, 3, H, W) input, got {batch.shape}")
        n_out = int(np.prod(self.output_shape))
        out = np.empty((batch.shape[0],) + self.output_shape, dtype=np.float32)
        for i, sample in enumerate(batch):
            words = philox_words(self.seed, tensor_hash64(sample), n_out)
            out[i] = words_to_unit_float32(words).reshape(self.output_shape)
        return out

    def __repr__(self):
        return f"MockBackbone(seed={self.seed})"


class OnnxBackbone:
    """ONNX model with one (N, 3, S, S) float input and one activation-map output."""

    def __init__(self, path, output_shape=RESNET50_OUTPUT, input_size=224, threads=None):
        import onnxruntime as ort

        self.path = str(path)
        if not Path(self.path).is_file():
            raise FileNotFoundError(f"backbone model not found: {self.path}")
        opts = ort.SessionOptions()
        if threads:
            opts.intra_op_num_threads = int(threads)
        try:
            self._session = ort.InferenceSession(self.path, sess_options=opts,
                                                 providers=["CPUExecutionProvider"])
        except Exception as exc:  # onnxruntime raises several unrelated types
            raise ContractViolation(f"cannot load ONNX model {self.path}: {exc}") from exc
        inputs = self._session.get_inputs()
        outputs = self._session.get_outputs()
        if len(inputs) != 1 or len(outputs) != 1:
            raise ContractViolation(
                f"backbone must have exactly one input and one output, "
                f"got {len(inputs)} and {len(outputs)}")
        self._input_name = inputs[0].name
        self.output_shape = tuple(output_shape)
        self.input_size = int(input_size)

    def __call__(self, batch):
        batch = np.ascontiguousarray(batch, dtype=np.float32)
        try:
            (out,) = self._session.run(None, {self._input_name: batch})
        except Exception as exc:
            raise ContractViolation(f"backbone rejected input of shape {batch.shape}: {exc}") from exc
        return np.asarray(out)

    def __repr__(self):
        return f"OnnxBackbone({self.path!r})"


def load_backbone(uri, **kwargs):
    """``mock:<seed>`` or a path to an ONNX file."""
    uri = str(uri)
    if uri.startswith("mock:"):
        return MockBackbone(int(uri[5:] or 0))
    return OnnxBackbone(uri, **kwargs)


def check_contract(backbone, config=PreprocessConfig(), probe_batch=2):
    """Run a zero probe batch and verify batch and activation dimensions."""
    size = int(config.target_size)
    probe = np.zeros((probe_batch, 3, size, size), dtype=np.float32)
    out = backbone(probe)
    expected = (probe_batch,) + tuple(backbone.output_shape)
    if tuple(out.shape) != expected:
        raise ContractViolation(f"backbone output shape {tuple(out.shape)}, expected {expected}")
    return expected[1:]


def extract_features(backbone, manifest, config=PreprocessConfig(), batch_size=16,
                     workers=1, progress=None):
    """Run every manifest image through ``backbone`` and flatten each output.

    Rows follow manifest order.  Flattening is channel-major (c, h, w), i.e.
    plain C-order of the (C, H, W) activation.  ``workers`` threads decode
    and preprocess images; the result does not depend on it.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    out_shape = check_contract(backbone, config)
    d = int(np.prod(out_shape))
    records = manifest.records
    n = len(records)
    values = np.empty((n, d), dtype=np.float32)

    def prep(rec):
        return load_preprocessed(rec.path, config)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for start in range(0, n, batch_size):
            chunk = records[start:start + batch_size]
            tensors = list(pool.map(prep, chunk)) if pool else [prep(r) for r in chunk]
            out = backbone(np.stack(tensors))
            if tuple(out.shape) != (len(chunk),) + tuple(out_shape):
                raise ContractViolation(
                    f"backbone returned {tuple(out.shape)} for a batch of {len(chunk)}, "
                    f"expected {(len(chunk),) + tuple(out_shape)}")
            flat = out.reshape(len(chunk), d)
            bad = ~np.isfinite(flat).all(axis=1)
            if bad.any():
                rec = chunk[int(np.argmax(bad))]
                raise NumericError(f"non-finite activation for record {rec.path}")
            values[start:start + len(chunk)] = flat
            if progress is not None:
                progress(min(start + batch_size, n), n)
    finally:
        if pool:
            pool.shutdown()
    return FeatureMatrix(values, manifest.labels, manifest.classes)
