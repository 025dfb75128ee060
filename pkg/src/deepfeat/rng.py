"""Seeded, portable randomness.

All randomness in the pipeline comes from Philox4x64-10 (Random123), as
exposed by ``numpy.random.Philox``.  A stream is identified by a two-word
key ``(seed, stream_id)``; word ``i`` of the stream is word ``i % 4`` of the
block ``Philox4x64-10(counter=(i // 4 + 1, 0, 0, 0), key)``.  That mapping is
all another implementation needs to reproduce splits and mock features.
"""

import numpy as np

_U64 = 1 << 64


def _u64(value):
    value = int(value)
    if not 0 <= value < _U64:
        raise ValueError(f"seed/key word must fit in an unsigned 64-bit integer, got {value}")
    return value


def philox_words(seed, stream_id, count):
    """First ``count`` 64-bit words of the stream keyed by ``(seed, stream_id)``."""
    key = np.array([_u64(seed), _u64(stream_id)], dtype=np.uint64)
    return np.random.Philox(key=key).random_raw(count).astype(np.uint64)


class CounterStream:
    """Sequential reader over one Philox stream."""

    def __init__(self, seed, stream_id=0):
        key = np.array([_u64(seed), _u64(stream_id)], dtype=np.uint64)
        self._bitgen = np.random.Philox(key=key)

    def next_u64(self):
        return int(self._bitgen.random_raw())

    def below(self, bound):
        """Unbiased integer in ``[0, bound)`` by rejection of the low tail."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        threshold = (_U64 - bound) % bound
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % bound


def fisher_yates(items, stream):
    """Return a shuffled copy of ``items`` (Durstenfeld, descending i)."""
    out = list(items)
    for i in range(len(out) - 1, 0, -1):
        j = stream.below(i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def words_to_unit_float32(words):
    """Map uint64 words to float32 in [0, 1) using the top 24 bits (exact)."""
    top = (np.asarray(words, dtype=np.uint64) >> np.uint64(40)).astype(np.float32)
    return top * np.float32(2.0 ** -24)
