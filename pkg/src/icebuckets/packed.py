"""Fixed-width unsigned integers packed into a flat ``uint64`` buffer."""

import numpy as np

from . import _kernels
from .errors import ConfigError


class PackedArray:
    """``length`` unsigned fields of ``width`` bits each.

    Fields are laid out back to back, little-endian within each word, and
    may straddle a word boundary.  Storage is ``ceil(length * width / 64)``
    words plus one guard word so the straddle path never reads past the end.
    """

    def __init__(self, length, width):
        if not 1 <= width <= _kernels.MAX_FIELD_BITS:
            raise ConfigError(f"field width must be in [1, {_kernels.MAX_FIELD_BITS}], got {width}")
        if length < 0:
            raise ConfigError(f"length must be >= 0, got {length}")
        self.length = int(length)
        self.width = int(width)
        self.words = np.zeros((self.length * self.width + 63) // 64 + 1, dtype=np.uint64)

    @property
    def max_value(self):
        return (1 << self.width) - 1

    @property
    def nbits(self):
        """Payload size in bits (excludes the guard word)."""
        return self.length * self.width

    def __len__(self):
        return self.length

    def _index(self, i):
        i = int(i)
        if i < 0:
            i += self.length
        if not 0 <= i < self.length:
            raise IndexError(f"index {i} out of range for length {self.length}")
        return i

    def __getitem__(self, i):
        return int(_kernels.packed_get(self.words, self.width, self._index(i)))

    def __setitem__(self, i, value):
        if not 0 <= value <= self.max_value:
            raise ValueError(f"{value} does not fit in {self.width} bits")
        _kernels.packed_set(self.words, self.width, self._index(i), int(value))

    def __iter__(self):
        return iter(self.to_numpy().tolist())

    def to_numpy(self):
        return _kernels.packed_unpack(self.words, self.width, self.length)

    def fill_from(self, values):
        values = np.asarray(values, dtype=np.int64)
        if values.shape != (self.length,):
            raise ValueError(f"expected {self.length} values, got shape {values.shape}")
        if values.size and (values.min() < 0 or values.max() > self.max_value):
            raise ValueError(f"values do not fit in {self.width} bits")
        _kernels.packed_fill(self.words, self.width, values)

    def copy(self):
        other = PackedArray.__new__(PackedArray)
        other.length, other.width, other.words = self.length, self.width, self.words.copy()
        return other
