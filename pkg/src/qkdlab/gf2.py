"""Dense GF(2) matrices and bit-string helpers.

Bit strings are 1-D ``uint8`` arrays of 0/1 values. When a bit string is
packed into an integer index, bit 0 of the string is the most significant
bit; every table in the package indexes keys this way.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import ValidationError

BitsLike = Union[str, Sequence[int], np.ndarray]


def as_bits(x: BitsLike) -> np.ndarray:
    """Coerce a '0'/'1' string or 0/1 sequence to a uint8 bit array."""
    if isinstance(x, str):
        if any(c not in "01" for c in x):
            raise ValidationError(f"not a bit string: {x!r}")
        return np.frombuffer(x.encode("ascii"), dtype=np.uint8) - ord("0")
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValidationError("bit strings must be one-dimensional")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ValidationError("bit strings may only contain 0 and 1")
    return arr.astype(np.uint8)


def bits_to_str(bits: np.ndarray) -> str:
    return "".join("1" if b else "0" for b in np.asarray(bits).ravel())


def bits_to_int(bits: BitsLike) -> int:
    value = 0
    for b in as_bits(bits):
        value = (value << 1) | int(b)
    return value


def int_to_bits(value: int, width: int) -> np.ndarray:
    if value < 0 or value >> width:
        raise ValidationError(f"{value} does not fit in {width} bits")
    return np.array([(value >> (width - 1 - j)) & 1 for j in range(width)], dtype=np.uint8)


def index_bits(indices: np.ndarray, width: int) -> np.ndarray:
    """Expand integer indices to an (len, width) bit array, MSB first."""
    idx = np.asarray(indices, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)


def bits_index(bits: np.ndarray) -> np.ndarray:
    """Inverse of :func:`index_bits` for a (len, width) bit array."""
    bits = np.asarray(bits, dtype=np.int64)
    width = bits.shape[1]
    weights = np.left_shift(1, np.arange(width - 1, -1, -1, dtype=np.int64))
    return bits @ weights


def popcount(x: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(x, dtype=np.uint64)).astype(np.int64)


@dataclass(frozen=True, eq=False)
class BitMatrix:
    """A dense matrix over GF(2).

    ``data`` holds one byte per entry (0 or 1). Rows are output bits and
    columns are input bits, so ``M @ x`` compresses ``cols`` bits into
    ``rows`` bits.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.data, dtype=np.uint8, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"BitMatrix needs a non-empty 2-D array, got shape {arr.shape}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValidationError("BitMatrix entries must be 0 or 1")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.data, other.data))

    def __hash__(self) -> int:
        return hash((self.shape, self.data.tobytes()))

    def __repr__(self) -> str:
        return f"BitMatrix({self.rows}x{self.cols}: {self.to_text().replace(chr(10), ' ')})"

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(np.eye(n, dtype=np.uint8))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def from_rows(cls, rows: Iterable[BitsLike]) -> "BitMatrix":
        return cls(np.array([as_bits(r) for r in rows], dtype=np.uint8))

    @classmethod
    def from_row_ints(cls, row_ints: Sequence[int], cols: int) -> "BitMatrix":
        return cls(index_bits(np.asarray(row_ints, dtype=np.int64), cols))

    @classmethod
    def from_text(cls, text: str) -> "BitMatrix":
        """Parse one row of '0'/'1' characters per line; blank lines are ignored."""
        rows = [line.strip() for line in text.splitlines() if line.strip()]
        if not rows:
            raise ValidationError("empty matrix text")
        if len({len(r) for r in rows}) != 1:
            raise ValidationError("matrix rows have unequal lengths")
        return cls.from_rows(rows)

    def to_text(self) -> str:
        return "\n".join(bits_to_str(r) for r in self.data)

    def row_ints(self) -> np.ndarray:
        return bits_index(self.data)

    @property
    def T(self) -> "BitMatrix":
        return BitMatrix(self.data.T)

    def matmul(self, other: "BitMatrix") -> "BitMatrix":
        if self.cols != other.rows:
            raise ValidationError(f"shape mismatch {self.shape} @ {other.shape}")
        prod = (self.data.astype(np.int64) @ other.data.astype(np.int64)) & 1
        return BitMatrix(prod)

    def apply(self, x: BitsLike) -> np.ndarray:
        """Return ``M x`` over GF(2)."""
        bits = as_bits(x)
        if bits.size != self.cols:
            raise ValidationError(f"input has {bits.size} bits, matrix expects {self.cols}")
        return ((self.data.astype(np.int64) @ bits.astype(np.int64)) & 1).astype(np.uint8)

    def apply_indices(self, indices: np.ndarray) -> np.ndarray:
        """Apply the matrix to packed key indices, returning packed outputs."""
        idx = np.asarray(indices, dtype=np.int64)
        rows = self.row_ints()
        out = np.zeros(idx.shape, dtype=np.int64)
        for r in rows:
            out = (out << 1) | (popcount(idx & int(r)) & 1)
        return out

    def rank(self) -> int:
        return rank_gf2(self)


def rank_gf2(M: BitMatrix | np.ndarray) -> int:
    """Rank over GF(2) by Gaussian elimination."""
    a = np.array(M.data if isinstance(M, BitMatrix) else M, dtype=np.uint8) & 1
    n_rows, n_cols = a.shape
    rank = 0
    for c in range(n_cols):
        if rank == n_rows:
            break
        hits = np.nonzero(a[rank:, c])[0]
        if hits.size == 0:
            continue
        p = rank + int(hits[0])
        if p != rank:
            a[[rank, p]] = a[[p, rank]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != rank]
        a[others] ^= a[rank]
        rank += 1
    return rank


def batch_rank(row_ints: np.ndarray, cols: int) -> np.ndarray:
    """Ranks of many matrices at once.

    ``row_ints`` has shape (batch, rows); each entry packs one matrix row.
    Uses an XOR basis keyed by leading bit, vectorised over the batch.
    """
    rows_arr = np.asarray(row_ints, dtype=np.uint64)
    batch, n_rows = rows_arr.shape
    basis = np.zeros((batch, cols), dtype=np.uint64)
    rank = np.zeros(batch, dtype=np.int64)
    for i in range(n_rows):
        v = rows_arr[:, i].copy()
        for c in range(cols - 1, -1, -1):
            has = ((v >> np.uint64(c)) & np.uint64(1)).astype(bool)
            if not has.any():
                continue
            occupied = basis[:, c] != 0
            reduce = has & occupied
            v[reduce] ^= basis[reduce, c]
            insert = has & ~occupied
            basis[insert, c] = v[insert]
            rank[insert] += 1
            v[insert] = 0
    return rank


def nullspace_gf2(M: BitMatrix) -> BitMatrix | None:
    """Basis of {x : M x = 0} as matrix rows, or None if trivial."""
    a = np.array(M.data, dtype=np.uint8)
    n_rows, n_cols = a.shape
    pivots = []
    r = 0
    for c in range(n_cols):
        if r == n_rows:
            break
        hits = np.nonzero(a[r:, c])[0]
        if hits.size == 0:
            continue
        p = r + int(hits[0])
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.nonzero(a[:, c])[0]
        others = others[others != r]
        a[others] ^= a[r]
        pivots.append(c)
        r += 1
    free = [c for c in range(n_cols) if c not in pivots]
    if not free:
        return None
    basis = np.zeros((len(free), n_cols), dtype=np.uint8)
    for t, f in enumerate(free):
        basis[t, f] = 1
        for row, pc in enumerate(pivots):
            basis[t, pc] = a[row, f]
    return BitMatrix(basis)
