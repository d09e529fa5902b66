"""Linear universal hashing over GF(2) for privacy amplification.

Toeplitz seeds are read most-significant bit first: the first ``in_bits``
bits give the first row left to right, the remaining ``out_bits - 1``
give the first column top to bottom (below the shared corner). Full
random seeds are the matrix in row-major order.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np
import scipy.linalg

from .errors import CapacityError, ValidationError
from .gf2 import BitMatrix, BitsLike, batch_rank, int_to_bits, rank_gf2
from .secmetrics import JointDistribution, pguess, stat_distance

EXHAUSTIVE_SEED_BITS = 24
_CHUNK = 1 << 18


class FamilyKind(str, enum.Enum):
    TOEPLITZ = "toeplitz"
    FULL_RANDOM = "full_random"


class DegeneracyPolicy(str, enum.Enum):
    KEEP = "keep"
    RESAMPLE = "resample"
    REJECT = "reject"


@dataclass(frozen=True)
class HashFamily:
    kind: FamilyKind
    in_bits: int
    out_bits: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        if self.out_bits < 1 or self.in_bits < 1:
            raise ValidationError("hash families need in_bits >= 1 and out_bits >= 1")
        if self.out_bits > self.in_bits:
            raise ValidationError("a compressor cannot have more output than input bits")

    @property
    def seed_bits(self) -> int:
        if self.kind is FamilyKind.TOEPLITZ:
            return self.in_bits + self.out_bits - 1
        return self.in_bits * self.out_bits

    @property
    def size(self) -> int:
        return 1 << self.seed_bits

    def member_row_ints(self, seeds) -> np.ndarray:
        """Packed rows, shape (len(seeds), out_bits), for an array of seeds."""
        if self.in_bits > 63 or self.seed_bits > 64:
            raise CapacityError("packed member rows need in_bits <= 63 and seed_bits <= 64")
        s = np.asarray(seeds, dtype=np.uint64).ravel()
        m, k, sb = self.in_bits, self.out_bits, self.seed_bits
        rows = np.zeros((s.size, k), dtype=np.uint64)
        if self.kind is FamilyKind.FULL_RANDOM:
            mask = np.uint64((1 << m) - 1)
            for i in range(k):
                rows[:, i] = (s >> np.uint64((k - 1 - i) * m)) & mask
            return rows

        def seed_bit(pos: int) -> np.ndarray:
            return (s >> np.uint64(sb - 1 - pos)) & np.uint64(1)

        for i in range(k):
            for j in range(m):
                delta = j - i
                pos = delta if delta >= 0 else m - 1 - delta
                rows[:, i] |= seed_bit(pos) << np.uint64(m - 1 - j)
        return rows

    def member(self, seed: int) -> BitMatrix:
        if not 0 <= seed < self.size:
            raise ValidationError(f"seed {seed} outside family of size 2^{self.seed_bits}")
        bits = int_to_bits(seed, self.seed_bits)
        m, k = self.in_bits, self.out_bits
        if self.kind is FamilyKind.FULL_RANDOM:
            return BitMatrix(bits.reshape(k, m))
        first_col = np.concatenate([bits[:1], bits[m:]])
        return BitMatrix(scipy.linalg.toeplitz(first_col, bits[:m]))

    def members(self) -> Iterator[BitMatrix]:
        self._require_exhaustive()
        for seed in range(self.size):
            yield self.member(seed)

    def _require_exhaustive(self) -> None:
        if self.seed_bits > EXHAUSTIVE_SEED_BITS:
            raise CapacityError(
                f"family has 2^{self.seed_bits} members; exhaustive limit is 2^{EXHAUSTIVE_SEED_BITS}"
            )


def toeplitz(seed: int, in_bits: int, out_bits: int) -> BitMatrix:
    return HashFamily(FamilyKind.TOEPLITZ, in_bits, out_bits).member(seed)


def seed_to_hex(seed: int, seed_bits: int) -> str:
    return format(seed, "0{}x".format(max(1, math.ceil(seed_bits / 4))))


def seed_from_hex(text: str) -> int:
    return int(text, 16)


def apply_hash(M: BitMatrix, x: BitsLike) -> np.ndarray:
    """Compress ``x`` to ``M x`` over GF(2)."""
    return M.apply(x)


def is_degenerate(M: BitMatrix) -> bool:
    return rank_gf2(M) < M.rows


def degenerate_fraction(family: HashFamily) -> float:
    """Exact fraction of family members with rank below out_bits."""
    family._require_exhaustive()
    bad = 0
    for start in range(0, family.size, _CHUNK):
        seeds = np.arange(start, min(start + _CHUNK, family.size), dtype=np.uint64)
        ranks = batch_rank(family.member_row_ints(seeds), family.in_bits)
        bad += int(np.count_nonzero(ranks < family.out_bits))
    return bad / family.size


def sampled_degenerate_fraction(family: HashFamily, n_samples: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo estimate of the degenerate fraction and its standard error."""
    if family.seed_bits > 63:
        raise CapacityError("sampling supports seeds of at most 63 bits")
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, family.size, size=n_samples, dtype=np.uint64)
    ranks = batch_rank(family.member_row_ints(seeds), family.in_bits)
    frac = float(np.mean(ranks < family.out_bits))
    return frac, math.sqrt(frac * (1.0 - frac) / n_samples)


@dataclass(frozen=True)
class HashDraw:
    matrix: BitMatrix
    seed: int
    degenerate: bool
    attempts: int


def draw_member(
    family: HashFamily,
    rng: np.random.Generator,
    policy: DegeneracyPolicy | str = DegeneracyPolicy.KEEP,
    max_attempts: int = 64,
) -> HashDraw:
    """Pick a random family member; degenerate members are always flagged."""
    policy = DegeneracyPolicy(policy)
    for attempt in range(1, max_attempts + 1):
        n_bytes = (family.seed_bits + 7) // 8
        seed = int.from_bytes(rng.bytes(n_bytes), "big") >> (8 * n_bytes - family.seed_bits)
        M = family.member(seed)
        degenerate = is_degenerate(M)
        if not degenerate or policy is DegeneracyPolicy.KEEP:
            return HashDraw(M, seed, degenerate, attempt)
        if policy is DegeneracyPolicy.REJECT:
            raise ValidationError(f"drew degenerate hash matrix (seed {seed:#x}) under reject policy")
    raise ValidationError(f"no full-rank member found in {max_attempts} attempts")


def collision_fraction(family: HashFamily, x: int, y: int) -> float:
    """Fraction of members with M x = M y, by exhaustive scan."""
    family._require_exhaustive()
    diff = np.uint64(x ^ y)
    hits = 0
    for start in range(0, family.size, _CHUNK):
        seeds = np.arange(start, min(start + _CHUNK, family.size), dtype=np.uint64)
        rows = family.member_row_ints(seeds)
        parity = np.bitwise_count(rows & diff) & 1
        hits += int(np.count_nonzero(~parity.any(axis=1)))
    return hits / family.size


def hash_joint(J: JointDistribution, M: BitMatrix) -> JointDistribution:
    """Replace the key by M x; Eve's observation is unchanged."""
    if M.cols != J.n_key_bits:
        raise ValidationError(f"matrix takes {M.cols} bits but key has {J.n_key_bits}")
    return J.map_key(M.apply_indices(np.arange(J.n_keys)), M.rows)


def _hashed_stat_distance(J: JointDistribution, outputs: np.ndarray, out_bits: int) -> float:
    # Dense (2^out, observed-eve) sums; avoids re-validating a new distribution per member.
    labels, inverse = J._eve_groups
    n_out = 1 << out_bits
    cells = outputs[J.key] * labels.size + inverse
    table = np.bincount(cells, weights=J.prob, minlength=n_out * labels.size).reshape(n_out, labels.size)
    p_e = table.sum(axis=0)
    return 0.5 * float(np.abs(table - p_e / n_out).sum())


def avg_stat_distance(family: HashFamily, J: JointDistribution) -> float:
    """Exact member-averaged distance of (M x, E, M) from (U, E, M)."""
    if family.in_bits != J.n_key_bits:
        raise ValidationError("family input length must equal the key length")
    family._require_exhaustive()
    keys = np.arange(J.n_keys, dtype=np.uint64)
    total = 0.0
    for start in range(0, family.size, _CHUNK):
        seeds = np.arange(start, min(start + _CHUNK, family.size), dtype=np.uint64)
        rows = family.member_row_ints(seeds)
        for member_rows in rows:
            out = np.zeros(J.n_keys, dtype=np.int64)
            for r in member_rows:
                out = (out << 1) | (np.bitwise_count(keys & r).astype(np.int64) & 1)
            total += _hashed_stat_distance(J, out, family.out_bits)
    return total / family.size


def lhl_key_length(
    l_bits: float,
    d_target: float,
    *,
    log_factor: float = 2.0,
    half_prefactor: bool = False,
) -> int:
    """Guaranteed extractable length floor(l - 2 log2(1/d)), clamped at 0.

    ``log_factor=1`` gives the single-log reading of the tradeoff;
    ``half_prefactor`` uses the sharper d <= (1/2) 2^(-(l-|K|)/2) form.
    """
    if l_bits < 0:
        raise ValidationError(f"l_bits must be >= 0, got {l_bits}")
    if not 0.0 < d_target <= 1.0:
        raise ValidationError(f"d_target must lie in (0, 1], got {d_target}")
    length = l_bits - log_factor * math.log2(1.0 / d_target)
    if half_prefactor:
        length += log_factor
    # 1e-9 absorbs float noise when l - 2 log2(1/d) is an exact integer.
    return max(0, math.floor(length + 1e-9))


def lhl_required_exponent(
    out_bits: float,
    d_target: float,
    *,
    log_factor: float = 2.0,
    half_prefactor: bool = False,
) -> float:
    """Smallest input exponent that yields ``out_bits`` at level ``d_target``."""
    if not 0.0 < d_target <= 1.0:
        raise ValidationError(f"d_target must lie in (0, 1], got {d_target}")
    need = out_bits + log_factor * math.log2(1.0 / d_target)
    return need - log_factor if half_prefactor else need


def lhl_min_distance(
    l_bits: float,
    out_bits: int,
    *,
    log_factor: float = 2.0,
    half_prefactor: bool = False,
) -> float:
    """Smallest distance consistent with the tradeoff: 2^(-(l - out)/2)."""
    if out_bits < 0:
        raise ValidationError("out_bits must be >= 0")
    if l_bits < out_bits:
        raise ValidationError(f"l_bits={l_bits} is below out_bits={out_bits}")
    d = 2.0 ** (-(l_bits - out_bits) / log_factor)
    return d / 2.0 if half_prefactor else d


def lhl_bound(h_min: float, out_bits: int, *, log_factor: float = 2.0, half_prefactor: bool = False) -> float:
    """Distance guaranteed after hashing a source of min-entropy ``h_min``."""
    d = 2.0 ** (-(h_min - out_bits) / log_factor)
    return d / 2.0 if half_prefactor else d


def smoothed_key_length(l_bits: float, d_target: float, delta_l: float, eps: float, **kw) -> int:
    """Key length when a smoothing step trades eps of distance for delta_l of exponent."""
    if delta_l < 0 or eps < 0:
        raise ValidationError("smoothing shifts must be non-negative")
    if d_target - eps <= 0:
        return 0
    return lhl_key_length(l_bits + delta_l, d_target - eps, **kw)


def parity_error_prob(m: int, p: float) -> float:
    """Eve's error on the XOR of m bits she knows independently with error p."""
    if m < 1:
        raise ValidationError(f"m must be >= 1, got {m}")
    if not 0.0 <= p <= 0.5:
        raise ValidationError(f"p must lie in [0, 1/2], got {p}")
    return 0.5 - (1.0 - 2.0 * p) ** m / 2.0


def markov_individual_bound(avg_value: float, t: float) -> float:
    """Level exceeded with probability at most 1/t, given an average of ``avg_value``."""
    if avg_value < 0:
        raise ValidationError("avg_value must be >= 0")
    if t <= 1:
        raise ValidationError("t must exceed 1")
    return t * avg_value


def hashed_pguess(J: JointDistribution, M: BitMatrix) -> float:
    return pguess(hash_joint(J, M))


def hashed_stat_distance(J: JointDistribution, M: BitMatrix) -> float:
    return stat_distance(hash_joint(J, M))
