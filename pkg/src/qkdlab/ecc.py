"""Syndrome-based reconciliation with small binary linear codes.

Codes are small enough that every coset leader is found by brute force.
The leak formulas quoted by key-rate analyses live here too so they can be
compared against what a concrete code actually discloses.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import SingularityError, ValidationError
from .gf2 import BitMatrix, BitsLike, as_bits, bits_to_int, int_to_bits, nullspace_gf2, popcount, rank_gf2
from .secmetrics import JointDistribution

MAX_CODE_LENGTH = 20


class ReconcileMode(str, enum.Enum):
    OPEN = "open"
    COVERED = "covered"


@dataclass(frozen=True, eq=False)
class LinearCode:
    """An (m, k) binary linear code with a minimum-weight syndrome decoder.

    ``parity_check`` is None only for the trivial code k = m, which
    discloses nothing and corrects nothing.
    """

    name: str
    generator: Optional[BitMatrix]
    parity_check: Optional[BitMatrix]
    m: int
    k: int
    coset_leaders: np.ndarray = field(repr=False)
    _syndrome_table: np.ndarray = field(repr=False)

    @classmethod
    def from_parity_check(cls, H: BitMatrix | None, name: str = "custom", m: int | None = None) -> "LinearCode":
        if H is None:
            if m is None:
                raise ValidationError("trivial code needs an explicit length")
            return cls(name, BitMatrix.identity(m), None, m, m, np.zeros(1, dtype=np.int64), np.zeros(1 << m, dtype=np.int64))
        m = H.cols
        if m > MAX_CODE_LENGTH:
            raise ValidationError(f"code length {m} exceeds {MAX_CODE_LENGTH}")
        r = rank_gf2(H)
        if r != H.rows:
            raise ValidationError(f"parity check has rank {r} but {H.rows} rows")
        k = m - r
        G = nullspace_gf2(H)
        patterns = np.arange(1 << m, dtype=np.int64)
        syndromes = H.apply_indices(patterns)
        order = np.lexsort((patterns, popcount(patterns)))
        leaders = np.full(1 << r, -1, dtype=np.int64)
        for pat in order:
            s = syndromes[pat]
            if leaders[s] < 0:
                leaders[s] = pat
        leaders.setflags(write=False)
        syndromes.setflags(write=False)
        return cls(name, G, H, m, k, leaders, syndromes)

    @classmethod
    def trivial(cls, m: int) -> "LinearCode":
        return cls.from_parity_check(None, f"trivial-{m}", m=m)

    @property
    def redundancy(self) -> int:
        return self.m - self.k

    def syndrome(self, x: BitsLike) -> np.ndarray:
        bits = as_bits(x)
        if bits.size != self.m:
            raise ValidationError(f"word has {bits.size} bits, code length is {self.m}")
        if self.parity_check is None:
            return np.zeros(0, dtype=np.uint8)
        return self.parity_check.apply(bits)

    def syndrome_indices(self, words: np.ndarray) -> np.ndarray:
        return self._syndrome_table[np.asarray(words, dtype=np.int64)]

    def decode_error(self, syndrome: int) -> int:
        return int(self.coset_leaders[syndrome])

    def covering_radius(self) -> int:
        return int(popcount(self.coset_leaders).max())

    def residual_error_probability(self, p: float) -> float:
        """Probability that decoding leaves an error on a BSC with crossover p."""
        w = popcount(self.coset_leaders)
        return 1.0 - float(np.sum(p**w * (1.0 - p) ** (self.m - w)))


_BUILTIN_H = {
    "rep-3-1": ["110", "011"],
    "rep-5-1": ["11000", "01100", "00110", "00011"],
    "hamming-7-4": ["0001111", "0110011", "1010101"],
    "ext-hamming-8-4": ["11111111", "00011110", "01100110", "10101010"],
}
BUILTIN_CODES = tuple(_BUILTIN_H)
_RANDOM_RE = re.compile(r"^random-(\d+)-(\d+)-(\d+)$")
_TRIVIAL_RE = re.compile(r"^trivial-(\d+)$")


def random_code(m: int, k: int, seed: int) -> LinearCode:
    if not 1 <= k < m <= 10:
        raise ValidationError("random codes need 1 <= k < m <= 10")
    rng = np.random.default_rng(seed)
    while True:
        H = BitMatrix(rng.integers(0, 2, size=(m - k, m), dtype=np.uint8))
        if rank_gf2(H) == m - k:
            return LinearCode.from_parity_check(H, f"random-{m}-{k}-{seed}")


def get_code(name: str) -> LinearCode:
    """Look up a built-in code by name, e.g. 'hamming-7-4' or 'random-10-6-3'."""
    if name in _BUILTIN_H:
        return LinearCode.from_parity_check(BitMatrix.from_rows(_BUILTIN_H[name]), name)
    match = _RANDOM_RE.match(name)
    if match:
        return random_code(*(int(g) for g in match.groups()))
    match = _TRIVIAL_RE.match(name)
    if match and 1 <= int(match.group(1)) <= MAX_CODE_LENGTH:
        return LinearCode.trivial(int(match.group(1)))
    raise ValidationError(f"unknown code {name!r}")


def code_to_text(code: LinearCode) -> str:
    """Parity-check matrix in the shared 0/1 row format."""
    if code.parity_check is None:
        raise ValidationError("the trivial code has no parity-check matrix")
    return code.parity_check.to_text()


def code_from_text(text: str, name: str = "custom") -> LinearCode:
    return LinearCode.from_parity_check(BitMatrix.from_text(text), name)


@dataclass(frozen=True)
class ReconciliationResult:
    corrected_key: np.ndarray
    disclosed_bits: int
    residual_error: bool
    mode: ReconcileMode
    cover_bits_used: int
    public_syndrome: np.ndarray


def reconcile(
    alice: BitsLike,
    bob: BitsLike,
    code: LinearCode,
    mode: ReconcileMode | str = ReconcileMode.OPEN,
    cover_key: BitsLike | None = None,
) -> ReconciliationResult:
    """One-way syndrome reconciliation of Bob's word towards Alice's."""
    mode = ReconcileMode(mode)
    a, b = as_bits(alice), as_bits(bob)
    if a.size != code.m or b.size != code.m:
        raise ValidationError(f"words must have {code.m} bits, got {a.size} and {b.size}")
    s_alice = code.syndrome(a)
    public = s_alice
    if mode is ReconcileMode.COVERED:
        if cover_key is None:
            raise ValidationError("covered mode requires a cover key")
        pad = as_bits(cover_key)
        if pad.size != code.redundancy:
            raise ValidationError(f"cover key must have {code.redundancy} bits, got {pad.size}")
        public = s_alice ^ pad
        s_alice = public ^ pad
    err_syndrome = bits_to_int(s_alice ^ code.syndrome(b)) if code.redundancy else 0
    error = int_to_bits(code.decode_error(err_syndrome), code.m)
    corrected = b ^ error
    open_mode = mode is ReconcileMode.OPEN
    return ReconciliationResult(
        corrected_key=corrected,
        disclosed_bits=code.redundancy if open_mode else 0,
        residual_error=bool(np.any(corrected != a)),
        mode=mode,
        cover_bits_used=0 if open_mode else code.redundancy,
        public_syndrome=public,
    )


def binary_entropy(q: float) -> float:
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"q must lie in [0, 1], got {q}")
    if q in (0.0, 1.0):
        return 0.0
    return -q * math.log2(q) - (1.0 - q) * math.log2(1.0 - q)


def _check_leak_args(n: int, qber: float) -> None:
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if not 0.0 <= qber <= 0.5:
        raise ValidationError(f"qber must lie in [0, 1/2], got {qber}")


def leak_open(n: int, qber: float, f: float) -> float:
    """Conventional f * n * h(QBER) reconciliation leak."""
    _check_leak_args(n, qber)
    if f < 1:
        raise ValidationError(f"f must be >= 1, got {f}")
    return f * n * binary_entropy(qber)


def leak_parity(n: int, qber: float) -> float:
    """Parity bits needed at channel capacity: n * h(QBER)."""
    _check_leak_args(n, qber)
    return n * binary_entropy(qber)


def leak_covered_expanded(n: int, qber: float) -> float:
    """Cover-key cost n h / (1 - h) when all n key bits are kept as information bits."""
    _check_leak_args(n, qber)
    h = binary_entropy(qber)
    if h >= 1.0:
        raise SingularityError("h(QBER) = 1: no code rate is left to cover")
    return n * h / (1.0 - h)


def bsc_transmit(x: BitsLike, p: float, seed: int) -> np.ndarray:
    """Flip each bit independently with probability p."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"p must lie in [0, 1], got {p}")
    bits = as_bits(x)
    flips = np.random.default_rng(seed).random(bits.size) < p
    return bits ^ flips.astype(np.uint8)


def markov_transmit(
    x: BitsLike,
    p_good: float,
    p_bad: float,
    p_enter_bad: float,
    p_leave_bad: float,
    seed: int,
) -> np.ndarray:
    """Two-state (good/bad) burst channel; each state has its own flip rate."""
    for name, v in [("p_good", p_good), ("p_bad", p_bad), ("p_enter_bad", p_enter_bad), ("p_leave_bad", p_leave_bad)]:
        if not 0.0 <= v <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1], got {v}")
    bits = as_bits(x)
    rng = np.random.default_rng(seed)
    u_state = rng.random(bits.size)
    u_flip = rng.random(bits.size)
    stay = p_enter_bad + p_leave_bad
    bad = bool(u_state[0] < (p_enter_bad / stay if stay > 0 else 0.0)) if bits.size else False
    out = bits.copy()
    for i in range(bits.size):
        if i:
            bad = (u_state[i] >= p_leave_bad) if bad else (u_state[i] < p_enter_bad)
        if u_flip[i] < (p_bad if bad else p_good):
            out[i] ^= 1
    return out


def markov_mean_error(p_good: float, p_bad: float, p_enter_bad: float, p_leave_bad: float) -> float:
    stay = p_enter_bad + p_leave_bad
    frac_bad = p_enter_bad / stay if stay > 0 else 0.0
    return frac_bad * p_bad + (1.0 - frac_bad) * p_good


def block_syndromes(code: LinearCode, n_key_bits: int, keys: np.ndarray) -> np.ndarray:
    """Concatenated syndromes of the floor(n/m) leading code blocks of each key."""
    blocks = n_key_bits // code.m
    if blocks < 1:
        raise ValidationError(f"key of {n_key_bits} bits is shorter than the code ({code.m})")
    keys = np.asarray(keys, dtype=np.int64)
    mask = (1 << code.m) - 1
    out = np.zeros_like(keys)
    for b in range(blocks):
        word = (keys >> (n_key_bits - (b + 1) * code.m)) & mask
        out = (out << code.redundancy) | code.syndrome_indices(word)
    return out


def syndrome_joint(
    J: JointDistribution,
    code: LinearCode,
    mode: ReconcileMode | str = ReconcileMode.OPEN,
    cover_bias: float = 0.0,
) -> JointDistribution:
    """Append the public syndrome message to Eve's observation.

    In covered mode Eve sees the syndrome XOR a pad whose bits are 1 with
    probability 1/2 - cover_bias; a zero bias is a perfect one-time pad.
    The new Eve label is ``e * 2^r + message`` with r the total syndrome width.
    """
    mode = ReconcileMode(mode)
    if not 0.0 <= cover_bias <= 0.5:
        raise ValidationError(f"cover_bias must lie in [0, 1/2], got {cover_bias}")
    blocks = J.n_key_bits // code.m
    width = blocks * code.redundancy
    n_msgs = 1 << width
    s = block_syndromes(code, J.n_key_bits, J.key)
    if mode is ReconcileMode.OPEN:
        return JointDistribution.from_entries(
            J.n_key_bits, J.eve_symbols * n_msgs, J.key, J.eve * n_msgs + s, J.prob
        )
    msgs = np.arange(n_msgs, dtype=np.int64)
    pad = s[:, None] ^ msgs[None, :]
    ones = popcount(pad)
    q1 = 0.5 - cover_bias
    weight = q1**ones * (1.0 - q1) ** (width - ones)
    return JointDistribution.from_entries(
        J.n_key_bits,
        J.eve_symbols * n_msgs,
        np.repeat(J.key, n_msgs),
        (J.eve[:, None] * n_msgs + msgs[None, :]).ravel(),
        (J.prob[:, None] * weight).ravel(),
    )


def mix_joints(
    joints: Sequence[JointDistribution],
    priors: Sequence[float],
    reveal_index: bool,
) -> JointDistribution:
    """Prior-weighted mixture; optionally tag Eve's symbol with the component index."""
    if len(joints) != len(priors) or not joints:
        raise ValidationError("need one prior per component")
    priors = np.asarray(priors, dtype=np.float64)
    if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-12:
        raise ValidationError("priors must be non-negative and sum to 1")
    n_bits = joints[0].n_key_bits
    if any(j.n_key_bits != n_bits for j in joints):
        raise ValidationError("all components must share the key length")
    width = max(j.eve_symbols for j in joints)
    keys, eves, probs = [], [], []
    for idx, (j, w) in enumerate(zip(joints, priors)):
        keys.append(j.key)
        eves.append(j.eve + (idx * width if reveal_index else 0))
        probs.append(j.prob * w)
    symbols = width * len(joints) if reveal_index else width
    return JointDistribution.from_entries(
        n_bits, symbols, np.concatenate(keys), np.concatenate(eves), np.concatenate(probs)
    )


def eve_mixture(
    J: JointDistribution,
    codes: Sequence[LinearCode],
    priors: Sequence[float],
    *,
    reveal_index: bool = True,
    mode: ReconcileMode | str = ReconcileMode.OPEN,
    cover_bias: float = 0.0,
) -> JointDistribution:
    """Eve's view when the code is drawn from ``codes`` with the given priors."""
    if len(codes) != len(priors):
        raise ValidationError("need one prior per code")
    return mix_joints([syndrome_joint(J, c, mode, cover_bias) for c in codes], priors, reveal_index)
