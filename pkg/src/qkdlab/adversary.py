"""Exact eavesdropper models and the stage-by-stage guessing-probability oracle."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ecc import LinearCode, ReconcileMode, syndrome_joint
from .errors import ChainViolationError, IncompleteTraceError, ValidationError
from .gf2 import BitMatrix
from .hashing import hash_joint
from .secmetrics import JointDistribution, know_all_with_prob, pguess, uniform

CHAIN_TOL = 1e-12

# Eve's per-bit symbols under intercept-resend.
NULL, SAW_0, SAW_1, NULL_MISMATCH = 0, 1, 2, 3


class AttackKind(str, enum.Enum):
    NONE = "none"
    INTERCEPT_RESEND = "intercept_resend"
    KNOW_ALL_WITH_PROB = "know_all_with_prob"


@dataclass(frozen=True)
class AttackModel:
    kind: AttackKind = AttackKind.NONE
    q: float = 0.0
    delta: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AttackKind(self.kind))
        if not 0.0 <= self.q <= 1.0:
            raise ValidationError(f"intercept fraction q must lie in [0, 1], got {self.q}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValidationError(f"know probability delta must lie in [0, 1], got {self.delta}")

    @property
    def qber(self) -> float:
        """Disturbance the attack adds to the sifted key."""
        if self.kind is AttackKind.INTERCEPT_RESEND:
            return intercept_resend_qber(self.q)
        return 0.0

    @property
    def bit_guess_prob(self) -> float:
        if self.kind is AttackKind.INTERCEPT_RESEND:
            return 0.5 + self.q / 4.0
        return 0.5


def intercept_resend_bit_table(q: float, split_null: bool = True) -> np.ndarray:
    """P(alice_bit, eve_symbol, bob_flipped) for one sifted bit.

    Matched basis (prob q/2): Eve reads the bit and Bob is undisturbed.
    Mismatched basis (prob q/2): Eve learns nothing and Bob's bit flips
    with probability 1/2. With ``split_null=False`` the two blind symbols
    share label NULL.
    """
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"q must lie in [0, 1], got {q}")
    t = np.zeros((2, 4 if split_null else 3, 2))
    blind = NULL_MISMATCH if split_null else NULL
    for x in (0, 1):
        t[x, NULL, 0] += 0.5 * (1.0 - q)
        t[x, SAW_1 if x else SAW_0, 0] += 0.5 * q / 2.0
        t[x, blind, 0] += 0.5 * q / 4.0
        t[x, blind, 1] += 0.5 * q / 4.0
    return t


def intercept_resend_qber(q: float) -> float:
    return float(intercept_resend_bit_table(q)[:, :, 1].sum())


def build_intercept_resend(n: int, q: float, split_null: bool = False) -> JointDistribution:
    """Eve's exact joint view of an n-bit sifted key under per-bit intercept-resend.

    By default the matched-but-unintercepted and mismatched blind outcomes
    are merged: both leave the key bit uniform, so every metric is unchanged
    and the Eve axis shrinks from 4^n to 3^n.
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    bit = JointDistribution.from_table(intercept_resend_bit_table(q, split_null).sum(axis=2))
    J = bit
    for _ in range(n - 1):
        J = J.product(bit)
    return J


def eve_joint(attack: AttackModel, n: int) -> JointDistribution:
    if attack.kind is AttackKind.INTERCEPT_RESEND:
        return build_intercept_resend(n, attack.q)
    if attack.kind is AttackKind.KNOW_ALL_WITH_PROB:
        return know_all_with_prob(n, attack.delta)
    return uniform(n)


def condition_on_syndrome(
    J: JointDistribution,
    code: LinearCode,
    mode: ReconcileMode | str = ReconcileMode.OPEN,
    cover_bias: float = 0.0,
) -> JointDistribution:
    """Eve's view after the reconciliation message for every full code block."""
    if J.n_key_bits < code.m:
        raise ValidationError(f"key of {J.n_key_bits} bits is shorter than code length {code.m}")
    return syndrome_joint(J, code, mode, cover_bias)


def condition_on_hash(J: JointDistribution, M: BitMatrix) -> JointDistribution:
    """Eve's view of the compressed key; the matrix itself is public."""
    return hash_joint(J, M)


def truncate_key(J: JointDistribution, n_bits: int) -> JointDistribution:
    """Keep the leading n_bits of the key (trailing bits left uncorrected are dropped)."""
    if not 1 <= n_bits <= J.n_key_bits:
        raise ValidationError(f"cannot keep {n_bits} of {J.n_key_bits} bits")
    if n_bits == J.n_key_bits:
        return J
    return J.map_key(np.arange(J.n_keys) >> (J.n_key_bits - n_bits), n_bits)


@dataclass(frozen=True)
class Stage:
    key: Optional[np.ndarray]
    joint: Optional[JointDistribution]


@dataclass(frozen=True)
class PipelineTrace:
    sifted: Stage
    corrected: Stage
    amplified: Stage
    public_transcript: list = field(default_factory=list)

    def stages(self) -> dict[str, Stage]:
        return {"sifted": self.sifted, "corrected": self.corrected, "amplified": self.amplified}


@dataclass(frozen=True)
class ChainReport:
    pguess: tuple[float, float, float]
    min_entropy: tuple[float, float, float]
    exponent_drop: tuple[float, float]
    holds: bool

    @property
    def exponent_gap(self) -> float:
        """How far the corrected key's exponent falls below the sifted key's."""
        return self.exponent_drop[0]


def verify_chain(trace: PipelineTrace, strict: bool = False) -> ChainReport:
    """Check that Eve's guessing probability never drops from K'' to K' to K."""
    joints = [s.joint for s in (trace.sifted, trace.corrected, trace.amplified)]
    missing = [name for name, j in zip(("sifted", "corrected", "amplified"), joints) if j is None]
    if missing:
        raise IncompleteTraceError(f"trace lacks oracle joints for: {', '.join(missing)}")
    pg = tuple(pguess(j) for j in joints)
    ent = tuple(-math.log2(p) for p in pg)
    holds = pg[0] <= pg[1] + CHAIN_TOL and pg[1] <= pg[2] + CHAIN_TOL
    if strict and not holds:
        raise ChainViolationError(f"guessing probability decreased along the pipeline: {pg}")
    return ChainReport(pg, ent, (ent[0] - ent[1], ent[1] - ent[2]), holds)


def exhaustive_trace(
    J: JointDistribution,
    code: LinearCode,
    M: BitMatrix,
    mode: ReconcileMode | str = ReconcileMode.OPEN,
    cover_bias: float = 0.0,
) -> PipelineTrace:
    """Oracle-only trace: syndrome disclosure, block truncation, then hashing."""
    corrected = truncate_key(
        condition_on_syndrome(J, code, mode, cover_bias), (J.n_key_bits // code.m) * code.m
    )
    amplified = condition_on_hash(corrected, M)
    return PipelineTrace(Stage(None, J), Stage(None, corrected), Stage(None, amplified))
