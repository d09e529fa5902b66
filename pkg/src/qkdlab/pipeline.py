"""Sift, test, reconcile and amplify one protocol round, with key-rate accounting."""
from __future__ import annotations

import dataclasses
import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .adversary import (
    AttackKind,
    AttackModel,
    PipelineTrace,
    Stage,
    condition_on_hash,
    condition_on_syndrome,
    eve_joint,
    truncate_key,
)
from .ecc import ReconcileMode, bsc_transmit, get_code, leak_open, markov_transmit, reconcile
from .errors import CapacityError, ValidationError
from .gf2 import BitMatrix, bits_to_str
from .hashing import (
    DegeneracyPolicy,
    FamilyKind,
    HashFamily,
    draw_member,
    is_degenerate,
    lhl_key_length,
    lhl_min_distance,
    seed_to_hex,
)
from .secmetrics import min_entropy, pguess

# Conventions, not derived values; reports label them as such.
DEFAULT_QBER_THRESHOLD = 0.11
DEFAULT_AUTH_COST_BITS = 32
ORACLE_MAX_BITS = 12


class HashKind(str, enum.Enum):
    TOEPLITZ = "toeplitz"
    FULL_RANDOM = "full_random"
    PARITY = "parity"


class Channel(str, enum.Enum):
    BSC = "bsc"
    MARKOV = "markov"


@dataclass(frozen=True)
class ProtocolConfig:
    """Everything that determines a protocol run; identical configs give identical runs.

    ``n_sifted`` is the length of K''; test bits are drawn on top of it so
    that they make up ``test_fraction`` of all sifted signals.
    """

    n_sifted: int = 8
    qber_threshold: float = DEFAULT_QBER_THRESHOLD
    test_fraction: float = 0.5
    attack: AttackModel = field(default_factory=AttackModel)
    code_name: str = "hamming-7-4"
    ecc_mode: ReconcileMode = ReconcileMode.OPEN
    f_factor: float = 1.1
    d_target: float = 0.25
    auth_cost_bits: int = DEFAULT_AUTH_COST_BITS
    seed: int = 0
    oracle: bool = True
    l_bound: Optional[float] = None
    hash_kind: HashKind = HashKind.TOEPLITZ
    degeneracy_policy: DegeneracyPolicy = DegeneracyPolicy.KEEP
    channel: Channel = Channel.BSC
    channel_qber: float = 0.0
    markov_p_bad: float = 0.5
    markov_p_enter: float = 0.01
    markov_p_leave: float = 0.2
    cover_bias: float = 0.0
    lhl_log_factor: float = 2.0
    lhl_half_prefactor: bool = False

    def __post_init__(self) -> None:
        for name, cls in [
            ("ecc_mode", ReconcileMode),
            ("hash_kind", HashKind),
            ("degeneracy_policy", DegeneracyPolicy),
            ("channel", Channel),
        ]:
            try:
                object.__setattr__(self, name, cls(getattr(self, name)))
            except ValueError as exc:
                raise ValidationError(f"bad {name}: {exc}") from None
        if isinstance(self.attack, dict):
            object.__setattr__(self, "attack", AttackModel(**self.attack))
        if self.n_sifted < 1:
            raise ValidationError("n_sifted must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValidationError("test_fraction must lie in (0, 1)")
        if not 0.0 <= self.qber_threshold <= 0.5:
            raise ValidationError("qber_threshold must lie in [0, 1/2]")
        if not 0.0 < self.d_target <= 1.0:
            raise ValidationError("d_target must lie in (0, 1]")
        if self.f_factor < 1.0:
            raise ValidationError("f_factor must be >= 1")
        if self.auth_cost_bits < 0:
            raise ValidationError("auth_cost_bits must be >= 0")
        if not 0.0 <= self.channel_qber <= 0.5:
            raise ValidationError("channel_qber must lie in [0, 1/2]")
        if not self.oracle and self.l_bound is None:
            raise ValidationError("l_bound is required when oracle mode is off")
        if self.l_bound is not None and self.l_bound < 0:
            raise ValidationError("l_bound must be >= 0")
        get_code(self.code_name)

    def replace(self, **changes) -> "ProtocolConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class KeyRateReport:
    n_sifted: int
    d_target: float
    channel_qber: float
    measured_qber: float
    aborted: bool
    key_bits_corrected: int
    disclosed_bits: int
    cover_bits_used: int
    residual_block_errors: int
    l_assumed: float
    out_bits: int
    hash_degenerate: bool
    leak_ec: float
    net_bits: float
    d_floor: float
    oracle_pguess_chain: Optional[tuple[float, float, float]]
    l_oracle_sifted: Optional[float]
    l_oracle_corrected: Optional[float]
    l_oracle_final: Optional[float]
    entropy_assumption_violated: Optional[bool]
    qber_threshold: float
    auth_cost_bits: int


def net_key(out_bits: float, leak_ec: float, auth_cost: float) -> float:
    """Net key after reconciliation leak and authentication cost; may be negative."""
    if out_bits < 0 or leak_ec < 0 or auth_cost < 0:
        raise ValidationError("net_key inputs must be non-negative")
    return out_bits - leak_ec - auth_cost


def asymptotic_p1(lam: float, n: int, g_of_n: float) -> float:
    """Guessing probability 2^(-lam*n + g(n))."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam}")
    if n < 1:
        raise ValidationError("n must be >= 1")
    exponent = -lam * n + g_of_n
    if exponent > 0:
        raise ValidationError(f"2^({exponent}) exceeds probability 1")
    return 2.0**exponent


def is_perfect(lam: float, g_of_n: float) -> bool:
    """A key is perfect only at the uniform level 2^-n, i.e. lambda = 1 and g = 0."""
    return lam == 1.0 and g_of_n == 0.0


def _test_count(cfg: ProtocolConfig) -> int:
    return max(1, math.ceil(cfg.n_sifted * cfg.test_fraction / (1.0 - cfg.test_fraction)))


def _transmit(cfg: ProtocolConfig, rng: np.random.Generator, n_total: int):
    alice = rng.integers(0, 2, size=n_total, dtype=np.uint8)
    bob = alice.copy()
    attack = cfg.attack
    # Attack draws are taken unconditionally so the stream does not depend on the attack kind.
    intercepted = rng.random(n_total) < (attack.q if attack.kind is AttackKind.INTERCEPT_RESEND else 0.0)
    matched = rng.random(n_total) < 0.5
    resend_flip = rng.random(n_total) < 0.5
    bob ^= (intercepted & ~matched & resend_flip).astype(np.uint8)
    channel_seed = int(rng.integers(0, 2**32))
    if cfg.channel is Channel.BSC:
        bob = bsc_transmit(bob, cfg.channel_qber, channel_seed)
    else:
        bob = markov_transmit(
            bob, cfg.channel_qber, cfg.markov_p_bad, cfg.markov_p_enter, cfg.markov_p_leave, channel_seed
        )
    return alice, bob


def _pad(rng: np.random.Generator, width: int, bias: float) -> np.ndarray:
    return (rng.random(width) < 0.5 - bias).astype(np.uint8)


def run_protocol(cfg: ProtocolConfig) -> tuple[PipelineTrace, KeyRateReport]:
    """One deterministic protocol round: test, reconcile, amplify, account."""
    if cfg.oracle and cfg.n_sifted > ORACLE_MAX_BITS:
        raise CapacityError(f"oracle mode supports at most {ORACLE_MAX_BITS} sifted bits")
    code = get_code(cfg.code_name)
    blocks = cfg.n_sifted // code.m
    if blocks < 1:
        raise ValidationError(f"{cfg.code_name} needs at least {code.m} sifted bits")
    rng = np.random.default_rng(cfg.seed)
    n_test = _test_count(cfg)
    n_total = cfg.n_sifted + n_test
    alice_raw, bob_raw = _transmit(cfg, rng, n_total)
    perm = rng.permutation(n_total)
    test_pos, key_pos = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    measured_qber = float(np.mean(alice_raw[test_pos] != bob_raw[test_pos]))
    aborted = measured_qber > cfg.qber_threshold
    sifted_alice, sifted_bob = alice_raw[key_pos], bob_raw[key_pos]

    transcript: list[dict] = [{"type": "qber_test", "positions": int(n_test), "errors": int(round(measured_qber * n_test))}]
    J_sifted = eve_joint(cfg.attack, cfg.n_sifted) if cfg.oracle else None
    l_oracle_sifted = min_entropy(J_sifted) if J_sifted is not None else None
    l_assumed = l_oracle_sifted if cfg.oracle else float(cfg.l_bound)
    d_floor = lhl_min_distance(l_assumed, 0, log_factor=cfg.lhl_log_factor, half_prefactor=cfg.lhl_half_prefactor)

    if aborted:
        trace = PipelineTrace(Stage(sifted_alice, J_sifted), Stage(None, None), Stage(None, None), transcript)
        report = KeyRateReport(
            cfg.n_sifted, cfg.d_target, cfg.channel_qber, measured_qber, True, 0, 0, 0, 0,
            l_assumed, 0, False, 0.0, net_key(0, 0.0, cfg.auth_cost_bits), d_floor,
            None, l_oracle_sifted, None, None, None, cfg.qber_threshold, cfg.auth_cost_bits,
        )
        return trace, report

    corrected_parts, residual = [], 0
    disclosed = cover_used = 0
    for b in range(blocks):
        sl = slice(b * code.m, (b + 1) * code.m)
        cover = _pad(rng, code.redundancy, cfg.cover_bias) if cfg.ecc_mode is ReconcileMode.COVERED else None
        res = reconcile(sifted_alice[sl], sifted_bob[sl], code, cfg.ecc_mode, cover)
        corrected_parts.append(res.corrected_key)
        residual += int(res.residual_error)
        disclosed += res.disclosed_bits
        cover_used += res.cover_bits_used
        transcript.append({"type": "syndrome", "block": b, "mode": cfg.ecc_mode.value, "message": bits_to_str(res.public_syndrome)})
    corrected_bob = np.concatenate(corrected_parts)
    corrected_alice = sifted_alice[: blocks * code.m]
    n_corr = corrected_alice.size

    leak_ec = leak_open(cfg.n_sifted, min(measured_qber, 0.5), cfg.f_factor)
    out_bits = min(
        lhl_key_length(l_assumed, cfg.d_target, log_factor=cfg.lhl_log_factor, half_prefactor=cfg.lhl_half_prefactor),
        n_corr,
    )
    if cfg.hash_kind is HashKind.PARITY:
        out_bits = min(out_bits, 1)

    M: Optional[BitMatrix] = None
    degenerate = False
    final_key = None
    if out_bits >= 1:
        if cfg.hash_kind is HashKind.PARITY:
            M = BitMatrix(np.ones((1, n_corr), dtype=np.uint8))
            transcript.append({"type": "hash", "kind": "parity", "in_bits": n_corr, "out_bits": 1})
        else:
            family = HashFamily(FamilyKind(cfg.hash_kind.value), n_corr, out_bits)
            draw = draw_member(family, rng, cfg.degeneracy_policy)
            M = draw.matrix
            transcript.append({
                "type": "hash", "kind": family.kind.value, "in_bits": n_corr, "out_bits": out_bits,
                "seed": seed_to_hex(draw.seed, family.seed_bits),
            })
        degenerate = is_degenerate(M)
        final_key = M.apply(corrected_alice)

    chain = None
    J_corr = J_final = None
    l_corr = l_final = None
    entropy_assumption_violated = None
    if cfg.oracle:
        J_corr = truncate_key(condition_on_syndrome(J_sifted, code, cfg.ecc_mode, cfg.cover_bias), n_corr)
        l_corr = min_entropy(J_corr)
        if M is not None:
            J_final = condition_on_hash(J_corr, M)
            p_final = pguess(J_final)
        else:
            p_final = 1.0  # an empty key is guessed with certainty
        l_final = -math.log2(p_final)
        chain = (pguess(J_sifted), pguess(J_corr), p_final)
        entropy_assumption_violated = l_assumed > l_corr + 1e-9

    trace = PipelineTrace(
        Stage(sifted_alice, J_sifted),
        Stage(corrected_bob, J_corr),
        Stage(final_key, J_final),
        transcript,
    )
    report = KeyRateReport(
        cfg.n_sifted, cfg.d_target, cfg.channel_qber, measured_qber, False, n_corr, disclosed, cover_used,
        residual, l_assumed, out_bits, degenerate, leak_ec, net_key(out_bits, leak_ec, cfg.auth_cost_bits),
        d_floor, chain, l_oracle_sifted, l_corr, l_final, entropy_assumption_violated, cfg.qber_threshold, cfg.auth_cost_bits,
    )
    return trace, report


def sweep_tradeoff(
    base: ProtocolConfig,
    d_grid: Sequence[float],
    qber_grid: Sequence[float],
    threads: int = 1,
) -> list[KeyRateReport]:
    """One report per (d_target, channel_qber) point, d-major order."""
    if not d_grid or not qber_grid:
        raise ValidationError("sweep grids must be non-empty")
    points = [base.replace(d_target=float(d), channel_qber=float(q)) for d in d_grid for q in qber_grid]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return [r for _, r in pool.map(run_protocol, points)]
    return [run_protocol(p)[1] for p in points]
