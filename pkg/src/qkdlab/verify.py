"""Invariant suites behind ``qkdlab verify``.

Each group returns a :class:`GroupResult`. Faults are deliberate,
documented mis-implementations that let the suite prove it can fail:

    lhl-drop-factor-2       LHL bound checked with the single-log exponent
    extremal-spread            extremal builder spreads d over N instead of N-1 keys
    oracle-drops-eve-view   final chain stage forgets Eve's observation
    parity-formula          mod-2-sum formula uses exponent m + 1
    toeplitz-short-seed     Toeplitz first column pinned to zero
    decoder-no-correction   syndrome decoder never flips a bit
"""
from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

from .adversary import (
    PipelineTrace,
    Stage,
    build_intercept_resend,
    condition_on_hash,
    condition_on_syndrome,
    truncate_key,
    verify_chain,
)
from .ecc import (
    BUILTIN_CODES,
    LinearCode,
    ReconcileMode,
    binary_entropy,
    get_code,
    leak_covered_expanded,
    leak_open,
    leak_parity,
    reconcile,
)
from .gf2 import BitMatrix, int_to_bits, popcount, rank_gf2
from .hashing import (
    FamilyKind,
    HashFamily,
    avg_stat_distance,
    collision_fraction,
    lhl_bound,
    lhl_required_exponent,
    markov_individual_bound,
    parity_error_prob,
)
from .secmetrics import (
    JointDistribution,
    make_eq1_extremal,
    make_iac_counterexample,
    min_entropy,
    mutual_info,
    pguess,
    stat_distance,
    uniform,
)

FAULTS = (
    "lhl-drop-factor-2",
    "extremal-spread",
    "oracle-drops-eve-view",
    "parity-formula",
    "toeplitz-short-seed",
    "decoder-no-correction",
)


@dataclass
class GroupResult:
    name: str
    checked: int = 0
    failures: list[str] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def check(self, ok: bool, instance: str) -> None:
        self.checked += 1
        if not ok:
            self.failures.append(instance)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        text = f"{status} {self.name}: {self.checked - len(self.failures)}/{self.checked} ok ({self.seconds:.2f}s)"
        if self.failures:
            text += f"; first failure: {self.failures[0]}"
        return text


def parity_error_oracle(m: int, p: float) -> float:
    """Probability of odd total error weight, summed over all 2^m patterns."""
    patterns = np.arange(1 << m, dtype=np.int64)
    w = popcount(patterns)
    weights = p**w * (1.0 - p) ** (m - w)
    return float(weights[(w & 1) == 1].sum())


def flat_subset_source(n: int, h: int, n_eve: int, seed: int) -> JointDistribution:
    """Per Eve symbol, a key uniform on a pseudo-random 2^h-subset."""
    rng = np.random.default_rng(seed)
    size = 1 << h
    keys = np.concatenate([rng.choice(1 << n, size, replace=False) for _ in range(n_eve)])
    eves = np.repeat(np.arange(n_eve), size)
    return JointDistribution.from_entries(n, n_eve, keys, eves, np.full(keys.size, 1.0 / (size * n_eve)))


def lhl_sources(n: int, with_flat: bool = True) -> dict[str, JointDistribution]:
    sources = {"uniform": uniform(n)}
    for d in (0.05, 0.2):
        if d <= 1 - 2.0**-n:
            sources[f"eq1(d={d})"] = make_eq1_extremal(n, d)
    for lam in (0.25, 0.5, 1.0):
        sources[f"iac(lambda={lam})"] = make_iac_counterexample(n, lam)
    if with_flat:
        for h in range(max(1, n - 2), n):
            sources[f"flat(h={h})"] = flat_subset_source(n, h, 16, seed=n * 100 + h)
    return sources


def chain_instances(max_bits: int = 8) -> Iterator[tuple[str, PipelineTrace]]:
    """Exhaustive traces over attacks, codes, modes and hash members."""
    rng = np.random.default_rng(2024)
    for code_name in ("rep-3-1", "hamming-7-4"):
        code = get_code(code_name)
        for n in range(code.m, max_bits + 1):
            n_corr = (n // code.m) * code.m
            hashes = [("parity", BitMatrix(np.ones((1, n_corr), dtype=np.uint8)))]
            for out in range(1, min(3, n_corr) + 1):
                fam = HashFamily(FamilyKind.TOEPLITZ, n_corr, out)
                seed = int(rng.integers(0, fam.size))
                hashes.append((f"toeplitz{out}:{seed}", fam.member(seed)))
            for q in (0.0, 0.25, 0.5, 1.0):
                J = build_intercept_resend(n, q)
                for mode, bias in ((ReconcileMode.OPEN, 0.0), (ReconcileMode.COVERED, 0.0), (ReconcileMode.COVERED, 0.25)):
                    corrected = truncate_key(condition_on_syndrome(J, code, mode, bias), n_corr)
                    for hname, M in hashes:
                        label = f"{code_name} n={n} q={q} {mode.value} bias={bias} {hname}"
                        yield label, PipelineTrace(Stage(None, J), Stage(None, corrected), Stage(None, condition_on_hash(corrected, M)))


def check_guess_bound(max_bits: int, faults: frozenset) -> GroupResult:
    res = GroupResult("guess_bound_tightness")
    for n in range(1, max_bits + 1):
        N = 1 << n
        for i in range(21):
            d = i / 100
            if d > 1 - 1 / N:
                continue
            if "extremal-spread" in faults:
                probs = np.full(N, 1 / N - d / N)
                probs[0] = 1 / N + d
                J = JointDistribution.from_table(probs / probs.sum())
            else:
                J = make_eq1_extremal(n, d)
            ok = abs(stat_distance(J) - d) <= 1e-12 and abs(pguess(J) - (d + 1 / N)) <= 1e-12
            res.check(ok, f"n={n} d={d}")
    return res


def check_lhl(max_bits: int, faults: frozenset) -> GroupResult:
    res = GroupResult("lhl_bound")
    log_factor = 1.0 if "lhl-drop-factor-2" in faults else 2.0
    for n in range(1, max_bits + 1):
        for name, J in lhl_sources(n).items():
            h = min_entropy(J)
            for out in range(1, min(3, n) + 1):
                kinds = [FamilyKind.TOEPLITZ]
                if n * out <= 12:
                    kinds.append(FamilyKind.FULL_RANDOM)
                for kind in kinds:
                    avg = avg_stat_distance(HashFamily(kind, n, out), J)
                    bound = lhl_bound(h, out, log_factor=log_factor)
                    res.check(avg <= bound + 1e-12, f"{kind.value} n={n} out={out} {name}: {avg:.6g} > {bound:.6g}")
    return res


def check_chain(max_bits: int, faults: frozenset) -> GroupResult:
    res = GroupResult("guessing_chain")
    for label, trace in chain_instances(max_bits):
        if "oracle-drops-eve-view" in faults:
            trace = PipelineTrace(trace.sifted, trace.corrected, Stage(None, trace.amplified.joint.drop_eve()))
        res.check(verify_chain(trace).holds, label)
    return res


def check_parity(max_bits: int, faults: frozenset) -> GroupResult:
    res = GroupResult("parity_formula")
    for m in range(1, 13):
        for p in (0.05, 0.11, 0.25, 0.45):
            value = parity_error_prob(m + 1 if "parity-formula" in faults else m, p)
            res.check(abs(value - parity_error_oracle(m, p)) <= 1e-12, f"m={m} p={p}")
    return res


def check_universality(max_bits: int, faults: frozenset) -> GroupResult:
    res = GroupResult("universality")
    for m in range(1, min(4, max_bits) + 1):
        for k in range(1, min(3, m) + 1):
            for kind in FamilyKind:
                fam = HashFamily(kind, m, k)
                if "toeplitz-short-seed" in faults and kind is FamilyKind.TOEPLITZ:
                    low = k - 1
                    seeds = np.arange(fam.size // (1 << low), dtype=np.uint64) << np.uint64(low)
                    rows = fam.member_row_ints(seeds)
                for x, y in itertools.combinations(range(1 << m), 2):
                    if "toeplitz-short-seed" in faults and kind is FamilyKind.TOEPLITZ:
                        parity = np.bitwise_count(rows & np.uint64(x ^ y)) & 1
                        frac = float(np.mean(~parity.any(axis=1)))
                    else:
                        frac = collision_fraction(fam, x, y)
                    res.check(frac == 2.0**-k, f"{kind.value} {m}->{k} x={x} y={y}: {frac}")
    return res


def _decode_all(code: LinearCode, faults: frozenset) -> Iterator[tuple[int, bool]]:
    """(error pattern, residual error?) for every pattern on an all-zero word."""
    zero = np.zeros(code.m, dtype=np.uint8)
    for pattern in range(1 << code.m):
        bob = int_to_bits(pattern, code.m)
        if "decoder-no-correction" in faults:
            residual = bool(bob.any())
        else:
            residual = reconcile(zero, bob, code).residual_error
        yield pattern, residual


def check_codes(max_bits: int, faults: frozenset) -> GroupResult:
    res = GroupResult("code_exhaustive")
    names = list(BUILTIN_CODES) + ["random-10-6-1", "random-9-5-2"]
    for name in names:
        code = get_code(name)
        H, G = code.parity_check, code.generator
        res.check(not np.any(G.matmul(H.T).data), f"{name}: G H^T != 0")
        res.check(rank_gf2(G) == code.k and rank_gf2(H) == code.m - code.k, f"{name}: rank")
        leaders = set(int(v) for v in code.coset_leaders)
        for pattern, residual in _decode_all(code, faults):
            res.check(residual == (pattern not in leaders), f"{name} pattern={pattern:0{code.m}b}")
    ham = get_code("hamming-7-4")
    outcomes = dict(_decode_all(ham, faults))
    res.check(all(not outcomes[1 << i] for i in range(7)), "hamming-7-4 misses a weight-1 pattern")
    res.check(any(outcomes[p] for p in range(128) if bin(p).count("1") == 2), "hamming-7-4 corrects every weight-2 pattern")
    for name in ("rep-3-1", "rep-5-1"):
        code = get_code(name)
        t = (code.m - 1) // 2
        outcomes = dict(_decode_all(code, faults))
        res.check(all(not r for p, r in outcomes.items() if bin(p).count("1") <= t), f"{name} misses a weight-<={t} pattern")
    return res


def check_iac(max_bits: int, faults: frozenset) -> GroupResult:
    res = GroupResult("iac_counterexample")
    for n in range(1, max_bits + 1):
        for lam in (0.25, 0.5, 0.75):
            J = make_iac_counterexample(n, lam)
            delta = 2.0 ** (-lam * n)
            res.check(abs(mutual_info(J) - n * delta) <= 1e-9, f"n={n} lambda={lam}: mutual info")
            res.check(pguess(J) >= delta, f"n={n} lambda={lam}: pguess")
    return res


def check_leaks(max_bits: int, faults: frozenset) -> GroupResult:
    res = GroupResult("leak_formulas")
    for n in (1, 10, 1000, 10**5):
        for q in np.linspace(0.0, 0.5, 51):
            q = float(q)
            res.check(math.isclose(leak_open(n, q, 1.0), leak_parity(n, q), rel_tol=0, abs_tol=1e-9), f"n={n} q={q}: f=1")
            if 0.0 < q < 0.5:
                res.check(leak_covered_expanded(n, q) > leak_parity(n, q), f"n={n} q={q}: expanded")
    res.check(abs(binary_entropy(0.11) - 0.499916) <= 5e-6, "h(0.11)")
    return res


def check_bound_arithmetic(max_bits: int, faults: frozenset) -> GroupResult:
    res = GroupResult("bound_arithmetic")
    two_log = lhl_required_exponent(1, 1e-14)
    one_log = lhl_required_exponent(1, 1e-14, log_factor=1.0)
    res.check(abs(two_log - (1 + 2 * math.log2(1e14))) <= 0.01 and abs(two_log - 94.01) <= 0.01, f"two-log {two_log}")
    res.check(one_log < 48 and abs(one_log - 47.507) <= 0.01, f"single-log {one_log}")
    level = markov_individual_bound(markov_individual_bound(2.0**-48, 2.0**16), 2.0**16)
    res.check(abs(-math.log2(level) - 16) <= 0.01, f"markov exponent {-math.log2(level)}")
    return res


GROUPS: dict[str, Callable[[int, frozenset], GroupResult]] = {
    "guess_bound_tightness": check_guess_bound,
    "lhl_bound": check_lhl,
    "guessing_chain": check_chain,
    "parity_formula": check_parity,
    "universality": check_universality,
    "code_exhaustive": check_codes,
    "iac_counterexample": check_iac,
    "leak_formulas": check_leaks,
    "bound_arithmetic": check_bound_arithmetic,
}


def run_all(max_bits: int = 8, faults=()) -> list[GroupResult]:
    faults = frozenset(faults)
    unknown = faults - set(FAULTS)
    if unknown:
        raise ValueError(f"unknown faults: {', '.join(sorted(unknown))}")
    results = []
    for fn in GROUPS.values():
        start = time.perf_counter()
        result = fn(max_bits, faults)
        result.seconds = time.perf_counter() - start
        results.append(result)
    return results
