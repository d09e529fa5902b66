"""Acceptance criteria 1-10, each at its stated tolerance and time budget.

Every test records one PASS/FAIL line; the lines are printed in the pytest
terminal summary, or directly when this file is run as a script.
"""
import itertools
import json
import math
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest

from qkdlab.adversary import verify_chain
from qkdlab.cli import main
from qkdlab.ecc import (
    binary_entropy,
    get_code,
    leak_covered_expanded,
    leak_open,
    leak_parity,
    reconcile,
)
from qkdlab.gf2 import int_to_bits
from qkdlab.hashing import (
    FamilyKind,
    HashFamily,
    avg_stat_distance,
    lhl_key_length,
    lhl_required_exponent,
    markov_individual_bound,
    parity_error_prob,
)
from qkdlab.secmetrics import (
    make_eq1_extremal,
    make_iac_counterexample,
    min_entropy,
    mutual_info,
    pguess,
    stat_distance,
    uniform,
)
from qkdlab.verify import FAULTS, chain_instances

pytestmark = pytest.mark.acceptance

RESULTS: dict[int, str] = {}


def record(number, ok, detail, seconds):
    RESULTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'} ({seconds:.2f}s) {detail}"
    print(RESULTS[number])
    assert ok, RESULTS[number]


def test_criterion_01_extremal_tightness():
    t0 = time.perf_counter()
    worst = 0.0
    for n in range(2, 9):
        for i in range(21):
            d = i / 100
            J = make_eq1_extremal(n, d)
            worst = max(worst, abs(stat_distance(J) - d), abs(pguess(J) - (d + 2.0**-n)))
    dt = time.perf_counter() - t0
    record(1, worst <= 1e-12 and dt < 1.0, f"max deviation {worst:.2e}", dt)


def test_criterion_02_leftover_hash():
    t0 = time.perf_counter()
    checked, worst_margin = 0, -math.inf
    for n in range(1, 7):
        sources = [uniform(n)]
        sources += [make_eq1_extremal(n, d) for d in (0.05, 0.2) if d <= 1 - 2.0**-n]
        sources += [make_iac_counterexample(n, lam) for lam in (0.25, 0.5, 0.75, 1.0)]
        for J in sources:
            h = min_entropy(J)
            for out in range(1, min(3, n) + 1):
                avg = avg_stat_distance(HashFamily(FamilyKind.TOEPLITZ, n, out), J)
                bound = 2.0 ** (-(h - out) / 2)
                worst_margin = max(worst_margin, avg - bound)
                checked += 1
    dt = time.perf_counter() - t0
    ok = worst_margin <= 1e-12 and dt < 60.0
    record(2, ok, f"{checked} (source, family) pairs, max(avg - bound) = {worst_margin:.3e}", dt)


def test_criterion_03_chain():
    t0 = time.perf_counter()
    traces = violations = 0
    first = None
    for label, trace in chain_instances(max_bits=8):
        traces += 1
        if not verify_chain(trace).holds:
            violations += 1
            first = first or label
    dt = time.perf_counter() - t0
    ok = traces >= 200 and violations == 0 and dt < 120.0
    record(3, ok, f"{traces} traces, {violations} violations" + (f", first {first}" if first else ""), dt)


def test_criterion_04_parity_formula():
    t0 = time.perf_counter()
    worst = 0.0
    for m in range(1, 13):
        weights = [bin(e).count("1") for e in range(1 << m)]
        for p in (0.05, 0.11, 0.25, 0.45):
            odd = math.fsum(p**w * (1 - p) ** (m - w) for w in weights if w % 2)
            worst = max(worst, abs(parity_error_prob(m, p) - odd))
    dt = time.perf_counter() - t0
    record(4, worst <= 1e-12 and dt < 5.0, f"max deviation {worst:.2e}", dt)


def test_criterion_05_iac_counterexample():
    t0 = time.perf_counter()
    n, ok, parts = 8, True, []
    for lam in (0.25, 0.5, 0.75):
        J = make_iac_counterexample(n, lam)
        delta = 2.0 ** (-lam * n)
        mi, pg = mutual_info(J), pguess(J)
        ok &= abs(mi - n * delta) <= 1e-9 and pg >= delta
        parts.append(f"lambda={lam}: I={mi:.6g} (n*delta={n * delta:.6g}), pguess={pg:.6g}")
    dt = time.perf_counter() - t0
    record(5, ok and dt < 5.0, "; ".join(parts), dt)


def test_criterion_06_arithmetic():
    t0 = time.perf_counter()
    d = 1e-14
    two_log = lhl_required_exponent(1, d)
    single_log = lhl_required_exponent(1, d, log_factor=1.0)
    expected_two = 1 + 2 * math.log2(1e14)
    # 2^-48 average, two conversions at t = 2^16 each.
    after = -math.log2(markov_individual_bound(markov_individual_bound(2.0**-48, 2.0**16), 2.0**16))
    ok = (
        abs(two_log - expected_two) <= 0.01
        and abs(two_log - 94.01) <= 0.01
        and abs(single_log - 47.507) <= 0.01
        and single_log < 48
        and abs(after - 16) <= 0.01
        and lhl_key_length(math.ceil(two_log), d) == 1
        and lhl_key_length(math.floor(two_log), d) == 0
    )
    dt = time.perf_counter() - t0
    record(6, ok, f"two-log exponent {two_log:.4f}, single-log {single_log:.4f}, 48 -> {after:.4f}", dt)


def test_criterion_07_code_exhaustives():
    t0 = time.perf_counter()
    zero7, zero3 = np.zeros(7, dtype=np.uint8), np.zeros(3, dtype=np.uint8)
    ham, rep = get_code("hamming-7-4"), get_code("rep-3-1")
    outcome7 = {e: not reconcile(zero7, int_to_bits(e, 7), ham).residual_error for e in range(1 << 7)}
    outcome3 = {e: not reconcile(zero3, int_to_bits(e, 3), rep).residual_error for e in range(1 << 3)}
    w1_7 = all(outcome7[1 << i] for i in range(7))
    w2_fail = any(not outcome7[(1 << i) | (1 << j)] for i, j in itertools.combinations(range(7), 2))
    w1_3 = all(outcome3[1 << i] for i in range(3))
    dt = time.perf_counter() - t0
    ok = w1_7 and w2_fail and w1_3 and dt < 1.0
    record(7, ok, f"hamming weight-1 {w1_7}, some weight-2 failure {w2_fail}, repetition weight-1 {w1_3}", dt)


def test_criterion_08_leaks():
    t0 = time.perf_counter()
    grid_n = (1, 7, 100, 11000, 10**6)
    grid_q = [i / 200 for i in range(101)]
    same = all(leak_open(n, q, 1.0) == leak_parity(n, q) for n in grid_n for q in grid_q)
    above = all(leak_covered_expanded(n, q) > leak_parity(n, q) for n in grid_n for q in grid_q if 0 < q < 0.5)
    mpmath.mp.dps = 50
    x = mpmath.mpf("0.11")
    ref = float(-x * mpmath.log(x, 2) - (1 - x) * mpmath.log(1 - x, 2))
    h = binary_entropy(0.11)
    ok = same and above and abs(h - 0.499916) <= 5e-6 and abs(h - ref) <= 1e-12
    dt = time.perf_counter() - t0
    record(8, ok, f"f=1 identity {same}, expanded > parity {above}, h(0.11)={h:.9f} (oracle {ref:.9f})", dt)


def test_criterion_09_determinism(tmp_path):
    t0 = time.perf_counter()
    cfg = {
        "n_sifted": 9, "attack": {"kind": "intercept_resend", "q": 0.5}, "qber_threshold": 0.5, "seed": 11,
        "sweep": {"d_grid": [0.1, 0.3, 0.9], "qber_grid": [0.0, 0.05, 0.1]},
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    codes = [main(["sweep", "--config", str(path), "--out", str(tmp_path / run)]) for run in ("a", "b")]
    a, b = (tmp_path / "a" / "sweep.csv").read_bytes(), (tmp_path / "b" / "sweep.csv").read_bytes()
    dt = time.perf_counter() - t0
    record(9, codes == [0, 0] and a == b, f"exit codes {codes}, {len(a)} bytes, identical {a == b}", dt)


def test_criterion_10_verify_and_faults(capsys):
    t0 = time.perf_counter()
    stock = main(["verify"])
    faulted = {fault: main(["verify", "--inject-fault", fault]) for fault in FAULTS}
    capsys.readouterr()
    dt = time.perf_counter() - t0
    ok = stock == 0 and all(code == 1 for code in faulted.values())
    detail = f"stock exit {stock}; " + ", ".join(f"{f} -> {c}" for f, c in faulted.items())
    record(10, ok, detail, dt)


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
