import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qkdlab.errors import CapacityError, ValidationError
from qkdlab.gf2 import BitMatrix, bits_to_int, int_to_bits
from qkdlab.hashing import (
    DegeneracyPolicy,
    FamilyKind,
    HashFamily,
    apply_hash,
    avg_stat_distance,
    collision_fraction,
    degenerate_fraction,
    draw_member,
    hash_joint,
    lhl_bound,
    lhl_key_length,
    lhl_min_distance,
    lhl_required_exponent,
    markov_individual_bound,
    parity_error_prob,
    sampled_degenerate_fraction,
    seed_from_hex,
    seed_to_hex,
    smoothed_key_length,
)
from qkdlab.secmetrics import (
    eve_knows_key,
    make_eq1_extremal,
    make_iac_counterexample,
    min_entropy,
    pguess,
    uniform,
)

from conftest import (
    dense,
    key_bits,
    oracle_apply,
    oracle_hashed_table,
    oracle_rowspace_rank,
    oracle_stat_distance,
    oracle_toeplitz,
)


class TestApplyHash:
    def test_identity(self):
        assert list(apply_hash(BitMatrix.identity(3), "101")) == [1, 0, 1]

    def test_parity_row(self):
        assert list(apply_hash(BitMatrix([[1, 1, 1]]), "101")) == [0]

    def test_two_rows(self):
        M = [[1, 1, 0], [0, 1, 1]]
        assert oracle_apply(M, [1, 1, 0]) == [0, 1]
        assert list(apply_hash(BitMatrix(M), "110")) == [0, 1]

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            apply_hash(BitMatrix.identity(3), "10")

    @given(st.integers(1, 6), st.integers(1, 8), st.data())
    def test_linearity_and_oracle(self, k, m, data):
        rows = data.draw(st.lists(st.lists(st.integers(0, 1), min_size=m, max_size=m), min_size=k, max_size=k))
        x = data.draw(st.lists(st.integers(0, 1), min_size=m, max_size=m))
        y = data.draw(st.lists(st.integers(0, 1), min_size=m, max_size=m))
        M = BitMatrix(rows)
        hx, hy = apply_hash(M, x), apply_hash(M, y)
        assert list(hx) == oracle_apply(rows, x)
        xor = [a ^ b for a, b in zip(x, y)]
        assert list(apply_hash(M, xor)) == list(hx ^ hy)


class TestRank:
    def test_identity(self):
        assert BitMatrix.identity(5).rank() == 5

    def test_zero(self):
        assert BitMatrix.zeros(3, 4).rank() == 0

    def test_duplicate_rows(self):
        M = [[1, 1, 0], [1, 1, 0]]
        assert oracle_rowspace_rank(M) == 1
        assert BitMatrix(M).rank() == 1


class TestFamilies:
    def test_seed_bits(self):
        assert HashFamily("toeplitz", 5, 3).seed_bits == 7
        assert HashFamily("full_random", 5, 3).seed_bits == 15

    def test_expanding_family_rejected(self):
        with pytest.raises(ValidationError):
            HashFamily("toeplitz", 2, 3)

    @pytest.mark.parametrize("m,k", [(3, 2), (4, 3), (5, 1), (4, 4)])
    def test_toeplitz_layout(self, m, k):
        fam = HashFamily("toeplitz", m, k)
        for seed in range(fam.size):
            expected = oracle_toeplitz(seed, m, k)
            assert fam.member(seed).data.tolist() == expected
            packed = fam.member_row_ints([seed])[0]
            assert [int(r) for r in packed] == [bits_to_int(r) for r in expected]

    def test_full_random_layout(self):
        fam = HashFamily("full_random", 3, 2)
        assert fam.member(0b101011).data.tolist() == [[1, 0, 1], [0, 1, 1]]

    def test_large_member(self):
        M = HashFamily("toeplitz", 200, 40).member(12345)
        assert M.shape == (40, 200)

    def test_seed_hex(self):
        assert seed_to_hex(0b1010011, 7) == "53"
        assert seed_from_hex("53") == 0b1010011

    @pytest.mark.parametrize("kind", list(FamilyKind))
    @pytest.mark.parametrize("m,k", [(m, k) for m in range(1, 5) for k in range(1, min(3, m) + 1)])
    def test_universal2(self, kind, m, k):
        fam = HashFamily(kind, m, k)
        for x, y in itertools.combinations(range(1 << m), 2):
            assert collision_fraction(fam, x, y) == 2.0**-k


class TestDegenerate:
    def test_one_by_one(self):
        assert degenerate_fraction(HashFamily("full_random", 1, 1)) == 0.5

    def test_two_by_two(self):
        count = sum(
            oracle_rowspace_rank([[(v >> 3) & 1, (v >> 2) & 1], [(v >> 1) & 1, v & 1]]) < 2 for v in range(16)
        )
        assert count / 16 == 0.625
        assert degenerate_fraction(HashFamily("full_random", 2, 2)) == 0.625

    def test_toeplitz_2x3(self):
        expected = sum(oracle_rowspace_rank(oracle_toeplitz(s, 3, 2)) < 2 for s in range(16)) / 16
        assert degenerate_fraction(HashFamily("toeplitz", 3, 2)) == expected
        assert expected > 0

    @pytest.mark.parametrize("kind", list(FamilyKind))
    @pytest.mark.parametrize("m,k", [(4, 1), (5, 3), (4, 4)])
    def test_always_positive(self, kind, m, k):
        assert degenerate_fraction(HashFamily(kind, m, k)) > 0

    def test_capacity_and_sampling(self):
        fam = HashFamily("full_random", 10, 5)
        with pytest.raises(CapacityError):
            degenerate_fraction(fam)
        frac, se = sampled_degenerate_fraction(fam, 20000, seed=1)
        # P(rank < 5) for a uniformly random 5x10 matrix, exactly.
        exact = 1 - math.prod(1 - 2.0 ** (i - 10) for i in range(5))
        assert abs(frac - exact) < 5 * se + 1e-3

    def test_policies(self):
        fam = HashFamily("toeplitz", 3, 3)
        rng = np.random.default_rng(0)
        draws = [draw_member(fam, rng) for _ in range(50)]
        assert any(d.degenerate for d in draws)
        assert all(not draw_member(fam, np.random.default_rng(s), "resample").degenerate for s in range(20))
        with pytest.raises(ValidationError):
            for s in range(50):
                draw_member(fam, np.random.default_rng(s), DegeneracyPolicy.REJECT)


class TestLhlArithmetic:
    def test_examples(self):
        assert lhl_key_length(96, 2.0**-16) == 64
        assert lhl_key_length(94, 1e-14) == 0
        assert lhl_key_length(10, 1.0) == 10

    def test_one_bit_at_1e14(self):
        need = lhl_required_exponent(1, 1e-14)
        assert need == pytest.approx(1 + 2 * math.log2(1e14), abs=1e-12)
        assert need == pytest.approx(94.01, abs=0.01)
        assert lhl_key_length(need + 1e-6, 1e-14) == 1
        single = lhl_required_exponent(1, 1e-14, log_factor=1.0)
        assert single == pytest.approx(47.507, abs=0.001) and single < 48

    def test_half_prefactor_gains_two_bits(self):
        assert lhl_key_length(96, 2.0**-16, half_prefactor=True) == 66

    def test_bad_inputs(self):
        with pytest.raises(ValidationError):
            lhl_key_length(10, 0.0)
        with pytest.raises(ValidationError):
            lhl_key_length(-1, 0.5)

    def test_min_distance(self):
        assert lhl_min_distance(48, 0) == 2.0**-24
        assert lhl_min_distance(48, 48) == 1.0
        assert lhl_min_distance(94.01, 1) == pytest.approx(1e-14, rel=0.01)
        with pytest.raises(ValidationError):
            lhl_min_distance(3, 4)

    def test_smoothing_shift(self):
        assert smoothed_key_length(96, 2.0**-16, 0, 0) == 64
        assert smoothed_key_length(96, 2.0**-16, 4, 0) == 68
        assert smoothed_key_length(96, 1e-3, 0, 1e-3) == 0

    @given(st.floats(0, 200), st.floats(1e-20, 1), st.floats(1e-20, 1))
    def test_monotone_in_d(self, l, d1, d2):
        lo, hi = sorted((d1, d2))
        assert lhl_key_length(l, lo) <= lhl_key_length(l, hi)


class TestAvgStatDistance:
    def test_uniform_three_to_one(self):
        J = uniform(3)
        table = dense(J)
        expected = sum(
            oracle_stat_distance(oracle_hashed_table(table, oracle_toeplitz(s, 3, 1), 3)) for s in range(8)
        ) / 8
        assert expected == pytest.approx(1 / 16, abs=1e-15)
        assert avg_stat_distance(HashFamily("toeplitz", 3, 1), J) == pytest.approx(expected, abs=1e-12)
        assert expected <= 2.0 ** -((3 - 1) / 2)

    @pytest.mark.parametrize("kind", list(FamilyKind))
    def test_eve_knows_key(self, kind):
        # Every member leaves the output a deterministic function of Eve's view.
        assert avg_stat_distance(HashFamily(kind, 3, 2), eve_knows_key(3)) == pytest.approx(0.75, abs=1e-12)

    def test_counterexample_against_oracle_and_bound(self):
        J = make_iac_counterexample(4, 0.5)
        table = dense(J)
        expected = sum(
            oracle_stat_distance(oracle_hashed_table(table, oracle_toeplitz(s, 4, 1), 4)) for s in range(16)
        ) / 16
        got = avg_stat_distance(HashFamily("toeplitz", 4, 1), J)
        assert got == pytest.approx(expected, abs=1e-12)
        assert got <= lhl_bound(min_entropy(J), 1) + 1e-12

    def test_mismatch(self):
        with pytest.raises(ValidationError):
            avg_stat_distance(HashFamily("toeplitz", 3, 1), uniform(4))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_hashing_never_lowers_pguess(n):
    for J in (make_eq1_extremal(n, 0.1), make_iac_counterexample(n, 0.5)):
        for k in range(1, n + 1):
            fam = HashFamily("toeplitz", n, k)
            for M in fam.members():
                assert pguess(hash_joint(J, M)) >= pguess(J) - 1e-12


class TestParity:
    def test_examples(self):
        assert parity_error_prob(1, 0.2) == pytest.approx(0.2, abs=1e-15)
        assert parity_error_prob(7, 0.5) == 0.5
        assert parity_error_prob(2, 0.25) == pytest.approx(0.375, abs=1e-15)

    def test_brute_force_two_bits(self):
        p = 0.25
        odd = sum(
            (p if a else 1 - p) * (p if b else 1 - p) for a, b in itertools.product((0, 1), repeat=2) if a ^ b
        )
        assert odd == pytest.approx(0.375, abs=1e-15)

    @pytest.mark.parametrize("m,p", [(0, 0.1), (3, -0.1), (3, 0.6)])
    def test_bad_inputs(self, m, p):
        with pytest.raises(ValidationError):
            parity_error_prob(m, p)

    @pytest.mark.parametrize("m", range(1, 13))
    @pytest.mark.parametrize("p", [0.0, 0.05, 0.11, 0.25, 0.45, 0.5])
    def test_matches_convolution(self, m, p):
        err = 0.0
        for pattern in itertools.product((0, 1), repeat=m):
            w = sum(pattern)
            if w % 2:
                err += p**w * (1 - p) ** (m - w)
        assert parity_error_prob(m, p) == pytest.approx(err, abs=1e-12)


class TestMarkov:
    def test_examples(self):
        assert markov_individual_bound(2.0**-48, 2.0**16) == 2.0**-32
        assert markov_individual_bound(markov_individual_bound(2.0**-48, 2.0**16), 2.0**16) == 2.0**-16
        assert markov_individual_bound(0.0, 1e9) == 0.0

    def test_bad(self):
        with pytest.raises(ValidationError):
            markov_individual_bound(0.1, 1.0)
