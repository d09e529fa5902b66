"""Exact security metrics over explicit (key, Eve-view) distributions.

A :class:`JointDistribution` is the single source of truth for everything
Eve can know. Key values are packed bit strings (first bit most
significant); Eve's observations are plain integer labels. Only nonzero
cells are stored, so tables whose Eve axis is large but sparse (syndromes
appended to per-bit observations, for example) stay cheap.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import CapacityError, ValidationError

MAX_KEY_BITS = 12
MAX_TABLE_ENTRIES = 2**26
MAX_LABEL_SPACE = 2**62
SUM_TOL = 1e-12


def check_capacity(n_key_bits: int, eve_symbols: int) -> None:
    """Bound the table by the Eve symbols that can occur.

    Labels are built positionally (e.g. observation * 2^r + syndrome), so
    ``eve_symbols`` may be far larger than the set actually populated; the
    entry cap is applied to populated symbols in :meth:`from_entries`.
    """
    if not 1 <= n_key_bits <= MAX_KEY_BITS:
        raise CapacityError(f"key length {n_key_bits} outside [1, {MAX_KEY_BITS}]")
    if eve_symbols < 1:
        raise ValidationError("need at least one Eve symbol")
    if (1 << n_key_bits) * eve_symbols > MAX_LABEL_SPACE:
        raise CapacityError(f"Eve label space of {eve_symbols} symbols is too large")


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability table P(key, eve) stored as nonzero (key, eve, prob) triples.

    Use :meth:`from_table` or :meth:`from_entries` rather than the raw
    constructor; they merge duplicate cells and validate the table.
    """

    n_key_bits: int
    eve_symbols: int
    key: np.ndarray
    eve: np.ndarray
    prob: np.ndarray

    @classmethod
    def from_entries(cls, n_key_bits: int, eve_symbols: int, key, eve, prob) -> "JointDistribution":
        n_key_bits = int(n_key_bits)
        eve_symbols = int(eve_symbols)
        check_capacity(n_key_bits, eve_symbols)
        key = np.asarray(key, dtype=np.int64).ravel()
        eve = np.asarray(eve, dtype=np.int64).ravel()
        prob = np.asarray(prob, dtype=np.float64).ravel()
        if not (key.shape == eve.shape == prob.shape):
            raise ValidationError("key, eve and prob must have equal lengths")
        if key.size and (key.min() < 0 or key.max() >= 1 << n_key_bits):
            raise ValidationError("key index out of range")
        if eve.size and (eve.min() < 0 or eve.max() >= eve_symbols):
            raise ValidationError("eve index out of range")
        if np.any(~np.isfinite(prob)) or np.any(prob < 0):
            raise ValidationError("probabilities must be finite and non-negative")
        total = float(prob.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise ValidationError(f"probabilities sum to {total!r}, not 1")
        cell = key * eve_symbols + eve
        cells, inverse = np.unique(cell, return_inverse=True)
        merged = np.bincount(inverse, weights=prob, minlength=cells.size)
        keep = merged > 0
        cells, merged = cells[keep], merged[keep]
        k, e = np.divmod(cells, eve_symbols)
        observed = np.unique(e).size
        if (1 << n_key_bits) * observed > MAX_TABLE_ENTRIES:
            raise CapacityError(
                f"table of 2^{n_key_bits} keys x {observed} Eve symbols exceeds {MAX_TABLE_ENTRIES} entries"
            )
        for a in (k, e, merged):
            a.setflags(write=False)
        return cls(n_key_bits, eve_symbols, k, e, merged)

    @classmethod
    def from_table(cls, table) -> "JointDistribution":
        t = np.asarray(table, dtype=np.float64)
        if t.ndim == 1:
            t = t[:, None]
        if t.ndim != 2:
            raise ValidationError("table must be 1-D or 2-D")
        n_keys, eve_symbols = t.shape
        n_bits = n_keys.bit_length() - 1
        if n_keys < 2 or 1 << n_bits != n_keys:
            raise ValidationError(f"key axis length {n_keys} is not a power of two >= 2")
        if np.any(t < 0):
            raise ValidationError("probabilities must be non-negative")
        k, e = np.nonzero(t)
        return cls.from_entries(n_bits, eve_symbols, k, e, t[k, e])

    @property
    def n_keys(self) -> int:
        return 1 << self.n_key_bits

    @property
    def table(self) -> np.ndarray:
        if self.n_keys * self.eve_symbols > MAX_TABLE_ENTRIES:
            raise CapacityError("dense table too large; use the sparse triples")
        t = np.zeros((self.n_keys, self.eve_symbols))
        t[self.key, self.eve] = self.prob
        return t

    @cached_property
    def _eve_groups(self) -> tuple[np.ndarray, np.ndarray]:
        labels, inverse = np.unique(self.eve, return_inverse=True)
        return labels, inverse

    def key_marginal(self) -> np.ndarray:
        return np.bincount(self.key, weights=self.prob, minlength=self.n_keys)

    def observed_eve_marginal(self) -> tuple[np.ndarray, np.ndarray]:
        """(labels, probabilities) of the Eve symbols that actually occur."""
        labels, inverse = self._eve_groups
        return labels, np.bincount(inverse, weights=self.prob, minlength=labels.size)

    def map_key(self, new_key: np.ndarray, n_out_bits: int) -> "JointDistribution":
        """Push the key axis through a deterministic map given as a lookup table."""
        new_key = np.asarray(new_key, dtype=np.int64)
        if new_key.shape != (self.n_keys,):
            raise ValidationError("key map must have one entry per key value")
        return JointDistribution.from_entries(
            n_out_bits, self.eve_symbols, new_key[self.key], self.eve, self.prob
        )

    def map_eve(self, new_eve: np.ndarray, eve_symbols: int) -> "JointDistribution":
        """Coarse-grain Eve's observation through a lookup table."""
        new_eve = np.asarray(new_eve, dtype=np.int64)
        return JointDistribution.from_entries(
            self.n_key_bits, eve_symbols, self.key, new_eve[self.eve], self.prob
        )

    def drop_eve(self) -> "JointDistribution":
        return self.map_eve(np.zeros(self.eve_symbols, dtype=np.int64), 1)

    def product(self, other: "JointDistribution") -> "JointDistribution":
        """Independent concatenation; ``self`` supplies the leading key bits."""
        k = self.key[:, None] * other.n_keys + other.key[None, :]
        e = self.eve[:, None] * other.eve_symbols + other.eve[None, :]
        p = self.prob[:, None] * other.prob[None, :]
        return JointDistribution.from_entries(
            self.n_key_bits + other.n_key_bits,
            self.eve_symbols * other.eve_symbols,
            k, e, p,
        )

    def allclose(self, other: "JointDistribution", atol: float = 1e-12) -> bool:
        if (self.n_key_bits, self.eve_symbols) != (other.n_key_bits, other.eve_symbols):
            return False
        a = dict(zip(zip(self.key.tolist(), self.eve.tolist()), self.prob.tolist()))
        b = dict(zip(zip(other.key.tolist(), other.eve.tolist()), other.prob.tolist()))
        return all(abs(a.get(c, 0.0) - b.get(c, 0.0)) <= atol for c in a.keys() | b.keys())


def pguess(J: JointDistribution) -> float:
    """Eve's optimal probability of guessing the whole key: sum_e max_k P(k, e)."""
    labels, inverse = J._eve_groups
    best = np.zeros(labels.size)
    np.maximum.at(best, inverse, J.prob)
    return float(best.sum())


def min_entropy(J: JointDistribution) -> float:
    return -math.log2(pguess(J))


def stat_distance(J: JointDistribution) -> float:
    """Half the L1 distance between P(k, e) and U(k) P(e)."""
    labels, inverse = J._eve_groups
    p_e = np.bincount(inverse, weights=J.prob, minlength=labels.size)
    seen = np.bincount(inverse, minlength=labels.size)
    n = J.n_keys
    stored = np.abs(J.prob - p_e[inverse] / n).sum()
    unseen = ((n - seen) * p_e / n).sum()
    return float(0.5 * (stored + unseen))


def _entropy(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum())


def mutual_info(J: JointDistribution) -> float:
    """I(K; E) in bits."""
    _, p_e = J.observed_eve_marginal()
    value = _entropy(J.key_marginal()) + _entropy(p_e) - _entropy(J.prob)
    return max(value, 0.0)


def check_p1_bound(d: float, n_bits: int) -> float:
    """Upper bound d + 2^-n on the guessing probability at distance d."""
    if not 0.0 <= d <= 1.0:
        raise ValidationError(f"d must lie in [0, 1], got {d}")
    if n_bits < 1:
        raise ValidationError(f"n_bits must be >= 1, got {n_bits}")
    return d + 2.0 ** -n_bits


@dataclass(frozen=True)
class SecurityReport:
    pguess: float
    min_entropy_bits: float
    stat_distance: float
    mutual_info_bits: float


def security_report(J: JointDistribution) -> SecurityReport:
    pg = pguess(J)
    return SecurityReport(pg, -math.log2(pg), stat_distance(J), mutual_info(J))


def uniform(n_bits: int) -> JointDistribution:
    """Uniform key, Eve sees nothing."""
    n = 1 << n_bits
    return JointDistribution.from_entries(n_bits, 1, np.arange(n), np.zeros(n), np.full(n, 1.0 / n))


def eve_knows_key(n_bits: int) -> JointDistribution:
    n = 1 << n_bits
    keys = np.arange(n)
    return JointDistribution.from_entries(n_bits, n, keys, keys, np.full(n, 1.0 / n))


def make_eq1_extremal(n_bits: int, d: float) -> JointDistribution:
    """Single-observation distribution whose guessing probability is exactly d + 1/N.

    Key 0 carries 1/N + d and the remaining N - 1 values share the deficit
    equally, so the distance from uniform is also exactly d.
    """
    if n_bits < 1:
        raise ValidationError("n_bits must be >= 1")
    n = 1 << n_bits
    if not 0.0 <= d <= 1.0 - 1.0 / n:
        raise ValidationError(f"d must lie in [0, 1 - 1/N] = [0, {1 - 1 / n}], got {d}")
    probs = np.full(n, 1.0 / n - d / (n - 1))
    probs[0] = 1.0 / n + d
    probs = np.clip(probs, 0.0, None)
    return JointDistribution.from_entries(n_bits, 1, np.arange(n), np.zeros(n), probs)


def know_all_with_prob(n_bits: int, delta: float) -> JointDistribution:
    """Eve sees the whole key with probability delta, otherwise nothing.

    Eve symbols 0..N-1 reveal the key; symbol N is the null observation.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValidationError(f"delta must lie in [0, 1], got {delta}")
    n = 1 << n_bits
    check_capacity(n_bits, n + 1)
    keys = np.arange(n)
    key = np.concatenate([keys, keys])
    eve = np.concatenate([keys, np.full(n, n)])
    prob = np.concatenate([np.full(n, delta / n), np.full(n, (1.0 - delta) / n)])
    return JointDistribution.from_entries(n_bits, n + 1, key, eve, prob)


def make_iac_counterexample(n_bits: int, lam: float) -> JointDistribution:
    """Key with vanishing mutual information but a large guessing probability.

    With delta = 2^(-lam*n), Eve sees the key with probability delta.
    Mutual information is n * delta, yet the guessing probability stays
    above delta.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must lie in [0, 1], got {lam}")
    return know_all_with_prob(n_bits, 2.0 ** (-lam * n_bits))
