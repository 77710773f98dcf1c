"""Sector assembly and portfolio loss distributions under exponent stresses.

The loss distribution is the convolution of one compound Poisson sector
(idiosyncratic, k = 0) with N compound negative binomial sectors.  A stress
vector of small integer offsets increments the negative binomial success
number parameters alpha_k while the failure probabilities delta_k stay at
their unstressed values; this is exactly the family of stressed
distributions needed for conditioning on defaults, and re-deriving delta
from a larger alpha would be wrong there.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from . import pmf as pm
from .pmf import Pmf, TruncationError

# Only offsets 0, 1, 2 occur in supported scenarios (one or two defaults).
MAX_PUBLIC_OFFSET = 2


@dataclass(frozen=True)
class SectorSystem:
    """Frozen per-sector parameters derived from a portfolio.

    mu[k] for k = 0..N are the sector default intensities, delta[k-1] and
    alphas[k-1] the negative binomial parameters of sector k >= 1, and
    q_polys[k] the severity mixture pmf of sector k (None when the sector is
    inert, i.e. mu[k] = 0, in which case its loss is a point mass at 0).
    """

    mu: np.ndarray
    delta: np.ndarray
    alphas: np.ndarray
    q_polys: tuple
    limit: int
    sector_ids: tuple

    @property
    def n_sectors(self):
        return self.alphas.size

    def inert(self, k):
        return self.mu[k] == 0.0


def assemble(portfolio, limit):
    """Derive the sector system from a portfolio at truncation limit L.

    mu_k = sum_A w_Ak p_A; delta_k = mu_k / (mu_k + alpha_k); Q_k is the
    pd-weighted mixture of the obligors' severity pmfs.
    """
    n = portfolio.n_sectors
    mu = np.zeros(n + 1)
    q_vecs = [np.zeros(limit + 1) for _ in range(n + 1)]
    for o in portfolio.obligors:
        if o.pd == 0.0:
            continue
        vals, probs = o.severity.values_and_probs()
        for k in range(n + 1):
            wp = o.weights[k] * o.pd
            if wp == 0.0:
                continue
            mu[k] += wp
            for v, q in zip(vals, probs):
                if v <= limit:
                    q_vecs[k][v] += wp * q
    alphas = np.array([s.alpha for s in portfolio.sectors])
    delta = np.where(mu[1:] > 0, mu[1:] / (mu[1:] + alphas), 0.0)
    q_polys = tuple(
        Pmf(q_vecs[k] / mu[k], tail_mass=max(1.0 - q_vecs[k].sum() / mu[k], 0.0))
        if mu[k] > 0
        else None
        for k in range(n + 1)
    )
    return SectorSystem(
        mu=mu,
        delta=delta,
        alphas=alphas,
        q_polys=q_polys,
        limit=limit,
        sector_ids=tuple(s.id for s in portfolio.sectors),
    )


def sector_loss(system, k, exponent_offset=0):
    """Loss pmf of sector k with the success number parameter incremented.

    k = 0 is the idiosyncratic compound Poisson sector and admits no offset.
    delta_k is kept at its unstressed value by construction.
    """
    if exponent_offset < 0:
        raise ValueError(f"exponent offset must be non-negative, got {exponent_offset}")
    if k == 0:
        if exponent_offset != 0:
            raise ValueError("the idiosyncratic sector has no exponent to stress")
        if system.inert(0):
            return pm.point_mass(0, system.limit)
        return pm.compound_poisson(system.mu[0], system.q_polys[0], system.limit)
    if system.inert(k):
        return pm.point_mass(0, system.limit)
    return pm.compound_negbin(
        system.alphas[k - 1] + exponent_offset,
        system.delta[k - 1],
        system.q_polys[k],
        system.limit,
    )


def zero_stress(system):
    return (0,) * system.n_sectors


class LossEngine:
    """Cached evaluator of loss distributions over stress vectors.

    Per-(sector, offset) pmfs and base-sector partial convolutions (prefix,
    suffix and interior segments) are memoized, so that a scenario touching
    one or two sectors reuses the convolution of all untouched sectors.
    Thread-safe: caches are guarded by a lock; entries are immutable pmfs,
    so concurrent evaluations return results identical to serial execution.
    """

    def __init__(self, system, tail_tol=None):
        self.system = system
        self.tail_tol = tail_tol
        self._lock = threading.Lock()
        self._sector_cache = {}
        self._prefix = None  # prefix[i] = convolution of sectors 0..i-1 at offset 0
        self._suffix = None  # suffix[i] = convolution of sectors i..N at offset 0

    def sector_loss(self, k, exponent_offset=0):
        key = (k, exponent_offset)
        with self._lock:
            hit = self._sector_cache.get(key)
        if hit is not None:
            return hit
        out = sector_loss(self.system, k, exponent_offset)
        with self._lock:
            self._sector_cache.setdefault(key, out)
        return out

    def _partials(self):
        with self._lock:
            if self._prefix is not None:
                return self._prefix, self._suffix
        n = self.system.n_sectors
        base = [self.sector_loss(k, 0) for k in range(n + 1)]
        prefix = [pm.point_mass(0, self.system.limit)]
        for k in range(n + 1):
            prefix.append(pm.convolve(prefix[-1], base[k]))
        suffix = [None] * (n + 2)
        suffix[n + 1] = pm.point_mass(0, self.system.limit)
        for k in range(n, -1, -1):
            suffix[k] = pm.convolve(base[k], suffix[k + 1])
        with self._lock:
            if self._prefix is None:
                self._prefix, self._suffix = prefix, suffix
            return self._prefix, self._suffix

    def loss_distribution(self, stress=None):
        """Portfolio loss pmf for a stress vector of exponent offsets.

        ``stress`` has one entry per non-idiosyncratic sector; offsets are
        limited to {0, 1, 2} (only single and double stresses occur in the
        supported conditioning scenarios).
        """
        n = self.system.n_sectors
        if stress is None:
            stress = (0,) * n
        stress = tuple(int(s) for s in stress)
        if len(stress) != n:
            raise ValueError(f"stress vector has length {len(stress)}, expected {n}")
        if any(s < 0 or s > MAX_PUBLIC_OFFSET for s in stress):
            raise ValueError(f"stress offsets must lie in 0..{MAX_PUBLIC_OFFSET}: {stress}")
        out = self._loss(stress)
        if self.tail_tol is not None and out.tail_mass > self.tail_tol:
            raise TruncationError(
                f"tail mass {out.tail_mass:.3e} exceeds tolerance {self.tail_tol:.3e} "
                f"at L={self.system.limit}",
                tail_mass=out.tail_mass,
            )
        return out

    def _loss(self, stress):
        prefix, suffix = self._partials()
        stressed = [k + 1 for k, s in enumerate(stress) if s > 0]
        if not stressed:
            return suffix[0]
        # Stitch: prefix up to the first stressed sector, stressed sectors,
        # base segments between them, suffix after the last one.
        out = prefix[stressed[0]]
        for pos, k in enumerate(stressed):
            for mid in range(stressed[pos - 1] + 1, k) if pos else ():
                out = pm.convolve(out, self.sector_loss(mid, 0))
            out = pm.convolve(out, self.sector_loss(k, stress[k - 1]))
        out = pm.convolve(out, suffix[stressed[-1] + 1])
        return out


def loss_distribution(system, stress=None):
    """One-shot evaluation without a persistent cache."""
    return LossEngine(system).loss_distribution(stress)


def risk_report(loss_pmf, thetas):
    """Mean, variance, quantile and expected shortfall at each theta."""
    return {
        "mean": pm.mean(loss_pmf),
        "variance": pm.variance(loss_pmf),
        "tail_mass": loss_pmf.tail_mass,
        "quantiles": {str(t): pm.quantile(loss_pmf, t) for t in thetas},
        "expected_shortfall": {str(t): pm.expected_shortfall(loss_pmf, t) for t in thetas},
    }


def suggest_truncation(portfolio):
    """Truncation limit heuristic L = ceil(mean + 12 * stddev).

    Moments follow from the compound representation: the idiosyncratic
    sector is compound Poisson, each factor sector compound negative
    binomial with claim count variance mu_k (1 + mu_k / alpha_k).
    """
    n = portfolio.n_sectors
    mu = np.zeros(n + 1)
    m1 = np.zeros(n + 1)  # sum_A w_Ak p_A E[sev_A]
    m2 = np.zeros(n + 1)  # sum_A w_Ak p_A E[sev_A^2]
    for o in portfolio.obligors:
        for k in range(n + 1):
            wp = o.weights[k] * o.pd
            mu[k] += wp
            m1[k] += wp * o.severity.mean()
            m2[k] += wp * o.severity.second_moment()
    mean = m1.sum()
    var = m2[0]  # compound Poisson: mu_0 * E[Q_0^2] with mu folded into m2
    for k in range(1, n + 1):
        if mu[k] == 0:
            continue
        alpha = portfolio.sectors[k - 1].alpha
        q_mean = m1[k] / mu[k]
        q_sec = m2[k] / mu[k]
        count_var = mu[k] * (1.0 + mu[k] / alpha)
        var += mu[k] * (q_sec - q_mean**2) + count_var * q_mean**2
    return max(1, math.ceil(mean + 12.0 * math.sqrt(max(var, 0.0))))
