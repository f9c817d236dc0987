"""Demand scenarios, moment estimates, moment ambiguity sets, penalty schedules.

Random draws come from ``numpy.random.Generator(PCG64(seed))``; PCG64 output
is stable across platforms and numpy releases for a given seed, so sampled
scenario sets are reproducible bit for bit.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .instance import InputError, ScenarioSet
from .lp import OPTIMAL, solve_lp
from .model import EQ, GE, LE, ModelBuilder

# 2 * 1.96: the 2.5%-97.5% range of a normal distribution in standard deviations
NORMAL_95_WIDTH = 3.92


class AmbiguityError(ValueError):
    """The moment bounds admit no probability distribution on the support."""


def rng_for(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True, eq=False)
class MomentEstimate:
    """Per (site, period) mean, second moment and standard deviation."""

    mean: np.ndarray
    second_moment: np.ndarray
    std_dev: np.ndarray

    def __post_init__(self):
        for f in ("mean", "second_moment", "std_dev"):
            a = np.array(getattr(self, f), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, f, a)
        if np.any(self.std_dev < 0):
            raise InputError("standard deviations must be nonnegative")
        if np.any(self.second_moment < self.mean ** 2 - 1e-9 * (1 + self.mean ** 2)):
            raise InputError("second moment is below the squared mean")

    @classmethod
    def from_mean_std(cls, mean, std) -> "MomentEstimate":
        mean = np.asarray(mean, dtype=float)
        std = np.broadcast_to(np.asarray(std, dtype=float), mean.shape)
        return cls(mean, mean ** 2 + std ** 2, std)

    @property
    def shape(self):
        return self.mean.shape


def sample_uniform_scenarios(moments: MomentEstimate, half_width_factor: float,
                             count: int, seed: int) -> ScenarioSet:
    """I.i.d. draws on ``[(1-f) mu, (1+f) mu]`` per coordinate, equal weights."""
    if not 0.0 <= half_width_factor <= 1.0:
        raise InputError("half_width_factor must lie in [0, 1]")
    if count < 1:
        raise InputError("count must be >= 1")
    mu = moments.mean
    lo = (1.0 - half_width_factor) * mu
    hi = (1.0 + half_width_factor) * mu
    u = rng_for(seed).random((count,) + mu.shape)
    demand = lo + (hi - lo) * u
    return ScenarioSet(demand, np.full(count, 1.0 / count))


def sample_normal_scenarios(moments: MomentEstimate, count: int, seed: int) -> ScenarioSet:
    """I.i.d. normal draws with negative values clamped to zero."""
    if count < 1:
        raise InputError("count must be >= 1")
    z = rng_for(seed).standard_normal((count,) + moments.mean.shape)
    demand = np.maximum(moments.mean + moments.std_dev * z, 0.0)
    return ScenarioSet(demand, np.full(count, 1.0 / count))


def moments_from_quantiles(q025, median, q975):
    """Mean and standard deviation from the 2.5%, 50% and 97.5% quantiles.

    Uses the min/median/max estimator with the outer quantiles standing in
    for the range: ``mean = (a + 2m + b) / 4`` and ``sd = (b - a) / 3.92``.
    Works elementwise on arrays.
    """
    a = np.asarray(q025, dtype=float)
    m = np.asarray(median, dtype=float)
    b = np.asarray(q975, dtype=float)
    if np.any(a > m) or np.any(m > b):
        raise InputError("quantiles must satisfy q025 <= median <= q975")
    mean = (a + 2.0 * m + b) / 4.0
    sd = (b - a) / NORMAL_95_WIDTH
    if mean.ndim == 0:
        return float(mean), float(sd)
    return mean, sd


def empirical_moments(scenarios: ScenarioSet) -> MomentEstimate:
    p = scenarios.probabilities
    d = scenarios.demand
    mu = np.tensordot(p, d, axes=1)
    S = np.tensordot(p, d ** 2, axes=1)
    sd = np.sqrt(np.maximum(S - mu ** 2, 0.0))
    # keep S >= mu^2 exactly despite rounding
    S = np.maximum(S, mu ** 2)
    return MomentEstimate(mu, S, sd)


@dataclass(frozen=True, eq=False)
class AmbiguitySpec:
    """Moment ambiguity set over a finite support.

    The default (special) form bounds, for every (site, period), the mean in
    ``mu +- mean_slack`` and the second moment in
    ``[second_moment_lo * S, second_moment_hi * S]``, plus normalization.
    A general form may be given instead through ``exponents`` (shape
    ``(m, J, T)``, nonnegative integer powers defining product moment
    functions) with bounds ``lower``/``upper``; the normalization row
    (all-zero exponents, bounds 1) is added automatically when missing.
    """

    support: np.ndarray
    moments: MomentEstimate
    mean_slack: np.ndarray
    second_moment_lo: np.ndarray
    second_moment_hi: np.ndarray
    exponents: Optional[np.ndarray] = None
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        sup = np.array(self.support, dtype=float)
        if sup.ndim == 2:
            sup = sup[None]
        if sup.ndim != 3 or sup.shape[0] < 1:
            raise InputError("support must have shape (K, sites, periods) with K >= 1")
        sup.setflags(write=False)
        object.__setattr__(self, "support", sup)
        shp = sup.shape[1:]
        for f in ("mean_slack", "second_moment_lo", "second_moment_hi"):
            a = np.array(np.broadcast_to(np.asarray(getattr(self, f), dtype=float), shp))
            a.setflags(write=False)
            object.__setattr__(self, f, a)
        if self.moments.mean.shape != shp:
            raise InputError("moment estimate does not match the support dimensions")
        if np.any(self.mean_slack < 0):
            raise InputError("mean slack must be nonnegative")
        if np.any(self.second_moment_lo < 0) or np.any(self.second_moment_lo > 1) \
                or np.any(self.second_moment_hi < 1):
            raise InputError("need 0 <= second_moment_lo <= 1 <= second_moment_hi")
        if self.exponents is not None:
            e = np.array(self.exponents, dtype=np.int64)
            if e.ndim == 2:
                e = e[None]
            if e.shape[1:] != shp or np.any(e < 0):
                raise InputError("exponents must be nonnegative integers shaped (m, sites, periods)")
            lo = np.array(self.lower, dtype=float).reshape(-1)
            hi = np.array(self.upper, dtype=float).reshape(-1)
            if lo.shape[0] != e.shape[0] or hi.shape[0] != e.shape[0]:
                raise InputError("need one lower and one upper bound per moment function")
            if not np.any(np.all(e == 0, axis=(1, 2))):
                e = np.concatenate([np.zeros((1,) + shp, dtype=np.int64), e])
                lo = np.concatenate([[1.0], lo])
                hi = np.concatenate([[1.0], hi])
            object.__setattr__(self, "exponents", e)
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)

    @property
    def K(self) -> int:
        return self.support.shape[0]

    @property
    def shape(self):
        return self.support.shape[1:]

    @property
    def is_general(self) -> bool:
        return self.exponents is not None

    def mean_bounds(self):
        mu = self.moments.mean
        return mu - self.mean_slack, mu + self.mean_slack

    def second_moment_bounds(self):
        S = self.moments.second_moment
        return self.second_moment_lo * S, self.second_moment_hi * S

    def moment_system(self):
        """Moment functions at the support points and their bounds.

        Returns ``(F, lower, upper, labels)`` with ``F[k, s] = f_s(xi^k)``.
        """
        K = self.K
        if self.is_general:
            e = self.exponents
            sup = self.support.reshape(K, -1)
            F = np.ones((K, e.shape[0]))
            for s in range(e.shape[0]):
                F[:, s] = np.prod(sup ** e[s].reshape(-1), axis=1)
            labels = [("f", s) for s in range(e.shape[0])]
            return F, self.lower.copy(), self.upper.copy(), labels
        J, T = self.shape
        sup = self.support.reshape(K, -1)
        mlo, mhi = self.mean_bounds()
        slo, shi = self.second_moment_bounds()
        F = np.hstack([np.ones((K, 1)), sup, sup ** 2])
        lower = np.concatenate([[1.0], mlo.ravel(), slo.ravel()])
        upper = np.concatenate([[1.0], mhi.ravel(), shi.ravel()])
        labels = [("normalization",)]
        labels += [("mean", j, t) for j in range(J) for t in range(T)]
        labels += [("second_moment", j, t) for j in range(J) for t in range(T)]
        return F, lower, upper, labels

    def feasible_distribution(self):
        """Some distribution in the set, or raise :class:`AmbiguityError`."""
        F, lo, hi, labels = self.moment_system()
        K, m = F.shape
        scale = 1.0 + np.abs(F).max(axis=0)
        b = ModelBuilder("ambiguity-feasibility")
        p = b.add_vars("p", (K,))
        # normalization is kept hard so the blame lands on a moment bound
        norm = np.all(F == 1.0, axis=0) & (lo == 1.0) & (hi == 1.0)
        b.add_row("normalization", (), p, np.ones(K), EQ, 1.0)
        finite_lo = np.flatnonzero(np.isfinite(lo) & ~norm)
        finite_hi = np.flatnonzero(np.isfinite(hi) & ~norm)
        # elastic rows: violations are paid per unit of scaled moment
        elo = b.add_vars("e_lo", (finite_lo.size,), cost=1.0)
        ehi = b.add_vars("e_hi", (finite_hi.size,), cost=1.0)
        for n, s in enumerate(finite_lo):
            b.add_row("lower", (s,), np.append(p, elo[n]),
                      np.append(F[:, s] / scale[s], 1.0), GE, lo[s] / scale[s])
        for n, s in enumerate(finite_hi):
            b.add_row("upper", (s,), np.append(p, ehi[n]),
                      np.append(F[:, s] / scale[s], -1.0), LE, hi[s] / scale[s])
        sol = solve_lp(b.build())
        if sol.status != OPTIMAL:
            raise AmbiguityError("feasibility check failed to solve")
        if sol.objective > 1e-7:
            viol = [(sol.x[elo[n]], "lower", s) for n, s in enumerate(finite_lo)]
            viol += [(sol.x[ehi[n]], "upper", s) for n, s in enumerate(finite_hi)]
            viol = [v for v in viol if v[0] > 1e-9]
            viol.sort(key=lambda v: -v[0])
            names = ", ".join(f"{side} bound of {_label(labels[s])}" for _, side, s in viol[:5])
            raise AmbiguityError(f"ambiguity set is empty; violated: {names}")
        return np.maximum(sol.x[p], 0.0)


def _label(lab) -> str:
    if lab[0] in ("mean", "second_moment"):
        return f"{lab[0]} (j={lab[1] + 1},t={lab[2] + 1})"
    if lab[0] == "f":
        return f"moment function {lab[1]}"
    return lab[0]


def build_ambiguity_bounds(moments: MomentEstimate, mean_slack_factor, lo_factor,
                           hi_factor, support: ScenarioSet) -> AmbiguitySpec:
    """Moment ambiguity set centred on ``moments`` over the support scenarios.

    Mean slack is ``mean_slack_factor * mu``; second-moment bounds scale the
    estimated second moment by ``lo_factor`` and ``hi_factor``. Raises
    :class:`AmbiguityError` naming the violated bound when no distribution
    on the support satisfies them.
    """
    lo_f = np.asarray(lo_factor, dtype=float)
    hi_f = np.asarray(hi_factor, dtype=float)
    if np.any(lo_f < 0) or np.any(lo_f > 1) or np.any(hi_f < 1):
        raise InputError("need 0 <= lo_factor <= 1 <= hi_factor")
    if np.any(np.asarray(mean_slack_factor) < 0):
        raise InputError("mean_slack_factor must be nonnegative")
    spec = AmbiguitySpec(
        support=support.demand,
        moments=moments,
        mean_slack=np.asarray(mean_slack_factor, dtype=float) * moments.mean,
        second_moment_lo=lo_f,
        second_moment_hi=hi_f,
    )
    spec.feasible_distribution()
    return spec


PENALTY_CASES = {
    "constant": "constant", "i": "constant", "1": "constant",
    "median_based": "median_based", "ii": "median_based", "2": "median_based",
    "elder_based": "elder_based", "iii": "elder_based", "3": "elder_based",
}


def penalty_schedule(case: str, medians=None, elders=None, n_sites: Optional[int] = None,
                     n_periods: Optional[int] = None, constant: float = 100.0) -> np.ndarray:
    """Unit backlog penalty ``(J, T)`` for the three prioritization cases.

    ``constant``: ``constant`` everywhere; ``median_based``: projected median
    demand plus 10; ``elder_based``: 0.001 times the 65+ population of the
    site, the same in every period.
    """
    kind = PENALTY_CASES.get(str(case).lower())
    if kind is None:
        raise InputError(f"unknown penalty case {case!r}")
    if kind == "median_based":
        if medians is None:
            raise InputError("median-based penalties need demand medians")
        return np.asarray(medians, dtype=float) + 10.0
    if kind == "elder_based":
        if elders is None:
            raise InputError("elder-based penalties need 65+ populations")
        if n_periods is None:
            raise InputError("elder-based penalties need the number of periods")
        e = np.asarray(elders, dtype=float).reshape(-1)
        return np.repeat(0.001 * e[:, None], n_periods, axis=1)
    if n_sites is None or n_periods is None:
        if medians is not None:
            n_sites, n_periods = np.shape(medians)
        else:
            raise InputError("constant penalties need the site and period counts")
    return np.full((n_sites, n_periods), float(constant))
