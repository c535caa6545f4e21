"""Monte Carlo estimates of overlap moments, tails and MGFs of the distortion
energy, plus an exact enumeration oracle for tiny configurations.

Trial ``i`` of an experiment with master seed ``seed`` always draws its matrix
from stream ``(seed, i)`` (see :mod:`sscjl.sampler`), so results do not depend
on how trials are split across worker threads.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import stats

from .bounds import hw_tail_bound, quadform_mgf_bound, variance_proxy
from .errors import CapacityError, DomainError, NormalizationError, ParameterError
from .params import JLParams
from .sampler import (
    LANE_BASELINE,
    LANE_MATRIX,
    LANE_VECTOR,
    SeedSpec,
    make_rng,
    sample_matrix,
    sample_supports,
)
from .transform import UNIT_TOL, distortion_energy, overlap_counts

CONFIDENCE = 0.99
ENUMERATION_LIMIT = 10**6
_CHUNK = 256


def clopper_pearson(k: int, n: int, level: float = CONFIDENCE) -> tuple[float, float]:
    """Exact two-sided binomial confidence interval for ``k`` successes in ``n``."""
    if n < 1:
        raise ParameterError("n", "need at least one trial")
    alpha = 1.0 - level
    lo = 0.0 if k == 0 else float(stats.beta.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - alpha / 2, k + 1, n - k))
    return lo, hi


def normal_quantile(level=CONFIDENCE):
    """Two-sided standard normal critical value."""
    return float(stats.norm.ppf(0.5 + level / 2))


def random_unit_vector(m: int, rng: np.random.Generator) -> np.ndarray:
    while True:
        g = rng.standard_normal(m)
        norm = np.linalg.norm(g)
        if norm > 0:
            return g / norm


def fixed_test_vector(m: int, kind: str = "random", seed: int = 0) -> np.ndarray:
    """Named unit test vectors: ``random`` (drawn from the seed's vector lane),
    ``uniform`` (all entries ``1/sqrt(m)``) or ``basis`` (``e_0``)."""
    if kind == "random":
        return random_unit_vector(m, make_rng(seed, 0, LANE_VECTOR))
    if kind == "uniform":
        return np.full(m, 1.0 / math.sqrt(m))
    if kind == "basis":
        x = np.zeros(m)
        x[0] = 1.0
        return x
    raise ParameterError("x", f"unknown test vector kind {kind!r}")


def _check_trials(trials):
    if int(trials) < 1:
        raise ParameterError("trials", f"must be >= 1, got {trials}")
    return int(trials)


def _unit(x, m):
    x = np.asarray(x, dtype=float)
    if x.shape != (m,):
        raise ParameterError("x", f"expected length {m}, got shape {x.shape}")
    if abs(np.linalg.norm(x) - 1.0) > UNIT_TOL:
        raise NormalizationError("test vector must have unit norm")
    return x


def sample_energies(d, m, s, x, trials, seed, workers=1) -> np.ndarray:
    """Distortion energy of ``x`` under ``trials`` independent matrices.

    ``x=None`` draws a fresh random unit vector for every trial (from the
    trial's vector lane); otherwise the same unit vector is used throughout.
    """
    trials = _check_trials(trials)
    if x is not None:
        x = _unit(x, m)

    def run(start):
        stop = min(start + _CHUNK, trials)
        out = np.empty(stop - start)
        for i in range(start, stop):
            A = sample_matrix(d, m, s, SeedSpec(seed, i))
            xi = x if x is not None else random_unit_vector(m, make_rng(seed, i, LANE_VECTOR))
            out[i - start] = distortion_energy(A, xi)
        return out

    starts = range(0, trials, _CHUNK)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, starts))
    else:
        parts = [run(st) for st in starts]
    return np.concatenate(parts)


@dataclass
class TailCurve:
    """Empirical exceedance probabilities on an ``eps`` grid with
    Clopper-Pearson intervals."""

    eps_grid: np.ndarray
    counts: np.ndarray
    trials: int
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    side: str = "upper"

    @property
    def probabilities(self) -> np.ndarray:
        return self.counts / self.trials

    @classmethod
    def from_samples(cls, samples, eps_grid, side="upper", level=CONFIDENCE):
        samples = np.asarray(samples)
        eps_grid = np.asarray(eps_grid, dtype=float)
        if np.any(np.diff(eps_grid) <= 0) or np.any(eps_grid <= 0):
            raise ParameterError("eps_grid", "must be strictly increasing and positive")
        if side == "upper":
            counts = np.array([np.count_nonzero(samples > e) for e in eps_grid])
        elif side == "lower":
            counts = np.array([np.count_nonzero(samples < -e) for e in eps_grid])
        else:
            raise ParameterError("side", "must be 'upper' or 'lower'")
        n = samples.size
        ci = np.array([clopper_pearson(int(k), n, level) for k in counts]).reshape(-1, 2)
        return cls(eps_grid, counts, n, ci[:, 0], ci[:, 1], side)

    def to_dict(self):
        return {
            "side": self.side,
            "eps_grid": self.eps_grid.tolist(),
            "counts": self.counts.tolist(),
            "trials": self.trials,
            "probability": self.probabilities.tolist(),
            "ci_lower": self.ci_lower.tolist(),
            "ci_upper": self.ci_upper.tolist(),
        }


@dataclass
class TailEstimate:
    upper: TailCurve
    lower: TailCurve
    energies: np.ndarray = field(repr=False)
    v: float

    def bound(self) -> np.ndarray:
        return np.array([hw_tail_bound(e, self.v) for e in self.upper.eps_grid])

    def dominance_margins(self) -> np.ndarray:
        """``bound - ci_lower`` per grid point and side (upper row, lower row);
        a negative entry means the bound is significantly exceeded."""
        b = self.bound()
        return np.vstack([b - self.upper.ci_lower, b - self.lower.ci_lower])

    def symmetry_z(self) -> np.ndarray:
        """Paired z-score of upper minus lower exceedance frequency per grid
        point (the two events are disjoint outcomes of the same trials)."""
        n = self.upper.trials
        pu, pl = self.upper.probabilities, self.lower.probabilities
        var = (pu + pl - (pu - pl) ** 2) / n
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(var > 0, (pu - pl) / np.sqrt(var), 0.0)
        return z


def default_eps_grid(v: float, points: int = 16) -> np.ndarray:
    return np.geomspace(v / 4.0, 16.0 * v, points)


def default_t_grid(v: float) -> np.ndarray:
    t_max = 1.0 / (4.0 * v)
    fr = np.array([0.2, 0.4, 0.6, 0.8])
    return np.concatenate([-fr[::-1], fr]) * t_max


def proxy_for(d: int, s: int):
    return variance_proxy(s / d, s)


def estimate_tail(d, m, s, x, eps_grid=None, trials=10_000, seed=0, workers=1) -> TailEstimate:
    trials = _check_trials(trials)
    x = _unit(x, m)
    v = proxy_for(d, s).v
    if eps_grid is None:
        eps_grid = default_eps_grid(v)
    energies = sample_energies(d, m, s, x, trials, seed, workers)
    return TailEstimate(
        upper=TailCurve.from_samples(energies, eps_grid, "upper"),
        lower=TailCurve.from_samples(energies, eps_grid, "lower"),
        energies=energies,
        v=v,
    )


@dataclass
class MomentEstimate:
    mean_q: float
    mean_q_sq: float
    se_q: float
    se_q_sq: float
    trials: int
    overlaps: np.ndarray = field(repr=False)

    def to_dict(self):
        return {
            "mean_Q": self.mean_q,
            "mean_Q_squared": self.mean_q_sq,
            "se_Q": self.se_q,
            "se_Q_squared": self.se_q_sq,
            "trials": self.trials,
        }


def _mean_se(a: np.ndarray) -> tuple[float, float]:
    if a.size < 2:
        return float(a.mean()), math.nan
    return float(a.mean()), float(a.std(ddof=1) / math.sqrt(a.size))


def estimate_moment_Q(d, s, trials, seed) -> MomentEstimate:
    """Sample ``trials`` independent column pairs and average their overlap
    ``Q`` and ``Q^2``.

    All pairs come from the single stream ``(seed, 0)``; pair ``k`` uses
    columns ``2k`` and ``2k+1``.
    """
    trials = _check_trials(trials)
    rng = make_rng(seed, 0, LANE_MATRIX)
    per_chunk = max(1, (1 << 20) // (2 * s))
    q = np.empty(trials)
    for start in range(0, trials, per_chunk):
        n = min(per_chunk, trials - start)
        sup = sample_supports(d, s, 2 * n, rng)
        q[start:start + n] = overlap_counts(sup[0::2], sup[1::2]) / s
    mq, se_q = _mean_se(q)
    mq2, se_q2 = _mean_se(q * q)
    return MomentEstimate(mq, mq2, se_q, se_q2, trials, q)


@dataclass
class ExactDistribution:
    """Finite law of ``E(x)``: atoms with exact rational probabilities."""

    values: list
    probs: list  # list[Fraction]

    def upper_tail(self, eps: float) -> float:
        return float(sum(p for v, p in zip(self.values, self.probs) if v > eps))

    def lower_tail(self, eps: float) -> float:
        return float(sum(p for v, p in zip(self.values, self.probs) if v < -eps))

    def mgf(self, t: float) -> float:
        return float(sum(float(p) * math.exp(t * v) for v, p in zip(self.values, self.probs)))

    def to_dict(self):
        return {"values": list(self.values), "probabilities": [float(p) for p in self.probs]}


def exact_tail_enumeration(d, m, s, x, limit=ENUMERATION_LIMIT) -> ExactDistribution:
    """Enumerate every support/sign configuration (all equally likely) and
    tabulate the exact law of ``E(x)``.

    Values are computed from the off-diagonal overlap sum with plain set
    intersections, independently of :func:`distortion_energy`.
    """
    x = [float(v) for v in _unit(x, m)]
    if not (1 <= s <= d):
        raise ParameterError("s", f"must satisfy 1 <= s <= d={d}")
    n_sub = math.comb(d, s)
    total = n_sub**m * 2**m
    if total > limit:
        raise CapacityError(f"{total} configurations exceed the enumeration limit {limit}")
    subsets = [frozenset(c) for c in itertools.combinations(range(d), s)]
    counts: dict = {}
    for supports in itertools.product(subsets, repeat=m):
        overlap = [[len(supports[j] & supports[k]) / s for k in range(m)] for j in range(m)]
        for signs in itertools.product((-1, 1), repeat=m):
            e = 0.0
            for j in range(m):
                for k in range(m):
                    if j != k:
                        e += overlap[j][k] * signs[j] * signs[k] * x[j] * x[k]
            key = round(e, 12) + 0.0
            counts[key] = counts.get(key, 0) + 1
    values = sorted(counts)
    return ExactDistribution(values, [Fraction(counts[v], total) for v in values])


@dataclass
class DJLResult:
    epsilon: float
    delta: float
    failures: int
    trials: int
    ci_lower: float
    ci_upper: float
    energies: np.ndarray = field(repr=False)
    warnings: list = field(default_factory=list)

    @property
    def rate(self) -> float:
        return self.failures / self.trials

    @property
    def passed(self) -> bool:
        return self.ci_upper <= self.delta

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "failures": self.failures,
            "trials": self.trials,
            "failure_rate": self.rate,
            "ci_lower": self.ci_lower,
            "ci_upper": self.ci_upper,
            "max_abs_energy": float(np.max(np.abs(self.energies))),
        }


def verify_djl(params: JLParams, m, trials, seed, x=None, workers=1, epsilon=None) -> DJLResult:
    """Failure rate of ``|E(x)| <= eps`` over independent matrices.

    ``x=None`` uses a fresh random unit vector per trial.  ``epsilon``
    overrides the threshold while keeping the matrix shape.
    """
    if params.epsilon is None or params.delta is None:
        raise ParameterError("params", "distributional check needs epsilon and delta")
    eps = params.epsilon if epsilon is None else float(epsilon)
    warnings = list(params.warnings)
    if not params.feasible:
        warnings.append(f"infeasible parameters: s^2={params.s ** 2} < d={params.d}")
    energies = sample_energies(params.d, m, params.s, x, trials, seed, workers)
    failures = int(np.count_nonzero(np.abs(energies) > eps))
    lo, hi = clopper_pearson(failures, energies.size)
    return DJLResult(eps, params.delta, failures, energies.size, lo, hi, energies, warnings)


@dataclass
class MGFEstimate:
    t_grid: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    bound: np.ndarray
    v: float
    trials: int

    def margins(self) -> np.ndarray:
        """``bound + 3 SE - mean``; negative means dominance is violated."""
        return self.bound + 3.0 * self.se - self.mean

    def to_dict(self):
        return {
            "t_grid": self.t_grid.tolist(),
            "empirical_mgf": self.mean.tolist(),
            "se": self.se.tolist(),
            "bound": self.bound.tolist(),
            "v": self.v,
            "trials": self.trials,
        }


def mgf_from_energies(energies, t_grid, v) -> MGFEstimate:
    t_grid = np.asarray(t_grid, dtype=float)
    for t in t_grid:
        if 4.0 * abs(t) * v >= 1.0:
            raise DomainError("t", f"t={t!r} outside the MGF-bound domain 4|t|v < 1 (v={v!r})")
    energies = np.asarray(energies)
    means, ses = [], []
    for t in t_grid:
        mu, se = _mean_se(np.exp(t * energies))
        means.append(mu)
        ses.append(se)
    bound = np.array([quadform_mgf_bound(t, v) for t in t_grid])
    return MGFEstimate(t_grid, np.array(means), np.array(ses), bound, v, energies.size)


def estimate_mgf(d, m, s, x, t_grid=None, trials=10_000, seed=0, workers=1) -> MGFEstimate:
    v = proxy_for(d, s).v
    if t_grid is None:
        t_grid = default_t_grid(v)
    # validate the grid before spending time on sampling
    mgf_from_energies(np.zeros(1), t_grid, v)
    energies = sample_energies(d, m, s, x, trials, seed, workers)
    return mgf_from_energies(energies, t_grid, v)


QUANTILES = (0.5, 0.9, 0.99, 0.999, 1.0)


@dataclass
class BaselineComparison:
    d: int
    m: int
    s: int
    trials: int
    quantiles: tuple
    dense_abs_energy: np.ndarray
    sparse_abs_energy: np.ndarray

    def to_dict(self):
        return {
            "d": self.d,
            "m": self.m,
            "s": self.s,
            "trials": self.trials,
            "quantiles": list(self.quantiles),
            "dense_rademacher_abs_energy": self.dense_abs_energy.tolist(),
            "sparse_sign_consistent_abs_energy": self.sparse_abs_energy.tolist(),
        }


def dense_energies(d, m, x, trials, seed) -> np.ndarray:
    """Distortion energy under dense ``+-1/sqrt(d)`` Rademacher matrices."""
    trials = _check_trials(trials)
    x = _unit(x, m)
    out = np.empty(trials)
    for i in range(trials):
        rng = make_rng(seed, i, LANE_BASELINE)
        B = 2.0 * rng.integers(0, 2, size=(d, m), dtype=np.int8) - 1.0
        y = (B @ x) / math.sqrt(d)
        out[i] = float(y @ y) - 1.0
    return out


def compare_baseline(d, m, x, trials, seed, s: Optional[int] = None, workers=1) -> BaselineComparison:
    """Quantiles of ``|E(x)|`` for a dense Rademacher matrix next to the sparse
    sign-consistent one at the same ``d``.  ``s`` defaults to
    ``ceil(sqrt(d))``, the sparsest choice with ``s^2 >= d``."""
    if s is None:
        s = math.isqrt(d - 1) + 1 if d > 1 else 1
    dense = dense_energies(d, m, x, trials, seed)
    sparse = sample_energies(d, m, s, x, trials, seed, workers)
    q = np.array(QUANTILES)
    return BaselineComparison(
        d, m, s, trials, QUANTILES,
        np.quantile(np.abs(dense), q), np.quantile(np.abs(sparse), q),
    )
