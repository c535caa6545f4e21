"""Closed-form concentration bounds.

Each tail bound has a ``log_*`` companion returning the natural log of the
probability; the plain version exponentiates it, so very large ``eps`` underflow
gracefully to 0.0 in the probability but stay exact in log-space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, ParameterError


@dataclass(frozen=True)
class SubGammaParams:
    """Sub-gamma variance factor ``v`` (the square root of v^2) and scale ``c``."""

    v: float
    c: float

    def __post_init__(self):
        if not (self.v > 0):
            raise ParameterError("v", f"must be > 0, got {self.v!r}")
        if not (self.c > 0):
            raise ParameterError("c", f"must be > 0, got {self.c!r}")


@dataclass(frozen=True)
class VarianceProxy:
    q_squared: float
    v_squared: float
    simplified: bool

    @property
    def v(self) -> float:
        return math.sqrt(self.v_squared)


def _exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _check_eps(eps):
    eps = float(eps)
    if not eps >= 0:
        raise ParameterError("eps", f"must be >= 0, got {eps!r}")
    return eps


def _check_v(v, name="v"):
    v = float(v)
    if not v > 0:
        raise ParameterError(name, f"must be > 0, got {v!r}")
    return v


def log_hw_tail_bound(eps: float, v: float) -> float:
    eps, v = _check_eps(eps), _check_v(v)
    return -min(eps * eps / (128.0 * v * v), eps / (16.0 * v))


def hw_tail_bound(eps: float, v: float) -> float:
    """Upper bound on ``P[E(x) > eps]`` (and on the lower tail) for the
    off-diagonal quadratic form with variance proxy ``v``."""
    return math.exp(log_hw_tail_bound(eps, v))


def log_subgaussian_tail_bound(eps: float, v: float) -> float:
    eps, v = _check_eps(eps), _check_v(v)
    return -eps * eps / (2.0 * v * v)


def subgaussian_tail_bound(eps: float, v: float) -> float:
    return math.exp(log_subgaussian_tail_bound(eps, v))


def log_subgamma_tail_bound(eps: float, params: SubGammaParams) -> float:
    eps = _check_eps(eps)
    v, c = params.v, params.c
    return -min(eps * eps / (4.0 * v * v), eps / (4.0 * c))


def subgamma_tail_bound(eps: float, params: SubGammaParams) -> float:
    """Bernstein-type tail ``exp(-min(eps^2/4v^2, eps/4c))``; the branch
    switches at ``eps = v^2 / c``."""
    return math.exp(log_subgamma_tail_bound(eps, params))


def log_subgauss_square_mgf_bound(t: float, v: float) -> float:
    t, v = float(t), _check_v(v)
    if t < 0:
        raise ParameterError("t", f"must be >= 0, got {t!r}")
    a = 2.0 * t * v * v
    if a >= 1.0:
        raise DomainError("t", f"2 t v^2 = {a!r} >= 1; bound does not exist")
    return a / (1.0 - a)


def subgauss_square_mgf_bound(t: float, v: float) -> float:
    """Bound on ``E exp(t X^2)`` for ``X`` sub-gaussian with factor ``v^2``."""
    return _exp(log_subgauss_square_mgf_bound(t, v))


def log_quadform_mgf_bound(t: float, v: float) -> float:
    t, v = float(t), _check_v(v)
    if 4.0 * abs(t) * v >= 1.0:
        raise DomainError("t", f"4|t|v = {4.0 * abs(t) * v!r} >= 1; bound does not exist")
    a = 16.0 * t * t * v * v
    return a / (1.0 - a)


def quadform_mgf_bound(t: float, v: float) -> float:
    """Bound on ``E exp(t E(x))``, valid for ``4 |t| v < 1``."""
    return _exp(log_quadform_mgf_bound(t, v))


def quadform_subgamma_params(v: float) -> SubGammaParams:
    """Sub-gamma parametrisation of ``E(x)``: ``(sqrt(32 v^2), 4 v)``."""
    v = _check_v(v)
    return SubGammaParams(v=math.sqrt(32.0 * v * v), c=4.0 * v)


def variance_proxy(p: float, s: int) -> VarianceProxy:
    """Second-moment bound ``q^2 = p^2 + p(1-p)/s`` on the column overlap and
    the variance proxy used by the tail bound.

    ``v^2 = 2 p^2`` when ``p >= 1/s`` (then ``q^2 <= 2 p^2``); otherwise
    ``v^2 = q^2`` is used directly.
    """
    p = float(p)
    if not (0.0 < p <= 1.0):
        raise ParameterError("p", f"must lie in (0, 1], got {p!r}")
    if int(s) < 1:
        raise ParameterError("s", f"must be >= 1, got {s!r}")
    q_sq = p * p + p * (1.0 - p) / s
    # p >= 1/s, tolerant of rounding in p = s/d
    if p * s >= 1.0 - 1e-12:
        return VarianceProxy(q_sq, 2.0 * p * p, True)
    return VarianceProxy(q_sq, q_sq, False)
