"""Matrix parameters (d, s, p) for a target distortion and failure probability.

All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Optional

from .errors import ParameterError

# p = eps / (SPARSITY_CONST * log(2/delta)),  d = ceil(DIM_CONST * log(2/delta)^2 / eps^2)
SPARSITY_CONST = 16.0 * math.sqrt(2.0)
DIM_CONST = 512.0


@dataclass(frozen=True)
class JLParams:
    """Parameters of a sparse sign-consistent embedding.

    ``epsilon``/``delta``/``p_nominal`` are ``None`` when the matrix shape was
    given explicitly as ``(d, s)`` instead of being derived.
    """

    d: int
    s: int
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    p_nominal: Optional[float] = None
    warnings: tuple = field(default=(), compare=False)

    @property
    def p_actual(self) -> float:
        return self.s / self.d

    @property
    def feasible(self) -> bool:
        # p >= 1/s  <=>  s^2 >= d, kept in integers
        return self.s * self.s >= self.d

    @classmethod
    def explicit(cls, d: int, s: int) -> "JLParams":
        return cls(d=int(d), s=int(s))

    def to_dict(self) -> dict:
        out = asdict(self)
        out["warnings"] = list(self.warnings)
        out["p_actual"] = self.p_actual
        out["feasible"] = self.feasible
        return out


def _check_unit_interval(name: str, value: float) -> float:
    value = float(value)
    if not (0.0 < value < 1.0):
        raise ParameterError(name, f"must lie in (0, 1), got {value!r}")
    return value


def dimension_formula(epsilon: float, delta: float) -> float:
    """Output dimension before rounding up."""
    return DIM_CONST * math.log(2.0 / delta) ** 2 / epsilon**2


def sparsity_formula(epsilon: float, delta: float) -> float:
    return epsilon / (SPARSITY_CONST * math.log(2.0 / delta))


def compute_parameters(epsilon: float, delta: float) -> JLParams:
    """Derive ``(d, s)`` from the target distortion ``epsilon`` and failure
    probability ``delta``.

    ``s`` is ``ceil(p_nominal * d)``; if that exceeds ``d`` the column is made
    dense (``s = d``) and a warning is attached.

    >>> p = compute_parameters(0.5, 0.1)
    >>> (p.d, p.s)
    (18380, 136)
    """
    epsilon = _check_unit_interval("epsilon", epsilon)
    delta = _check_unit_interval("delta", delta)

    d = math.ceil(dimension_formula(epsilon, delta))
    p_nominal = sparsity_formula(epsilon, delta)
    s = math.ceil(p_nominal * d)
    warnings = []
    if s > d:
        warnings.append(f"s={s} exceeds d={d}; clamped to dense columns (s=d)")
        s = d
    return JLParams(
        d=d, s=s, epsilon=epsilon, delta=delta, p_nominal=p_nominal, warnings=tuple(warnings)
    )


def validate_params(params: JLParams) -> list[str]:
    """Return a human-readable list of violated invariants (empty if valid)."""
    violations = []
    if params.epsilon is not None and not (0.0 < params.epsilon < 1.0):
        violations.append(f"epsilon={params.epsilon} not in (0, 1)")
    if params.delta is not None and not (0.0 < params.delta < 1.0):
        violations.append(f"delta={params.delta} not in (0, 1)")
    if params.d < 1:
        violations.append(f"d={params.d} < 1")
    if params.s < 1:
        violations.append(f"s={params.s} < 1")
    if params.s > params.d:
        violations.append(f"s={params.s} > d={params.d}")
    if params.d >= 1 and params.s >= 1 and not params.feasible:
        violations.append(f"s² < d ({params.s * params.s} < {params.d})")
    return violations
