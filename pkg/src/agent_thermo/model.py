"""Domain types, parameter validation and reduced quantities shared by every module.

Units: ``T`` is dimensionless, ``k*T`` carries currency units (k = 1 USD by
default).  The news field is stored as a signed raw value in [-1, 1]; negative
news is handled by symmetry, i.e. computations run on ``|raw|`` and the sign is
carried back onto the magnetization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

DEFAULT_THRESHOLD_X = 0.1


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""

    def __init__(self, message: str, field: Optional[str] = None):
        super().__init__(message)
        self.field = field


class DegenerateFieldError(DomainError):
    """Raised by operations that divide by the news field when B = 0."""


class LimitCaseError(DomainError):
    """A named thermodynamic limit (infinite or zero temperature) was hit."""

    def __init__(self, message: str, limit: str):
        super().__init__(message)
        self.limit = limit


class ReferenceInconsistencyError(DomainError):
    """The reference state violates T_a * S_a = N * mu_a."""


@dataclass(frozen=True)
class ModelParams:
    n_agents: int
    mu_b: float = 1.0
    k: float = 1.0

    def __post_init__(self):
        if isinstance(self.n_agents, bool) or int(self.n_agents) != self.n_agents:
            raise DomainError(f"n_agents must be an integer, got {self.n_agents!r}", "n_agents")
        object.__setattr__(self, "n_agents", int(self.n_agents))
        if self.n_agents < 1:
            raise DomainError(f"n_agents must be >= 1, got {self.n_agents}", "n_agents")
        for name in ("mu_b", "k"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}", name)

    @property
    def m_max(self) -> float:
        """Saturation magnetization M0 = mu_b * N."""
        return self.mu_b * self.n_agents

    @property
    def gamma(self) -> float:
        """Curie-like constant N * mu_b**2 / k."""
        return self.n_agents * self.mu_b**2 / self.k

    def with_agents(self, n_agents: int) -> "ModelParams":
        return ModelParams(n_agents, self.mu_b, self.k)


def make_params(n: int, mu_b: float = 1.0, k: float = 1.0) -> ModelParams:
    return ModelParams(n, mu_b, k)


@dataclass(frozen=True)
class NewsField:
    raw: float

    def __post_init__(self):
        if not math.isfinite(self.raw) or abs(self.raw) > 1.0:
            raise DomainError(f"news field must lie in [-1, 1], got {self.raw!r}", "field")

    @property
    def strength(self) -> float:
        return abs(self.raw)

    @property
    def sign(self) -> float:
        return -1.0 if self.raw < 0 else 1.0

    @property
    def is_degenerate(self) -> bool:
        return self.raw == 0.0


FieldLike = Union[NewsField, float, int]


def as_field(value: FieldLike) -> NewsField:
    if isinstance(value, NewsField):
        return value
    return NewsField(float(value))


def require_positive_temperature(T: float) -> None:
    if not (T > 0 and math.isfinite(T)):
        raise DomainError("temperature must be positive", "temperature")


def reduced_field(T: float, B: FieldLike, p: ModelParams) -> float:
    """x = mu_b * B / (k T), signed like the news field."""
    require_positive_temperature(T)
    return p.mu_b * as_field(B).raw / (p.k * T)


def reduced_magnetization(M: float, p: ModelParams) -> float:
    return M / p.m_max


def check_magnetization(M, p: ModelParams) -> None:
    """Raise unless |M| <= M0; accepts scalars or arrays."""
    worst = float(np.max(np.abs(M))) if np.ndim(M) else abs(M)
    if not math.isfinite(worst) or worst > p.m_max:
        raise DomainError(
            f"|M| = {worst!r} exceeds the saturation magnetization M0 = {p.m_max!r}",
            "magnetization",
        )


@dataclass(frozen=True)
class ValidityReport:
    """Regime of validity of the first-order expansion atanh(x) ~ x.

    ``series_error``/``series_bound`` are only filled by the Taylor regime report.
    """

    x: float
    m: float
    within_linear_regime: bool
    est_rel_error: float
    threshold: float = DEFAULT_THRESHOLD_X
    series_error: Optional[float] = None
    series_bound: Optional[float] = None


def validity_report(x: float, m: float, threshold: float = DEFAULT_THRESHOLD_X) -> ValidityReport:
    if not 0 < threshold < 1:
        raise DomainError(f"threshold must lie in (0, 1), got {threshold!r}", "threshold")
    return ValidityReport(
        x=x,
        m=m,
        within_linear_regime=abs(x) <= threshold,
        est_rel_error=x * x / 3.0,
        threshold=threshold,
    )


@dataclass(frozen=True)
class ThermoState:
    """One equilibrium state.  Build through :func:`thermo_state` to get U and G
    filled consistently (U = M * B, G = N * mu)."""

    temperature: float
    field: NewsField
    magnetization: float
    utility: float
    entropy: float
    chem_potential: float
    gibbs: float

    def __post_init__(self):
        require_positive_temperature(self.temperature)
        if self.entropy < 0:
            raise DomainError(f"entropy must be nonnegative, got {self.entropy!r}", "entropy")


def thermo_state(
    p: ModelParams,
    T: float,
    B: FieldLike,
    M: float,
    S: float,
    mu: float,
) -> ThermoState:
    check_magnetization(M, p)
    f = as_field(B)
    return ThermoState(
        temperature=T,
        field=f,
        magnetization=M,
        utility=M * f.raw,
        entropy=S,
        chem_potential=mu,
        gibbs=p.n_agents * mu,
    )


@dataclass(frozen=True)
class ReferenceState:
    """Anchor of the integration constants; defaults to the saturated T = 0 state.

    ``m_a = None`` means "M0 of whatever parameters the state is used with".
    """

    t_a: float = 0.0
    m_a: Optional[float] = None
    s_a: float = 0.0
    mu_a: float = 0.0

    def __post_init__(self):
        if self.t_a < 0:
            raise DomainError("reference temperature must be nonnegative", "t_a")
        if self.s_a < 0:
            raise DomainError("reference entropy must be nonnegative", "s_a")

    def magnetization(self, p: ModelParams) -> float:
        m_a = p.m_max if self.m_a is None else self.m_a
        check_magnetization(m_a, p)
        return m_a

    def check_consistency(self, p: ModelParams, rtol: float = 1e-9) -> None:
        lhs = self.t_a * self.s_a
        rhs = p.n_agents * self.mu_a
        if lhs != rhs and abs(lhs - rhs) > rtol * max(abs(lhs), abs(rhs)):
            raise ReferenceInconsistencyError(
                f"reference state violates T_a*S_a = N*mu_a: {lhs!r} != {rhs!r}", "reference"
            )


DEFAULT_REFERENCE = ReferenceState()
