"""Linearized equations of state and the chemical potential mu(T, M) = kT/2 (1 - M^2/M0^2).

Every quadratic-in-M expression is written as (M_a - M)(M_a + M) / M0^2 with
gamma * N replaced by M0^2 / k, so that T*S and N*mu are evaluated along the
same rounding path and the Euler identity T S = mu N holds to a few ulps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .exact import _xlogx, occupation_probabilities
from .model import (
    DEFAULT_REFERENCE,
    DEFAULT_THRESHOLD_X,
    DegenerateFieldError,
    DomainError,
    FieldLike,
    LimitCaseError,
    ModelParams,
    ReferenceState,
    ThermoState,
    ValidityReport,
    as_field,
    check_magnetization,
    reduced_field,
    require_positive_temperature,
    thermo_state,
    validity_report,
)


@dataclass(frozen=True)
class EosEvaluation:
    state: ThermoState
    validity: ValidityReport
    reference: ReferenceState


def entropy_stirling(U: float, B: float, p: ModelParams, n: Optional[int] = None) -> float:
    """S(U, B, N) = -k N (p+ ln p+ + p- ln p-), with 0 ln 0 = 0."""
    n = p.n_agents if n is None else n
    p_plus, p_minus = occupation_probabilities(U, B, n, p.mu_b)
    return -p.k * n * (_xlogx(p_plus) + _xlogx(p_minus))


def shannon_entropy_per_agent(p_plus: float, k: float = 1.0) -> float:
    """Binary entropy in bits times k; equals k at p+ = 1/2."""
    if not 0.0 <= p_plus <= 1.0:
        raise DomainError(f"p_plus must lie in [0, 1], got {p_plus!r}", "p_plus")
    total = 0.0
    for q in (p_plus, 1.0 - p_plus):
        if q > 0.0:
            total -= q * math.log2(q)
    return k * total


def temperature_from_utility(U: float, B: float, p: ModelParams) -> float:
    """Exact inversion of 1/T = -dS/dU: T = mu_b B / (k atanh(U / U0))."""
    if B == 0:
        raise DegenerateFieldError("temperature from utility needs a nonzero field", "field")
    ratio = U / (p.mu_b * B * p.n_agents)
    if ratio == 0:
        raise LimitCaseError("U = 0 corresponds to infinite temperature", "infinite_temperature")
    if abs(ratio) >= 1:
        if abs(ratio) > 1:
            raise DomainError(f"|U| exceeds the maximum utility U0 (U/U0 = {ratio!r})", "utility")
        raise LimitCaseError("|U| = U0 corresponds to zero temperature", "zero_temperature")
    if ratio < 0:
        raise DomainError("U and B of opposite sign describe an inverted system", "utility")
    return p.mu_b * abs(B) / (p.k * math.atanh(ratio))


def caloric_utility(T: float, B: FieldLike, p: ModelParams) -> float:
    """U = N (mu_b B)^2 / (k T)."""
    require_positive_temperature(T)
    return p.n_agents * (p.mu_b * as_field(B).raw) ** 2 / (p.k * T)


def thermal_magnetization(T: float, B: FieldLike, p: ModelParams) -> float:
    """Curie-law magnetization M = gamma B / T."""
    require_positive_temperature(T)
    return p.gamma * as_field(B).raw / T


def linear_regime(T: float, B: FieldLike, p: ModelParams, threshold: float = DEFAULT_THRESHOLD_X) -> ValidityReport:
    x = reduced_field(T, B, p)
    return validity_report(x, thermal_magnetization(T, B, p) / p.m_max, threshold)


def _quadratic_term(scale: float, m_a: float, M: float, p: ModelParams) -> float:
    # scale * (M_a^2 - M^2) / M0^2
    return scale * ((m_a - M) * (m_a + M)) / (p.m_max * p.m_max)


def polarization_entropy(T: float, M: float, ref: ReferenceState, p: ModelParams) -> float:
    """S(T, M) = S_a + (M_a^2 - M^2) / (2 gamma); T enters only through the reference."""
    check_magnetization(M, p)
    m_a = ref.magnetization(p)
    return ref.s_a + _quadratic_term(0.5 * p.k * p.n_agents, m_a, M, p)


def chemical_potential(T: float, M: float, p: ModelParams) -> float:
    """mu = kT/2 (1 - M^2/M0^2)."""
    if T < 0 or not math.isfinite(T):
        raise DomainError("temperature must be nonnegative", "temperature")
    check_magnetization(M, p)
    return _quadratic_term(0.5 * p.k * T, p.m_max, M, p)


def chemical_potential_general(
    T: float, M: float, ref: ReferenceState, p: ModelParams, rtol: float = 1e-9
) -> float:
    """mu integrated from an arbitrary reference state consistent with T_a S_a = N mu_a."""
    if T < 0 or not math.isfinite(T):
        raise DomainError("temperature must be nonnegative", "temperature")
    check_magnetization(M, p)
    ref.check_consistency(p, rtol)
    m_a = ref.magnetization(p)
    return ref.mu_a + ref.s_a * (T - ref.t_a) / p.n_agents + _quadratic_term(0.5 * p.k * T, m_a, M, p)


def gibbs_free_energy(T: float, M: float, p: ModelParams) -> float:
    return p.n_agents * chemical_potential(T, M, p)


def euler_residual(state: ThermoState) -> float:
    """U + T S - M B - mu N (uses G = mu N)."""
    return (
        state.utility
        + state.temperature * state.entropy
        - state.magnetization * state.field.raw
        - state.gibbs
    )


def linear_chain(
    T: float,
    B: FieldLike,
    p: ModelParams,
    ref: ReferenceState = DEFAULT_REFERENCE,
    threshold: float = DEFAULT_THRESHOLD_X,
) -> EosEvaluation:
    """Full linearized state at (T, B).

    Raises DomainError when the Curie-law magnetization overshoots M0, which
    happens once mu_b B / (k T) > 1.
    """
    M = thermal_magnetization(T, B, p)
    check_magnetization(M, p)
    S = polarization_entropy(T, M, ref, p)
    mu = chemical_potential_general(T, M, ref, p)
    state = thermo_state(p, T, B, M, S, mu)
    return EosEvaluation(state, validity_report(reduced_field(T, B, p), M / p.m_max, threshold), ref)
