"""Numerical checks of the equation-of-state chain.

Every check returns a :class:`CheckReport`; tolerances are always surfaced in
the report.  Relative errors are taken against ``max(|expected|, scale)`` where
``scale`` is the natural magnitude of the checked quantity, so checks whose
expected value is zero (closed loops, zero field) stay meaningful.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .eos import (
    caloric_utility,
    chemical_potential,
    chemical_potential_general,
    entropy_stirling,
    polarization_entropy,
    temperature_from_utility,
    thermal_magnetization,
)
from .exact import (
    binary_entropy_nats,
    chemical_potential_exact,
    entropy_canonical,
    ln_binomial,
    magnetization_exact,
    utility_exact,
)
from .model import (
    DEFAULT_REFERENCE,
    DEFAULT_THRESHOLD_X,
    DegenerateFieldError,
    DomainError,
    ModelParams,
    ReferenceState,
    ValidityReport,
    check_magnetization,
    reduced_field,
    require_positive_temperature,
    validity_report,
)

DEFAULT_STEP_FACTOR = sys.float_info.epsilon ** (1.0 / 3.0)


class StepTooLargeError(DomainError):
    """A finite-difference stencil leaves the domain of the differentiated function."""


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one numerical check.

    ``mode`` selects which error is compared with ``tolerance``: ``"abs"``,
    ``"rel"``, or ``"report"`` for characterization entries that always pass
    (their tolerance is infinite).
    """

    name: str
    measured: float
    expected: float
    abs_err: float
    rel_err: float
    tolerance: float
    passed: bool
    mode: str = "rel"
    metadata: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "measured": _jsonable(self.measured),
            "expected": _jsonable(self.expected),
            "abs_err": _jsonable(self.abs_err),
            "rel_err": _jsonable(self.rel_err),
            "tolerance": _jsonable(self.tolerance),
            "mode": self.mode,
            "passed": self.passed,
            "metadata": {k: _jsonable(v) for k, v in self.metadata.items()},
        }


def _jsonable(value):
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    return value


def make_report(
    name: str,
    measured: float,
    expected: float,
    tolerance: float,
    mode: str = "rel",
    scale: float = 0.0,
    metadata: Optional[dict] = None,
) -> CheckReport:
    if mode not in ("abs", "rel", "report"):
        raise ValueError(f"unknown check mode {mode!r}")
    abs_err = abs(measured - expected)
    denom = max(abs(expected), scale)
    if denom > 0:
        rel_err = abs_err / denom
    else:
        rel_err = 0.0 if abs_err == 0 else math.inf
    if mode == "report":
        tolerance = math.inf
        passed = True
    else:
        passed = (abs_err if mode == "abs" else rel_err) <= tolerance
    return CheckReport(name, measured, expected, abs_err, rel_err, tolerance, passed, mode, dict(metadata or {}))


# ---------------------------------------------------------------------------
# finite differences


def _inverse_temperature(U: float, B: float, p: ModelParams) -> float:
    # 1/T is odd in U; temperature_from_utility only accepts the U > 0 branch
    if U == 0:
        return 0.0
    if U > 0:
        return 1.0 / temperature_from_utility(U, B, p)
    return -1.0 / temperature_from_utility(-U, B, p)


def _field_derivative_closed_form(U: float, B: float, p: ModelParams) -> float:
    # M/T = k U atanh(U/U0) / (mu_b B^2)
    u0 = p.mu_b * B * p.n_agents
    return p.k * U * math.atanh(U / u0) / (p.mu_b * B * B)


def _temperature_fd(U: float, B: float, p: ModelParams, h: float) -> float:
    return -(entropy_stirling(U + h, B, p) - entropy_stirling(U - h, B, p)) / (2 * h)


def _field_fd(U: float, B: float, p: ModelParams, h: float) -> float:
    return (entropy_stirling(U, B + h, p) - entropy_stirling(U, B - h, p)) / (2 * h)


def _check_temperature_stencil(U, B, p, h):
    if B <= 0:
        raise DegenerateFieldError("derivative checks need B > 0", "field")
    u0 = p.mu_b * B * p.n_agents
    if not h > 0:
        raise DomainError("step must be positive", "h")
    if abs(U) + h >= u0:
        raise StepTooLargeError(f"U +- h leaves the open interval (-U0, U0) with h = {h!r}", "h")


def _check_field_stencil(U, B, p, h):
    if B <= 0:
        raise DegenerateFieldError("derivative checks need B > 0", "field")
    if not h > 0:
        raise DomainError("step must be positive", "h")
    if B - h <= 0 or abs(U) >= p.mu_b * (B - h) * p.n_agents:
        raise StepTooLargeError(f"B - h leaves the domain for U = {U!r} with h = {h!r}", "h")


def check_temperature_derivative(
    U: float, B: float, p: ModelParams, h: Optional[float] = None, tolerance: float = 1e-6
) -> CheckReport:
    """Central difference of -dS/dU against 1/T from the exact inversion."""
    u0 = p.mu_b * B * p.n_agents
    h = DEFAULT_STEP_FACTOR * u0 if h is None else h
    _check_temperature_stencil(U, B, p, h)
    measured = _temperature_fd(U, B, p, h)
    expected = _inverse_temperature(U, B, p)
    return make_report(
        "temperature_derivative",
        measured,
        expected,
        tolerance,
        scale=p.k / (p.mu_b * B),
        metadata={"h": h, "h_over_scale": h / u0, "u_over_u0": U / u0},
    )


def check_field_derivative(
    U: float, B: float, p: ModelParams, h: Optional[float] = None, tolerance: float = 1e-6
) -> CheckReport:
    """Central difference of dS/dB at fixed U against M/T."""
    h = DEFAULT_STEP_FACTOR * B if h is None else h
    _check_field_stencil(U, B, p, h)
    measured = _field_fd(U, B, p, h)
    expected = _field_derivative_closed_form(U, B, p)
    return make_report(
        "field_derivative",
        measured,
        expected,
        tolerance,
        metadata={"h": h, "h_over_scale": h / B, "u_over_u0": U / (p.mu_b * B * p.n_agents)},
    )


_DERIVATIVES: Dict[str, Tuple[Callable, Callable, Callable, Callable]] = {
    "temperature": (_temperature_fd, _inverse_temperature, _check_temperature_stencil, lambda U, B, p: p.mu_b * B * p.n_agents),
    "field": (_field_fd, _field_derivative_closed_form, _check_field_stencil, lambda U, B, p: B),
}


def observed_orders(
    kind: str, U: float, B: float, p: ModelParams, h0: Optional[float] = None, halvings: int = 2
) -> Tuple[List[float], List[float]]:
    """Errors at h0, h0/2, ... and the observed orders log2(e_i / e_{i+1})."""
    fd, exact, stencil, scale_fn = _DERIVATIVES[kind]
    h = 1e-2 * scale_fn(U, B, p) if h0 is None else h0
    expected = exact(U, B, p)
    errors = []
    for _ in range(halvings + 1):
        stencil(U, B, p, h)
        errors.append(abs(fd(U, B, p, h) - expected))
        h /= 2
    orders = [math.log2(a / b) if a > 0 and b > 0 else math.nan for a, b in zip(errors, errors[1:])]
    return errors, orders


def check_convergence_order(
    kind: str, U: float, B: float, p: ModelParams, h0: Optional[float] = None, tolerance: float = 0.2
) -> CheckReport:
    """Second-order convergence of a central difference, by halving h twice."""
    errors, orders = observed_orders(kind, U, B, p, h0)
    # judge the worst of the observed orders
    measured = max(orders, key=lambda o: abs(o - 2.0) if math.isfinite(o) else math.inf)
    return make_report(
        f"{kind}_derivative_order",
        measured,
        2.0,
        tolerance,
        mode="abs",
        metadata={"errors": errors, "orders": orders},
    )


# ---------------------------------------------------------------------------
# Gibbs-Duhem path integration


@dataclass(frozen=True)
class PathSpec:
    """Piecewise linear path through (T, M) waypoints."""

    waypoints: Tuple[Tuple[float, float], ...]
    steps_per_segment: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "waypoints", tuple((float(t), float(m)) for t, m in self.waypoints))
        if len(self.waypoints) < 2:
            raise DomainError("a path needs at least two waypoints", "waypoints")
        if self.steps_per_segment < 1:
            raise DomainError("steps_per_segment must be >= 1", "steps_per_segment")
        for t, _ in self.waypoints:
            require_positive_temperature(t)

    @property
    def is_closed(self) -> bool:
        return self.waypoints[0] == self.waypoints[-1]

    def validate(self, p: ModelParams) -> None:
        for _, m in self.waypoints:
            check_magnetization(m, p)

    @classmethod
    def from_reduced(cls, points: Sequence[Tuple[float, float]], p: ModelParams, steps: int = 1000) -> "PathSpec":
        return cls(tuple((t, m * p.m_max) for t, m in points), steps)


def rectangle_path(
    t_lo: float, t_hi: float, m_lo: float, m_hi: float, p: ModelParams, steps: int = 1000
) -> PathSpec:
    """Counter-clockwise closed rectangle in (T, m = M/M0)."""
    corners = [(t_lo, m_lo), (t_hi, m_lo), (t_hi, m_hi), (t_lo, m_hi), (t_lo, m_lo)]
    return PathSpec.from_reduced(corners, p, steps)


def _trapezoid(f: Callable[[np.ndarray], np.ndarray], n: int) -> float:
    values = f(np.arange(n + 1) / n)
    values[0] *= 0.5
    values[-1] *= 0.5
    return math.fsum(values.tolist()) / n


def _segment_integral(a, b, ref, p, n):
    (t0, m0), (t1, m1) = a, b
    dt, dm = t1 - t0, m1 - m0
    n_agents = p.n_agents

    def integrand(s):
        T = t0 + s * dt
        M = m0 + s * dm
        S = polarization_entropy(T, M, ref, p)
        # field from the Curie law, B = M T / gamma
        B = M * T / p.gamma
        return S / n_agents * dt - B / n_agents * dm

    coarse = _trapezoid(integrand, n)
    fine = _trapezoid(integrand, 2 * n)
    return fine + (fine - coarse) / 3.0


def path_integral(path: PathSpec, ref: ReferenceState, p: ModelParams) -> float:
    """Integral of d mu = (S/N) dT - (B/N) dM along ``path``."""
    path.validate(p)
    ref.check_consistency(p)
    pieces = [
        _segment_integral(a, b, ref, p, path.steps_per_segment)
        for a, b in zip(path.waypoints, path.waypoints[1:])
    ]
    return math.fsum(pieces)


def integrate_gibbs_duhem(
    path: PathSpec,
    ref: ReferenceState = DEFAULT_REFERENCE,
    p: ModelParams = None,
    tolerance: float = 1e-8,
) -> CheckReport:
    """Path-integrate the Gibbs-Duhem differential and compare with mu(T, M).

    Closed paths are compared against zero, open paths against the endpoint
    chemical potential.  The error scale floor is k * max(T) on the path.
    """
    integral = path_integral(path, ref, p)
    t_max = max(t for t, _ in path.waypoints)
    scale = p.k * t_max
    meta = {
        "waypoints": [list(w) for w in path.waypoints],
        "steps_per_segment": path.steps_per_segment,
        "closed": path.is_closed,
        "scheme": "trapezoid+richardson",
    }
    if path.is_closed:
        return make_report("gibbs_duhem_loop", integral, 0.0, tolerance, scale=scale, metadata=meta)
    start, end = path.waypoints[0], path.waypoints[-1]
    measured = chemical_potential_general(start[0], start[1], ref, p) + integral
    expected = chemical_potential_general(end[0], end[1], ref, p)
    meta["delta_mu"] = integral
    return make_report("gibbs_duhem_path", measured, expected, tolerance, scale=scale, metadata=meta)


# ---------------------------------------------------------------------------
# Taylor regime


def _atanh_minus_x(x: float) -> float:
    """atanh(x) - x without cancellation: odd series for small |x|, direct otherwise."""
    if abs(x) >= 0.3:
        return math.atanh(x) - x
    x2 = x * x
    power = x * x2
    terms = []
    k = 3
    while True:
        term = power / k
        terms.append(term)
        if abs(term) <= 1e-17 * abs(terms[0]):
            return math.fsum(terms)
        power *= x2
        k += 2


def taylor_regime_report(x_values: Sequence[float], threshold: float = DEFAULT_THRESHOLD_X) -> List[ValidityReport]:
    """Truncation error of atanh(x) ~ x next to the bound x^3 / (3 (1 - x^2)).

    Here ``x`` is the argument of atanh, i.e. U/U0; it is recorded as both the
    expansion variable and the reduced magnetization.
    """
    reports = []
    for x in x_values:
        if not abs(x) < 1:
            raise DomainError(f"|x| must be < 1, got {x!r}", "x")
        base = validity_report(x, x, threshold)
        reports.append(
            ValidityReport(
                x=base.x,
                m=base.m,
                within_linear_regime=base.within_linear_regime,
                est_rel_error=base.est_rel_error,
                threshold=threshold,
                series_error=abs(_atanh_minus_x(x)),
                series_bound=abs(x) ** 3 / 3.0 / (1.0 - x * x),
            )
        )
    return reports


def taylor_checks(x_values: Sequence[float], threshold: float = DEFAULT_THRESHOLD_X) -> List[CheckReport]:
    out = []
    for rep in taylor_regime_report(x_values, threshold):
        out.append(
            make_report(
                f"taylor_x={rep.x:g}",
                rep.series_error,
                0.0,
                rep.series_bound,
                mode="abs",
                scale=rep.series_bound,
                metadata={"x": rep.x, "within_linear_regime": rep.within_linear_regime, "threshold": threshold},
            )
        )
    return out


# ---------------------------------------------------------------------------
# migration (Delta N) experiments


def _mu_intensive(T: float, m: float, p: ModelParams) -> float:
    # mu as a function of the reduced magnetization only, so it is the same float for every N
    return 0.5 * p.k * T * ((1.0 - m) * (1.0 + m))


def _gibbs_linear(T: float, m: float, p: ModelParams) -> Fraction:
    # G = N mu kept as an exact rational so differences in N do not cancel
    return p.n_agents * Fraction(_mu_intensive(T, m, p))


def _gibbs_exact(T: float, m: float, p: ModelParams) -> float:
    # finite-N microcanonical entropy, continued to non-integer N+ via log-gamma
    n = p.n_agents
    return T * p.k * ln_binomial(n, 0.5 * n * (1.0 + m))


def migration_experiment(
    T: float,
    m: float,
    n: int,
    delta_n: int,
    p: ModelParams,
    chain: str = "linear",
    tolerance: Optional[float] = None,
) -> CheckReport:
    """Marginal Gibbs energy [G(N + dN) - G(N)] / dN at fixed (T, m) against mu.

    ``chain="linear"`` uses G = N mu(T, m) with G held as an exact rational, so
    the difference quotient reproduces mu bit for bit (default tolerance 0).
    ``chain="exact"`` uses G = T k ln C(N, N+) and is compared with the
    thermodynamic-limit value T k H(m); the gap is O(1/N), so the default
    tolerance is 1/N.
    """
    if delta_n < 1:
        raise DomainError("delta_n must be >= 1", "delta_n")
    if abs(m) > 1:
        raise DomainError(f"|m| must not exceed 1, got {m!r}", "m")
    if T < 0:
        raise DomainError("temperature must be nonnegative", "temperature")
    p_n = p.with_agents(n)
    p_big = p.with_agents(n + delta_n)
    if chain == "linear":
        gibbs = _gibbs_linear
        expected = _mu_intensive(T, m, p)
        tolerance = 0.0 if tolerance is None else tolerance
    elif chain == "exact":
        gibbs = _gibbs_exact
        expected = T * p.k * binary_entropy_nats(m)
        tolerance = 1.0 / n if tolerance is None else tolerance
    else:
        raise ValueError(f"unknown chain {chain!r}")
    measured = float((gibbs(T, m, p_big) - gibbs(T, m, p_n)) / delta_n)
    return make_report(
        f"migration_{chain}_N={n}_dN={delta_n}",
        measured,
        expected,
        tolerance,
        scale=p.k * T,
        metadata={"n": n, "delta_n": delta_n, "delta_n_over_n": delta_n / n, "m": m, "T": T, "chain": chain},
    )


# ---------------------------------------------------------------------------
# linearized chain versus exact chain


def paper_vs_exact_report(
    T: float, B: float, p: ModelParams, threshold: float = DEFAULT_THRESHOLD_X
) -> List[CheckReport]:
    """Side-by-side linearized and exact values at (T, B).

    U and M are checked against the truncation bound x^2/3 (+1e-6).  Entropy
    and chemical potential are characterization entries: the linearized forms
    are evaluated at the exact magnetization so that only the entropy
    functional differs, and their offsets are reported, not judged.
    """
    x = reduced_field(T, B, p)
    m_exact = magnetization_exact(T, B, p)
    validity = validity_report(x, m_exact / p.m_max, threshold)
    meta = {"x": x, "m": m_exact / p.m_max, "within_linear_regime": validity.within_linear_regime, "threshold": threshold}
    bound = x * x / 3.0 + 1e-6

    reports = [
        make_report("utility", caloric_utility(T, B, p), utility_exact(T, B, p), bound, metadata=meta),
        make_report("magnetization", thermal_magnetization(T, B, p), m_exact, bound, metadata=meta),
    ]

    s_linear = polarization_entropy(T, m_exact, DEFAULT_REFERENCE, p)
    s_exact = entropy_canonical(T, B, p)
    reports.append(make_report("entropy", s_linear, s_exact, math.inf, mode="report", metadata=meta))

    n = p.n_agents
    s_finite = p.k * ln_binomial(n, 0.5 * n * (1.0 + m_exact / p.m_max))
    reports.append(
        make_report("entropy_finite_n", s_exact, s_finite, math.inf, mode="report", metadata=dict(meta, note="canonical vs log-binomial"))
    )

    mu_linear = chemical_potential(T, m_exact, p)
    mu_exact = chemical_potential_exact(T, m_exact, p)
    ratio = mu_linear / mu_exact if mu_exact != 0 else math.nan
    reports.append(make_report("chemical_potential", mu_linear, mu_exact, math.inf, mode="report", metadata=dict(meta, ratio=ratio)))
    return reports
