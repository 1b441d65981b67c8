"""Approximation-free statistics of N independent two-state agents.

Entropy uses the positive sign convention S = +k ln(Omega).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

from .model import (
    DegenerateFieldError,
    DomainError,
    FieldLike,
    ModelParams,
    as_field,
    reduced_field,
    require_positive_temperature,
    thermo_state,
)

EXACT_FACTORIAL_MAX_N = 20
ENUMERATION_MAX_N = 20


def _check_count(n, name):
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise DomainError(f"{name} must be a nonnegative integer, got {n!r}", name)
    return int(n)


@dataclass(frozen=True)
class AgentConfiguration:
    n_plus: int
    n_minus: int
    spins: Optional[tuple] = None

    def __post_init__(self):
        _check_count(self.n_plus, "n_plus")
        _check_count(self.n_minus, "n_minus")
        if self.spins is not None:
            if any(s not in (-1, 1) for s in self.spins):
                raise DomainError("spins must be +1 or -1", "spins")
            plus = sum(1 for s in self.spins if s == 1)
            if plus != self.n_plus or len(self.spins) - plus != self.n_minus:
                raise DomainError("spin list disagrees with n_plus/n_minus", "spins")

    @classmethod
    def from_spins(cls, spins: Sequence[int]) -> "AgentConfiguration":
        spins = tuple(int(s) for s in spins)
        plus = sum(1 for s in spins if s == 1)
        return cls(plus, len(spins) - plus, spins)

    @property
    def n_agents(self) -> int:
        return self.n_plus + self.n_minus

    @property
    def trade_potential(self) -> float:
        return (self.n_plus - self.n_minus) / self.n_agents

    def magnetization(self, mu_b: float) -> float:
        return mu_b * (self.n_plus - self.n_minus)


@dataclass(frozen=True)
class MicrostateDistribution:
    """Distribution of N+ for ``n_agents`` agents.

    ``normalization`` is the log of the partition sum, ln Z, so that it stays
    finite for strong fields.
    """

    n_agents: int
    probabilities: Dict[int, float]
    normalization: float

    def expectation(self, fn) -> float:
        return math.fsum(w * fn(n_plus) for n_plus, w in self.probabilities.items())

    def mean_magnetization(self, mu_b: float) -> float:
        n = self.n_agents
        return mu_b * self.expectation(lambda n_plus: 2 * n_plus - n)


def ln_multiplicity(n: int, n_plus: int) -> float:
    """ln C(n, n_plus); exact integers up to n = 20, log-gamma beyond."""
    n = _check_count(n, "n")
    n_plus = _check_count(n_plus, "n_plus")
    if n_plus > n:
        raise DomainError(f"n_plus = {n_plus} exceeds n = {n}", "n_plus")
    if n <= EXACT_FACTORIAL_MAX_N:
        return math.log(math.factorial(n) // (math.factorial(n_plus) * math.factorial(n - n_plus)))
    return ln_binomial(n, n_plus)


def ln_binomial(n: float, n_plus: float) -> float:
    """Log-gamma continuation of ln C(n, n_plus) to real arguments."""
    if not 0 <= n_plus <= n:
        raise DomainError(f"need 0 <= n_plus <= n, got n={n!r}, n_plus={n_plus!r}", "n_plus")
    return math.lgamma(n + 1) - math.lgamma(n_plus + 1) - math.lgamma(n - n_plus + 1)


def entropy_exact(n: int, n_plus: int, k: float = 1.0) -> float:
    return k * ln_multiplicity(n, n_plus)


def occupation_probabilities(U: float, B: float, n: int, mu_b: float) -> tuple:
    """(p+, p-) with p+- = 1/2 +- U / (2 mu_b B n)."""
    if B <= 0:
        raise DegenerateFieldError("occupation probabilities need B > 0", "field")
    u0 = mu_b * B * n
    if abs(U) > u0:
        raise DomainError(f"|U| = {abs(U)!r} exceeds the maximum utility U0 = {u0!r}", "utility")
    ratio = U / u0
    return 0.5 + 0.5 * ratio, 0.5 - 0.5 * ratio


def magnetization_exact(T: float, B: FieldLike, p: ModelParams) -> float:
    """M = mu_b N tanh(mu_b B / (k T)).  B = 0 gives M = 0."""
    return p.m_max * math.tanh(reduced_field(T, B, p))


def utility_exact(T: float, B: FieldLike, p: ModelParams) -> float:
    return magnetization_exact(T, B, p) * as_field(B).raw


def canonical_probabilities(x: float) -> tuple:
    """Per-agent Boltzmann occupations e^{+-x} / (e^x + e^-x), overflow-safe."""
    # the minority occupation is e^{-2|x|} / (1 + e^{-2|x|}), which cannot overflow
    w = math.exp(-2.0 * abs(x))
    minority = w / (1.0 + w)
    if x >= 0:
        p_minus = minority
        p_plus = 1.0 - p_minus
    else:
        p_plus = minority
        p_minus = 1.0 - p_plus
    return p_plus, p_minus


def _xlogx(p: float) -> float:
    return 0.0 if p == 0.0 else p * math.log(p)


def binary_entropy_nats(m: float) -> float:
    """-(p ln p + q ln q) for p, q = (1 +- m) / 2."""
    if abs(m) > 1:
        raise DomainError(f"|m| must not exceed 1, got {m!r}", "magnetization")
    return -(_xlogx(0.5 * (1 + m)) + _xlogx(0.5 * (1 - m)))


def entropy_canonical(T: float, B: FieldLike, p: ModelParams) -> float:
    """Exact canonical entropy of N independent agents at (T, B)."""
    m = math.tanh(reduced_field(T, B, p))
    return p.k * p.n_agents * binary_entropy_nats(m)


def entropy_of_magnetization(M: float, p: ModelParams) -> float:
    """Exact (large-N / canonical) entropy as a function of M: kN H((1+m)/2)."""
    return p.k * p.n_agents * binary_entropy_nats(M / p.m_max)


def chemical_potential_exact(T: float, M: float, p: ModelParams) -> float:
    """Exact-chain chemical potential T * S_exact(M) / N."""
    if T < 0:
        raise DomainError("temperature must be nonnegative", "temperature")
    return T * entropy_of_magnetization(M, p) / p.n_agents


def enumerate_microstates(n: int, T: float, B: FieldLike, p: ModelParams) -> MicrostateDistribution:
    """Boltzmann distribution over N+ by exhaustive (binomially collapsed) enumeration.

    Weights are C(n, N+) e^{x (N+ - N-)} with exact integer multiplicities; only
    ``p.mu_b`` and ``p.k`` are used, ``n`` sets the agent count.
    """
    n = _check_count(n, "n")
    if n > ENUMERATION_MAX_N:
        raise DomainError(f"enumeration is capped at n = {ENUMERATION_MAX_N}, got {n}", "n")
    if n < 1:
        raise DomainError("need at least one agent", "n")
    require_positive_temperature(T)
    x = reduced_field(T, B, p)
    # shift exponents by the largest one so nothing overflows
    shift = abs(x) * n
    raw = {}
    for n_plus in range(n + 1):
        raw[n_plus] = math.comb(n, n_plus) * math.exp(x * (2 * n_plus - n) - shift)
    z = math.fsum(raw.values())
    probs = {n_plus: w / z for n_plus, w in raw.items()}
    return MicrostateDistribution(n, probs, math.log(z) + shift)


def exact_chain(T: float, B: FieldLike, p: ModelParams):
    """ThermoState with tanh magnetization, canonical entropy and mu = T S / N."""
    M = magnetization_exact(T, B, p)
    S = entropy_canonical(T, B, p)
    return thermo_state(p, T, B, M, S, T * S / p.n_agents)
