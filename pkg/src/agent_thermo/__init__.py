"""Thermodynamics of two-state ideal agent systems: exact ensemble, linearized
equations of state, the chemical potential mu(T, M) = kT/2 (1 - M^2/M0^2), and
numerical checks tying them together."""

from .eos import (
    EosEvaluation,
    caloric_utility,
    chemical_potential,
    chemical_potential_general,
    entropy_stirling,
    euler_residual,
    gibbs_free_energy,
    linear_chain,
    polarization_entropy,
    shannon_entropy_per_agent,
    temperature_from_utility,
    thermal_magnetization,
)
from .exact import (
    AgentConfiguration,
    MicrostateDistribution,
    entropy_exact,
    enumerate_microstates,
    exact_chain,
    ln_multiplicity,
    magnetization_exact,
    occupation_probabilities,
    utility_exact,
)
from .model import (
    DEFAULT_REFERENCE,
    DegenerateFieldError,
    DomainError,
    LimitCaseError,
    ModelParams,
    NewsField,
    ReferenceInconsistencyError,
    ReferenceState,
    ThermoState,
    ValidityReport,
    make_params,
    reduced_field,
)

__version__ = "0.1.0"

__all__ = [
    "AgentConfiguration",
    "caloric_utility",
    "chemical_potential",
    "chemical_potential_general",
    "DEFAULT_REFERENCE",
    "DegenerateFieldError",
    "DomainError",
    "entropy_exact",
    "entropy_stirling",
    "enumerate_microstates",
    "EosEvaluation",
    "euler_residual",
    "exact_chain",
    "gibbs_free_energy",
    "LimitCaseError",
    "linear_chain",
    "ln_multiplicity",
    "magnetization_exact",
    "make_params",
    "MicrostateDistribution",
    "ModelParams",
    "NewsField",
    "occupation_probabilities",
    "polarization_entropy",
    "reduced_field",
    "ReferenceInconsistencyError",
    "ReferenceState",
    "shannon_entropy_per_agent",
    "temperature_from_utility",
    "thermal_magnetization",
    "ThermoState",
    "utility_exact",
    "ValidityReport",
]
