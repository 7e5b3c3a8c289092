"""holodisc: forced multiscale dynamics and their coarse closures.

Simulate fine Burgers-type fields under constant, harmonic, chaotic, or
white-noise forcing; evolve coarse element models carrying convolution
memory of the forcing; reduce iterated-convolution products by parts;
replace memory with weak drift and noise terms; and verify the coarse
models against the fine truth through the experiment harness.
"""

from .convolution import (
    ConvChain,
    ConvTerm,
    Reduction,
    canonical_rates,
    chain_rhs,
    chain_step,
    chains_equivalent,
    integrate_chain,
    reduce_by_parts,
)
from .errors import (
    ConfigError,
    DataError,
    HolodiscError,
    ReductionError,
    StabilityError,
)
from .forcing import (
    ElementGrid,
    SignalSpec,
    csn,
    lorenz_rhs,
    make_signal,
    mode_decay_rate,
    project_to_modes,
    sample_forcing,
)
from .harness import (
    EXPERIMENTS,
    ComparisonReport,
    ExperimentSpec,
    convergence_order,
    default_spec,
    fit_emergence_rate,
    nsm_series,
    rms,
    run_macro_forced,
    run_micro_field,
    spec_from_dict,
)
from .macromodel import (
    VARIANTS,
    ChainBank,
    CoarseState,
    ModelConfig,
    alternating_signs,
    build_bank,
    init_state,
    lattice_coarse_rhs,
    lowg_rhs,
    macro_step,
    nsm_field_at_grid,
    nsm_subgrid_field,
    run_macro,
    ssm1_rhs,
    strongquad_rhs,
    variant_rhs,
)
from .microscale import (
    burgers_rhs,
    check_scheme_legal,
    integrate,
    lattice_decay_rates,
    lattice_rhs,
    rk4_step,
    step,
)
from .stencil import delta2, delta4, mudelta
from .weakmodel import (
    QuadraticTermDescriptor,
    StochasticReplacement,
    WeakCoarseModel,
    build_weak_model,
    harmonic_drift_1,
    harmonic_drift_2,
    phasor_drift,
    simulate_quadrature_ensemble,
    stochastic_replace,
    weak_quadrature_samples,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "HolodiscError",
    "ConfigError",
    "DataError",
    "StabilityError",
    "ReductionError",
    "csn",
    "mode_decay_rate",
    "lorenz_rhs",
    "SignalSpec",
    "make_signal",
    "sample_forcing",
    "ElementGrid",
    "project_to_modes",
    "delta2",
    "mudelta",
    "delta4",
    "ConvChain",
    "chain_rhs",
    "chain_step",
    "integrate_chain",
    "canonical_rates",
    "chains_equivalent",
    "ConvTerm",
    "Reduction",
    "reduce_by_parts",
    "burgers_rhs",
    "lattice_rhs",
    "lattice_decay_rates",
    "rk4_step",
    "step",
    "integrate",
    "check_scheme_legal",
    "VARIANTS",
    "ModelConfig",
    "alternating_signs",
    "ChainBank",
    "build_bank",
    "lowg_rhs",
    "lattice_coarse_rhs",
    "ssm1_rhs",
    "strongquad_rhs",
    "nsm_field_at_grid",
    "nsm_subgrid_field",
    "CoarseState",
    "init_state",
    "variant_rhs",
    "macro_step",
    "run_macro",
    "harmonic_drift_1",
    "harmonic_drift_2",
    "phasor_drift",
    "QuadraticTermDescriptor",
    "StochasticReplacement",
    "stochastic_replace",
    "simulate_quadrature_ensemble",
    "weak_quadrature_samples",
    "WeakCoarseModel",
    "build_weak_model",
    "rms",
    "fit_emergence_rate",
    "convergence_order",
    "ExperimentSpec",
    "ComparisonReport",
    "spec_from_dict",
    "default_spec",
    "run_micro_field",
    "run_macro_forced",
    "nsm_series",
    "EXPERIMENTS",
]
