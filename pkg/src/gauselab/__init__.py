"""gauselab: a numerical laboratory for a predator-prey model whose prey
capture takes time to convert into predator biomass.

The package covers the full pipeline: closed-form equilibria and delay
thresholds (model), linear stability of the coexistence state with the
crossing scan (spectral), a delay-aligned fixed-step RK4 integrator
(integrator), attractor diagnostics (analysis), delay sweeps with
hysteresis and doubling detection (sweep), and a CLI (cli).
"""

from .analysis import (
    DivergenceResult,
    ExtremaSeries,
    Extremum,
    PeriodEstimate,
    ReturnMap,
    delay_embed,
    divergence,
    estimate_period,
    extrema,
    filter_kinks,
    return_map,
)
from .errors import (
    ConsistencyError,
    DomainError,
    GauselabError,
    IntegrationError,
    InvalidParams,
)
from .integrator import (
    HistorySpec,
    TailHistory,
    Trajectory,
    convergence_check,
    integrate,
    sample,
)
from .model import (
    EquilibriumSet,
    Params,
    RawParams,
    ScaleFactors,
    coexistence_prey,
    equilibria,
    predator_bound,
    predator_ceiling,
    reproduction_number,
    scale,
)
from .spectral import (
    CharCoeffs,
    Crossing,
    EPlusStability,
    HopfCandidate,
    StabilityProfile,
    char_coeffs,
    char_eval,
    crossing_curves,
    crossing_frequency,
    hopf_candidates,
    omega_squared_branches,
    phase_angle,
    phase_cos,
    phase_sin,
    stability_profile,
)
from .sweep import (
    AttractorClass,
    BistabilityWindow,
    DoublingEvent,
    OrbitDiagramRow,
    SweepPlan,
    detect_bistability,
    detect_period_doublings,
    run_sweep,
    tau_grid,
)

__version__ = "0.1.0"

__all__ = [
    "AttractorClass",
    "BistabilityWindow",
    "CharCoeffs",
    "ConsistencyError",
    "Crossing",
    "DivergenceResult",
    "DomainError",
    "DoublingEvent",
    "EPlusStability",
    "EquilibriumSet",
    "ExtremaSeries",
    "Extremum",
    "GauselabError",
    "HistorySpec",
    "TailHistory",
    "HopfCandidate",
    "IntegrationError",
    "InvalidParams",
    "OrbitDiagramRow",
    "Params",
    "PeriodEstimate",
    "RawParams",
    "ReturnMap",
    "ScaleFactors",
    "StabilityProfile",
    "SweepPlan",
    "Trajectory",
    "char_coeffs",
    "char_eval",
    "coexistence_prey",
    "convergence_check",
    "crossing_curves",
    "crossing_frequency",
    "delay_embed",
    "detect_bistability",
    "detect_period_doublings",
    "divergence",
    "equilibria",
    "estimate_period",
    "extrema",
    "filter_kinks",
    "hopf_candidates",
    "integrate",
    "omega_squared_branches",
    "phase_angle",
    "phase_cos",
    "phase_sin",
    "predator_bound",
    "predator_ceiling",
    "reproduction_number",
    "return_map",
    "run_sweep",
    "sample",
    "scale",
    "stability_profile",
    "tau_grid",
]
