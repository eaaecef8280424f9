"""Lyapunov exponents and saddle-point dynamics of non-Hermitian lattices.

The package predicts the growth/decay rates of waves launched near the edge
of a 1d non-Hermitian lattice from the saddle points of its Bloch symbol,
classifies which saddles contribute via steepest-ascent intersection counts,
and verifies the predictions against direct time evolution.
"""

__version__ = "0.1.0"

from .symbol import (
    LaurentSymbol,
    MultibandSymbol,
    PRESETS,
    char_poly,
    from_model_dict,
    load_model,
    preset,
)
from .lattice import (
    LatticeError,
    LatticeHamiltonian,
    SpectrumSet,
    assemble,
    gbz_from_obc,
    pbc_curve,
    point_O_limit,
    spectrum,
)
from .saddle import (
    SaddleError,
    SaddlePoint,
    dlambda_dv_check,
    find_saddles,
    find_saddles_multiband,
)
from .thimble import (
    BrillouinZone,
    GbzContour,
    ThimbleClassification,
    ThimbleError,
    bz_integral,
    classify,
    count_intersections,
    decomposition_pair,
    gbz_integral,
    trace_flows,
)
from .dynamics import (
    DynamicsError,
    EvolutionTrace,
    LyapunovReport,
    crossover_time,
    default_times,
    delta_state,
    evolve,
    find_P,
    fit_exponents,
    flat_state,
    lambda_of_v,
    multiband_exponents,
    t_c_theory,
    velocities,
)
from .healing import (
    HealingError,
    HealingReport,
    SibcState,
    build_sibc,
    flip_point,
    run_healing,
    scan,
    threshold_lambda_tot,
    winding,
)

__all__ = [
    "LaurentSymbol", "MultibandSymbol", "PRESETS", "char_poly",
    "from_model_dict", "load_model", "preset",
    "LatticeError", "LatticeHamiltonian", "SpectrumSet", "assemble",
    "gbz_from_obc", "pbc_curve", "point_O_limit", "spectrum",
    "SaddleError", "SaddlePoint", "dlambda_dv_check", "find_saddles",
    "find_saddles_multiband",
    "BrillouinZone", "GbzContour", "ThimbleClassification", "ThimbleError",
    "bz_integral", "classify", "count_intersections", "decomposition_pair",
    "gbz_integral", "trace_flows",
    "DynamicsError", "EvolutionTrace", "LyapunovReport", "crossover_time",
    "default_times", "delta_state", "evolve", "find_P", "fit_exponents",
    "flat_state", "lambda_of_v", "multiband_exponents", "t_c_theory",
    "velocities",
    "HealingError", "HealingReport", "SibcState", "build_sibc", "flip_point",
    "run_healing", "scan", "threshold_lambda_tot", "winding",
]
