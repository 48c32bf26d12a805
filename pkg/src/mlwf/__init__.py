"""Numerical wave-front analysis on the periodic torus.

Weighted spectral and phase-space semi-norms over frequency cones,
pseudo-differential operator calculus, characteristic-set estimation and
wave-front reports, with a config-driven verification harness.
"""

from .errors import (
    CostGuardError,
    DegenerateRegionError,
    InputError,
    MlwfError,
    ParameterError,
    RefusalError,
)
from .grids import (
    Cone,
    CutoffSpec,
    DirectionalCutoffSpec,
    Grid,
    SampledField,
    Shell,
    SpectralField,
    dyadic_shells,
    forward_transform,
    inverse_transform,
    make_cutoff,
    make_directional_cutoff,
    quad_inner,
    quad_norm,
    relative_l2,
    torus_distance,
)
from .weights import (
    AxisBracketPower,
    BracketPower,
    ConstantWeight,
    ProductWeight,
    QuotientWeight,
    SeparableWeight,
    Weight,
    bracket,
    moderation_check,
    weight_from_config,
)
from .spaces import (
    BFSpaceSpec,
    SeminormResult,
    YoungReport,
    bf_norm,
    decay_slope,
    fb_seminorm,
    induced_projection_spec,
    lattice_convolution,
    projection_norm,
    space_from_config,
    spectral_seminorm,
    young_check,
)
from .symbols import (
    CharParams,
    CharSetReport,
    ParametrixCutoffs,
    ParametrixResult,
    PsiInvertibility,
    Symbol,
    SymbolTerm,
    bracket_symbol,
    char_set,
    class_bound_report,
    compose,
    cutoff_product_symbol,
    multiplier_symbol,
    parametrix,
    polynomial_symbol,
    psi_invertible,
    requantize,
    symbol_from_config,
)
from .operators import (
    OperatorHandle,
    SmoothingProbeReport,
    apply_kernel,
    apply_kn,
    apply_t,
    kernel_t,
    smoothing_probe,
)
from .wavefront import (
    MaskReport,
    ReportComparison,
    WavefrontQuery,
    WavefrontReport,
    compare_reports,
    direction_fan,
    report_union,
    wf_classical,
    wf_estimate,
    wf_family,
)
from .modulation import (
    EquivalenceReport,
    PhaseSpaceField,
    Window,
    bump_window,
    fb_mod_equivalence,
    gaussian_window,
    mod_norm,
    mod_seminorm,
    stft,
    twisted_convolution,
    wf_modulation,
    window_from_config,
    window_independence_check,
)
from .generators import FieldGeneratorSpec, generate
from .fieldio import export_csv, load_field, save_field
from .experiments import EXIT_ASSERT, EXIT_MISSING, EXIT_OK, EXIT_SCHEMA, RunResult, run

__version__ = "0.1.0"
