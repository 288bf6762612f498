"""Two-state dynamics through a real level crossing."""

import types as _types

from .crossing import (
    CrossingReport,
    ExponentVerdict,
    alpha_limit,
    around_crossing_efficiency,
    classify_exponents,
    empirical_eta_exponent,
    pulse_area,
    theta_jump,
)
from .dressed import (
    DressedSnapshot,
    ExtendedReal,
    adiabatic_phase,
    dressed_states,
    eigenvalues,
    eta,
    mixing_angle,
    snapshot,
    theta_dot,
)
from .errors import (
    ClassificationError,
    ConfigError,
    DegeneracyError,
    DomainError,
    LevelCrossError,
    PreconditionError,
    RangeError,
    StiffnessError,
)
from .harness import (
    ExperimentConfig,
    SweepRow,
    emit_figure_data,
    figure_config,
    lz_check,
    run_single,
    run_sweep,
)
from .propagator import (
    Trajectory,
    TwoStateKet,
    dressed_populations,
    eta_scan,
    propagate,
    step,
)
from .pulses import (
    Constant,
    ExpGap,
    Linear,
    PowerLawOneSided,
    PulseShape,
    Schedule,
    Sine,
    SineAbs,
    Tabulated,
    TSine,
    eval_derivative,
    eval_pulse,
    leading_order,
)

__version__ = "0.1.0"

__all__ = [
    name for name, obj in list(globals().items())
    if not name.startswith("_") and not isinstance(obj, _types.ModuleType)
]
