"""Semi-classical simulation of triggered superradiant bursts from a spin ensemble in a cavity."""

__version__ = "0.1.0"

from .ensemble import (  # noqa: F401
    BinnedEnsemble,
    QGaussianSpec,
    SystemParams,
    cooperativity,
    discretize,
    effective_linewidth,
    q_gaussian_density,
)
from .dynamics import (  # noqa: F401
    BurstRecord,
    DetuningSchedule,
    SpinEnsembleState,
    Trajectory,
    extract_burst,
    integrate,
    steady_state_transmission,
)
from .errors import (  # noqa: F401
    ConfigError,
    FitError,
    NumericalToleranceError,
    ParameterError,
    ShotError,
    StiffnessError,
)
