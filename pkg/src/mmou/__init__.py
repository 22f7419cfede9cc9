"""Regime-switching Ornstein-Uhlenbeck toolkit.

A finite-state background chain switches the drift level, mean-reversion
rate and variance of an OU diffusion.  The package pairs every closed-form
result (moments, transforms, scaling limits) with an exact path-conditional
Monte Carlo sampler that verifies it independently.
"""

from .chain import (
    CtmcPath,
    DeviationSet,
    GeneratorMatrix,
    deviation_set,
    occupation_integral,
    resolvent_deviation,
    sample_path,
    stationary_distribution,
    transient_distribution,
)
from .errors import (
    AccuracyError,
    ApplicabilityError,
    ConfigError,
    DimensionError,
    DomainError,
    MmouError,
    SingularMatrixError,
    SizeError,
    StabilityError,
    StructureError,
    TransformOverflowError,
)
from .process import (
    ConditionalGaussian,
    CoordOu,
    JointGaussian,
    MmouSpec,
    MultiOuSpec,
    NormalInitial,
    conditional_joint,
    conditional_moments,
    sample_multi_terminal,
    sample_multi_terminal_batch,
    sample_terminal,
    sample_terminal_batch,
    simulate_euler,
)
from .rng import substream

__version__ = "0.1.0"
