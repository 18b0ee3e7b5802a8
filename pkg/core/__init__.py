from .errors import (
    ConfigError,
    CoverError,
    DomainError,
    RegularityError,
    SpaceError,
    StageError,
    TuningError,
    WhitneyExtError,
    WitnessError,
)
from .space import Ball, MetricMeasureSpace, RegularSubset, ScalarField, SpaceParams
