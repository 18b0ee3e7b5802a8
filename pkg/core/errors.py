"""Exception hierarchy for the extension toolkit."""

from typing import Optional, Tuple


class WhitneyExtError(Exception):
    """Base class for every error raised by the toolkit."""


class SpaceError(WhitneyExtError):
    """Invalid metric measure space, point id or radius window."""


class DomainError(WhitneyExtError):
    """A field was queried or combined outside its domain."""


class RegularityError(WhitneyExtError):
    """The subset is not regular at the requested scale."""


class CoverError(WhitneyExtError):
    """Whitney cover construction or use failed."""


class TuningError(WhitneyExtError):
    """Epsilon tuning for the quasi-ball family did not converge."""


class WitnessError(WhitneyExtError):
    """A claimed generalized gradient violates the pointwise inequality."""

    def __init__(self, message: str, pair: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.pair = pair


class ConfigError(WhitneyExtError):
    """Run configuration could not be parsed or validated."""


class StageError(WhitneyExtError):
    """A pipeline stage failed; wraps the underlying error."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
