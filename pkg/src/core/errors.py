"""
Error types shared across the toolkit.
"""

from typing import List, Optional


class RuinsimError(Exception):
    """Base class for every error raised on purpose by ruinsim"""


class ConfigError(RuinsimError):
    """Experiment config failed schema or semantic validation"""

    def __init__(self, message: str, problems: Optional[List[str]] = None):
        self.problems = problems or [message]
        super().__init__(message)


class AssumptionError(RuinsimError):
    """A model assumption needed by the requested computation does not hold"""


class EstimatorPreconditionError(RuinsimError):
    """An estimator was asked to run on a model it does not support"""


class DivergenceError(RuinsimError):
    """An infinite-horizon integral or series could not be certified finite"""
