"""Error types raised across the package."""

import numpy as np


class ShapeError(ValueError):
    """Operand dimensions do not agree."""


class StructureError(ValueError):
    """A block structure or block support is malformed."""


class ConfigError(ValueError):
    """An experiment or bound configuration is invalid."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """A stacked operator that must have full column rank does not."""
