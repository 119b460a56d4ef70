"""Few-shot segmentation kernels: CAM-guided prior maps and masked cross-attention."""

from .errors import (ConfigError, DegenerateRowError, DimensionError, FormatError,
                     FsskError, InvalidEpisodeError, InvariantError, ModeError)

__version__ = "0.1.0"
