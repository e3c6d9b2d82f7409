"""Multi-skip feature stacking: latent model, bounds, encoding and classification."""

from ._mifs import *  # noqa: F401,F403
from ._mifs import __version__  # noqa: F401
