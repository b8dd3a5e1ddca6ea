"""Hidden Markov models whose states carry sparse Gaussian graphical models.

Thin wrapper over the compiled ``_core`` extension; see ``help(hmmglasso._core)``.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
