"""Partition functions and marginals of two-state spin systems via self-avoiding-walk trees."""

__version__ = "0.1.0"

from .graph import *  # noqa: F401,F403
from .model import *  # noqa: F401,F403
from .sawtree import *  # noqa: F401,F403
from .marginal import *  # noqa: F401,F403
from .oracle import *  # noqa: F401,F403
from .mixing import *  # noqa: F401,F403
from .fptas import *  # noqa: F401,F403
from .modelfile import *  # noqa: F401,F403
