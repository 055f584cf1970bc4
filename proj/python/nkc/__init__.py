"""Nested Kingman coalescent toolkit: exact simulation and gamma estimation."""

from nkc._core import *  # noqa: F401,F403
from nkc._core import __version__  # noqa: F401
