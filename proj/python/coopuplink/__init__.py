"""Outage and delay-outage analysis of phased cooperative uplinks."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401
