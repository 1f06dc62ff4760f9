"""Total-latency minimization for IRS-aided short-packet downlink systems.

Joint optimization of user grouping, per-group blocklengths, and the
reflective phase vector of an intelligent reflecting surface, under
finite-blocklength (normal approximation) reliability constraints.
"""

__version__ = "0.1.0"

from .channel import ChannelRealization, Scenario, generate_realization
from .grouping import Grouping

__all__ = [
    "__version__",
    "ChannelRealization",
    "Scenario",
    "Grouping",
    "generate_realization",
]
