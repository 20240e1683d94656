"""Token-ring simulation over safe registers.

Quasi-atomic register pairs carry Dijkstra's K-state ring; trace checkers and
an exhaustive explorer judge the runs."""

from .gray import GrayWord, gray_decode, gray_encode
from .protocols import RingConfig, build_ring, token_holders
from .sim import AdversaryPolicy, SchedulerPolicy, UsageError
from .trace import Trace

__version__ = "0.1.0"

__all__ = ["AdversaryPolicy", "GrayWord", "RingConfig", "SchedulerPolicy", "Trace", "UsageError",
           "build_ring", "gray_decode", "gray_encode", "token_holders"]
