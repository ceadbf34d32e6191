"""biohub: real-time wearable biosensor streaming middleware."""

from .bus import Broker, BusClient, Subscription, TopicFrame
from .messages import MsgKind
from .topics import TopicName

__version__ = "0.1.0"

__all__ = [
    "Broker", "BusClient", "Subscription", "TopicFrame", "MsgKind", "TopicName",
    "__version__",
]
