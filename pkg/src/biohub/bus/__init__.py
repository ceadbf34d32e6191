from .broker import Broker
from .client import BusClient, Subscription, TopicFrame

__all__ = ["Broker", "BusClient", "Subscription", "TopicFrame"]
