from .specs import SENSOR_SPECS
from .nodes import NODE_FACTORIES

__all__ = ["SENSOR_SPECS", "NODE_FACTORIES"]
