from .config import CityConfig, FaultSpec, STREAMS, StreamSpec
from .generate import generate
from .replay import ReplayReport, replay

__all__ = [
    "CityConfig",
    "FaultSpec",
    "STREAMS",
    "StreamSpec",
    "generate",
    "replay",
    "ReplayReport",
]
