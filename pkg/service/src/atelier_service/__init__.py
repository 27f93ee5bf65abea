"""Reference refiner service for the tiled refinement engine."""

from .app import create_app
from .config import Mode, ServiceConfig

__all__ = ["create_app", "ServiceConfig", "Mode"]
