from .sessions import ServingSystem, SessionStore
from .app import create_app

__all__ = ["ServingSystem", "SessionStore", "create_app"]
