"""HTTP service layer: FastAPI app, wire schemas, background jobs."""

from .app import app, create_app

__all__ = ["app", "create_app"]
