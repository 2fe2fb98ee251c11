"""HTTP wrapper around the pipeline; images travel as base64 PNGs."""

from .app import create_app

__all__ = ["create_app"]
