"""Implicit-explicit general linear methods: construction, stability, integration."""

from . import catalogue, extrap, glm, integrate, matkit, problems, stability

__all__ = [
    "catalogue",
    "extrap",
    "glm",
    "integrate",
    "matkit",
    "problems",
    "stability",
]
__version__ = "0.1.0"
