"""Deterministic figure rendering for pilot-scheme sweep CSV outputs."""

from pilotfigs.render import FigureSpec, RenderError, render

__all__ = ["FigureSpec", "RenderError", "render"]
__version__ = "0.1.0"
