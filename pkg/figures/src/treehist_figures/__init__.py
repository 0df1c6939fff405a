"""Figure rendering for treehist CSV output."""

from .render import FigureSpec, build_figure, render

__all__ = ["FigureSpec", "build_figure", "render"]
