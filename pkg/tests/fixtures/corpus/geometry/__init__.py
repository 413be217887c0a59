from .points import Point, classify

__all__ = ["Point", "classify"]
