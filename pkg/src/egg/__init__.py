"""egg: caches, a shell language, a cache protocol and a check currency."""
from .cache import Cache, CacheAlgebra, Pair, Selector, ZERO, default_algebra, free_map, render
from .data import BOTTOM, BasicType, DataUniverse, Datum, Extension, default_universe

__version__ = "0.1.0"

__all__ = [
    "BOTTOM", "BasicType", "Cache", "CacheAlgebra", "DataUniverse", "Datum", "Extension",
    "Pair", "Selector", "ZERO", "default_algebra", "default_universe", "free_map", "render",
]
