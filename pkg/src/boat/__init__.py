"""BoaT: a transportation-data query language with a parallel single-machine engine."""

__version__ = "0.1.0"
