"""Physics-informed level-set fire spread and its classical reference solver."""

__version__ = "1.0.0"
