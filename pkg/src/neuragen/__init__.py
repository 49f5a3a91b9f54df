"""Speaker gender classification from pooled acoustic features."""

__version__ = "0.1.0"
