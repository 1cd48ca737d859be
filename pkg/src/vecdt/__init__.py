"""Twin-driven computing resource management for vehicular edge networks."""

__version__ = "0.1.0"
