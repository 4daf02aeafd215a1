"""Two-phase Stefan problem simulator in pulled-back polar coordinates."""

__version__ = "0.1.0"
