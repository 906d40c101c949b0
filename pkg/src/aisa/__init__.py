"""AISA: autonomous security automation over a simulated critical-infrastructure range."""

__version__ = "0.1.0"
