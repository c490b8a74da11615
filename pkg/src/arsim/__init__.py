"""Altruism-driven peer-to-peer ride-sharing simulator."""

__version__ = "0.1.0"
