"""Cluster mobile agents and routers into cells, plan agent itineraries and
simulate mobile-agent data collection in a sensor network."""

__version__ = "0.1.0"
