"""Complete OAM Bell-state measurement: states, optics, statistics, search and channel analysis."""

__version__ = "0.1.0"
