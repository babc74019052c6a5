"""Neural-network successor representations of spatial and word state spaces."""

__version__ = "0.1.0"
