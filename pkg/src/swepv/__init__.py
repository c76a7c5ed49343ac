"""Compatible finite-element rotating shallow water solver on a doubly
periodic plane, with energy-conserving potential vorticity upwinding."""

__version__ = "0.1.0"
