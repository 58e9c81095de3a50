"""Semiclassical wave propagation with random potentials on a compact
hyperbolic surface (genus-2 Bolza quotient of the Poincare disk)."""

__version__ = "0.1.0"
