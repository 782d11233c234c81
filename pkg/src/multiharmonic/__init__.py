"""Multiharmonic solvers for nonlinear ultrasound in bubbly media."""
__version__ = "0.1.0"
