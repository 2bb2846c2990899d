"""
Resonance Lab
Pseudospectral laboratory for the fourth-order Schrödinger equation
with quadratic nonlinearity
"""

__version__ = "1.0.0"
