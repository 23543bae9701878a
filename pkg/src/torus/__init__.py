"""Spectral calculus on the periodic unit cube."""
from .grid import Grid
from .field import SpectralField, Symmetry
from .norms import NormSpec, norm

__all__ = ["Grid", "SpectralField", "Symmetry", "NormSpec", "norm"]
