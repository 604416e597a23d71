"""Pseudospectral tools for the 3D wave-Schrodinger system.

Builds explicit asymptotic profile pairs from scattering data, evaluates
their residuals in closed form, integrates the coupled system backward
from large times, and fits the measured decay rates.
"""

from .grids import Grid, ShapeError
from .operators import (
    WaveState, DilationAliasingError,
    forward_transform, inverse_transform, free_schrodinger,
    wave_propagate, wave_propagate_sourced, wave_energy,
    dilate, md_apply, gradient, laplacian, lebesgue_norm, sobolev_norm,
)

__version__ = "0.1.0"
