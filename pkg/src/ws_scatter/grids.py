"""Periodic computational grids and trigonometric interpolation.

A Grid is a cube [-L/2, L/2)^3 sampled at n points per axis, together
with its dual wavenumber lattice.  Fields are plain numpy arrays of
shape (n, n, n) bound to a grid by convention; all operators in this
package take the grid as an explicit argument.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Grid", "eval_matrix", "resample_scaled", "ShapeError"]


class ShapeError(ValueError):
    """Field samples do not match the grid they are claimed to live on."""


@dataclass(frozen=True)
class Grid:
    n: int              # points per axis (power of two recommended)
    length: float       # physical side length L

    def __post_init__(self):
        if self.n < 2 or self.n % 2 != 0:
            raise ValueError(f"grid needs an even n >= 2, got {self.n}")
        if self.length <= 0:
            raise ValueError(f"box length must be positive, got {self.length}")

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @cached_property
    def axis_coords(self) -> np.ndarray:
        """Sample coordinates along one axis, centered so that 0 is a node."""
        return (np.arange(self.n) - self.n // 2) * self.spacing

    @cached_property
    def axis_freqs(self) -> np.ndarray:
        """Wavenumbers (2*pi/L)*{-n/2..n/2-1} in FFT storage order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 on the full 3D lattice, FFT order."""
        k = self.axis_freqs
        return (k[:, None, None] ** 2 + k[None, :, None] ** 2
                + k[None, None, :] ** 2)

    @cached_property
    def omega(self) -> np.ndarray:
        """|k| on the full 3D lattice, FFT order."""
        return np.sqrt(self.k2)

    @cached_property
    def omega_r(self) -> np.ndarray:
        """|k| on the rfftn lattice (last axis halved)."""
        k = self.axis_freqs
        kr = 2.0 * np.pi * np.fft.rfftfreq(self.n, d=self.spacing)
        return np.sqrt(k[:, None, None] ** 2 + k[None, :, None] ** 2
                       + kr[None, None, :] ** 2)

    @cached_property
    def x2(self) -> np.ndarray:
        """|x|^2 at the grid nodes."""
        x = self.axis_coords
        return (x[:, None, None] ** 2 + x[None, :, None] ** 2
                + x[None, None, :] ** 2)

    def radius2(self) -> np.ndarray:
        return self.x2

    def coordinate(self, axis: int) -> np.ndarray:
        """Coordinate of the given axis broadcast to the full 3D shape."""
        x = self.axis_coords
        shape = [1, 1, 1]
        shape[axis] = self.n
        return np.broadcast_to(x.reshape(shape), (self.n,) * 3)

    @property
    def shape(self):
        return (self.n,) * 3

    @property
    def cell_volume(self) -> float:
        return self.spacing ** 3

    def check(self, f: np.ndarray) -> None:
        """Raise ShapeError unless f is an (n,n,n) sample array for this grid."""
        if not isinstance(f, np.ndarray) or f.shape != self.shape:
            got = getattr(f, "shape", type(f))
            raise ShapeError(f"expected samples of shape {self.shape}, got {got}")

    def zeros(self, dtype=np.complex128) -> np.ndarray:
        return np.zeros(self.shape, dtype=dtype)


def eval_matrix(src: Grid, points: np.ndarray) -> np.ndarray:
    """One-axis interpolation matrix from FFT coefficients to arbitrary points.

    Returns E of shape (len(points), n) such that, for samples f along one
    axis, (E @ fft(f)) gives the values of the trigonometric interpolant at
    ``points``.  The unpaired Nyquist mode is symmetrized (cosine) so that
    real samples interpolate to real values.
    """
    pts = np.asarray(points, dtype=float)
    k = src.axis_freqs
    rel = pts - src.axis_coords[0]
    E = np.exp(1j * np.outer(rel, k))
    ny = src.n // 2  # index of the single -n/2 Nyquist entry
    E[:, ny] = np.cos(k[ny] * rel)
    return E / src.n


def _apply_axis(mats, coeffs):
    """Contract per-axis matrices against 3D FFT coefficients."""
    out = coeffs
    for axis, E in enumerate(mats):
        out = np.moveaxis(np.tensordot(E, out, axes=([1], [axis])), 0, axis)
    return out


def resample_scaled(f: np.ndarray, src: Grid, dst: Grid, scale: float,
                    mask_outside: bool = True) -> np.ndarray:
    """Evaluate the interpolant of f (on src) at the points scale*x of dst.

    With mask_outside (default), destination points falling outside the
    source box are set to zero instead of wrapping periodically; this is the
    right semantics for compactly supported fields evaluated on larger boxes.
    """
    src.check(f)
    pts = scale * dst.axis_coords
    E = eval_matrix(src, pts)
    if mask_outside:
        outside = np.abs(pts) > 0.5 * src.length * (1.0 + 1e-12)
        if outside.any():
            E = E.copy()
            E[outside, :] = 0.0
    coeffs = np.fft.fftn(f)
    return _apply_axis((E, E, E), coeffs)
