"""Uniform phase-space grids, quadrature, and discrete derivative operators.

The spatial grid is periodic with a Fourier-spectral derivative, so the
discrete divergence theorem (sum of any derivative vanishes) holds to
roundoff.  The velocity grid is cell-centered with a second-order centered
derivative that uses zero ghost values; as a matrix this stencil is exactly
antisymmetric, which is the summation-by-parts property the conservative
integrator relies on.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class SpatialGrid:
    """Periodic grid x_i = i*dx on [0, length), dx = length/nx."""

    nx: int
    length: float
    x: np.ndarray = field(init=False, repr=False)
    dx: float = field(init=False)

    def __post_init__(self):
        if self.nx < 2:
            raise ValueError(f"nx must be >= 2, got {self.nx}")
        if not self.length > 0:
            raise ValueError(f"length must be positive, got {self.length}")
        dx = self.length / self.nx
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "x", np.arange(self.nx) * dx)
        # ik multipliers for the spectral derivative (rfft layout); the
        # Nyquist mode is zeroed so the operator stays real-antisymmetric.
        k = 2.0 * np.pi * np.fft.rfftfreq(self.nx, d=dx)
        ik = 1j * k
        if self.nx % 2 == 0:
            ik[-1] = 0.0
        object.__setattr__(self, "_ik", ik)

    def deriv(self, u: np.ndarray, axis: int = 0) -> np.ndarray:
        """Spectral derivative along `axis`; exact on resolved modes."""
        u = np.asarray(u)
        if u.shape[axis] != self.nx:
            raise ValueError(
                f"array has {u.shape[axis]} entries along axis {axis}, grid has {self.nx}"
            )
        shape = [1] * u.ndim
        shape[axis] = -1
        uhat = np.fft.rfft(u, axis=axis)
        return np.fft.irfft(uhat * self._ik.reshape(shape), n=self.nx, axis=axis)

    def integrate(self, u: np.ndarray) -> float:
        if len(u) != self.nx:
            raise ValueError(f"array has {len(u)} entries, grid has {self.nx}")
        return float(np.sum(u) * self.dx)

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Unweighted L2 inner product sum(a*b)*dx."""
        if len(a) != self.nx or len(b) != self.nx:
            raise ValueError("length mismatch in spatial inner product")
        return float(np.dot(a, b) * self.dx)


@dataclass(frozen=True)
class VelocityGrid:
    """Cell-centered grid v_j = vmin + (j+1/2)*dv with Gaussian weight samples.

    For symmetric bounds (vmin == -vmax) the nodes are constructed by
    mirroring, so v_j == -v_{nv-1-j} bitwise and odd weighted moments cancel
    exactly.
    """

    nv: int
    vmin: float
    vmax: float
    v: np.ndarray = field(init=False, repr=False)
    dv: float = field(init=False)
    f0v: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.nv < 4:
            raise ValueError(f"nv must be >= 4, got {self.nv}")
        if not self.vmax > self.vmin:
            raise ValueError(f"need vmax > vmin, got [{self.vmin}, {self.vmax}]")
        dv = (self.vmax - self.vmin) / self.nv
        if self.vmin == -self.vmax and self.nv % 2 == 0:
            half = (np.arange(self.nv // 2) + 0.5) * dv
            v = np.concatenate([-half[::-1], half])
        else:
            v = self.vmin + (np.arange(self.nv) + 0.5) * dv
        object.__setattr__(self, "dv", dv)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "f0v", np.exp(-v * v / 2.0))

    @property
    def weights(self) -> np.ndarray:
        """Quadrature weights f0v*dv of the weighted inner product."""
        return self.f0v * self.dv

    def deriv(self, w: np.ndarray, axis: int = 0) -> np.ndarray:
        """Centered difference (w_{j+1}-w_{j-1})/(2 dv) with zero ghost values.

        Callers differentiating products like f0v*V must form the product
        first; splitting it via the product rule breaks the discrete
        integration-by-parts identity.
        """
        w = np.asarray(w)
        if w.shape[axis] != self.nv:
            raise ValueError(
                f"array has {w.shape[axis]} entries along axis {axis}, grid has {self.nv}"
            )
        out = np.zeros_like(w, dtype=float)
        src = np.moveaxis(w, axis, 0)
        dst = np.moveaxis(out, axis, 0)
        dst[:-1] = src[1:]
        dst[1:] -= src[:-1]
        dst /= 2.0 * self.dv
        return out

    def integrate(self, w: np.ndarray) -> float:
        if len(w) != self.nv:
            raise ValueError(f"array has {len(w)} entries, grid has {self.nv}")
        return float(np.sum(w) * self.dv)

    def inner(self, a: np.ndarray, b: np.ndarray) -> float:
        """Weighted inner product sum(f0v*a*b)*dv."""
        if len(a) != self.nv or len(b) != self.nv:
            raise ValueError("length mismatch in velocity inner product")
        return float(np.dot(a * self.f0v, b) * self.dv)
