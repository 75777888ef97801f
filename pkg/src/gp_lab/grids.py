"""Radial-channel and 3D Cartesian discretizations plus field containers.

Radial geometry: axisymmetric fields are stored as a stack of reduced
channel functions,

    psi(x) = sum_l  u_l(r)/r * Y_l(cos theta),   l = 0..l_max,

with real orthonormal spherical harmonics Y_l = Y_{l0}, on a uniform grid of
n interior nodes r_i = i*h, h = r_max/(n+1), Dirichlet at both ends.  With
this convention <psi, chi> = sum_l int u_l conj(v_l) dr, so all inner
products are plain 1D quadratures.

Cartesian geometry: periodic box [-L, L)^3 with n (power of two) points per
axis and spectral differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import GeometryMismatchError, InvalidParameterError
from .model import Potential


@dataclass(frozen=True)
class RadialGrid:
    r_max: float
    n: int

    def __post_init__(self):
        if self.r_max <= 0:
            raise InvalidParameterError(f"r_max must be > 0, got {self.r_max}")
        if self.n < 16:
            raise InvalidParameterError(f"need at least 16 radial nodes, got {self.n}")

    @property
    def h(self) -> float:
        return self.r_max / (self.n + 1)

    @property
    def r(self) -> np.ndarray:
        return self.h * np.arange(1, self.n + 1)

    def quad(self, values) -> complex:
        """Integral over r of a reduced-function product (trapezoid; the
        Dirichlet endpoints vanish, so this is just h * sum)."""
        return self.h * np.sum(values, axis=-1)


@dataclass(frozen=True)
class CartesianGrid:
    L: float
    n: int

    def __post_init__(self):
        if self.L <= 0:
            raise InvalidParameterError(f"box half-width must be > 0, got {self.L}")
        if self.n < 4 or (self.n & (self.n - 1)) != 0:
            raise InvalidParameterError(f"points per axis must be a power of two >= 4, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    def points(self) -> np.ndarray:
        """Grid points, shape (n, n, n, 3)."""
        x = self.axis
        X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
        return np.stack([X, Y, Z], axis=-1)

    def radius2(self) -> np.ndarray:
        x2 = self.axis**2
        return x2[:, None, None] + x2[None, :, None] + x2[None, None, :]

    def k2(self) -> np.ndarray:
        k = 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.h)
        kk = k**2
        return kk[:, None, None] + kk[None, :, None] + kk[None, None, :]

    def quad(self, values) -> complex:
        return self.h**3 * np.sum(values)


def apply_laplacian_spectral(grid: CartesianGrid, u: np.ndarray) -> np.ndarray:
    """-Delta u by Fourier multiplication with |k|^2; exact for band-limited u."""
    if u.shape != (grid.n,) * 3:
        raise GeometryMismatchError(f"field shape {u.shape} does not match grid n={grid.n}")
    return np.fft.ifftn(grid.k2() * np.fft.fftn(u))


def parity_flip(u: np.ndarray) -> np.ndarray:
    """u(-x) on the periodic grid (exact index map)."""
    out = u
    for ax in range(out.ndim):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def restrict_even_subspace(grid: CartesianGrid, u: np.ndarray) -> np.ndarray:
    """Projection onto the even subspace, [u(x) + u(-x)]/2; idempotent."""
    if u.shape != (grid.n,) * 3:
        raise GeometryMismatchError(f"field shape {u.shape} does not match grid n={grid.n}")
    return 0.5 * (u + parity_flip(u))


class TridiagOperator:
    """Symmetric tridiagonal operator -u'' + w(r) u on a RadialGrid."""

    def __init__(self, grid: RadialGrid, diag_potential: np.ndarray):
        h2 = grid.h**2
        self.grid = grid
        self.diag = 2.0 / h2 + np.asarray(diag_potential, dtype=float)
        self.off = -1.0 / h2

    def matvec(self, u):
        out = self.diag * u
        out[..., :-1] += self.off * u[..., 1:]
        out[..., 1:] += self.off * u[..., :-1]
        return out

    def banded_upper(self) -> np.ndarray:
        """(2, n) upper banded storage used by scipy eig_banded/solveh_banded."""
        n = self.grid.n
        ab = np.zeros((2, n))
        ab[0, 1:] = self.off
        ab[1, :] = self.diag
        return ab

    def eigh(self, k: int):
        """Lowest k eigenpairs (dense tridiagonal solver, O(n) memory)."""
        from scipy.linalg import eigh_tridiagonal

        n = self.grid.n
        k = min(k, n)
        vals, vecs = eigh_tridiagonal(
            self.diag, np.full(n - 1, self.off), select="i", select_range=(0, k - 1)
        )
        return vals, vecs / np.sqrt(self.grid.h)

    def solve(self, rhs):
        from scipy.linalg import solve_banded

        n = self.grid.n
        ab = np.zeros((3, n), dtype=complex if np.iscomplexobj(rhs) else float)
        ab[0, 1:] = self.off
        ab[1, :] = self.diag
        ab[2, :-1] = self.off
        return solve_banded((1, 1), ab, rhs)

    def shifted(self, shift: float) -> "TridiagOperator":
        op = TridiagOperator.__new__(TridiagOperator)
        op.grid = self.grid
        op.diag = self.diag + shift
        op.off = self.off
        return op


def radial_hamiltonian(grid: RadialGrid, V: Potential, l: int = 0, shift: float = 0.0) -> TridiagOperator:
    """Reduced operator -u'' + [l(l+1)/r^2 + V(r) + shift] u in channel l."""
    if not V.is_radial:
        raise GeometryMismatchError("radial_hamiltonian needs a radially symmetric potential")
    if l < 0:
        raise InvalidParameterError(f"angular momentum must be >= 0, got l={l}")
    r = grid.r
    w = l * (l + 1) / r**2 + V.radial(r) + shift
    return TridiagOperator(grid, w)


@lru_cache(maxsize=16)
def _angular_rule(l_max: int, n_theta: int):
    mu, w = leggauss(n_theta)
    # orthonormal real Y_{l0}(mu): 2*pi * int Y_l Y_l' dmu = delta
    Y = np.zeros((l_max + 1, n_theta))
    from numpy.polynomial.legendre import legval

    for l in range(l_max + 1):
        c = np.zeros(l + 1)
        c[l] = 1.0
        Y[l] = np.sqrt((2 * l + 1) / (4.0 * np.pi)) * legval(mu, c)
    return mu, w, Y


class AngularRule:
    """Gauss-Legendre collocation in cos(theta) for the axisymmetric sector.

    Exact (to machine precision) analysis/synthesis for band-limited data;
    n_theta is chosen so that cubic products of l <= l_max fields project
    back without aliasing.
    """

    def __init__(self, l_max: int, n_theta: int | None = None):
        if n_theta is None:
            n_theta = 2 * l_max + 4
        self.l_max = l_max
        self.n_theta = n_theta
        self.mu, self.w, self.Y = _angular_rule(l_max, n_theta)

    def synthesize(self, stack: np.ndarray, r: np.ndarray) -> np.ndarray:
        """Channel stack (C, n) -> pointwise values psi(r_i, mu_j), shape (n, n_theta)."""
        return (stack / r).T @ self.Y

    def analyze(self, values: np.ndarray, r: np.ndarray) -> np.ndarray:
        """Pointwise values (n, n_theta) -> channel stack (C, n)."""
        proj = 2.0 * np.pi * (values * self.w) @ self.Y.T
        return proj.T * r


class Field:
    """Complex field on one of the two geometries.

    Radial geometry: data is the reduced channel stack, shape (C, n).
    Cartesian geometry: data has shape (n, n, n).
    """

    def __init__(self, grid, data):
        self.grid = grid
        self.data = np.asarray(data)
        if isinstance(grid, RadialGrid):
            if self.data.ndim == 1:
                self.data = self.data[None, :]
            if self.data.shape[-1] != grid.n:
                raise GeometryMismatchError(
                    f"radial stack length {self.data.shape[-1]} does not match grid n={grid.n}"
                )
        elif isinstance(grid, CartesianGrid):
            if self.data.shape != (grid.n,) * 3:
                raise GeometryMismatchError(f"field shape {self.data.shape} does not match grid n={grid.n}")
        else:
            raise GeometryMismatchError(f"unknown grid type {type(grid).__name__}")

    @property
    def is_radial(self) -> bool:
        return isinstance(self.grid, RadialGrid)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0] if self.is_radial else 1

    def copy(self) -> "Field":
        return Field(self.grid, self.data.copy())

    def inner(self, other: "Field") -> complex:
        """<self, other> = int self * conj(other), conjugate-linear in other."""
        if self.is_radial != other.is_radial:
            raise GeometryMismatchError("cannot pair fields on different geometries")
        if self.is_radial:
            c = min(self.data.shape[0], other.data.shape[0])
            return complex(self.grid.quad(np.sum(self.data[:c] * np.conj(other.data[:c]), axis=0)))
        return complex(self.grid.quad(self.data * np.conj(other.data)))

    def l2(self) -> float:
        if self.is_radial:
            return float(np.sqrt(self.grid.h * np.sum(np.abs(self.data) ** 2)))
        return float(np.sqrt(self.grid.h**3 * np.sum(np.abs(self.data) ** 2)))

    def weighted_l2(self, nu: float = 4.0) -> float:
        """|| <x>^{-nu} self ||_2 with <x> = sqrt(1 + |x|^2)."""
        if self.is_radial:
            w = (1.0 + self.grid.r**2) ** (-nu / 2.0)
            return float(np.sqrt(self.grid.h * np.sum(np.abs(self.data * w) ** 2)))
        w = (1.0 + self.grid.radius2()) ** (-nu / 2.0)
        return float(np.sqrt(self.grid.h**3 * np.sum(np.abs(self.data * w) ** 2)))

    def sup(self) -> float:
        if self.is_radial:
            rule = AngularRule(self.data.shape[0] - 1)
            return float(np.max(np.abs(rule.synthesize(self.data, self.grid.r))))
        return float(np.max(np.abs(self.data)))


def radial_scalar_field(grid: RadialGrid, profile) -> Field:
    """Spherically symmetric field from a radial profile F(r) (callable or values).

    The reduced l=0 channel is u_0 = sqrt(4 pi) * r * F(r).
    """
    vals = profile(grid.r) if callable(profile) else np.asarray(profile)
    return Field(grid, np.sqrt(4.0 * np.pi) * grid.r * vals)
