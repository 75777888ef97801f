"""Potentials and the cubic nonlinearity.

Sign conventions, fixed once for the whole package:

    i dpsi/dt = -Delta psi + V psi - f(|psi|^2) psi,    f(s) = -g*s

so the cubic term in the PDE is +g|psi|^2 psi and g < 0 is the attractive
(focusing) case.  Potentials are attractive wells, V <= 0, entering the
Schrodinger operator as -Delta + V.  The triple Gaussian double well is
built as V = -(1/3) sum_k W_{M_k} with W_{M_k}(x) = [W(x+M_k)+W(x-M_k)]/2
and W(y) = q * lam^{-3/2} * exp(-|y|^2/lam).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryMismatchError, InvalidParameterError, UnsupportedOrderError


@dataclass(frozen=True)
class Nonlinearity:
    """Cubic nonlinearity f(s) = -g*s with derivatives up to third order."""

    g: float
    form: str = "cubic"

    def __post_init__(self):
        if self.form != "cubic":
            raise InvalidParameterError(f"unsupported nonlinearity form {self.form!r}")

    def eval(self, s, order: int = 0):
        """d^order f / ds^order at s >= 0."""
        if order < 0 or order > 3:
            raise UnsupportedOrderError(f"nonlinearity derivatives supported up to order 3, got {order}")
        s = np.asarray(s, dtype=float)
        if order == 0:
            return -self.g * s
        if order == 1:
            return np.full_like(s, -self.g)
        return np.zeros_like(s)


def eval_nonlinearity(f: Nonlinearity, s, order: int = 0):
    """Evaluate f or one of its derivatives; see Nonlinearity.eval."""
    return f.eval(s, order)


_AXES = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class Potential:
    """Analytic potential, evaluated exactly at any requested point.

    kind is one of {"zero", "radial_analytic", "double_well"}.  Radial
    profiles are a sum of Gaussians plus an optional polynomial c0 + c2 r^2
    (the polynomial part exists for closed-form oracle tests and is not
    exponentially decaying).
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("zero", "radial_analytic", "double_well"):
            raise InvalidParameterError(f"unknown potential kind {self.kind!r}")

    # -- geometry ---------------------------------------------------------

    @property
    def is_radial(self) -> bool:
        return self.kind in ("zero", "radial_analytic")

    @property
    def decay_rate(self):
        """A rate c with |V(x)| <= C exp(-c|x|), or None if V does not decay."""
        if self.kind == "zero":
            return np.inf
        if self.kind == "double_well":
            return 1.0
        poly = self.params.get("poly", (0.0, 0.0))
        if any(abs(c) > 0 for c in poly):
            return None
        return 1.0 if (self.params.get("gaussians") or self.params.get("shells")) else np.inf

    # -- evaluation -------------------------------------------------------

    def radial(self, r):
        """V as a function of radius; only for radially symmetric kinds."""
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "double_well":
            raise GeometryMismatchError("double_well potential is not radially symmetric")
        out = np.zeros_like(r)
        for a, w in self.params.get("gaussians", ()):
            out = out + a * np.exp(-((r / w) ** 2))
        for a, R, w in self.params.get("shells", ()):
            # symmetrized ring, smooth as a function on R^3
            out = out + a * (np.exp(-(((r - R) / w) ** 2)) + np.exp(-(((r + R) / w) ** 2)))
        c0, c2 = self.params.get("poly", (0.0, 0.0))
        if c0 or c2:
            out = out + c0 + c2 * r**2
        return out

    def __call__(self, x):
        """Evaluate at points of shape (..., 3), or at radii for radial kinds."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != 3:
            if not self.is_radial:
                raise GeometryMismatchError("pointwise radius evaluation requires a radial potential")
            return self.radial(x)
        if self.is_radial:
            return self.radial(np.sqrt(np.sum(x * x, axis=-1)))
        m = self.params["m"]
        q = self.params["q"]
        lam = self.params["lambda_g"]
        pref = q * lam ** (-1.5)
        out = np.zeros(x.shape[:-1])
        for k in range(3):
            mk = m * _AXES[k]
            for sgn in (1.0, -1.0):
                d2 = np.sum((x + sgn * mk) ** 2, axis=-1)
                out = out + pref * np.exp(-d2 / lam)
        return -out / 6.0


def build_double_well(m: float, q: float, lambda_g: float) -> Potential:
    """Triple pair of Gaussian wells at distance m along the three axes.

    Returns V(x) = -(1/3) sum_k [W(x+M_k)+W(x-M_k)]/2 with
    W(y) = q lambda_g^{-3/2} exp(-|y|^2/lambda_g); even and invariant under
    coordinate permutations by construction.
    """
    if m < 0:
        raise InvalidParameterError(f"well separation must be >= 0, got m={m}")
    if q <= 0:
        raise InvalidParameterError(f"well strength must be > 0, got q={q}")
    if lambda_g <= 0:
        raise InvalidParameterError(f"Gaussian width must be > 0, got lambda_g={lambda_g}")
    return Potential("double_well", {"m": float(m), "q": float(q), "lambda_g": float(lambda_g)})


def gaussian_well(depth: float, width: float = 1.0) -> Potential:
    """Radial single-Gaussian well V(r) = -depth * exp(-(r/width)^2)."""
    if depth <= 0:
        raise InvalidParameterError(f"well depth must be > 0, got {depth}")
    return Potential("radial_analytic", {"gaussians": ((-float(depth), float(width)),)})


def radial_profile(gaussians=(), shells=(), poly=(0.0, 0.0)) -> Potential:
    """General radial profile: centered Gaussians, Gaussian shells (rings at
    radius R, symmetrized to stay smooth through the origin) and c0 + c2 r^2."""
    return Potential(
        "radial_analytic",
        {
            "gaussians": tuple((float(a), float(w)) for a, w in gaussians),
            "shells": tuple((float(a), float(R), float(w)) for a, R, w in shells),
            "poly": tuple(float(c) for c in poly),
        },
    )


def zero_potential() -> Potential:
    return Potential("zero")


def eval_potential(V: Potential, x):
    """Evaluate V at a point array or radius; see Potential.__call__."""
    return V(x)
