"""Reduced amplitude dynamics and the supporting analysis checks.

Integrates dz/dt = -i E z - Gamma(z, zbar) z + Lambda(z, zbar) z together
with dgamma/dt = Upsilon_11(z).  The rotation is factored out exactly: with
z = e^{-iEt} w and the coefficients sesquilinear in z, the slow variable
obeys the autonomous equation dw/dt = -Gamma(w) w + Lambda(w) w, integrated
with classical RK4.

The damping matrix entering the amplitude equation is four times the tensor
contraction: with the coupling vectors normalized by the quadratic-source
identity sum_n z_n G_n = J N_{2,0}(z), the projection of the mixed cubic
coupling onto mode n equals -4 i J G_n, so the resonant coefficient is
4 * Z(tensor).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bound_state import FOUR_PI, BoundState
from .errors import GpLabError, InvalidParameterError
from .fgr import FgrTensor
from .linearization import LinearizedSystem, NeutralBasis

AMPLITUDE_COUPLING = 4.0


# ---------------------------------------------------------------------------
# phase source Upsilon_{1,1}
# ---------------------------------------------------------------------------


@dataclass
class UpsilonCoefficients:
    """Quadratic-form matrices of Upsilon_11(z) (diagonal in the radial case)."""

    M_xi: np.ndarray
    M_eta: np.ndarray
    denom: float

    def __call__(self, z) -> float:
        z = np.asarray(z, dtype=complex)
        val = np.einsum("m,n,mn->", z, np.conj(z), self.M_xi + self.M_eta)
        return float(np.real(val) / self.denom)


def upsilon_coefficients(lin: LinearizedSystem, basis: NeutralBasis) -> UpsilonCoefficients:
    """Coefficients of the phase source

    Upsilon_11(z) = < (3/2 f' + f'' phi^2) phi |z.xi|^2 + 1/2 f' phi |z.eta|^2,
                      d_lam phi > / <phi, d_lam phi>.
    """
    f = lin.f
    phi = lin._phi_values()
    f1 = f.eval(phi**2, 1)
    f2 = f.eval(phi**2, 2)
    w_xi = (1.5 * f1 + f2 * phi**2) * phi
    w_eta = 0.5 * f1 * phi
    if lin.is_radial:
        grid = lin.grid
        r = grid.r
        u0 = lin.bs.phi.data[0].real
        du = lin.dphi.data[0].real
        xi = basis.xi_red / r
        eta = basis.eta_red / r
        # radial reduction: |z.xi|^2 integrates to (4 pi / 3)|z|^2 xi(r)^2
        dphi_prof = du / (np.sqrt(FOUR_PI) * r)
        cxi = (FOUR_PI / 3.0) * grid.h * np.sum(w_xi * xi**2 * dphi_prof * r**2)
        ceta = (FOUR_PI / 3.0) * grid.h * np.sum(w_eta * eta**2 * dphi_prof * r**2)
        denom = grid.h * float(np.sum(u0 * du))
        return UpsilonCoefficients(cxi * np.eye(3), ceta * np.eye(3), denom)
    grid = lin.grid
    dphi = lin.dphi.data.real
    N = basis.N
    Mxi = np.zeros((N, N))
    Meta = np.zeros((N, N))
    for m in range(N):
        for n in range(N):
            Mxi[m, n] = grid.quad(w_xi * basis.xi_fields[m] * basis.xi_fields[n] * dphi).real
            Meta[m, n] = grid.quad(w_eta * basis.eta_fields[m] * basis.eta_fields[n] * dphi).real
    denom = float(grid.quad(lin.bs.phi.data.real * dphi).real)
    return UpsilonCoefficients(Mxi, Meta, denom)


def upsilon11(lin: LinearizedSystem, basis: NeutralBasis, z) -> float:
    return upsilon_coefficients(lin, basis)(z)


def check_N11_orthogonality(lin: LinearizedSystem, basis: NeutralBasis, z) -> float:
    """| < N^Im_{1,1}, phi > | with
    N^Im_{1,1} = (1/2i) sum_{n,m} conj(z_n) z_m f' phi (xi_n eta_m - xi_m eta_n);
    vanishes identically for the canonical basis.
    """
    z = np.asarray(z, dtype=complex)
    M = basis.antisym_matrix(lin)  # M_nm = int f' phi^2 (xi_n eta_m - xi_m eta_n)
    val = (0.5 / 1j) * np.einsum("n,m,nm->", np.conj(z), z, M.astype(complex))
    return float(abs(val))


# ---------------------------------------------------------------------------
# reduced model and trajectories
# ---------------------------------------------------------------------------


@dataclass
class NormalFormModel:
    E: float
    tensor: FgrTensor | None
    upsilon: UpsilonCoefficients | None = None
    # optional synthetic overrides for closed-form tests
    gamma_fn: object = None
    lambda_fn: object = None

    def damping(self, w) -> np.ndarray:
        if self.gamma_fn is not None:
            return np.asarray(self.gamma_fn(w), dtype=complex)
        return AMPLITUDE_COUPLING * self.tensor.Gamma(w)

    def skew(self, w) -> np.ndarray:
        if self.lambda_fn is not None:
            return np.asarray(self.lambda_fn(w), dtype=complex)
        if self.tensor is None:
            return np.zeros_like(self.damping(w))
        # K1-consistent sign: dz/dt = -iEz - 4 Z(z) z = -iEz - Gamma z + Lambda z
        return -AMPLITUDE_COUPLING * self.tensor.Lambda_Z(w)

    @property
    def dim(self) -> int:
        if self.tensor is not None:
            return self.tensor.N
        return 3


@dataclass
class Trajectory:
    t: np.ndarray
    z: np.ndarray  # (nt, N)
    gamma: np.ndarray
    z_abs: np.ndarray


def integrate_normal_form(
    model: NormalFormModel,
    z0,
    gamma0: float = 0.0,
    T: float = 100.0,
    dt: float = 0.01,
    n_samples: int = 400,
) -> Trajectory:
    """RK4 in the rotating frame; exact for the pure rotation z = e^{-iEt} z0.

    Phase invariance of the coefficients turns the rotating-frame equation
    autonomous, so accuracy is set by the slow damping scale, not by E.
    """
    z0 = np.asarray(z0, dtype=complex)
    if np.linalg.norm(z0) > 0.5:
        raise InvalidParameterError(f"|z0| = {np.linalg.norm(z0):.3g} outside the reduced-model regime (<= 0.5)")
    if dt > 0.1 / max(model.E, 1e-12):
        raise InvalidParameterError(f"dt = {dt} does not resolve E = {model.E} (need dt <= 0.1/E)")

    def rhs(w):
        return -(model.damping(w) @ w) + (model.skew(w) @ w)

    ups = model.upsilon

    def gdot(w):
        return ups(w) if ups is not None else 0.0

    # the rotating-frame system evolves on the slow damping scale, so the
    # internal step only needs to resolve that rate (dt stays an upper bound)
    rate0 = float(np.linalg.norm(rhs(z0))) / max(float(np.linalg.norm(z0)), 1e-300)
    dt_w = dt
    if rate0 > 0:
        dt_w = min(dt_w, 0.02 / rate0)
    dt_w = min(dt_w, T / max(4 * n_samples, 400))
    steps = int(np.ceil(T / dt_w))
    dt_w = T / steps
    save_every = max(steps // n_samples, 1)
    w = z0.copy()
    gam = float(gamma0)
    limit = 4.0 * (np.linalg.norm(z0) + 1e-12)
    ts, zs, gs = [0.0], [z0.copy()], [gam]
    for k in range(1, steps + 1):
        k1, g1 = rhs(w), gdot(w)
        w2 = w + 0.5 * dt_w * k1
        k2, g2 = rhs(w2), gdot(w2)
        w3 = w + 0.5 * dt_w * k2
        k3, g3 = rhs(w3), gdot(w3)
        w4 = w + dt_w * k3
        k4, g4 = rhs(w4), gdot(w4)
        w = w + (dt_w / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        gam += (dt_w / 6.0) * (g1 + 2 * g2 + 2 * g3 + g4)
        if np.linalg.norm(w) > limit:
            raise GpLabError(f"|z| blew up at t={k * dt_w:.4g}: sign error upstream of the damping matrix")
        if k % save_every == 0 or k == steps:
            t = k * dt_w
            ts.append(t)
            zs.append(np.exp(-1j * model.E * t) * w)
            gs.append(gam)
    t = np.array(ts)
    z = np.array(zs)
    return Trajectory(t, z, np.array(gs), np.linalg.norm(z, axis=1))


# ---------------------------------------------------------------------------
# decay fitting and the two analysis lemmas
# ---------------------------------------------------------------------------


@dataclass
class DecayFit:
    exponent: float
    amplitude: float
    r2: float
    window: tuple


def fit_decay(t, values, window=None) -> DecayFit:
    """Least-squares log-log slope; value ~ amplitude * t^(-exponent)."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (t[t > 0][0], t[-1])
    mask = (t >= window[0]) & (t <= window[1]) & (t > 0)
    if np.count_nonzero(mask) < 3:
        raise InvalidParameterError("fit window contains fewer than 3 samples")
    if np.any(values[mask] <= 0):
        raise InvalidParameterError("fit window contains non-positive values")
    x = np.log(t[mask])
    y = np.log(values[mask])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(-slope), float(np.exp(intercept)), r2, tuple(window))


@dataclass
class RiccatiReport:
    holds: bool
    margin: float
    K_required: float
    kappa: float


def verify_riccati_bound(
    T0: float, c_sharp: float, delta: float, w0: float, T: float = 2000.0, K_cap: float = 20.0
) -> RiccatiReport:
    """Reference integration of d|z|^2/dt = -|z|^4 + c# (T0+t)^{-2-delta}
    against the envelope (1 + K c# T0^{-delta}) (kappa + t)^{-1/2},
    kappa = min(T0, w0^{-2}).
    """
    from scipy.integrate import solve_ivp

    if T0 < 2:
        raise InvalidParameterError(f"the comparison lemma needs T0 >= 2, got {T0}")
    if delta <= 0:
        raise InvalidParameterError("delta must be positive")

    def rhs(t, y):
        return [-y[0] ** 2 + c_sharp * (T0 + t) ** (-2.0 - delta)]

    t_eval = np.unique(np.concatenate([[0.0], np.geomspace(1e-3, T, 400)]))
    sol = solve_ivp(rhs, (0.0, T), [w0**2], t_eval=t_eval, rtol=1e-10, atol=1e-14, method="DOP853")
    y = np.maximum(sol.y[0], 0.0)
    kappa = min(T0, w0 ** (-2.0)) if w0 > 0 else T0
    envelope_unit = (kappa + sol.t) ** (-0.5)
    ratio = np.sqrt(y) / envelope_unit
    excess = np.max(ratio) - 1.0
    K_required = 0.0 if excess <= 0 else float(excess / max(c_sharp * T0 ** (-delta), 1e-300))
    bound = (1.0 + K_cap * c_sharp * T0 ** (-delta)) * envelope_unit
    margin = float(np.min(bound - np.sqrt(y)))
    holds = bool(np.all(np.sqrt(y) <= bound * (1.0 + 1e-12)))
    return RiccatiReport(holds, margin, K_required, float(kappa))


@dataclass
class ConvolutionReport:
    c_observed: float
    ratios: np.ndarray
    t_grid: np.ndarray


def verify_convolution_bound(T0: float, sigma: float, t_grid=None) -> ConvolutionReport:
    """sup over t of (T0+t)^sigma * int_0^t (1+t-s)^{-3/2} (T0+s)^{-sigma} ds."""
    from scipy.integrate import quad

    if T0 < 2:
        raise InvalidParameterError(f"the convolution bound needs T0 >= 2, got {T0}")
    if not (0.0 <= sigma <= 1.5):
        raise InvalidParameterError(f"sigma must lie in [0, 3/2], got {sigma}")
    if t_grid is None:
        t_grid = np.geomspace(0.1, 1e4, 60)
    t_grid = np.asarray(t_grid, dtype=float)
    ratios = []
    for t in t_grid:
        val, _ = quad(
            lambda s: (1.0 + t - s) ** (-1.5) * (T0 + s) ** (-sigma), 0.0, t, limit=200, epsabs=1e-12, epsrel=1e-10
        )
        ratios.append(val * (T0 + t) ** sigma)
    ratios = np.array(ratios)
    return ConvolutionReport(float(np.max(ratios)), ratios, t_grid)
