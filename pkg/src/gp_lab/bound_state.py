"""Nonlinear bound-state continuation from the linear bifurcation point.

The stationary state solves F(phi) = -Delta phi + (V + lambda) phi
- f(phi^2) phi = 0 (for the cubic form the last term is +g phi^3).  The
branch bifurcates from (phi=0, lambda=|e0|) and exists, at small amplitude,
on the side where the quadratic balance

    lambda - |e0| = -g * delta^2 * int phi_lin^4

is satisfiable, i.e. sign(lambda - |e0|) = sign(-g).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BranchRangeError,
    GeometryMismatchError,
    InvalidParameterError,
    NoConvergenceError,
    TrivialSolutionError,
)
from .grids import CartesianGrid, Field, RadialGrid, radial_hamiltonian, restrict_even_subspace
from .linear_spectrum import LinearSpectrum, solve_linear_spectrum
from .model import Nonlinearity, Potential

FOUR_PI = 4.0 * np.pi


@dataclass
class BoundState:
    lam: float
    phi: Field
    residual: float
    g: float

    def norm2(self) -> float:
        return self.phi.l2() ** 2

    def tail_decay_rate(self, fraction: float = 0.25) -> float:
        """Log-slope of the reduced profile over the outer `fraction` of its
        numerically resolved support (u ~ exp(-sqrt(lambda) r) for the true
        state; the underflowed far tail is excluded).
        """
        if not self.phi.is_radial:
            raise GeometryMismatchError("tail fit is defined for radial states")
        grid = self.phi.grid
        u = np.abs(self.phi.data[0].real)
        resolved = np.nonzero(u > 1e-12 * u.max())[0]
        if resolved.size < 16:
            raise GeometryMismatchError("profile support too small for a tail fit")
        i_end = resolved[-1]
        i0 = int((1.0 - fraction) * i_end)
        r = grid.r[i0:i_end]
        y = np.log(u[i0:i_end])
        slope = np.polyfit(r, y, 1)[0]
        return float(-slope)


def _radial_residual_parts(grid, V, lam, g, u):
    op = radial_hamiltonian(grid, V, 0, lam)
    cubic = g * u**3 / (FOUR_PI * grid.r**2)
    return op.matvec(u) + cubic


def newton_bound_state(
    V: Potential,
    f: Nonlinearity,
    lam: float,
    guess: Field,
    newton_tol: float = 1e-10,
    max_iter: int = 60,
) -> BoundState:
    """Damped Newton iteration for the stationary state at frequency lambda.

    Raises TrivialSolutionError when the iteration collapses onto phi = 0 and
    NoConvergenceError (with the residual history) when damping cannot rescue
    the iteration within max_iter steps.
    """
    if guess.is_radial:
        return _newton_radial(V, f, lam, guess, newton_tol, max_iter)
    return _newton_cartesian(V, f, lam, guess, newton_tol, max_iter)


def _newton_radial(V, f, lam, guess, newton_tol, max_iter):
    grid = guess.grid
    g = f.g
    u = guess.data[0].real.copy()
    scale0 = max(np.max(np.abs(u)), 1e-30)
    if np.max(np.abs(u)) == 0.0:
        raise TrivialSolutionError("zero guess is a fixed point of F")
    r2 = grid.r**2
    history = []
    for _ in range(max_iter):
        F = _radial_residual_parts(grid, V, lam, g, u)
        res = float(np.sqrt(grid.h) * np.linalg.norm(F))
        history.append(res)
        unorm = float(np.sqrt(grid.h) * np.linalg.norm(u))
        if res <= newton_tol:
            break
        jac = radial_hamiltonian(grid, V, 0, lam)
        jac.diag = jac.diag + 3.0 * g * u**2 / (FOUR_PI * r2)
        step = jac.solve(-F)
        alpha = 1.0
        for _ in range(25):
            trial = u + alpha * step
            res_t = float(np.sqrt(grid.h) * np.linalg.norm(_radial_residual_parts(grid, V, lam, g, trial)))
            if res_t < res * (1.0 - 0.25 * alpha) or res_t < newton_tol:
                u = trial
                break
            alpha *= 0.5
        else:
            raise NoConvergenceError(f"Newton line search stalled at residual {res:.3e}", history)
        if float(np.sqrt(grid.h) * np.linalg.norm(u)) < 1e-7 * max(1.0, scale0):
            raise TrivialSolutionError("Newton iteration collapsed to the zero solution")
    else:
        raise NoConvergenceError(f"Newton did not reach tol={newton_tol} in {max_iter} iterations", history)

    if np.sum(u) < 0:
        u = -u
    if np.min(u) < -1e-8 * np.max(np.abs(u)):
        raise NoConvergenceError("converged to a sign-changing state", history)
    F = _radial_residual_parts(grid, V, lam, g, u)
    res = float(np.sqrt(grid.h) * np.linalg.norm(F))
    return BoundState(float(lam), Field(grid, u.astype(complex)), res, g)


def _newton_cartesian(V, f, lam, guess, newton_tol, max_iter):
    from scipy.sparse.linalg import LinearOperator, minres

    grid = guess.grid
    g = f.g
    n = grid.n
    Vx = V(grid.points())
    k2 = grid.k2()
    phi = guess.data.real.copy()
    if np.max(np.abs(phi)) == 0.0:
        raise TrivialSolutionError("zero guess is a fixed point of F")
    scale0 = np.max(np.abs(phi))

    def residual(p):
        return np.fft.ifftn(k2 * np.fft.fftn(p)).real + (Vx + lam) * p + g * p**3

    def res_norm(F):
        return float(np.sqrt(grid.quad(F * F).real))

    prec_shift = abs(lam) + 1.0
    M = LinearOperator(
        (n**3, n**3),
        matvec=lambda v: np.fft.ifftn(np.fft.fftn(v.reshape((n,) * 3)) / (k2 + prec_shift)).real.ravel(),
        dtype=float,
    )

    history = []
    for _ in range(max_iter):
        F = residual(phi)
        res = res_norm(F)
        history.append(res)
        if res <= newton_tol:
            break
        w = Vx + lam + 3.0 * g * phi**2

        def matvec(v):
            p = v.reshape((n,) * 3)
            return (np.fft.ifftn(k2 * np.fft.fftn(p)).real + w * p).ravel()

        A = LinearOperator((n**3, n**3), matvec=matvec, dtype=float)
        step, info = minres(A, -F.ravel(), M=M, rtol=1e-10, maxiter=800)
        if info != 0:
            raise NoConvergenceError(f"inner MINRES failed (info={info})", history)
        step = restrict_even_subspace(grid, step.reshape((n,) * 3))
        alpha = 1.0
        for _ in range(25):
            trial = phi + alpha * step
            if res_norm(residual(trial)) < res * (1.0 - 0.25 * alpha) or res_norm(residual(trial)) < newton_tol:
                phi = trial
                break
            alpha *= 0.5
        else:
            raise NoConvergenceError(f"Newton line search stalled at residual {res:.3e}", history)
        if np.max(np.abs(phi)) < 1e-7 * max(1.0, scale0):
            raise TrivialSolutionError("Newton iteration collapsed to the zero solution")
    else:
        raise NoConvergenceError(f"Newton did not reach tol={newton_tol} in {max_iter} iterations", history)

    if np.sum(phi) < 0:
        phi = -phi
    F = residual(phi)
    return BoundState(float(lam), Field(grid, phi.astype(complex)), res_norm(F), g)


@dataclass
class Branch:
    V: Potential
    f: Nonlinearity
    grid: object
    lambdas: np.ndarray
    states: list  # Field per sample
    residuals: np.ndarray
    norms2: np.ndarray
    dphi: list  # d(phi)/d(lambda) per sample, same representation as states
    e0: float
    failure: str | None = None

    @property
    def interval(self):
        return (float(self.lambdas[0]), float(self.lambdas[-1])) if len(self.lambdas) else None

    def sample(self, i: int) -> BoundState:
        return BoundState(float(self.lambdas[i]), self.states[i], float(self.residuals[i]), self.f.g)

    def index_of(self, lam: float) -> int:
        i = int(np.argmin(np.abs(self.lambdas - lam)))
        if not np.isclose(self.lambdas[i], lam, rtol=0, atol=1e-9 * max(1.0, abs(lam))):
            raise BranchRangeError(f"lambda={lam} is not a branch sample")
        return i

    def amplitude_ratio(self) -> np.ndarray:
        """max|phi| / sqrt|lambda - |e0|| along the branch (bifurcation scaling)."""
        amps = np.array([s.sup() for s in self.states])
        return amps / np.sqrt(np.abs(self.lambdas - abs(self.e0)))


def continue_branch(
    V: Potential,
    f: Nonlinearity,
    lambda_range,
    steps: int,
    newton_tol: float = 1e-10,
    spectrum: LinearSpectrum | None = None,
    grid: RadialGrid | None = None,
) -> Branch:
    """March the bound-state branch over lambda_range (radial geometry).

    The first solve is seeded with delta * phi_lin from the quadratic
    bifurcation balance; subsequent solves use a secant predictor.  Newton
    failures trigger step halving down to a floor of (range)/1e4; if the
    branch is still lost, a partial Branch with a failure annotation is
    returned.
    """
    if steps < 2:
        raise InvalidParameterError("need at least 2 continuation steps")
    if spectrum is None:
        if grid is None:
            raise InvalidParameterError("either a precomputed spectrum or a grid is required")
        spectrum = solve_linear_spectrum(V, grid, k_eigs=4)
    grid = spectrum.grid
    if spectrum.e0 is None:
        raise InvalidParameterError("potential has no linear ground state; no bifurcation point")
    e0_abs = abs(spectrum.e0)

    lam_a, lam_b = float(lambda_range[0]), float(lambda_range[1])
    targets = np.linspace(lam_a, lam_b, steps)
    # march outward from the end closest to the bifurcation point
    if abs(lam_b - e0_abs) < abs(lam_a - e0_abs):
        targets = targets[::-1]

    phi_lin = spectrum.phi_lin
    if phi_lin.is_radial:
        u_lin = phi_lin.data[0].real
        i4 = grid.h * np.sum(u_lin**4 / (FOUR_PI * grid.r**2))
    else:
        i4 = float(grid.quad(phi_lin.data.real**4).real)
    seed_data = phi_lin.data.real

    lambdas, states, residuals = [], [], []
    failure = None
    prev = None  # (lam, data)
    prev2 = None
    for lam in targets:
        delta2 = (lam - e0_abs) / (-f.g * i4)
        if delta2 <= 0:
            failure = (
                f"branch lost at lambda={lam:.6g}: wrong side of |e0|={e0_abs:.6g} for g={f.g:+g}"
            )
            break
        if prev is None:
            guess_u = np.sqrt(delta2) * seed_data
        elif prev2 is None:
            guess_u = prev[1] * np.sqrt(max(delta2, 0.0) / max((prev[0] - e0_abs) / (-f.g * i4), 1e-300))
        else:
            t = (lam - prev[0]) / (prev[0] - prev2[0])
            guess_u = prev[1] + t * (prev[1] - prev2[1])
        state = _march_step(V, f, lam, guess_u, grid, newton_tol, prev)
        if state is None:
            failure = f"branch lost at lambda={lam:.6g}: Newton failed after step halving"
            break
        lambdas.append(lam)
        states.append(state.phi)
        residuals.append(state.residual)
        prev2, prev = prev, (lam, state.phi.data.real)

    order = np.argsort(lambdas)
    lambdas = np.array(lambdas)[order]
    states = [states[i] for i in order]
    residuals = np.array(residuals)[order] if len(residuals) else np.zeros(0)
    norms2 = np.array([s.l2() ** 2 for s in states])
    dphi = _branch_derivative(grid, lambdas, states)
    return Branch(V, f, grid, lambdas, states, residuals, norms2, dphi, -e0_abs, failure)


def _march_step(V, f, lam, guess_u, grid, newton_tol, prev):
    try:
        return newton_bound_state(V, f, lam, Field(grid, guess_u.astype(complex)), newton_tol)
    except (NoConvergenceError, TrivialSolutionError):
        pass
    if prev is None:
        return None
    # walk from the previous converged state with halved increments
    lam0, u = prev[0], prev[1].copy()
    span = lam - lam0
    floor = abs(span) / 1e4 if span != 0 else 0.0
    step = span / 2.0
    cur = lam0
    while abs(cur - lam) > 1e-14 * max(1.0, abs(lam)):
        if abs(step) < max(floor, 1e-14):
            return None
        nxt = cur + step if abs(lam - cur) > abs(step) else lam
        try:
            st = newton_bound_state(V, f, nxt, Field(grid, u.astype(complex)), newton_tol)
        except (NoConvergenceError, TrivialSolutionError):
            step /= 2.0
            continue
        cur, u = nxt, st.phi.data.real
    return newton_bound_state(V, f, lam, Field(grid, u.astype(complex)), newton_tol)


def _branch_derivative(grid, lambdas, states):
    """d(phi)/d(lambda) by centered differences (one-sided at the ends)."""
    m = len(states)
    if m < 2:
        return [None] * m
    arr = np.stack([s.data for s in states])
    d = np.empty_like(arr)
    d[0] = (arr[1] - arr[0]) / (lambdas[1] - lambdas[0])
    d[-1] = (arr[-1] - arr[-2]) / (lambdas[-1] - lambdas[-2])
    for i in range(1, m - 1):
        d[i] = (arr[i + 1] - arr[i - 1]) / (lambdas[i + 1] - lambdas[i - 1])
    return [Field(grid, d[i]) for i in range(m)]


def slope_condition(branch: Branch, lam: float) -> float:
    """d/d(lambda) of ||phi^lambda||_2^2 by centered differences at a sample."""
    if branch.failure and len(branch.lambdas) < 3:
        raise BranchRangeError("branch too short for slope evaluation")
    i = branch.index_of(lam)
    if i == 0 or i == len(branch.lambdas) - 1:
        raise BranchRangeError(f"lambda={lam} is not interior to the branch samples")
    return float(
        (branch.norms2[i + 1] - branch.norms2[i - 1]) / (branch.lambdas[i + 1] - branch.lambdas[i - 1])
    )


def refined_dphi(V, f, branch: Branch, i: int, d_delta: float = 0.0025, newton_tol: float = 1e-12) -> Field:
    """High-order d(phi)/d(lambda) at sample i from a 5-point stencil.

    The branch is a square-root fold in lambda, so the stencil differences in
    the smooth bifurcation coordinate delta = sqrt(|lambda - |e0||) and uses
    d(phi)/d(lambda) = d(phi)/d(delta) / (2 delta sign).  Used by the
    structural-identity checks, which need the generalized-kernel relation
    L_+ (d phi) = -phi far below the O(spacing^2) error of the branch
    differencing.
    """
    lam = float(branch.lambdas[i])
    e0_abs = abs(branch.e0)
    side = np.sign(lam - e0_abs)
    delta0 = np.sqrt(abs(lam - e0_abs))
    d_delta = min(d_delta, 0.4 * delta0)
    u0 = branch.states[i].data[0].real
    vals = {}
    for k in (-2, -1, 1, 2):
        lam_k = e0_abs + side * (delta0 + k * d_delta) ** 2
        st = newton_bound_state(V, f, lam_k, Field(branch.grid, u0.astype(complex)), newton_tol)
        vals[k] = st.phi.data[0].real
    du_ddelta = (vals[-2] - 8 * vals[-1] + 8 * vals[1] - vals[2]) / (12 * d_delta)
    du = du_ddelta / (2.0 * delta0 * side)
    return Field(branch.grid, du.astype(complex))
