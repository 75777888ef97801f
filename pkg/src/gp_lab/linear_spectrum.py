"""Discrete spectrum of -Delta + V and the spectral hypotheses.

Solves the linear eigenproblem (per angular channel for radial potentials,
on the even subspace for the double well), checks the two-level condition
e0 < e1 < 0 with 2 e1 > e0, and provides a finite-epsilon proxy for the
absence of a zero-energy threshold resonance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryMismatchError, InvalidParameterError
from .grids import CartesianGrid, Field, RadialGrid, radial_hamiltonian, restrict_even_subspace
from .model import Potential

DEFAULT_GAP_TOL = 1e-6


@dataclass
class Level:
    energy: float
    multiplicity: int
    l: int | None = None  # angular channel for radial geometry


@dataclass
class LinearSpectrum:
    V: Potential
    grid: object
    e0: float | None
    phi_lin: Field | None
    e1: float | None
    N: int
    xi_lin: list
    levels: list
    residuals: list
    n_bound: int
    gap_tol: float = DEFAULT_GAP_TOL
    cluster_split: float = 0.0  # raw eigenvalue spread inside the e1 cluster

    @property
    def sufficient(self) -> bool:
        return self.e0 is not None and self.e1 is not None


@dataclass
class EigvReport:
    ok: bool
    margins: dict


def _cluster(energies, gap_tol, scale):
    """Group sorted energies into degenerate clusters."""
    clusters = []
    for e in energies:
        if clusters and abs(e - clusters[-1][-1]) <= gap_tol * abs(scale):
            clusters[-1].append(e)
        else:
            clusters.append([e])
    return clusters


def solve_linear_spectrum(
    V: Potential,
    grid,
    k_eigs: int = 4,
    tol: float = 1e-9,
    l_max: int = 2,
    gap_tol: float = DEFAULT_GAP_TOL,
    seed: int = 0,
) -> LinearSpectrum:
    """Lowest bound states of -Delta + V, clustered into degenerate groups.

    Radial grids solve per angular channel l = 0..l_max and report each level
    with multiplicity 2l+1.  Cartesian grids solve on the even subspace (the
    double-well setting), with the parity projection applied inside the
    iteration.  Too few bound states is reported through n_bound, not raised.
    """
    if k_eigs < 2:
        raise InvalidParameterError("k_eigs must be >= 2")
    if isinstance(grid, RadialGrid):
        return _solve_radial(V, grid, k_eigs, tol, l_max, gap_tol)
    if isinstance(grid, CartesianGrid):
        return _solve_even_cartesian(V, grid, k_eigs, tol, gap_tol, seed)
    raise GeometryMismatchError(f"unsupported grid type {type(grid).__name__}")


def _solve_radial(V, grid, k_eigs, tol, l_max, gap_tol):
    found = []  # (energy, l, reduced eigenvector)
    for l in range(l_max + 1):
        op = radial_hamiltonian(grid, V, l)
        vals, vecs = op.eigh(k_eigs)
        for j, e in enumerate(vals):
            if e < 0:
                found.append((float(e), l, vecs[:, j]))
    found.sort(key=lambda t: t[0])

    levels = []
    residuals = []
    for e, l, u in found:
        op = radial_hamiltonian(grid, V, l)
        res = float(np.linalg.norm(op.matvec(u) - e * u) / np.linalg.norm(u))
        residuals.append(res)
        levels.append(Level(e, 2 * l + 1, l))

    n_bound = int(sum(lv.multiplicity for lv in levels))
    if len(found) < 2:
        e0 = found[0][0] if found else None
        phi = None
        if found:
            u = found[0][2] / np.sqrt(grid.h * np.sum(found[0][2] ** 2))
            if u[np.argmax(np.abs(u))] < 0:
                u = -u
            phi = Field(grid, u.astype(complex))
        return LinearSpectrum(V, grid, e0, phi, None, 0, [], levels, residuals, n_bound, gap_tol)

    e0, l0, u0 = found[0]
    if l0 != 0:
        raise SpectralStructureError("ground state is not in the l=0 channel")
    u0 = u0 / np.sqrt(grid.h * np.sum(u0**2))
    if u0[np.argmax(np.abs(u0))] < 0:
        u0 = -u0
    phi_lin = Field(grid, u0.astype(complex))

    e1, l1, _ = found[1]
    cluster = [(e, l, u) for e, l, u in found[1:] if abs(e - e1) <= gap_tol * abs(e1)]
    # degenerate replicas of a radial level live in one l-channel
    N = 2 * l1 + 1
    xi_lin = []
    for e, l, u in cluster:
        u = u / np.sqrt(grid.h * np.sum(u**2))
        if u[np.argmax(np.abs(u))] < 0:
            u = -u
        xi_lin.append({"l": l, "reduced": u})
    return LinearSpectrum(V, grid, float(e0), phi_lin, float(e1), N, xi_lin, levels, residuals, n_bound, gap_tol)


class SpectralStructureError(InvalidParameterError):
    """The computed spectrum does not have the assumed structure."""


def _fft_preconditioner(grid, shift):
    k2 = grid.k2()

    def apply(u):
        flat = u.reshape((grid.n,) * 3)
        return (np.fft.ifftn(np.fft.fftn(flat) / (k2 + shift))).real.reshape(u.shape)

    return apply


def _solve_even_cartesian(V, grid, k_eigs, tol, gap_tol, seed):
    from scipy.sparse.linalg import LinearOperator, lobpcg

    n3 = grid.n**3
    Vx = V(grid.points())
    penalty = 10.0 + float(np.max(np.abs(Vx)))
    k2 = grid.k2()

    def matvec(u):
        f = u.reshape((grid.n,) * 3)
        fe = restrict_even_subspace(grid, f)
        out = np.fft.ifftn(k2 * np.fft.fftn(fe)).real + Vx * fe
        out = restrict_even_subspace(grid, out)
        # push the odd complement above the window so LOBPCG ignores it
        out += penalty * (f - fe)
        return out.reshape(u.shape)

    A = LinearOperator((n3, n3), matvec=matvec, dtype=float)
    prec = _fft_preconditioner(grid, penalty)
    M = LinearOperator((n3, n3), matvec=prec, dtype=float)

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n3, k_eigs + 2))
    for j in range(X.shape[1]):
        X[:, j] = restrict_even_subspace(grid, X[:, j].reshape((grid.n,) * 3)).ravel()
    import warnings

    with warnings.catch_warnings():
        # eigenvalues converge quadratically in the residual; vector-level
        # stagnation past `tol` is reported through the residual table instead
        warnings.simplefilter("ignore")
        vals, vecs = lobpcg(A, X, M=M, tol=tol, maxiter=400, largest=False)
    order = np.argsort(vals)
    vals, vecs = vals[order], vecs[:, order]

    levels, residuals, fields = [], [], []
    for j, e in enumerate(vals):
        if e >= 0:
            continue
        f = restrict_even_subspace(grid, vecs[:, j].reshape((grid.n,) * 3))
        f = f / np.sqrt(grid.quad(f * f).real)
        res = np.fft.ifftn(k2 * np.fft.fftn(f)).real + Vx * f - e * f
        residuals.append(float(np.sqrt(grid.quad(np.abs(res) ** 2).real)))
        fields.append((float(e), f))
    if not fields:
        return LinearSpectrum(V, grid, None, None, None, 0, [], [], residuals, 0, gap_tol)
    clusters = _cluster([e for e, _ in fields], gap_tol, fields[1][0] if len(fields) > 1 else 1.0)
    for cl in clusters:
        levels.append(Level(float(np.mean(cl)), len(cl)))

    n_bound = len(fields)
    if len(clusters) < 2:
        e0 = fields[0][0] if fields else None
        phi = None
        if fields:
            f = fields[0][1]
            if f.flat[np.argmax(np.abs(f))] < 0:
                f = -f
            phi = Field(grid, f.astype(complex))
        return LinearSpectrum(V, grid, e0, phi, None, 0, [], levels, residuals, n_bound, gap_tol)

    e0 = fields[0][0]
    f0 = fields[0][1]
    if f0.flat[np.argmax(np.abs(f0))] < 0:
        f0 = -f0
    phi_lin = Field(grid, f0.astype(complex))
    excited = [(e, f) for e, f in fields[1:] if abs(e - levels[1].energy) <= gap_tol * abs(levels[1].energy)]
    e1 = float(np.mean([e for e, _ in excited]))
    split = float(np.ptp([e for e, _ in excited])) if len(excited) > 1 else 0.0
    xi_lin = [Field(grid, f.astype(complex)) for _, f in excited]
    return LinearSpectrum(
        V, grid, float(e0), phi_lin, e1, len(excited), xi_lin, levels, residuals, n_bound, gap_tol, split
    )


def check_eigv_condition(spec: LinearSpectrum) -> EigvReport:
    """Two-level hypothesis: e0 < e1 < 0 and 2 e1 - e0 > 0."""
    if not spec.sufficient:
        return EigvReport(False, {"reason": "fewer than two bound levels", "n_bound": spec.n_bound})
    e0, e1 = spec.e0, spec.e1
    margins = {"e1_minus_e0": e1 - e0, "minus_e1": -e1, "two_e1_minus_e0": 2 * e1 - e0}
    ok = e0 < e1 < 0 and 2 * e1 - e0 > 0
    return EigvReport(bool(ok), margins)


@dataclass
class ThresholdReport:
    eps: list
    min_singular_values: list
    floors: list
    verdict: str


def check_threshold_resonance(
    V: Potential,
    eps_ladder=(1e-2, 1e-3, 1e-4),
    resolutions=((60.0, 480),),
    floor_coef: float = 10.0,
) -> ThresholdReport:
    """Finite-epsilon proxy for invertibility of I + (-Delta + i0)^{-1} V.

    For each epsilon and resolution the discretized map
    u -> u + (-Delta + i eps)^{-1}(V u) is assembled (dense, l=0 channel for
    radial V) and its smallest singular value recorded.  Near a zero-energy
    resonance the smallest singular value collapses like sqrt(eps), so the
    verdict compares it against floor_coef * sqrt(eps).
    """
    eps_ladder = sorted(eps_ladder, reverse=True)
    if any(e <= 0 for e in eps_ladder):
        raise InvalidParameterError("epsilon ladder must be positive")
    sigmas_all = []
    for eps in eps_ladder:
        worst = np.inf
        for r_max, n in resolutions:
            worst = min(worst, _threshold_sigma_min(V, eps, RadialGrid(r_max, n)))
        sigmas_all.append(worst)

    floors = [floor_coef * np.sqrt(e) for e in eps_ladder]
    # near a resonance the smallest singular value collapses ~ sqrt(eps); the
    # verdict reads the smallest rung and the collapse trend across the ladder
    above_last = sigmas_all[-1] > floors[-1]
    trend = sigmas_all[-1] / max(sigmas_all[0], 1e-300)
    if above_last and trend >= 0.3:
        verdict = "no resonance (numerical)"
    elif not above_last and trend < 0.3:
        verdict = "resonant (numerical)"
    else:
        verdict = "inconclusive"
    return ThresholdReport(list(eps_ladder), sigmas_all, floors, verdict)


def _threshold_sigma_min(V, eps, grid):
    if V.kind == "zero":
        return 1.0
    if not V.is_radial:
        raise GeometryMismatchError("threshold proxy is implemented for radial potentials")
    n = grid.n
    T = np.zeros((n, n), dtype=complex)
    h2 = grid.h**2
    np.fill_diagonal(T, 2.0 / h2 + 1j * eps)
    idx = np.arange(n - 1)
    T[idx, idx + 1] = -1.0 / h2
    T[idx + 1, idx] = -1.0 / h2
    G = np.linalg.inv(T)
    A = np.eye(n) + G * V.radial(grid.r)[None, :]
    return float(np.linalg.svd(A, compute_uv=False)[-1])
