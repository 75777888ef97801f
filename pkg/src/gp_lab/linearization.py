"""Linearization about the soliton: L = J H, neutral modes, canonical basis,
Riesz projections onto the discrete subspace, and the linearized propagator.

With f(s) = -g*s the two Schrodinger-type operators are

    L_-  =  -Delta + lambda + V + g phi^2
    L_+  =  -Delta + lambda + V + 3 g phi^2

and L = [[0, L_-], [-L_+, 0]] acts on two-component (real, imaginary)
vectors.  The generalized kernel is spanned by (0, phi) and (dphi, 0) with
L_+ dphi = -phi; the neutral modes satisfy L_- eta_n = E xi_n and
L_+ xi_n = E eta_n, i.e. L (xi_n, i eta_n)^T = i E (xi_n, i eta_n)^T.

Radial fast path: the neutral modes live in the l=1 channel; one reduced
eigensolve produces the common profile of the N = 3 replicas
xi_n = (x_n/|x|) xi(r).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .bound_state import FOUR_PI, BoundState, Branch
from .errors import (
    DegeneratePairingError,
    GeometryMismatchError,
    IllConditionedProjectionError,
    InvalidParameterError,
    NoConvergenceError,
    SpectralWindowError,
)
from .grids import CartesianGrid, Field, RadialGrid, TridiagOperator, radial_hamiltonian
from .model import Nonlinearity, Potential

Y1_WEIGHT = np.sqrt(FOUR_PI / 3.0)  # x_n/|x| = Y1_WEIGHT * Y_{10} along the axis


@dataclass
class LinearizedSystem:
    bs: BoundState
    V: Potential
    f: Nonlinearity
    lam: float
    dphi: Field  # branch-differenced d(phi)/d(lambda)
    kernel_residuals: dict
    # linear reference levels of -Delta + V, used for spectral windows
    e0_lin: float
    e1_lin: float

    @property
    def grid(self):
        return self.bs.phi.grid

    @property
    def is_radial(self) -> bool:
        return self.bs.phi.is_radial

    # -- diagonal potentials ------------------------------------------------

    def _phi_values(self):
        """phi on grid nodes (radial profile or 3D array)."""
        if self.is_radial:
            return self.bs.phi.data[0].real / (np.sqrt(FOUR_PI) * self.grid.r)
        return self.bs.phi.data.real

    def w_minus(self):
        phi = self._phi_values()
        return self.f.g * phi**2

    def w_plus(self):
        phi = self._phi_values()
        return 3.0 * self.f.g * phi**2

    def Lm_op(self, l: int = 0) -> TridiagOperator:
        op = radial_hamiltonian(self.grid, self.V, l, self.lam)
        op.diag = op.diag + self.w_minus()
        return op

    def Lp_op(self, l: int = 0) -> TridiagOperator:
        op = radial_hamiltonian(self.grid, self.V, l, self.lam)
        op.diag = op.diag + self.w_plus()
        return op

    # -- cartesian applies ---------------------------------------------------

    def apply_Lm(self, u):
        g3 = self.grid
        k2 = g3.k2()
        return np.fft.ifftn(k2 * np.fft.fftn(u)) + (self.V(g3.points()) + self.lam + self.w_minus()) * u

    def apply_Lp(self, u):
        g3 = self.grid
        k2 = g3.k2()
        return np.fft.ifftn(k2 * np.fft.fftn(u)) + (self.V(g3.points()) + self.lam + self.w_plus()) * u


def build_linearized(bs: BoundState, branch: Branch, sample_index: int | None = None) -> LinearizedSystem:
    """Assemble L_+/L_- about a branch sample and verify the kernel relations.

    The zero-mode vector d(phi)/d(lambda) is the branch centered difference at
    the sample; its generalized-kernel residual carries the O(spacing^2)
    differencing error and is stored, not hidden.
    """
    if sample_index is None:
        sample_index = branch.index_of(bs.lam)
    dphi = branch.dphi[sample_index]
    if dphi is None:
        raise InvalidParameterError("branch is too short to difference d(phi)/d(lambda)")

    lin = LinearizedSystem(
        bs=bs,
        V=branch.V,
        f=branch.f,
        lam=float(bs.lam),
        dphi=dphi,
        kernel_residuals={},
        e0_lin=0.0,
        e1_lin=0.0,
    )
    if bs.phi.is_radial:
        grid = bs.phi.grid
        e0_lin = radial_hamiltonian(grid, branch.V, 0).eigh(1)[0][0]
        e1_lin = radial_hamiltonian(grid, branch.V, 1).eigh(1)[0][0]
        u0 = bs.phi.data[0].real
        du = dphi.data[0].real
        r_m = lin.Lm_op(0).matvec(u0)
        r_p = lin.Lp_op(0).matvec(du) + u0
        nrm = lambda v: float(np.sqrt(grid.h) * np.linalg.norm(v))
        lin.kernel_residuals = {
            "Lm_phi": nrm(r_m) / max(nrm(u0), 1e-300),
            "Lp_dphi_plus_phi": nrm(r_p) / max(nrm(u0), 1e-300),
        }
    else:
        from .linear_spectrum import solve_linear_spectrum

        spec = solve_linear_spectrum(branch.V, bs.phi.grid, k_eigs=4)
        e0_lin, e1_lin = spec.e0, spec.e1
        phi = bs.phi.data.real
        du = dphi.data.real
        r_m = lin.apply_Lm(phi).real
        r_p = lin.apply_Lp(du).real + phi
        nrm = lambda u: float(np.sqrt(bs.phi.grid.quad(np.abs(u) ** 2).real))
        lin.kernel_residuals = {
            "Lm_phi": nrm(r_m) / max(nrm(phi), 1e-300),
            "Lp_dphi_plus_phi": nrm(r_p) / max(nrm(phi), 1e-300),
        }
    lin.e0_lin, lin.e1_lin = float(e0_lin), float(e1_lin)

    if lin.kernel_residuals["Lm_phi"] > 100 * max(bs.residual, 1e-12):
        raise InvalidParameterError(
            f"inconsistent branch sample: ||L_- phi|| = {lin.kernel_residuals['Lm_phi']:.3e}"
        )
    return lin


def zero_amplitude_linearized(V: Potential, grid, lam: float, f: Nonlinearity | None = None) -> LinearizedSystem:
    """Zero-amplitude limit phi = 0, where L_+ = L_- = -Delta + V + lambda."""
    if f is None:
        f = Nonlinearity(g=0.0)
    if isinstance(grid, RadialGrid):
        zero = Field(grid, np.zeros(grid.n, dtype=complex))
        e0 = radial_hamiltonian(grid, V, 0).eigh(1)[0][0] if V.kind != "zero" else 0.0
        e1 = radial_hamiltonian(grid, V, 1).eigh(1)[0][0] if V.kind != "zero" else 0.0
    else:
        zero = Field(grid, np.zeros((grid.n,) * 3, dtype=complex))
        e0 = e1 = 0.0
    bs = BoundState(float(lam), zero, 0.0, f.g)
    return LinearizedSystem(bs, V, f, float(lam), zero, {}, float(e0), float(e1))


# ---------------------------------------------------------------------------
# neutral modes
# ---------------------------------------------------------------------------


@dataclass
class RawNeutralModes:
    E: float
    N: int
    geometry: str
    # radial: common reduced profiles r*xi(r), r*eta(r) of the replicas
    xi_red: np.ndarray | None = None
    eta_red: np.ndarray | None = None
    # cartesian: one real pair per mode
    xi_fields: list = field(default_factory=list)
    eta_fields: list = field(default_factory=list)
    eigen_residual: float = 0.0
    pairings: list = field(default_factory=list)  # <u1, u2> per raw vector, all > 0

    def ritz_values(self):
        return [self.E] * self.N


def neutral_modes(lin: LinearizedSystem, tol: float = 1e-9) -> RawNeutralModes:
    """Degenerate neutral eigenpairs of L at +iE.

    Solves L_- L_+ xi = E^2 xi (l=1 channel for radial geometry, the even
    subspace for the double well) and slaves eta = L_+ xi / E.  E must land in
    the window (0, 1.5 |e1 - e0|) of the linear gap.
    """
    gap = lin.e1_lin - lin.e0_lin
    if lin.is_radial:
        raw = _neutral_radial(lin, tol)
    else:
        raw = _neutral_cartesian(lin, tol)
    if not (0.0 < raw.E < 1.5 * gap):
        raise SpectralWindowError(f"neutral frequency E={raw.E:.6g} outside (0, {1.5 * gap:.6g})")
    return raw


def _neutral_radial(lin, tol):
    grid = lin.grid
    Lm = lin.Lm_op(1)
    Lp = lin.Lp_op(1)
    A_m = sp.diags([np.full(grid.n - 1, Lm.off), Lm.diag, np.full(grid.n - 1, Lm.off)], [-1, 0, 1], format="csc")
    A_p = sp.diags([np.full(grid.n - 1, Lp.off), Lp.diag, np.full(grid.n - 1, Lp.off)], [-1, 0, 1], format="csc")
    M = (A_m @ A_p).tocsc()
    e_guess = lin.e1_lin + lin.lam
    if e_guess <= 0:
        raise SpectralWindowError(f"linear estimate e1+lambda={e_guess:.6g} is not positive")
    sigma = e_guess**2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals, vecs = spla.eigs(M, k=2, sigma=sigma, which="LM")
    i_best = int(np.argmin(np.abs(vals - sigma)))
    xi = np.real(vecs[:, i_best])

    # inverse-iteration polish at a slightly detuned shift
    E2 = float(np.real(vals[i_best]))
    for _ in range(3):
        lu = spla.splu(M - (E2 * (1.0 - 1e-8)) * sp.identity(grid.n, format="csc"))
        xi = lu.solve(xi)
        xi = xi / (np.sqrt(grid.h) * np.linalg.norm(xi))
        w = A_p @ xi
        E2 = float(np.dot(w, A_m @ w) / np.dot(w, xi))
    E = float(np.sqrt(E2))
    eta = (A_p @ xi) / E
    res = np.sqrt(grid.h) * np.linalg.norm(A_m @ eta - E * xi) / (np.sqrt(grid.h) * np.linalg.norm(xi))

    pairing = grid.h * float(np.dot(xi, eta))
    if pairing < 0:
        eta, xi, pairing = -eta, -xi, -pairing  # flip the overall sign convention
    pairing = grid.h * float(np.dot(xi, eta))
    if pairing <= 0:
        raise DegeneratePairingError("neutral eigenvector has non-positive <u1, u2> pairing")
    return RawNeutralModes(
        E=E, N=3, geometry="radial", xi_red=xi, eta_red=eta, eigen_residual=float(res), pairings=[pairing] * 3
    )


def _neutral_cartesian(lin, tol, block: int = 2, max_dim: int = 40, sweeps: int = 120):
    """Block Davidson on the symmetric pencil diag(L+, L-) v = E swap(v).

    Two-component search vectors keep the projected problem exactly
    symmetric-generalized, which stays robust when xi and eta differ
    strongly; the expansion directions are preconditioned with the free
    2x2 symbol.
    """
    from scipy.linalg import eig as dense_eig

    from .grids import restrict_even_subspace
    from .linear_spectrum import solve_linear_spectrum

    grid = lin.grid
    n = grid.n
    k2 = grid.k2()
    Vx = lin.V(grid.points())
    wm = Vx + lin.lam + lin.w_minus()
    wp = Vx + lin.lam + lin.w_plus()

    def apply_A(v):  # diag(L+, L-)
        a = np.fft.ifftn(k2 * np.fft.fftn(v[0])).real + wp * v[0]
        b = np.fft.ifftn(k2 * np.fft.fftn(v[1])).real + wm * v[1]
        return np.stack([a, b])

    swap = lambda v: np.stack([v[1], v[0]])
    dot = lambda u, v: float(grid.quad(np.sum(u * v, axis=0)).real)
    nrm = lambda u: np.sqrt(max(dot(u, u), 0.0))

    spec = solve_linear_spectrum(lin.V, grid, k_eigs=4)
    if spec.N < 1:
        raise SpectralWindowError("no degenerate excited level found for the linearization")
    e_guess = spec.e1 + lin.lam

    def project_even(v):
        return np.stack([restrict_even_subspace(grid, v[0]), restrict_even_subspace(grid, v[1])])

    W, AW = [], []

    def append(v):
        for u in W:
            v = v - dot(v, u) * u
        for u in W:
            v = v - dot(v, u) * u
        nv = nrm(v)
        if nv < 1e-12:
            return False
        v = v / nv
        W.append(v)
        AW.append(apply_A(v))
        return True

    for fld in spec.xi_lin[:block]:
        x = restrict_even_subspace(grid, fld.data.real.copy())
        append(np.stack([x, x]))
        append(np.stack([x, -x]))

    lam2 = lin.lam
    theta_blk, Y = None, None
    for sweep in range(sweeps):
        m = len(W)
        Ah = np.zeros((m, m))
        Bh = np.zeros((m, m))
        for i in range(m):
            for j in range(m):
                Ah[i, j] = dot(W[i], AW[j])
                Bh[i, j] = dot(W[i], swap(W[j]))
        Ah = 0.5 * (Ah + Ah.T)
        Bh = 0.5 * (Bh + Bh.T)
        vals, vecs = dense_eig(Ah, Bh)
        ok = np.isfinite(vals) & (np.abs(np.imag(vals)) < 1e-8 * (1 + np.abs(vals)))
        cand = [(abs(np.real(v) - e_guess), np.real(v), j) for j, v in enumerate(vals) if ok[j]
                and 0.0 < np.real(v) < lam2 * 1.5]
        cand.sort()
        if len(cand) < block:
            raise SpectralWindowError("no neutral Ritz values inside the spectral window")
        sel = cand[:block]
        theta_blk = np.array([c[1] for c in sel])
        Y, AY = [], []
        for _, th, j in sel:
            q = np.real(vecs[:, j])
            y = sum(q[i] * W[i] for i in range(m))
            y = y / nrm(y)
            Y.append(y)
            AY.append(apply_A(y))
        resids = [AY[j] - theta_blk[j] * swap(Y[j]) for j in range(block)]
        worst = max(nrm(r) for r in resids)
        if worst < max(tol, 1e-11):
            break
        if m + block > max_dim:
            W, AW = [], []
            for y in Y:
                append(y)
            for r in resids:
                append(_pencil_precondition(r, k2, lam2, float(np.mean(theta_blk)), project_even))
            continue
        for j in range(block):
            append(_pencil_precondition(resids[j], k2, lam2, theta_blk[j], project_even))
    else:
        raise NoConvergenceError(f"neutral-mode Davidson stalled at residual {worst:.3e}")

    if np.ptp(theta_blk) > 1e-5 * abs(np.mean(theta_blk)):
        raise SpectralWindowError(f"neutral Ritz values not degenerate: {theta_blk}")
    E = float(np.mean(theta_blk))

    # slave the pairs exactly and measure the eigen-residual; the xi parts of
    # the converged two-component vectors span the degenerate xi-space
    xs = [y[0] for y in Y]
    B = np.array([[grid.quad(a * b).real for b in xs] for a in xs])
    w, Q = np.linalg.eigh(B)
    xs = [sum(Q[i, j] * xs[i] for i in range(block)) / np.sqrt(w[j]) for j in range(block)]

    xi_fields, eta_fields, pairings, res = [], [], [], 0.0
    for x in xs:
        eta = (np.fft.ifftn(k2 * np.fft.fftn(x)).real + wp * x) / E
        r = np.fft.ifftn(k2 * np.fft.fftn(eta)).real + wm * eta - E * x
        res = max(res, float(np.sqrt(grid.quad(r * r).real)))
        p = grid.quad(x * eta).real
        if p <= 0:
            raise DegeneratePairingError("cartesian neutral pair has non-positive pairing")
        xi_fields.append(x)
        eta_fields.append(eta)
        pairings.append(float(p))
    return RawNeutralModes(
        E=E, N=block, geometry="cartesian", xi_fields=xi_fields, eta_fields=eta_fields,
        eigen_residual=res, pairings=pairings,
    )


def _pencil_precondition(r, k2, lam, theta, project_even):
    """Approximate (A_free - theta B)^{-1} r with the free 2x2 symbol."""
    kl = k2 + lam
    det = kl**2 - theta**2
    det = np.where(np.abs(det) < 1e-4, 1e-4, det)
    r0 = np.fft.fftn(r[0])
    r1 = np.fft.fftn(r[1])
    t0 = (kl * r0 + theta * r1) / det
    t1 = (theta * r0 + kl * r1) / det
    t = np.stack([np.fft.ifftn(t0).real, np.fft.ifftn(t1).real])
    return project_even(t)


# ---------------------------------------------------------------------------
# canonical basis
# ---------------------------------------------------------------------------


@dataclass
class NeutralBasis:
    E: float
    N: int
    geometry: str
    # radial: common reduced profiles, replicas xi_n = (x_n/|x|) xi(r)
    xi_red: np.ndarray | None = None
    eta_red: np.ndarray | None = None
    grid: object | None = None
    # cartesian: explicit real mode fields
    xi_fields: list = field(default_factory=list)
    eta_fields: list = field(default_factory=list)

    def pairing_matrix(self) -> np.ndarray:
        """<xi_m, eta_n>, expected identity."""
        if self.geometry == "radial":
            p = (FOUR_PI / 3.0) * self.grid.h * float(np.dot(self.xi_red, self.eta_red))
            return p * np.eye(3)
        P = np.zeros((self.N, self.N))
        for m in range(self.N):
            for n in range(self.N):
                P[m, n] = self.grid.quad(self.xi_fields[m] * self.eta_fields[n]).real
        return P

    def xi_stack(self, lin_grid=None) -> np.ndarray:
        """Axisymmetric channel stack of xi_1 (radial geometry, l=1 channel)."""
        stack = np.zeros((2, self.grid.n), dtype=complex)
        stack[1] = Y1_WEIGHT * self.xi_red
        return stack

    def eta_stack(self) -> np.ndarray:
        stack = np.zeros((2, self.grid.n), dtype=complex)
        stack[1] = Y1_WEIGHT * self.eta_red
        return stack

    def antisym_matrix(self, lin: LinearizedSystem) -> np.ndarray:
        """M_mn = int f'(phi^2) phi^2 (xi_m eta_n - xi_n eta_m) dx."""
        if self.geometry == "radial":
            return np.zeros((3, 3))  # xi_m eta_n - xi_n eta_m vanishes pointwise
        w = lin.f.eval(lin._phi_values() ** 2, 1) * lin._phi_values() ** 2
        S = np.zeros((self.N, self.N))
        for m in range(self.N):
            for n in range(self.N):
                S[m, n] = lin.grid.quad(w * self.xi_fields[m] * self.eta_fields[n]).real
        return S - S.T


def canonical_basis(lin: LinearizedSystem, raw: RawNeutralModes, enforce_tol: float = 1e-10) -> NeutralBasis:
    """Real mode pairs with <xi_m, eta_n> = delta_mn and vanishing
    antisymmetric coupling, ordered deterministically.

    Radial geometry: the replicas share one profile; only the joint
    normalization is needed.  Non-radial geometry: the raw pairs are whitened
    with the symmetric pairing, then a residual orthogonal recombination is
    found by Newton on the antisymmetric functional (it is zero up to the
    eigensolver residual when the raw pairs are exactly slaved).
    """
    if raw.geometry == "radial":
        grid = lin.grid
        p = (FOUR_PI / 3.0) * grid.h * float(np.dot(raw.xi_red, raw.eta_red))
        if p <= 0:
            raise DegeneratePairingError("non-positive radial pairing")
        s = 1.0 / np.sqrt(p)
        return NeutralBasis(
            E=raw.E, N=3, geometry="radial", xi_red=s * raw.xi_red, eta_red=s * raw.eta_red, grid=grid
        )

    grid = lin.grid
    N = raw.N
    Q = np.zeros((N, N))
    for m in range(N):
        for n in range(N):
            Q[m, n] = grid.quad(raw.xi_fields[m] * raw.eta_fields[n]).real
    Q = 0.5 * (Q + Q.T)
    w, U = np.linalg.eigh(Q)
    if np.min(w) <= 1e-12 * np.max(np.abs(w)):
        raise DegeneratePairingError(f"pairing matrix is numerically singular: eigenvalues {w}")
    C = U @ np.diag(w**-0.5) @ U.T  # symmetric whitening, C Q C^T = I
    xi = [sum(C[n, k] * raw.xi_fields[k] for k in range(N)) for n in range(N)]
    eta = [sum(C[n, k] * raw.eta_fields[k] for k in range(N)) for n in range(N)]
    basis = NeutralBasis(E=raw.E, N=N, geometry="cartesian", xi_fields=xi, eta_fields=eta, grid=grid)
    basis = _enforce_antisymmetry(lin, basis, enforce_tol)
    return _order_modes(lin, basis)


def _enforce_antisymmetry(lin, basis, tol, max_iter=30):
    """Gauss-Newton on the recombination that zeroes the antisymmetric coupling.

    Simultaneous rotations of both families leave the functional invariant,
    so the search runs over the pairing-preserving symmetric factors
    (xi -> S xi, eta -> S^{-1} eta) with S = exp(sigma), sigma symmetric
    traceless; the minimum-norm step targets the nearest canonical family.
    Applied to exactly slaved eigenpairs the residual is already ~0 and the
    recombination converges to the identity.
    """
    if basis.N != 2:
        return basis  # implemented for the double-well doublet
    sig = np.zeros(2)  # sigma = [[s0, s1], [s1, -s0]]
    b = basis
    for _ in range(max_iter):
        b = _symmetric_recombination(basis, sig)
        m12 = b.antisym_matrix(lin)[0, 1]
        if abs(m12) <= tol:
            return b
        grad = np.zeros(2)
        ds = 1e-6
        for j in range(2):
            sp_ = sig.copy()
            sp_[j] += ds
            grad[j] = (_symmetric_recombination(basis, sp_).antisym_matrix(lin)[0, 1] - m12) / ds
        g2 = float(np.dot(grad, grad))
        if g2 == 0:
            break
        sig = sig - grad * (m12 / g2)  # minimum-norm Gauss-Newton step
    b = _symmetric_recombination(basis, sig)
    if abs(b.antisym_matrix(lin)[0, 1]) > max(tol, 1e-8):
        raise NoConvergenceError("antisymmetric-coupling enforcement did not converge")
    return b


def _symmetric_recombination(basis, sig):
    from scipy.linalg import expm

    sigma = np.array([[sig[0], sig[1]], [sig[1], -sig[0]]])
    S = expm(sigma)
    Sinv = expm(-sigma)
    xi = [S[n, 0] * basis.xi_fields[0] + S[n, 1] * basis.xi_fields[1] for n in range(2)]
    eta = [Sinv[n, 0] * basis.eta_fields[0] + Sinv[n, 1] * basis.eta_fields[1] for n in range(2)]
    return NeutralBasis(E=basis.E, N=2, geometry="cartesian", xi_fields=xi, eta_fields=eta, grid=basis.grid)


def _order_modes(lin, basis):
    """Deterministic ordering/sign: by overlap with reference quadrupoles."""
    if basis.geometry != "cartesian":
        return basis
    grid = basis.grid
    pts = grid.points()
    r2 = grid.radius2()
    q1 = 2 * pts[..., 2] ** 2 - pts[..., 0] ** 2 - pts[..., 1] ** 2
    q2 = pts[..., 0] ** 2 - pts[..., 1] ** 2
    damp = np.exp(-0.25 * r2)
    refs = [q1 * damp, q2 * damp]
    overlaps = [[abs(grid.quad(x * ref).real) for ref in refs] for x in basis.xi_fields]
    order = [0, 1] if overlaps[0][0] >= overlaps[1][0] else [1, 0]
    xi = [basis.xi_fields[i] for i in order]
    eta = [basis.eta_fields[i] for i in order]
    for n in range(2):
        s = np.sign(grid.quad(xi[n] * refs[n]).real) or 1.0
        xi[n] = s * xi[n]
        eta[n] = s * eta[n]
    return NeutralBasis(E=basis.E, N=2, geometry="cartesian", xi_fields=xi, eta_fields=eta, grid=grid)


def rotated_basis(basis: NeutralBasis, theta: float) -> NeutralBasis:
    """Deliberately non-canonical basis: rotate the xi family only.

    The pairs no longer satisfy the slaved eigen-relations as matched pairs,
    which is exactly what the basis-necessity demonstrations need.
    """
    if basis.geometry != "cartesian" or basis.N != 2:
        raise GeometryMismatchError("rotated demo basis is defined for the cartesian doublet")
    c, s = np.cos(theta), np.sin(theta)
    xi = [c * basis.xi_fields[0] - s * basis.xi_fields[1], s * basis.xi_fields[0] + c * basis.xi_fields[1]]
    return NeutralBasis(
        E=basis.E, N=2, geometry="cartesian", xi_fields=xi, eta_fields=[e.copy() for e in basis.eta_fields],
        grid=basis.grid,
    )


# ---------------------------------------------------------------------------
# discrete (Riesz) projection
# ---------------------------------------------------------------------------


@dataclass
class DiscreteProjection:
    lin: LinearizedSystem
    basis: NeutralBasis
    slope: float  # d ||phi||^2 / d lambda

    @classmethod
    def build(cls, lin: LinearizedSystem, basis: NeutralBasis) -> "DiscreteProjection":
        if lin.is_radial:
            slope = 2.0 * lin.grid.h * float(np.dot(lin.bs.phi.data[0].real, lin.dphi.data[0].real))
        else:
            slope = 2.0 * lin.grid.quad(lin.bs.phi.data.real * lin.dphi.data.real).real
        if abs(slope) < 1e-12:
            raise IllConditionedProjectionError(f"branch slope {slope:.3e} too small for the projection")
        return cls(lin, basis, float(slope))

    # two-component vectors: radial (2, C, n) channel stacks, cartesian (2, n, n, n)

    def _inner(self, X, Y):
        if self.lin.is_radial:
            return complex(self.lin.grid.h * np.sum(X * np.conj(Y)))
        return complex(self.lin.grid.quad(np.sum(X * np.conj(Y), axis=0)))

    def _dyad_vectors(self):
        lin, basis = self.lin, self.basis
        if lin.is_radial:
            C = None  # channel count resolved per input
            phi = lin.bs.phi.data[0]
            dphi = lin.dphi.data[0]
            xi = Y1_WEIGHT * basis.xi_red
            eta = Y1_WEIGHT * basis.eta_red
            return phi, dphi, [xi], [eta]
        return lin.bs.phi.data, lin.dphi.data, basis.xi_fields, basis.eta_fields

    def apply_disc(self, X: np.ndarray) -> np.ndarray:
        """P_disc X for a two-component vector X."""
        phi, dphi, xis, etas = self._dyad_vectors()
        out = np.zeros_like(np.asarray(X, dtype=complex))
        if self.lin.is_radial:
            C = X.shape[1]
            h = self.lin.grid.h
            dot = lambda a, b: h * np.sum(a * np.conj(b))
            # zero modes live in the l=0 channel
            c1 = dot(X[1, 0], dphi)  # <X, (0, dphi)>
            c2 = dot(X[0, 0], phi)  # <X, (phi, 0)>
            out[1, 0] += (2.0 / self.slope) * c1 * phi
            out[0, 0] += (2.0 / self.slope) * c2 * dphi
            if C > 1:
                for xi, eta in zip(xis, etas):
                    a = dot(X[0, 1], -1j * eta) + dot(X[1, 1], xi)  # <X, (-i eta, xi)>
                    b = dot(X[0, 1], 1j * eta) + dot(X[1, 1], xi)  # <X, (+i eta, xi)>
                    out[0, 1] += -0.5j * (a * xi - b * xi)
                    out[1, 1] += -0.5j * (a * (1j * eta) - b * (-1j * eta))
            return out
        q = self.lin.grid.quad
        c1 = q(X[1] * np.conj(dphi))
        c2 = q(X[0] * np.conj(phi))
        out[1] += (2.0 / self.slope) * c1 * phi
        out[0] += (2.0 / self.slope) * c2 * dphi
        for xi, eta in zip(xis, etas):
            a = q(X[0] * np.conj(-1j * eta)) + q(X[1] * np.conj(xi))
            b = q(X[0] * np.conj(1j * eta)) + q(X[1] * np.conj(xi))
            out[0] += -0.5j * (a * xi - b * xi)
            out[1] += -0.5j * (a * (1j * eta) - b * (-1j * eta))
        return out

    def apply_pc(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=complex) - self.apply_disc(X)

    def apply_disc_sector(self, l: int, pair: np.ndarray) -> np.ndarray:
        """P_disc restricted to one radial angular sector; pair has shape (2, n).

        Sector l=0 carries the zero modes, sector l=1 the neutral modes, all
        other sectors are free of discrete spectrum.
        """
        if not self.lin.is_radial:
            raise GeometryMismatchError("sector projection is a radial-geometry operation")
        h = self.lin.grid.h
        out = np.zeros_like(np.asarray(pair, dtype=complex))
        dot = lambda a, b: h * np.sum(a * np.conj(b))
        if l == 0:
            phi = self.lin.bs.phi.data[0]
            dphi = self.lin.dphi.data[0]
            out[1] += (2.0 / self.slope) * dot(pair[1], dphi) * phi
            out[0] += (2.0 / self.slope) * dot(pair[0], phi) * dphi
        elif l == 1:
            xi = Y1_WEIGHT * self.basis.xi_red
            eta = Y1_WEIGHT * self.basis.eta_red
            a = dot(pair[0], -1j * eta) + dot(pair[1], xi)
            b = dot(pair[0], 1j * eta) + dot(pair[1], xi)
            out[0] += -0.5j * (a - b) * xi
            out[1] += -0.5j * (a + b) * (1j * eta)
        return out

    def apply_pc_sector(self, l: int, pair: np.ndarray) -> np.ndarray:
        return np.asarray(pair, dtype=complex) - self.apply_disc_sector(l, pair)


def discrete_projection(lin: LinearizedSystem, basis: NeutralBasis) -> DiscreteProjection:
    return DiscreteProjection.build(lin, basis)


# ---------------------------------------------------------------------------
# linearized propagation and spectral-assumption diagnostics
# ---------------------------------------------------------------------------


def _sector_operator(lin: LinearizedSystem, l: int) -> sp.spmatrix:
    """Sparse block [[0, L_-], [-L_+, 0]] in radial sector l (reduced)."""
    n = lin.grid.n
    Lm, Lp = lin.Lm_op(l), lin.Lp_op(l)
    Am = sp.diags([np.full(n - 1, Lm.off), Lm.diag, np.full(n - 1, Lm.off)], [-1, 0, 1])
    Ap = sp.diags([np.full(n - 1, Lp.off), Lp.diag, np.full(n - 1, Lp.off)], [-1, 0, 1])
    return sp.bmat([[None, Am], [-Ap, None]], format="csc")


@dataclass
class PropagationResult:
    times: np.ndarray
    weighted_norms: np.ndarray
    exponent: float | None
    guard_time: float
    truncated: bool


def propagate_linearized(
    lin: LinearizedSystem,
    proj: DiscreteProjection | None,
    u0: np.ndarray,
    T: float,
    dt: float,
    nu: float = 4.0,
    n_samples: int = 120,
    project: bool = True,
    v_max: float | None = None,
) -> PropagationResult:
    """Evolve du/dt = L u with Crank-Nicolson and fit the weighted-L2 decay.

    u0 is a radial two-component channel stack (2, C, n); it is projected
    with P_c first unless project=False.  The log-log slope is fitted on the
    last decade of the recorded window; the series is truncated with a
    warning at the boundary-reflection guard time.
    """
    if not lin.is_radial:
        raise GeometryMismatchError("linearized propagation is implemented on the radial geometry")
    grid = lin.grid
    U = np.array(u0, dtype=complex)
    if project and proj is not None:
        U = proj.apply_pc(U)
    C = U.shape[1]

    if v_max is None:
        # rms wavenumber of the initial data sets the group-velocity estimate
        num = 0.0
        den = 0.0
        for l in range(C):
            op = TridiagOperator(grid, l * (l + 1) / grid.r**2)
            for c in range(2):
                num += float(np.real(grid.h * np.sum(np.conj(U[c, l]) * op.matvec(U[c, l]))))
                den += float(grid.h * np.sum(np.abs(U[c, l]) ** 2))
        v_max = 3.0 * np.sqrt(max(num / max(den, 1e-300), 1e-12))
    guard_time = grid.r_max / (2.0 * v_max)
    truncated = T > guard_time
    if truncated:
        warnings.warn(f"T={T} exceeds boundary guard {guard_time:.3g}; series truncated")
        T = guard_time

    steps = max(int(np.ceil(T / dt)), 1)
    dt = T / steps
    solvers, mults = [], []
    for l in range(C):
        A = _sector_operator(lin, l).astype(complex)
        I = sp.identity(2 * grid.n, format="csc", dtype=complex)
        solvers.append(spla.splu((I - 0.5 * dt * A).tocsc()))
        mults.append((I + 0.5 * dt * A).tocsr())

    sample_every = max(steps // n_samples, 1)
    w = (1.0 + grid.r**2) ** (-nu / 2.0)
    times, norms = [], []

    def record(k):
        val = np.sqrt(grid.h * np.sum(np.abs(U * w) ** 2))
        times.append(k * dt)
        norms.append(float(val))

    record(0)
    for k in range(1, steps + 1):
        for l in range(C):
            v = np.concatenate([U[0, l], U[1, l]])
            v = solvers[l].solve(mults[l] @ v)
            U[0, l], U[1, l] = v[: grid.n], v[grid.n :]
        if k % sample_every == 0 or k == steps:
            record(k)

    times = np.array(times)
    norms = np.array(norms)
    expo = None
    tail = times >= times[-1] / 10.0
    if np.count_nonzero(tail) > 4 and np.all(norms[tail] > 0):
        slope = np.polyfit(np.log(times[tail][times[tail] > 0]), np.log(norms[tail][times[tail] > 0]), 1)[0]
        expo = float(-slope)
    return PropagationResult(times, norms, expo, float(guard_time), truncated)


@dataclass
class SpectralAssumptionReport:
    ok: bool
    details: dict


def spectral_assumption_report(lin: LinearizedSystem, l_max: int = 2) -> SpectralAssumptionReport:
    """Check that the discrete spectrum of L is {0} plus one neutral pair.

    Counts eigenvalues of L_- L_+ per radial channel below the continuum edge
    lambda^2; anything beyond the zero mode (l=0) and one degenerate level
    (l=1) is reported and rejected by the pipelines.
    """
    if not lin.is_radial:
        raise GeometryMismatchError("the channel-wise diagnostic needs the radial geometry")
    grid = lin.grid
    lam2 = lin.lam**2
    details = {}
    ok = True
    for l in range(l_max + 1):
        M = (sp.csc_matrix(_tridiag(lin.Lm_op(l), grid)) @ sp.csc_matrix(_tridiag(lin.Lp_op(l), grid))).tocsc()
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            vals = spla.eigs(M, k=4, sigma=0.4 * lam2, which="LM", return_eigenvectors=False)
        vals = np.sort(np.real(vals))
        below = [float(v) for v in vals if v < lam2 * (1.0 - 1e-9)]
        expected = 1 if l == 1 else 0
        # the zero-mode eigenvalue of the l=0 channel is not an extra pair
        count = len([v for v in below if abs(v) > 1e-8 * lam2]) if l == 0 else len(below)
        details[f"l={l}"] = {"below_continuum": below, "count": count, "expected": expected}
        if count != expected:
            ok = False
    return SpectralAssumptionReport(ok, details)


def _tridiag(op: TridiagOperator, grid):
    n = grid.n
    return sp.diags([np.full(n - 1, op.off), op.diag, np.full(n - 1, op.off)], [-1, 0, 1])
