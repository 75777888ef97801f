import numpy as np
import pytest

from gp_lab.bound_state import FOUR_PI
from gp_lab.errors import BelowThresholdError
from gp_lab.fgr import (
    FgrTensor,
    _scalar_sector_value,
    build_G_vectors,
    fgr_constant,
    fgr_tensor,
    radial_fgr,
    weak_coupling_gamma,
)
from gp_lab.grids import RadialGrid
from gp_lab.linear_spectrum import LinearSpectrum
from gp_lab.model import gaussian_well, zero_potential

from helpers import free_im_kernel_quadrature, scattering_im_resolvent


def _sample_fields(lin, basis, pts):
    """xi_n, eta_n, phi at arbitrary 3D points from the radial profiles."""
    grid = lin.grid
    r = np.linalg.norm(pts, axis=-1)
    phi_prof = lin.bs.phi.data[0].real / (np.sqrt(FOUR_PI) * grid.r)
    xi_prof = basis.xi_red / grid.r
    eta_prof = basis.eta_red / grid.r
    interp = lambda p: np.interp(r, grid.r, p)
    phi = interp(phi_prof)
    xi = [pts[:, n] / r * interp(xi_prof) for n in range(3)]
    eta = [pts[:, n] / r * interp(eta_prof) for n in range(3)]
    return phi, xi, eta


def test_G_vectors_match_quadratic_source(small_chain):
    """sum_n z_n G_n(z) equals J N_{2,0}(z) assembled independently."""
    bs, lin, raw, basis, proj = small_chain
    G = build_G_vectors(lin, basis)
    rng = np.random.default_rng(4)
    # evaluate on grid radii times random directions so no interpolation enters
    dirs = rng.normal(size=(400, 3))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    radii = lin.grid.r[rng.integers(8, 400, size=400)]
    pts = dirs * radii[:, None]
    phi, xi, eta = _sample_fields(lin, basis, pts)
    f1 = lin.f.eval(phi**2, 1)
    f2 = lin.f.eval(phi**2, 2)
    for _ in range(3):
        z = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        zxi = sum(z[n] * xi[n] for n in range(3))
        zeta = sum(z[n] * eta[n] for n in range(3))
        # independent assembly of the quadratic source
        top = -0.5j * f1 * phi * zxi * zeta
        bot = -0.25 * (3 * f1 * phi + 2 * f2 * phi**3) * zxi**2 + 0.25 * f1 * phi * zeta**2
        # coupling-vector route: G_k(z) = sum_m z_m x_k x_m G(|x|)
        r2G = G.q_profile
        r = np.linalg.norm(pts, axis=-1)
        interp = lambda p: np.interp(r, lin.grid.r, p.real) + 1j * np.interp(r, lin.grid.r, p.imag)
        prof = np.stack([interp(r2G[0]), interp(r2G[1])]) / r**2
        zx = sum(z[m] * pts[:, m] for m in range(3))
        top_G = np.zeros_like(top)
        bot_G = np.zeros_like(bot)
        for k in range(3):
            gk = pts[:, k] * zx * prof
            top_G += z[k] * gk[0]
            bot_G += z[k] * gk[1]
        scale = np.max(np.abs(top)) + np.max(np.abs(bot))
        assert np.max(np.abs(top_G - top)) / scale < 1e-10
        assert np.max(np.abs(bot_G - bot)) / scale < 1e-10


def test_G_vectors_cubic_reduction(small_chain):
    # f'' = 0 for the cubic form: the second component has no phi^3 term,
    # so D(k)[e_m] is odd under (xi, eta) -> (eta, xi) up to the 3:1 weights
    bs, lin, raw, basis, proj = small_chain
    G = build_G_vectors(lin, basis)
    grid = lin.grid
    xi = basis.xi_red / grid.r
    eta = basis.eta_red / grid.r
    phi = lin.bs.phi.data[0].real / (np.sqrt(FOUR_PI) * grid.r)
    f1 = lin.f.eval(phi**2, 1)
    want_d = -0.25 * f1 * phi * (3 * xi**2 - eta**2)
    assert np.max(np.abs(G.q_profile[1].real - want_d)) < 1e-12 * np.max(np.abs(want_d))
    assert np.max(np.abs(G.q_profile[1].imag)) == 0.0


def test_free_resolvent_regularized_kernel():
    """Banded solve against the closed-form regularized free kernel (l = 0).

    Im G_eps(r, r') = Im[sin(kt r<) e^{i kt r>} / kt] with kt = sqrt(mu+i eps);
    matched regularization isolates the discretization error.
    """
    grid = RadialGrid(250.0, 25000)
    mu, eps = 0.5, 0.1
    r = grid.r
    h = grid.h
    f_red = np.exp(-((r - 3.0) / 1.5) ** 2) * r
    got = np.imag(_scalar_sector_value(grid, zero_potential(), 0, mu, eps, f_red))
    kt = np.sqrt(mu + 1j * eps)
    s = np.sin(kt * r) * f_red
    e = np.exp(1j * kt * r) * f_red
    S = np.cumsum(s) * h
    E_rev = np.cumsum(e[::-1])[::-1] * h
    # int int f G f = (1/kt) [ sum_r e(r) S(r<) + sum_r s(r) E(r>) - diag ]
    val = (np.sum(e * (S - 0.5 * h * s)) + np.sum(s * (E_rev - 0.5 * h * e))) / kt
    want = float(np.imag(val))
    assert abs(got - want) / abs(want) < 1e-5


def test_free_resolvent_extrapolated_matches_kernel():
    """Epsilon-extrapolation approaches the on-shell kernel value, both channels."""
    grid = RadialGrid(600.0, 6000)
    mu = 0.5
    r = grid.r
    f_red = np.exp(-((r - 3.0) / 1.5) ** 2) * r
    for l in (0, 2):
        vals = [
            _scalar_sector_value(grid, zero_potential(), l, mu, eps, f_red)
            for eps in (0.1, 0.05, 0.025)
        ]
        from gp_lab.fgr import _extrapolate

        v, err = _extrapolate((0.1, 0.05, 0.025), vals)
        want = free_im_kernel_quadrature(l, mu, f_red, grid)
        assert abs(np.imag(v) - want) / want < 2e-2


def test_resolvent_below_continuum_is_real():
    grid = RadialGrid(120.0, 1200)
    r = grid.r
    f_red = np.exp(-((r - 2.0)) ** 2) * r
    val = _scalar_sector_value(grid, gaussian_well(2.0), 0, -0.5, 1e-6, f_red)
    assert abs(np.imag(val)) < 1e-5 * abs(np.real(val))


def test_scalar_route_matches_scattering_oracle(small_spec, shell_potential):
    grid = small_spec.grid
    mu = 2 * small_spec.e1 - small_spec.e0
    r = grid.r
    u0 = small_spec.phi_lin.data[0].real
    uxi = small_spec.xi_lin[0]["reduced"]
    p = (u0 / (np.sqrt(FOUR_PI) * r)) * (uxi / r * np.sqrt(3.0 / FOUR_PI)) ** 2
    pair0 = np.sqrt(FOUR_PI) * r * p
    vals = [_scalar_sector_value(grid, shell_potential, 0, mu, e, pair0, project_out=(u0,))
            for e in (0.06, 0.03, 0.015)]
    from gp_lab.fgr import _extrapolate

    v = _extrapolate((0.06, 0.03, 0.015), vals)[0]
    oracle = scattering_im_resolvent(shell_potential, 0, mu, pair0, grid)
    assert abs(np.imag(v) - oracle) / oracle < 0.05


def test_tensor_structure(small_chain):
    bs, lin, raw, basis, proj = small_chain
    G = build_G_vectors(lin, basis)
    tensor = fgr_tensor(lin, proj, G, eps_ladder=(0.06, 0.03, 0.015))
    # Gamma(0) = 0 and sesquilinear scaling
    assert np.max(np.abs(tensor.Gamma(np.zeros(3)))) == 0.0
    z = np.array([0.3 + 0.1j, -0.2j, 0.05])
    assert np.allclose(tensor.Gamma(2.0 * z), 4.0 * tensor.Gamma(z), rtol=1e-12)
    assert np.allclose(tensor.Gamma(np.exp(0.7j) * z), tensor.Gamma(z), rtol=1e-12)
    # Hermitian/skew split
    rng = np.random.default_rng(8)
    for _ in range(50):
        zz = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        zz /= np.linalg.norm(zz)
        Gam = tensor.Gamma(zz)
        Lam = tensor.Lambda_Z(zz)
        assert np.max(np.abs(Gam - Gam.conj().T)) < 1e-12 * max(np.max(np.abs(Gam)), 1e-300)
        assert np.max(np.abs(Lam + Lam.conj().T)) < 1e-12 * max(np.max(np.abs(Gam)), 1e-300)
        assert np.linalg.eigvalsh(Gam)[0] > -1e-8 * np.linalg.norm(Gam)
    # radial structure at z = e1: diagonal with doubly degenerate transverse entry
    G1 = tensor.Gamma(np.array([1.0, 0, 0]))
    off = np.max(np.abs(G1 - np.diag(np.diag(G1))))
    assert off < 1e-14 * np.max(np.abs(G1))
    assert G1[1, 1] == pytest.approx(G1[2, 2], rel=1e-12)
    assert G1[0, 0].real > 0 and G1[1, 1].real > 0


def test_epsilon_ladder_self_consistency(small_chain):
    bs, lin, raw, basis, proj = small_chain
    G = build_G_vectors(lin, basis)
    t1 = fgr_tensor(lin, proj, G, eps_ladder=(0.06, 0.03, 0.015))
    t2 = fgr_tensor(lin, proj, G, eps_ladder=(0.06, 0.03, 0.015, 0.0075))
    e1 = np.array([1.0, 0, 0])
    change = abs(t2.Gamma(e1)[0, 0] - t1.Gamma(e1)[0, 0])
    budget = (t1.error_estimate + t2.error_estimate) * abs(t1.Gamma(e1)[0, 0]) * 3
    assert change <= budget


def test_fgr_constant_synthetic():
    C = np.zeros((3, 3, 3, 3), dtype=complex)
    for k in range(3):
        C[k, k] = np.eye(3)  # Z(z) = |z|^2 I
    t = FgrTensor(C, 3, 1.0, 1.0, [0.01], 0.0)
    K, zmin = fgr_constant(t, n_samples=100)
    assert K == pytest.approx(1.0, abs=1e-9)
    D = np.diag([2.0, 1.0, 1.0])
    C2 = np.zeros_like(C)
    for k in range(3):
        C2[k, k] = np.eye(3) * D[k, k]
    t2 = FgrTensor(C2, 3, 1.0, 1.0, [0.01], 0.0)
    K2, _ = fgr_constant(t2, n_samples=100)
    assert K2 == pytest.approx(1.0, abs=1e-9)


def test_radial_route_agrees_with_tensor(small_chain):
    bs, lin, raw, basis, proj = small_chain
    G = build_G_vectors(lin, basis)
    tensor = fgr_tensor(lin, proj, G, eps_ladder=(0.06, 0.03, 0.015))
    rz = radial_fgr(lin, proj, G, eps_ladder=(0.06, 0.03, 0.015))
    G1 = tensor.Gamma(np.array([1.0, 0, 0]))
    assert rz["ReZ0_11"] >= -1e-8
    assert rz["ReZ0_22"] >= -1e-8
    assert abs(G1[0, 0].real - rz["ReZ0_11"]) < 0.01 * abs(rz["ReZ0_11"])
    assert abs(G1[1, 1].real - rz["ReZ0_22"]) < 0.01 * abs(rz["ReZ0_22"])


def test_weak_coupling_below_threshold_raises():
    spec = LinearSpectrum(None, None, -1.0, None, -0.6, 1, [], [], [], 2)
    with pytest.raises(BelowThresholdError):
        weak_coupling_gamma(spec)


def test_weak_coupling_free_kernel_sanity():
    """V = 0 with synthetic profiles: the matrix reduces to free-kernel quadratures."""
    grid = RadialGrid(600.0, 6000)
    r = grid.r
    u0 = np.exp(-((r - 1.0)) ** 2) * r
    u0 /= np.sqrt(grid.h * np.sum(u0**2))
    u1 = np.exp(-((r - 2.0)) ** 2) * r
    u1 /= np.sqrt(grid.h * np.sum(u1**2))
    V0 = zero_potential()
    spec = LinearSpectrum(V0, grid, -1.0, None, -0.2, 3, [{"l": 1, "reduced": u1}], [], [], 4)
    from gp_lab.grids import Field

    spec.phi_lin = Field(grid, u0.astype(complex))
    mu = 2 * spec.e1 - spec.e0
    A = weak_coupling_gamma(spec, (0.1, 0.05, 0.025))
    phi = u0 / (np.sqrt(FOUR_PI) * r)
    xi = u1 / r * np.sqrt(3.0 / FOUR_PI)
    p = phi * xi**2
    w0 = free_im_kernel_quadrature(0, mu, np.sqrt(FOUR_PI) * r * p, grid)
    w2 = free_im_kernel_quadrature(2, mu, r * p, grid)
    want_diag = w0 / 9.0 + FOUR_PI * (4.0 / 45.0) * w2
    want_off = FOUR_PI / 15.0 * w2
    assert A[0, 0] == pytest.approx(want_diag, rel=2e-2)
    assert A[0, 1] == pytest.approx(want_off, rel=2e-2)
    # symmetric with the doubly degenerate transverse structure
    assert A[1, 1] == pytest.approx(A[0, 0], rel=1e-12)
    assert A[0, 2] == pytest.approx(A[0, 1], rel=1e-12)


def test_weak_coupling_positive_definite(small_spec):
    A = weak_coupling_gamma(small_spec, (0.04, 0.02, 0.01))
    assert np.allclose(A, A.T)
    assert np.linalg.eigvalsh(A)[0] > 0
