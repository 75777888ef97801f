import numpy as np
import pytest

from gp_lab.errors import SpectralWindowError
from gp_lab.grids import RadialGrid, radial_hamiltonian
from gp_lab.linearization import (
    Y1_WEIGHT,
    build_linearized,
    canonical_basis,
    discrete_projection,
    neutral_modes,
    propagate_linearized,
    spectral_assumption_report,
    zero_amplitude_linearized,
)
from gp_lab.model import Nonlinearity, radial_profile, zero_potential


def test_zero_amplitude_limit(shell_potential, small_grid):
    lin = zero_amplitude_linearized(shell_potential, small_grid, 1.0)
    base = radial_hamiltonian(small_grid, shell_potential, 0, 1.0)
    assert np.array_equal(lin.Lm_op(0).diag, base.diag)
    assert np.array_equal(lin.Lp_op(0).diag, base.diag)


def test_kernel_relations(small_chain):
    bs, lin, raw, basis, proj = small_chain
    assert lin.kernel_residuals["Lm_phi"] < 1e-8
    # branch-differenced generalized kernel holds to O(spacing^2)
    assert lin.kernel_residuals["Lp_dphi_plus_phi"] < 0.05


def test_neutral_frequency_approaches_linear_gap(small_spec, shell_potential):
    from gp_lab.bound_state import continue_branch

    gap = small_spec.e1 - small_spec.e0
    lam0 = abs(small_spec.e0)
    f = Nonlinearity(g=-1.0)
    br = continue_branch(shell_potential, f, (lam0 + 0.001, lam0 + 0.005), 5, spectrum=small_spec)
    Es, offs = [], []
    for i in (1, 3):
        lin = build_linearized(br.sample(i), br, i)
        Es.append(neutral_modes(lin).E)
        offs.append(br.lambdas[i] - lam0)
    # E(lambda) - gap vanishes linearly with the offset; extrapolate to zero
    slope = (Es[1] - Es[0]) / (offs[1] - offs[0])
    E_at_zero = Es[0] - slope * offs[0]
    assert abs(E_at_zero - gap) < 5e-4 * gap


def test_neutral_mode_contracts(small_chain):
    bs, lin, raw, basis, proj = small_chain
    assert raw.eigen_residual < 1e-8
    assert all(p > 0 for p in raw.pairings)
    assert raw.N == 3
    assert 2 * basis.E - bs.lam > 0
    P = basis.pairing_matrix()
    assert np.max(np.abs(P - np.eye(3))) < 1e-10
    assert np.max(np.abs(basis.antisym_matrix(lin))) == 0.0  # radial: pointwise zero
    # eigen relations L- eta = E xi, L+ xi = E eta on the reduced profiles
    grid = lin.grid
    nrm = lambda v: np.sqrt(grid.h) * np.linalg.norm(v)
    r1 = lin.Lm_op(1).matvec(basis.eta_red) - basis.E * basis.xi_red
    r2 = lin.Lp_op(1).matvec(basis.xi_red) - basis.E * basis.eta_red
    assert nrm(r1) / nrm(basis.xi_red) < 1e-8
    assert nrm(r2) / nrm(basis.eta_red) < 1e-8


def test_neutral_window_error(small_spec, shell_potential, small_branch):
    bs = small_branch.sample(6)
    lin = build_linearized(bs, small_branch)
    lin.e1_lin = lin.e0_lin + 1e-6  # absurd window: any found E must be rejected
    with pytest.raises(SpectralWindowError):
        neutral_modes(lin)


def test_discrete_projection_identities(small_chain):
    bs, lin, raw, basis, proj = small_chain
    grid = lin.grid
    n = grid.n
    # elements of the range are reproduced
    u = np.zeros((2, 2, n), dtype=complex)
    u[1, 0] = bs.phi.data[0]
    out = proj.apply_disc(u)
    assert np.max(np.abs(out - u)) < 1e-9 * np.max(np.abs(u))
    v = np.zeros((2, 2, n), dtype=complex)
    v[0, 1] = Y1_WEIGHT * basis.xi_red
    v[1, 1] = 1j * Y1_WEIGHT * basis.eta_red
    outv = proj.apply_disc(v)
    assert np.max(np.abs(outv - v)) < 1e-9 * np.max(np.abs(v))
    # idempotency on random vectors
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        w = rng.standard_normal((2, 3, n)) + 1j * rng.standard_normal((2, 3, n))
        Pw = proj.apply_disc(w)
        PPw = proj.apply_disc(Pw)
        worst = max(worst, float(np.max(np.abs(PPw - Pw)) / np.max(np.abs(w))))
    assert worst < 1e-8


def test_pc_commutes_with_J(small_chain):
    bs, lin, raw, basis, proj = small_chain
    grid = lin.grid
    rng = np.random.default_rng(9)
    J = lambda w: np.stack([w[1], -w[0]])
    for _ in range(10):
        u = rng.standard_normal((2, 2, grid.n)) + 1j * rng.standard_normal((2, 2, grid.n))
        v = rng.standard_normal((2, 2, grid.n)) + 1j * rng.standard_normal((2, 2, grid.n))
        lhs = grid.h * np.sum(J(proj.apply_pc(v)) * np.conj(u))
        rhs = grid.h * np.sum(J(v) * np.conj(proj.apply_pc(u)))
        scale = grid.h * np.sqrt(np.sum(np.abs(u) ** 2) * np.sum(np.abs(v) ** 2))
        assert abs(lhs - rhs) / scale < 1e-8


def test_spectral_assumption_gate(small_chain, small_spec):
    bs, lin, raw, basis, proj = small_chain
    assert spectral_assumption_report(lin).ok
    # a deeper shell binds an l=2 level: the gate must reject it
    from gp_lab.bound_state import continue_branch
    from gp_lab.linear_spectrum import solve_linear_spectrum

    V_bad = radial_profile(shells=[(-3.3, 2.0, 0.8)])
    grid = RadialGrid(144.0, 1200)
    spec_bad = solve_linear_spectrum(V_bad, grid, k_eigs=3, l_max=2)
    br = continue_branch(V_bad, Nonlinearity(g=-1.0), (abs(spec_bad.e0) + 0.01, abs(spec_bad.e0) + 0.03), 3,
                         spectrum=spec_bad)
    lin_bad = build_linearized(br.sample(1), br, 1)
    assert not spectral_assumption_report(lin_bad).ok


def test_propagation_discrete_data_does_not_decay(small_chain):
    bs, lin, raw, basis, proj = small_chain
    n = lin.grid.n
    u0 = np.zeros((2, 2, n), dtype=complex)
    u0[0, 1] = Y1_WEIGHT * basis.xi_red
    u0[1, 1] = 1j * Y1_WEIGHT * basis.eta_red
    res = propagate_linearized(lin, proj, u0, T=60.0, dt=0.05, project=False)
    assert res.weighted_norms[-1] > 0.5 * res.weighted_norms[0]


def test_propagation_free_dispersive_decay():
    grid = RadialGrid(700.0, 7000)
    lin = zero_amplitude_linearized(zero_potential(), grid, 1.0)
    r = grid.r
    u0 = np.zeros((2, 1, grid.n), dtype=complex)
    u0[0, 0] = np.exp(-((r - 3.0) / 2.0) ** 2) * r
    u0[1, 0] = 0.6 * np.exp(-((r - 2.0) / 1.5) ** 2) * r
    res = propagate_linearized(lin, None, u0, T=500.0, dt=0.05, project=False)
    assert abs(res.exponent - 1.5) < 0.2
