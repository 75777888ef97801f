"""Shared fixtures: small grids for unit tests, production chain for acceptance."""

import numpy as np
import pytest

from gp_lab.bound_state import continue_branch
from gp_lab.grids import CartesianGrid, RadialGrid
from gp_lab.linear_spectrum import solve_linear_spectrum
from gp_lab.linearization import (
    build_linearized,
    canonical_basis,
    discrete_projection,
    neutral_modes,
)
from gp_lab.model import Nonlinearity, radial_profile

SHELL = dict(shells=[(-2.2, 2.0, 0.8)])


@pytest.fixture(scope="session")
def shell_potential():
    return radial_profile(**SHELL)


@pytest.fixture(scope="session")
def small_grid():
    return RadialGrid(144.0, 1200)


@pytest.fixture(scope="session")
def small_spec(shell_potential, small_grid):
    return solve_linear_spectrum(shell_potential, small_grid, k_eigs=3, l_max=2)


@pytest.fixture(scope="session")
def small_branch(shell_potential, small_spec):
    f = Nonlinearity(g=-8.0)
    lam0 = abs(small_spec.e0)
    return continue_branch(shell_potential, f, (lam0 + 0.01, lam0 + 0.07), 13, spectrum=small_spec)


@pytest.fixture(scope="session")
def small_chain(small_branch):
    i = small_branch.index_of(small_branch.lambdas[6])
    bs = small_branch.sample(i)
    lin = build_linearized(bs, small_branch, i)
    raw = neutral_modes(lin)
    basis = canonical_basis(lin, raw)
    proj = discrete_projection(lin, basis)
    return bs, lin, raw, basis, proj


# -- production-scale fixtures (acceptance) ---------------------------------


@pytest.fixture(scope="session")
def prod_grid():
    return RadialGrid(492.0, 4096)


@pytest.fixture(scope="session")
def prod_spec(shell_potential, prod_grid):
    return solve_linear_spectrum(shell_potential, prod_grid, k_eigs=4, l_max=2)


@pytest.fixture(scope="session")
def prod_branch(shell_potential, prod_spec):
    f = Nonlinearity(g=-8.0)
    lam0 = abs(prod_spec.e0)
    branch = continue_branch(shell_potential, f, (lam0 + 0.004, lam0 + 0.096), 50, spectrum=prod_spec)
    assert branch.failure is None
    return branch


@pytest.fixture(scope="session")
def prod_chain(prod_branch, prod_spec):
    lam_op = abs(prod_spec.e0) + 0.05
    i = int(np.argmin(np.abs(prod_branch.lambdas - lam_op)))
    bs = prod_branch.sample(i)
    lin = build_linearized(bs, prod_branch, i)
    raw = neutral_modes(lin)
    basis = canonical_basis(lin, raw)
    proj = discrete_projection(lin, basis)
    return bs, lin, raw, basis, proj


@pytest.fixture(scope="session")
def prod_tensor(prod_chain):
    from gp_lab.fgr import build_G_vectors, fgr_tensor

    bs, lin, raw, basis, proj = prod_chain
    G = build_G_vectors(lin, basis)
    tensor = fgr_tensor(lin, proj, G, eps_ladder=(0.04, 0.02, 0.01))
    return G, tensor


# -- double-well fixtures ----------------------------------------------------


@pytest.fixture(scope="session")
def dw_potential():
    from gp_lab.model import build_double_well

    return build_double_well(2.2, 30.0, 1.0)


@pytest.fixture(scope="session")
def dw_grid():
    return CartesianGrid(9.2, 64)


@pytest.fixture(scope="session")
def dw_spec(dw_potential, dw_grid):
    import time

    t0 = time.time()
    spec = solve_linear_spectrum(dw_potential, dw_grid, k_eigs=5, tol=1e-7)
    spec.solve_seconds = time.time() - t0
    return spec


@pytest.fixture(scope="session")
def dw_chain(dw_potential, dw_spec):
    """Mini-branch around lambda = |e0| + 0.15 plus the canonical doublet basis."""
    from gp_lab.bound_state import Branch, newton_bound_state
    from gp_lab.grids import Field

    grid = dw_spec.grid
    f = Nonlinearity(g=-1.0)
    lam_abs = abs(dw_spec.e0)
    phi_lin = dw_spec.phi_lin.data.real
    i4 = float(grid.quad(phi_lin**4).real)
    prev = None
    for dl in (0.05, 0.10, 0.15):
        seed = prev if prev is not None else Field(grid, (np.sqrt(dl / i4) * phi_lin).astype(complex))
        bs = newton_bound_state(dw_potential, f, lam_abs + dl, seed, newton_tol=1e-10)
        prev = bs.phi
    lam_op = lam_abs + 0.15
    lams, states = [], []
    for dl in (-0.012, 0.0, 0.012):
        st = newton_bound_state(dw_potential, f, lam_op + dl, prev, newton_tol=1e-10)
        lams.append(lam_op + dl)
        states.append(st.phi)
    arr = np.stack([s.data for s in states])
    d = [
        Field(grid, (arr[1] - arr[0]) / 0.012),
        Field(grid, (arr[2] - arr[0]) / 0.024),
        Field(grid, (arr[2] - arr[1]) / 0.012),
    ]
    branch = Branch(
        dw_potential, f, grid, np.array(lams), states, np.zeros(3),
        np.array([s.l2() ** 2 for s in states]), d, dw_spec.e0,
    )
    bs = branch.sample(1)
    lin = build_linearized(bs, branch, 1)
    raw = neutral_modes(lin, tol=1e-9)
    basis = canonical_basis(lin, raw)
    return branch, bs, lin, raw, basis


# -- the measured PDE run (acceptance criterion on the full dynamics) --------


@pytest.fixture(scope="session")
def pde_run(prod_branch, prod_spec):
    import time

    from gp_lab.pde import BranchTables, evolve_and_measure, prepare_initial_data

    lam0 = abs(prod_spec.e0) + 0.05
    idx = [i for i in range(len(prod_branch.lambdas)) if abs(prod_branch.lambdas[i] - lam0) < 0.022]
    tables = BranchTables.build(prod_branch, indices=idx)
    z0 = np.array([0.05, 0.0, 0.0])
    psi0 = prepare_initial_data(tables, lam0, z0, l_max=6)
    t0 = time.time()
    run = evolve_and_measure(
        psi0, prod_branch.V, prod_branch.f, tables, T=1e9, dt=0.02, n_samples=160, nu=4.0, lam0=lam0,
    )
    run.wall_seconds = time.time() - t0
    run.lam0 = lam0
    run.z0 = z0
    return run
