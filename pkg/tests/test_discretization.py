import numpy as np
import pytest

from gp_lab.errors import GeometryMismatchError
from gp_lab.fieldio import read_field, write_field
from gp_lab.grids import (
    AngularRule,
    CartesianGrid,
    Field,
    RadialGrid,
    apply_laplacian_spectral,
    parity_flip,
    radial_hamiltonian,
    radial_scalar_field,
    restrict_even_subspace,
)
from gp_lab.model import build_double_well, gaussian_well, radial_profile

OSCILLATOR = radial_profile(poly=(0.0, 1.0))

# frozen oracle: dense eigensolve of the same reduced matrix at n=8192,
# Richardson-extrapolated in h (r_max = 30)
GAUSS8_L0_ORACLE = -1.567839348205


def test_oscillator_levels():
    grid = RadialGrid(12.0, 4096)
    for l, exact in ((0, 3.0), (1, 5.0)):
        val = radial_hamiltonian(grid, OSCILLATOR, l).eigh(1)[0][0]
        assert abs(val - exact) < 1e-5


def test_gaussian_well_oracle_value():
    grid = RadialGrid(30.0, 4096)
    val = radial_hamiltonian(grid, gaussian_well(8.0), 0).eigh(1)[0][0]
    assert abs(val - GAUSS8_L0_ORACLE) < 1e-4
    fine = radial_hamiltonian(RadialGrid(30.0, 8192), gaussian_well(8.0), 0).eigh(1)[0][0]
    # second-order convergence toward the extrapolated oracle
    assert abs(fine - GAUSS8_L0_ORACLE) < 0.3 * abs(val - GAUSS8_L0_ORACLE)


def test_oscillator_h2_convergence():
    errs = []
    for n in (512, 1024, 2048):
        val = radial_hamiltonian(RadialGrid(12.0, n), OSCILLATOR, 0).eigh(1)[0][0]
        errs.append(abs(val - 3.0))
    assert 3.0 < errs[0] / errs[1] < 5.0
    assert 3.0 < errs[1] / errs[2] < 5.0


def test_radial_hamiltonian_rejects_nonradial():
    with pytest.raises(GeometryMismatchError):
        radial_hamiltonian(RadialGrid(10.0, 64), build_double_well(1.0, 1.0, 1.0), 0)


def test_spectral_laplacian_plane_wave():
    grid = CartesianGrid(4.0, 16)
    k = 2.0 * np.pi / (2 * grid.L) * np.array([3, -2, 1])
    pts = grid.points()
    u = np.exp(1j * np.tensordot(pts, k, axes=(-1, 0)))
    out = apply_laplacian_spectral(grid, u)
    want = np.dot(k, k) * u
    assert np.max(np.abs(out - want)) / np.max(np.abs(want)) < 1e-12
    assert np.max(np.abs(apply_laplacian_spectral(grid, np.ones_like(u)))) < 1e-13


def test_spectral_laplacian_nonnegative():
    grid = CartesianGrid(4.0, 16)
    rng = np.random.default_rng(3)
    u = rng.standard_normal((16,) * 3) + 1j * rng.standard_normal((16,) * 3)
    val = grid.quad(apply_laplacian_spectral(grid, u) * np.conj(u)).real
    assert val >= 0.0


def test_parseval():
    grid = CartesianGrid(5.0, 32)
    rng = np.random.default_rng(5)
    u = rng.standard_normal((32,) * 3)
    direct = np.sum(np.abs(u) ** 2)
    spectral = np.sum(np.abs(np.fft.fftn(u)) ** 2) / u.size
    assert abs(direct - spectral) / direct < 1e-12


def test_even_restriction_properties():
    grid = CartesianGrid(3.0, 16)
    rng = np.random.default_rng(11)
    u = rng.standard_normal((16,) * 3)
    even = restrict_even_subspace(grid, u)
    assert np.array_equal(even, parity_flip(even))
    assert np.max(np.abs(restrict_even_subspace(grid, even) - even)) < 1e-15
    odd = 0.5 * (u - parity_flip(u))
    assert np.max(np.abs(restrict_even_subspace(grid, odd))) < 1e-15
    # self-adjoint in the grid inner product
    v = rng.standard_normal((16,) * 3)
    lhs = grid.quad(restrict_even_subspace(grid, u) * v)
    rhs = grid.quad(u * restrict_even_subspace(grid, v))
    assert abs(lhs - rhs) < 1e-12 * abs(lhs + 1e-30)


def test_field_norms():
    grid = RadialGrid(20.0, 256)
    fld = radial_scalar_field(grid, lambda r: np.exp(-r))
    assert fld.weighted_l2(4.0) <= fld.l2()
    assert fld.weighted_l2(0.0) == pytest.approx(fld.l2(), rel=1e-13)
    assert fld.l2() > 0
    # reduced-stack norm equals the 3D integral of the profile
    want = np.sqrt(4 * np.pi * grid.h * np.sum(np.exp(-2 * grid.r) * grid.r**2))
    assert fld.l2() == pytest.approx(want, rel=1e-12)


def test_angular_rule_roundtrip():
    grid = RadialGrid(10.0, 64)
    rule = AngularRule(4)
    rng = np.random.default_rng(2)
    stack = rng.standard_normal((5, 64)) + 1j * rng.standard_normal((5, 64))
    vals = rule.synthesize(stack, grid.r)
    back = rule.analyze(vals, grid.r)
    assert np.max(np.abs(back - stack)) < 1e-12 * np.max(np.abs(stack))


def test_fieldio_roundtrip(tmp_path):
    grid = RadialGrid(15.0, 128)
    fld = Field(grid, np.exp(1j * np.linspace(0, 3, 3 * 128)).reshape(3, 128))
    p = tmp_path / "f.gpf"
    write_field(p, fld)
    back = read_field(p)
    assert isinstance(back.grid, RadialGrid)
    assert back.grid.r_max == grid.r_max and back.grid.n == grid.n
    assert np.array_equal(back.data, fld.data)

    grid3 = CartesianGrid(2.0, 8)
    fld3 = Field(grid3, np.arange(512, dtype=float).reshape(8, 8, 8))
    write_field(tmp_path / "g.gpf", fld3)
    back3 = read_field(tmp_path / "g.gpf")
    assert isinstance(back3.grid, CartesianGrid)
    assert np.array_equal(back3.data, fld3.data)
