import numpy as np
import pytest

from gp_lab.errors import GeometryMismatchError, InvalidParameterError, UnsupportedOrderError
from gp_lab.model import (
    Nonlinearity,
    build_double_well,
    eval_nonlinearity,
    eval_potential,
    gaussian_well,
    radial_profile,
    zero_potential,
)


def test_double_well_m0_is_single_gaussian():
    V = build_double_well(0.0, 1.0, 1.0)
    rng = np.random.default_rng(0)
    x = rng.normal(size=(200, 3))
    r2 = np.sum(x * x, axis=1)
    assert np.allclose(V(x), -np.exp(-r2), rtol=0, atol=1e-14)


def test_double_well_center_value():
    V = build_double_well(2.0, 1.0, 1.0)
    assert V(np.zeros(3)) == pytest.approx(-np.exp(-4.0), rel=1e-13)


def test_double_well_symmetries():
    V = build_double_well(2.0, 1.0, 1.0)
    rng = np.random.default_rng(7)
    x = rng.normal(scale=2.0, size=(1000, 3))
    vx = V(x)
    assert np.max(np.abs(V(-x) - vx)) < 1e-15
    for perm in ((1, 0, 2), (2, 1, 0), (1, 2, 0)):
        assert np.max(np.abs(V(x[:, perm]) - vx)) < 1e-15


def test_double_well_parameter_validation():
    with pytest.raises(InvalidParameterError):
        build_double_well(-0.1, 1.0, 1.0)
    with pytest.raises(InvalidParameterError):
        build_double_well(1.0, 0.0, 1.0)
    with pytest.raises(InvalidParameterError):
        build_double_well(1.0, 1.0, -2.0)


def test_eval_potential_zero_and_radial():
    assert eval_potential(zero_potential(), 3.7) == 0.0
    V = radial_profile(poly=(0.0, 1.0))
    assert eval_potential(V, 2.0) == pytest.approx(4.0, rel=1e-15)


def test_eval_potential_grid_matches_formula():
    V = build_double_well(2.0, 1.0, 1.0)
    ax = np.linspace(-4, 4, 16)
    X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
    pts = np.stack([X, Y, Z], axis=-1)
    got = eval_potential(V, pts)
    M = [np.array([2.0, 0, 0]), np.array([0, 2.0, 0]), np.array([0, 0, 2.0])]
    want = np.zeros_like(got)
    for k in range(3):
        for s in (1.0, -1.0):
            d2 = (X + s * M[k][0]) ** 2 + (Y + s * M[k][1]) ** 2 + (Z + s * M[k][2]) ** 2
            want += np.exp(-d2 / 1.0)
    want = -want / 6.0
    assert np.max(np.abs(got - want)) == 0.0


def test_radius_eval_of_nonradial_raises():
    V = build_double_well(1.0, 1.0, 1.0)
    with pytest.raises(GeometryMismatchError):
        eval_potential(V, 1.5)


def test_nonlinearity_values():
    assert eval_nonlinearity(Nonlinearity(g=1.0), 0.0, 0) == 0.0
    assert eval_nonlinearity(Nonlinearity(g=-2.0), 3.0, 0) == pytest.approx(6.0)
    assert eval_nonlinearity(Nonlinearity(g=5.0), 7.0, 2) == 0.0
    with pytest.raises(UnsupportedOrderError):
        eval_nonlinearity(Nonlinearity(g=1.0), 1.0, 4)


def test_nonlinearity_derivative_matches_finite_differences():
    f = Nonlinearity(g=-1.7)
    for s in (0.1, 1.0, 10.0):
        ds = 1e-6 * max(s, 1.0)
        fd = (f.eval(s + ds) - f.eval(s - ds)) / (2 * ds)
        assert abs(f.eval(s, 1) - fd) / abs(fd) < 1e-8


def test_decay_certificate():
    r = np.linspace(0.0, 40.0, 2000)
    for V in (gaussian_well(8.0), radial_profile(shells=[(-2.2, 2.0, 0.8)]), build_double_well(2.2, 30.0, 1.0)):
        c = V.decay_rate
        assert c is not None and c > 0
        if V.is_radial:
            cert = np.max(np.abs(V.radial(r)) * np.exp(c * r))
        else:
            x = np.stack([r, np.zeros_like(r), np.zeros_like(r)], axis=-1)
            cert = np.max(np.abs(V(x)) * np.exp(c * r))
        assert np.isfinite(cert)
    assert radial_profile(poly=(0.0, 1.0)).decay_rate is None
