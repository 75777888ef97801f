"""Independent numerical oracles used only by the test suite."""

import numpy as np
from scipy.integrate import solve_ivp

from gp_lab.bound_state import FOUR_PI


def relax_fixed_mass(V, g, grid, mass, n_steps=1500, dtau=0.6, seed_profile=None):
    """Preconditioned gradient-flow ground state at fixed L2 mass (radial l=0).

    Returns (reduced profile u with h*sum(u^2) = mass, frequency lambda from
    the Rayleigh quotient).  Independent of the Newton path: a projected
    descent with the (-d^2/dr^2 + 1)^{-1} preconditioner.
    """
    from scipy.linalg import solve_banded

    r = grid.r
    h = grid.h
    Vr = V.radial(r)
    n = grid.n
    ab = np.zeros((3, n))
    ab[0, 1:] = -1.0 / h**2
    ab[1, :] = 2.0 / h**2 + 1.0
    ab[2, :-1] = -1.0 / h**2
    u = seed_profile.copy() if seed_profile is not None else np.exp(-((r - 1.0) ** 2)) * r
    u *= np.sqrt(mass / (h * np.sum(u**2)))

    def H_apply(u):
        out = (2.0 / h**2 + Vr) * u
        out[:-1] -= u[1:] / h**2
        out[1:] -= u[:-1] / h**2
        return out + g * u**3 / (FOUR_PI * r**2)

    for _ in range(n_steps):
        Hu = H_apply(u)
        lam = -h * np.sum(u * Hu) / mass
        u = u - dtau * solve_banded((1, 1), ab, Hu + lam * u)
        u *= np.sqrt(mass / (h * np.sum(u**2)))
    Hu = H_apply(u)
    lam = -h * np.sum(u * Hu) / mass
    return u, float(lam)


def ground_state_at_lambda(V, g, grid, lam_target, mass_bracket, tol=1e-9, iters=60):
    """Secant iteration on the mass so the relaxed state hits lam_target."""
    m0, m1 = mass_bracket
    u0, l0 = relax_fixed_mass(V, g, grid, m0)
    u1, l1 = relax_fixed_mass(V, g, grid, m1, seed_profile=u0 * np.sqrt(m1 / m0))
    for _ in range(iters):
        if abs(l1 - lam_target) < tol:
            break
        m2 = m1 + (lam_target - l1) * (m1 - m0) / (l1 - l0)
        m2 = max(m2, 1e-6)
        u2, l2 = relax_fixed_mass(V, g, grid, m2, seed_profile=u1 * np.sqrt(m2 / m1))
        m0, l0, m1, l1, u1 = m1, l1, m2, l2, u2
    return u1, l1


def scattering_im_resolvent(V, l, mu, f_red, grid, r_asym=None):
    """pi * |<f, u_mu>|^2 with the energy-normalized scattering state u_mu.

    Independent route to Im <(H_l - mu - i0)^{-1} f, f> for the scalar radial
    operator: integrate the regular solution, normalize the asymptotic
    amplitude to 1/sqrt(pi k).
    """
    r = grid.r
    k = np.sqrt(mu)
    w = V.radial(r)

    def rhs(rr, y):
        vv = np.interp(rr, r, w)
        return [y[1], (l * (l + 1) / max(rr, 1e-9) ** 2 + vv - mu) * y[0]]

    r0 = r[0]
    sol = solve_ivp(
        rhs, (r0, grid.r_max), [r0 ** (l + 1), (l + 1) * r0**l],
        t_eval=r, rtol=1e-10, atol=1e-12, method="DOP853",
    )
    u = sol.y[0]
    up = np.gradient(u, r)
    i0 = np.searchsorted(r, r_asym if r_asym is not None else 0.5 * grid.r_max)
    A = np.sqrt(np.mean(u[i0:] ** 2 + (up[i0:] / k) ** 2))
    u_norm = u / (A * np.sqrt(np.pi * k))
    return float(np.pi * (grid.h * np.sum(f_red * u_norm)) ** 2)


def free_im_kernel_quadrature(l, mu, f_red, grid):
    """Direct quadrature of Im <(-Delta - mu - i0)^{-1} f, f> through the
    closed-form free kernel: Im G_l(r, r') = k * r j_l(kr) * r' j_l(kr')."""
    from scipy.special import spherical_jn

    k = np.sqrt(mu)
    r = grid.r
    v = grid.h * np.sum(f_red * r * spherical_jn(l, k * r))
    return float(k * v**2)
