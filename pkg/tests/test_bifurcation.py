"""Relative equilibria, stability, cusp, and diagram assembly."""

import math

import numpy as np
import pytest

from rubberroll.bifurcation import (
    branch_ranges,
    connected_components,
    cusp,
    diagram,
    equator_kappa_c,
    equator_parabola,
    inclined_equilibrium,
    linear_stability,
    omega0_sq,
    permanent_rotation,
    permanent_rotation_state,
    rpm_floor,
    sigma_theta_curve,
    sigma_theta_eps,
    sigma_theta_kappa_sq,
)
from rubberroll.dynamics import g0, g0_prime, kinematic_init
from rubberroll.geometry import profile
from rubberroll.integrate import integrate
from rubberroll.model import Params

from conftest import circle_fit

P = Params(alpha=0.5, beta=3.0, nu=0.5, eta=0.5)
P_EQ = Params(alpha=0.0, beta=1.5, nu=1.0, eta=1.0)


def test_inclined_equilibrium_closed_form():
    # cos(theta*) = alpha beta^2 / sqrt((beta^2 - 1)(beta^4 - 1 + alpha^2 beta^2))
    ts = inclined_equilibrium(P)
    np.testing.assert_allclose(math.cos(ts), 1.5 / math.sqrt(66.0), rtol=1e-12)
    assert abs(omega0_sq(ts, P)) < 1e-12
    ts2 = inclined_equilibrium(Params(0.5, 0.5, 1.0, 1.0))
    np.testing.assert_allclose(math.cos(ts2), -0.25 / math.sqrt(0.375), rtol=1e-12)


def test_omega0_sq_vanishes_for_ball():
    p = Params(0.0, 1.0, 1.0, 1.0)
    for th in np.linspace(0.1, 3.0, 7):
        if abs(th - math.pi / 2.0) < 0.05:
            continue
        assert abs(omega0_sq(float(th), p)) < 1e-15


def test_permanent_rotation_radii():
    pr = permanent_rotation(math.pi / 3.0, P)
    np.testing.assert_allclose(pr.rho_c, math.sqrt(21.0) + math.sqrt(3.0) / 4.0,
                               rtol=1e-12)
    np.testing.assert_allclose(pr.rho_p, 9.0 * math.sqrt(3.0) / math.sqrt(7.0),
                               rtol=1e-12)
    np.testing.assert_allclose(pr.kappa ** 2,
                               sigma_theta_kappa_sq(math.pi / 3.0, P), rtol=1e-10)
    np.testing.assert_allclose(pr.eps, sigma_theta_eps(math.pi / 3.0, P),
                               rtol=1e-10)


def test_permanent_rotation_dynamic_oracle():
    # integrate the lifted steady state: theta frozen, CoM on the predicted circle
    pr = permanent_rotation(math.pi / 3.0, P)
    st = permanent_rotation_state(math.pi / 3.0, P)
    t_circ = 2.0 * math.pi * math.tan(math.pi / 3.0) / pr.omega0
    tr = integrate("kinematic", kinematic_init(st), (0.0, 1.2 * t_circ), P,
                   t_eval=np.linspace(0.0, 1.2 * t_circ, 400))
    th_traj = np.arccos(np.clip(tr.y_eval[:, 5], -1.0, 1.0))
    assert np.abs(th_traj - math.pi / 3.0).max() < 1e-6
    _, _, r_fit = circle_fit(tr.y_eval[:, 12], tr.y_eval[:, 13])
    np.testing.assert_allclose(r_fit, pr.rho_c, atol=1e-6)


def test_branch_endpoint_limits():
    # both branch ends flow to the vertical spins at (kappa, eps) = (0, 1 +/- alpha)
    np.testing.assert_allclose(sigma_theta_eps(1e-8, P), 1.5, atol=1e-6)
    np.testing.assert_allclose(sigma_theta_eps(math.pi - 1e-8, P), 0.5, atol=1e-6)
    assert abs(sigma_theta_kappa_sq(1e-8, P)) < 1e-6
    assert abs(sigma_theta_kappa_sq(math.pi - 1e-8, P)) < 1e-6


def test_curve_samples_are_fixed_points():
    curves = sigma_theta_curve(P, 100, ds_max=5e-3)
    n_tot = 0
    for c in curves:
        for smp in c.samples:
            n_tot += 1
            assert abs(g0(smp.theta0, smp.kappa, P)) < 1e-10
            s = math.sin(smp.theta0)
            v_min = smp.kappa ** 2 / (2.0 * s * s) + profile(smp.theta0, P).U
            assert abs(smp.eps - v_min) < 1e-12
    assert n_tot > 100


def test_branch_ranges_single_branch_case():
    p = Params(0.5, 0.5, 1.0, 1.0)
    br = branch_ranges(p)
    assert len(br) == 1
    np.testing.assert_allclose(br[0][0], math.pi / 2.0, atol=1e-15)
    np.testing.assert_allclose(br[0][1], inclined_equilibrium(p), atol=1e-12)


def test_equator_family():
    kc = equator_kappa_c(P_EQ)
    np.testing.assert_allclose(kc, math.sqrt((1.5 ** 2 - 1.0) / 1.5), rtol=1e-15)
    ep = equator_parabola(P_EQ, kappa_max=2.0)
    row = min(ep.samples, key=lambda s: abs(s.kappa - 1.0))
    np.testing.assert_allclose(row.eps, 2.0, atol=1e-9)
    # slow equator spins are saddles, fast ones centers
    lam2, stab = linear_stability(math.pi / 2.0, 0.5, P_EQ)
    assert stab == "saddle" and lam2 > 0.0
    lam2, stab = linear_stability(math.pi / 2.0, 1.0, P_EQ)
    assert stab == "center" and lam2 < 0.0


def test_vertical_spin_stability_boundaries():
    p = Params(0.5, 1.1, 1.0, 1.0)
    assert linear_stability(math.pi, 0.0, p)[1] == "center"
    assert linear_stability(0.0, 0.0, p)[1] == "saddle"
    # lambda^2 changes sign across beta^2 = 1 +/- alpha, bracket width 1e-6
    for th0, b2_crit in ((0.0, 1.5), (math.pi, 0.5)):
        lam_lo = linear_stability(th0, 0.0,
                                  Params(0.5, math.sqrt(b2_crit - 5e-7), 1.0, 1.0))[0]
        lam_hi = linear_stability(th0, 0.0,
                                  Params(0.5, math.sqrt(b2_crit + 5e-7), 1.0, 1.0))[0]
        assert lam_lo > 0.0 > lam_hi


def test_cusp_location_and_flip():
    cp = cusp(P)
    assert cp is not None and cp.kind == "cusp"
    assert 0.0 < cp.theta < inclined_equilibrium(P)
    assert abs(g0(cp.theta, cp.kappa, P)) < 1e-10
    assert abs(g0_prime(cp.theta, cp.kappa, P)) < 1e-10
    for dth, want in ((-1e-3, "center"), (1e-3, "saddle")):
        th = cp.theta + dth
        kk = math.sqrt(sigma_theta_kappa_sq(th, P))
        assert linear_stability(th, kk, P)[1] == want
    assert cusp(Params(0.5, 1.1, 1.0, 1.0)) is None
    cpe = cusp(P_EQ)
    assert cpe.kind == "tangency"
    np.testing.assert_allclose([cpe.theta, cpe.kappa],
                               [math.pi / 2.0, equator_kappa_c(P_EQ)], atol=1e-14)


@pytest.mark.parametrize("ab,want", [
    ((0.5, 0.5), "a"),
    ((0.5, 1.1), "b"),
    ((0.5, 3.0), "c"),
    ((0.0, 0.5), "d"),
    ((0.0, 1.5), "e"),
])
def test_diagram_types(ab, want):
    d = diagram(Params(ab[0], ab[1], 1.0, 1.0), n_samples=40, ds_max=2e-2)
    assert d.diagram_type == want
    assert not d.boundary


def test_diagram_boundary_flag():
    d = diagram(Params(0.0, 1.0, 1.0, 1.0), n_samples=40, ds_max=2e-2)
    assert d.boundary


def test_diagram_curve_labels_and_torus_region():
    d = diagram(P, n_samples=40, ds_max=2e-2)
    assert d.two_torus_region
    assert sorted(c.label for c in d.curves) == ["sigma_s0", "sigma_spi", "sigma_u"]
    assert d.kappa_symmetric


def test_connected_component_counts():
    u_star = profile(inclined_equilibrium(P), P).U
    n2, _ = connected_components(0.0, 2.0, P)
    assert n2 == 2
    n1, _ = connected_components(0.0, u_star + 0.5, P)
    assert n1 == 1
    n0, _ = connected_components(0.8, 1.2, P)
    assert n0 == 0
    assert rpm_floor(0.8, P) > 1.2


def test_centered_body_mirror_symmetry():
    for th in (0.3, 0.7, 1.2):
        np.testing.assert_allclose(sigma_theta_kappa_sq(th, P_EQ),
                                   sigma_theta_kappa_sq(math.pi - th, P_EQ),
                                   atol=1e-14)
        np.testing.assert_allclose(sigma_theta_eps(th, P_EQ),
                                   sigma_theta_eps(math.pi - th, P_EQ),
                                   atol=1e-14)


def test_kappa_sq_elimination_identity():
    # sigma kappa^2 agrees with solving G0 = 0 for kappa^2 directly
    for th in np.linspace(0.1, math.pi - 0.1, 23):
        if abs(math.cos(th)) < 0.05:
            continue
        s, c = math.sin(th), math.cos(th)
        z = math.sqrt(9.0 * s * s + c * c)
        a0 = 0.5 * s + (1.0 - 9.0) * s * c / z
        k2e = -a0 * s ** 3 / c
        np.testing.assert_allclose(sigma_theta_kappa_sq(float(th), P), k2e,
                                   rtol=1e-12, atol=1e-12)
