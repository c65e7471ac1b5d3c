"""Equations of motion: full vector form and the one degree of freedom reduction.

Full system, dimensionless, in the body frame (m = g = 1):

    Jt dw/dt + w x (Jt w) + r x (w x dr/dt) + gamma x r - mu gamma = 0
    dgamma/dt = gamma x w

with the contact-point inertia tensor Jt = I + |r|^2 Id - r (x) r,
I = diag(1/eta, 1/eta, nu/eta), and the multiplier mu chosen so the no-spin
constraint (w, gamma) = 0 is preserved identically.

Conserved along motions with (w, gamma) = 0:

    F0 = (gamma, gamma)          geometric, identically
    F1 = (w, gamma)              constraint, identically
    kappa = J(gamma_3) w_3       axial momentum combination
    eps = (Jt w, w)/2 - (r, gamma)   energy

On the sphere F0 = 1 with F1 = 0 the nutation angle decouples:

    dtheta/dt = p
    dp/dt = (G0(theta) - B'(theta) p^2 / 2) / B(theta)
    G0(theta) = kappa^2 cos/sin^3 + alpha sin + (1 - beta^2) sin cos / Z

with energy eps = B p^2/2 + kappa^2/(2 sin^2) + U(theta).  G0 doubles as the
negative derivative of the effective potential, so its roots are the relative
equilibria and the turning-point machinery below is built on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .geometry import (
    B_SIGN_DERIVED,
    B_SIGN_PAPER,
    contact_vector,
    meridian_profile,
    profile,
    z_of_gamma3,
)
from .model import Params

__all__ = [
    "FullState",
    "ReducedState",
    "ReducedCoords",
    "Integrals",
    "full_field",
    "full_rhs",
    "kinematic_field",
    "kinematic_init",
    "reduced_field",
    "augmented_field",
    "reduced_rhs",
    "integrals",
    "reduced_energy",
    "effective_potential",
    "g0",
    "g0_prime",
    "measure_density",
    "reduce_state",
    "lift",
    "critical_thetas",
    "component_intervals",
    "turning_points",
]


@dataclass(frozen=True)
class FullState:
    """Body angular velocity and unit vertical, both in the body frame."""

    omega: np.ndarray
    gamma: np.ndarray

    def as_array(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.omega, float), np.asarray(self.gamma, float)])

    @staticmethod
    def from_array(y: np.ndarray) -> "FullState":
        y = np.asarray(y, dtype=float)
        return FullState(omega=y[:3].copy(), gamma=y[3:6].copy())


@dataclass(frozen=True)
class ReducedState:
    theta: float
    p_theta: float


@dataclass(frozen=True)
class ReducedCoords:
    """Reduced chart of a full state: (theta, p_theta), kappa, precession seed."""

    theta: float
    p_theta: float
    kappa: float
    phi: float
    psi_rate: float


@dataclass(frozen=True)
class Integrals:
    F0: float
    F1: float
    kappa: float
    eps: float


def _j2_gamma3(gamma3: float, p: Params) -> float:
    """J^2 as a function of gamma_3 alone (on the unit sphere)."""
    w = z_of_gamma3(gamma3, p) + p.alpha * gamma3
    s2 = 1.0 - gamma3 * gamma3
    return (gamma3 * gamma3 + p.nu * s2) / p.eta + w * w


# --- Full system ---


def full_field(p: Params) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side of the full system as f(t, y), y = (w, gamma).

    The closure is the hot path for the adaptive integrator, so the vector
    algebra is unrolled to scalars: cross products, the symmetric 3x3
    contact-inertia tensor and its adjugate-based solve.
    """
    a = p.alpha
    b2 = p.beta * p.beta
    i1 = 1.0 / p.eta
    i3 = p.nu / p.eta

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        w1 = y[0]; w2 = y[1]; w3 = y[2]
        g1 = y[3]; g2 = y[4]; g3 = y[5]

        bg1 = b2 * g1; bg2 = b2 * g2; bg3 = g3
        s2 = g1 * bg1 + g2 * bg2 + g3 * bg3
        s = math.sqrt(s2)
        r1 = -bg1 / s
        r2 = -bg2 / s
        r3 = -bg3 / s - a

        # dgamma/dt = gamma x w
        u1 = g2 * w3 - g3 * w2
        u2 = g3 * w1 - g1 * w3
        u3 = g1 * w2 - g2 * w1

        # dr/dt along the flow, differentiating -Bq gamma / |gamma|_Bq
        d = bg1 * u1 + bg2 * u2 + bg3 * u3
        s3 = s2 * s
        rd1 = -b2 * u1 / s + bg1 * d / s3
        rd2 = -b2 * u2 / s + bg2 * d / s3
        rd3 = -u3 / s + bg3 * d / s3

        rr = r1 * r1 + r2 * r2 + r3 * r3
        J11 = i1 + rr - r1 * r1
        J22 = i1 + rr - r2 * r2
        J33 = i3 + rr - r3 * r3
        J12 = -r1 * r2
        J13 = -r1 * r3
        J23 = -r2 * r3

        Jw1 = J11 * w1 + J12 * w2 + J13 * w3
        Jw2 = J12 * w1 + J22 * w2 + J23 * w3
        Jw3 = J13 * w1 + J23 * w2 + J33 * w3

        # h = w x Jt w + r x (w x dr/dt) + gamma x r
        h1 = w2 * Jw3 - w3 * Jw2
        h2 = w3 * Jw1 - w1 * Jw3
        h3 = w1 * Jw2 - w2 * Jw1

        e1 = w2 * rd3 - w3 * rd2
        e2 = w3 * rd1 - w1 * rd3
        e3 = w1 * rd2 - w2 * rd1
        h1 += r2 * e3 - r3 * e2
        h2 += r3 * e1 - r1 * e3
        h3 += r1 * e2 - r2 * e1

        h1 += g2 * r3 - g3 * r2
        h2 += g3 * r1 - g1 * r3
        h3 += g1 * r2 - g2 * r1

        # adjugate of the symmetric Jt
        A11 = J22 * J33 - J23 * J23
        A12 = J13 * J23 - J12 * J33
        A13 = J12 * J23 - J13 * J22
        A22 = J11 * J33 - J13 * J13
        A23 = J12 * J13 - J11 * J23
        A33 = J11 * J22 - J12 * J12
        det = J11 * A11 + J12 * A12 + J13 * A13

        x1 = A11 * g1 + A12 * g2 + A13 * g3
        x2 = A12 * g1 + A22 * g2 + A23 * g3
        x3 = A13 * g1 + A23 * g2 + A33 * g3
        mu = (h1 * x1 + h2 * x2 + h3 * x3) / (g1 * x1 + g2 * x2 + g3 * x3)

        q1 = mu * g1 - h1
        q2 = mu * g2 - h2
        q3 = mu * g3 - h3

        out = np.empty(6)
        out[0] = (A11 * q1 + A12 * q2 + A13 * q3) / det
        out[1] = (A12 * q1 + A22 * q2 + A23 * q3) / det
        out[2] = (A13 * q1 + A23 * q2 + A33 * q3) / det
        out[3] = u1
        out[4] = u2
        out[5] = u3
        return out

    return rhs


def full_rhs(s: FullState, p: Params) -> tuple[np.ndarray, np.ndarray]:
    """Time derivatives (dw/dt, dgamma/dt) of a full state."""
    dy = full_field(p)(0.0, s.as_array())
    return dy[:3], dy[3:6]


def kinematic_init(
    s: FullState, x0: float = 0.0, y0: float = 0.0, a_hint: np.ndarray | None = None
) -> np.ndarray:
    """Initial 14-vector for kinematic_field.

    The fixed axes expressed in body coordinates must form an orthonormal
    right-handed triple (ax, bx, gamma); ax is built by projecting a_hint
    (default: whichever of e1/e2 is farther from gamma) off gamma, and
    bx = gamma x ax closes the triple.
    """
    g = np.asarray(s.gamma, float)
    if a_hint is None:
        a_hint = np.array([1.0, 0.0, 0.0]) if abs(g[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    ax = a_hint - (a_hint @ g) * g
    n = np.linalg.norm(ax)
    if n < 1e-12:
        raise ValueError("a_hint is parallel to gamma")
    ax = ax / n
    bx = np.cross(g, ax)
    return np.concatenate([s.omega, g, ax, bx, [x0, y0]])


def kinematic_field(p: Params) -> Callable[[float, np.ndarray], np.ndarray]:
    """Full system extended by fixed-frame kinematics.

    State layout: (w, gamma, ax, bx, xc, yc), 14 entries, where ax and bx are
    the fixed horizontal unit vectors expressed in the body frame; together
    with gamma they form an orthonormal triple (see kinematic_init).  They
    evolve like gamma, and the center of mass moves with velocity
    v = r x w mapped back to the fixed frame.  This is the oracle against
    which quadrature-based reconstruction is checked.
    """
    base = full_field(p)
    a = p.alpha
    b2 = p.beta * p.beta

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        out = np.empty(14)
        out[:6] = base(t, y[:6])
        w1 = y[0]; w2 = y[1]; w3 = y[2]
        g1 = y[3]; g2 = y[4]; g3 = y[5]
        a1 = y[6]; a2 = y[7]; a3 = y[8]
        c1 = y[9]; c2 = y[10]; c3 = y[11]

        out[6] = a2 * w3 - a3 * w2
        out[7] = a3 * w1 - a1 * w3
        out[8] = a1 * w2 - a2 * w1
        out[9] = c2 * w3 - c3 * w2
        out[10] = c3 * w1 - c1 * w3
        out[11] = c1 * w2 - c2 * w1

        bg1 = b2 * g1; bg2 = b2 * g2; bg3 = g3
        s = math.sqrt(g1 * bg1 + g2 * bg2 + g3 * bg3)
        r1 = -bg1 / s
        r2 = -bg2 / s
        r3 = -bg3 / s - a
        v1 = r2 * w3 - r3 * w2
        v2 = r3 * w1 - r1 * w3
        v3 = r1 * w2 - r2 * w1
        out[12] = a1 * v1 + a2 * v2 + a3 * v3
        out[13] = c1 * v1 + c2 * v2 + c3 * v3
        return out

    return rhs


# --- Reduced system ---


def reduced_field(
    kappa: float, p: Params, b_sign: str = B_SIGN_DERIVED
) -> Callable[[float, np.ndarray], np.ndarray]:
    """Right-hand side of the reduced system as f(t, y), y = (theta, p_theta).

    Valid for any real theta when kappa = 0 (smooth meridian extension); the
    integrator guards the poles when kappa != 0.
    """
    a = p.alpha
    b2 = p.beta * p.beta
    inv_eta = 1.0 / p.eta
    k2 = kappa * kappa
    paper = b_sign == B_SIGN_PAPER

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        th = y[0]; pt = y[1]
        s = math.sin(th); c = math.cos(th)
        s2 = s * s; c2 = c * c
        Z = math.sqrt(b2 * s2 + c2)
        Z2 = Z * Z
        if paper:
            cross = a * Z - c
            dB = 2.0 * b2 * s * ((b2 - 1.0) * c + a * Z) / (Z2 * Z2)
        else:
            cross = c + a * Z
            dB = 2.0 * b2 * s * ((b2 - 1.0) * c - a * Z) / (Z2 * Z2)
        B = inv_eta + (b2 * b2 * s2 + cross * cross) / Z2
        G = a * s + (1.0 - b2) * s * c / Z
        if k2 != 0.0:
            G += k2 * c / (s2 * s)
        out = np.empty(2)
        out[0] = pt
        out[1] = (G - 0.5 * dB * pt * pt) / B
        return out

    return rhs


def augmented_field(
    kappa: float, p: Params, b_sign: str = B_SIGN_DERIVED
) -> Callable[[float, np.ndarray], np.ndarray]:
    """Reduced system extended by the precession quadratures and the planar path.

    State layout: (theta, p_theta, psi, phi, xc, yc).  psi and phi are the
    accumulated quadrature angles

        dpsi/dt = -kappa cos / (J sin^2),   dphi/dt = kappa / (J sin^2)

    and the center of mass moves by

        d(xc + i yc)/dt = -U(theta) (kappa/(J sin) + i p_theta) exp(i psi).

    At kappa = 0 all precession terms vanish and the field stays regular
    through the poles in the extended meridian chart.
    """
    base = reduced_field(kappa, p, b_sign)
    a = p.alpha
    b2 = p.beta * p.beta
    inv_eta = 1.0 / p.eta
    nu = p.nu

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        out = np.empty(6)
        out[:2] = base(t, y[:2])
        th = y[0]; pt = y[1]; psi = y[2]
        s = math.sin(th); c = math.cos(th)
        s2 = s * s
        Z = math.sqrt(b2 * s2 + c * c)
        U = a * c + Z
        if kappa != 0.0:
            w = Z + a * c
            J = math.sqrt((c * c + nu * s2) * inv_eta + w * w)
            w3 = kappa / J
            out[2] = -w3 * c / s2
            out[3] = w3 / s2
            A = w3 / s
        else:
            out[2] = 0.0
            out[3] = 0.0
            A = 0.0
        cp = math.cos(psi); sp = math.sin(psi)
        out[4] = -U * (A * cp - pt * sp)
        out[5] = -U * (A * sp + pt * cp)
        return out

    return rhs


def reduced_rhs(
    s: ReducedState, kappa: float, p: Params, b_sign: str = B_SIGN_DERIVED
) -> tuple[float, float]:
    dy = reduced_field(kappa, p, b_sign)(0.0, np.array([s.theta, s.p_theta]))
    return float(dy[0]), float(dy[1])


def reduced_energy(
    theta: float, p_theta: float, kappa: float, p: Params, b_sign: str = B_SIGN_DERIVED
) -> float:
    """eps = B p^2/2 + kappa^2/(2 sin^2) + U."""
    se = profile(theta, p, b_sign=b_sign, pole_mode=True)
    e = 0.5 * se.B * p_theta * p_theta + se.U
    if kappa != 0.0:
        s = math.sin(theta)
        e += 0.5 * kappa * kappa / (s * s)
    return e


def effective_potential(theta: float, kappa: float, p: Params) -> float:
    """V(theta) = kappa^2/(2 sin^2) + U(theta); the p_theta = 0 energy."""
    return reduced_energy(theta, 0.0, kappa, p)


def g0(theta: float, kappa: float, p: Params) -> float:
    """Fixed-point function of the reduced system (minus the potential slope)."""
    a = p.alpha
    b2 = p.beta * p.beta
    s = math.sin(theta); c = math.cos(theta)
    Z = math.sqrt(b2 * s * s + c * c)
    val = a * s + (1.0 - b2) * s * c / Z
    if kappa != 0.0:
        val += kappa * kappa * c / (s * s * s)
    return val


def g0_prime(theta: float, kappa: float, p: Params) -> float:
    """Analytic d G0 / d theta, used by the linear stability exponent."""
    a = p.alpha
    b2 = p.beta * p.beta
    s = math.sin(theta); c = math.cos(theta)
    s2 = s * s; c2 = c * c
    Z = math.sqrt(b2 * s2 + c2)
    Z3 = Z * Z * Z
    val = a * c + (1.0 - b2) * ((c2 - s2) / Z - (b2 - 1.0) * s2 * c2 / Z3)
    if kappa != 0.0:
        val -= kappa * kappa * (1.0 + 2.0 * c2) / (s2 * s2)
    return val


# --- Integrals and measure ---


def integrals(s: FullState, p: Params) -> Integrals:
    """All four conserved quantities of a full state."""
    w = np.asarray(s.omega, float)
    g = np.asarray(s.gamma, float)
    F0 = float(g @ g)
    F1 = float(w @ g)

    a = p.alpha
    b2 = p.beta * p.beta
    bg = np.array([b2 * g[0], b2 * g[1], g[2]])
    sn = math.sqrt(float(g @ bg))
    r = -bg / sn
    r[2] -= a

    rg = float(r @ g)
    J2 = (g[2] * g[2] + p.nu * (g[0] * g[0] + g[1] * g[1])) / p.eta + rg * rg
    kappa = math.sqrt(J2) * w[2]

    rr = float(r @ r)
    I = np.array([1.0 / p.eta, 1.0 / p.eta, p.nu / p.eta])
    Jw = I * w + rr * w - r * float(r @ w)
    eps = 0.5 * float(Jw @ w) - rg
    return Integrals(F0=F0, F1=F1, kappa=kappa, eps=eps)


def measure_density(gamma3: float, p: Params) -> float:
    """Density of the preserved phase-space measure, rho = (1/eta + |r|^2) J."""
    chi1, chi2 = meridian_profile(gamma3, p)
    s2 = 1.0 - gamma3 * gamma3
    rr = chi1 * chi1 * s2 + chi2 * chi2
    return (1.0 / p.eta + rr) * math.sqrt(_j2_gamma3(gamma3, p))


# --- Chart maps ---


def reduce_state(s: FullState, p: Params, tol: float = 1e-6) -> ReducedCoords:
    """Project a valid full state to the reduced chart.

    Requires F0 = 1 and F1 = 0 within ``tol``.  The returned phi is the
    proper-rotation angle of the vertical, phi = atan2(gamma_1, gamma_2), and
    psi_rate seeds the precession quadrature at the state.
    """
    w = np.asarray(s.omega, float)
    g = np.asarray(s.gamma, float)
    F0 = float(g @ g)
    F1 = float(w @ g)
    if abs(F0 - 1.0) > tol:
        raise ValueError(f"state off the unit sphere: |gamma|^2 = {F0}")
    if abs(F1) > tol:
        raise ValueError(f"state violates the no-spin constraint: (w, gamma) = {F1}")
    g3 = min(1.0, max(-1.0, g[2]))
    theta = math.acos(g3)
    phi = math.atan2(g[0], g[1])
    p_theta = w[0] * math.cos(phi) - w[1] * math.sin(phi)
    kappa = math.sqrt(_j2_gamma3(g3, p)) * w[2]
    s2 = 1.0 - g3 * g3
    psi_rate = -w[2] * g3 / s2 if s2 > 0.0 else 0.0
    return ReducedCoords(theta=theta, p_theta=p_theta, kappa=kappa, phi=phi, psi_rate=psi_rate)


def lift(r: ReducedState, kappa: float, phi: float, p: Params) -> FullState:
    """Inverse of reduce_state: rebuild the full state on F0 = 1, F1 = 0."""
    th = r.theta
    s = math.sin(th); c = math.cos(th)
    if s == 0.0:
        raise ValueError("lift undefined at the poles")
    J = math.sqrt(_j2_gamma3(c, p))
    w3 = kappa / J
    cot = c / s
    sp = math.sin(phi); cp = math.cos(phi)
    w1 = r.p_theta * cp - w3 * cot * sp
    w2 = -r.p_theta * sp - w3 * cot * cp
    gamma = np.array([s * sp, s * cp, c])
    return FullState(omega=np.array([w1, w2, w3]), gamma=gamma)


# --- Effective-potential structure ---


def critical_thetas(kappa: float, p: Params, n_grid: int = 800) -> list[float]:
    """Interior roots of G0 on (0, pi): relative equilibria of the reduced flow.

    For kappa != 0 the centrifugal term dominates both pole limits, so every
    root is interior and a sign scan on a uniform grid brackets all of them.
    For kappa = 0 the only interior root is the inclined equilibrium, when it
    exists; the poles themselves are always equilibria of the meridian chart
    and are not reported here.
    """
    from scipy.optimize import brentq

    if kappa == 0.0:
        # G0 = sin * (alpha + (1 - beta^2) cos / Z); interior root where the
        # bracketed factor vanishes.
        b2 = p.beta * p.beta

        def fac(th: float) -> float:
            c = math.cos(th)
            Z = math.sqrt(b2 * (1.0 - c * c) + c * c)
            return p.alpha + (1.0 - b2) * c / Z

        lo, hi = 1e-9, math.pi - 1e-9
        flo, fhi = fac(lo), fac(hi)
        if flo == 0.0:
            return [lo]
        if fhi == 0.0:
            return [hi]
        if flo * fhi > 0.0:
            return []
        return [brentq(fac, lo, hi, xtol=1e-14, rtol=8.9e-16)]

    f = lambda th: g0(th, kappa, p)
    eps_edge = 1e-6
    grid = np.linspace(eps_edge, math.pi - eps_edge, n_grid)
    vals = np.array([f(t) for t in grid])
    roots = []
    for i in range(n_grid - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0.0:
            roots.append(brentq(f, float(grid[i]), float(grid[i + 1]), xtol=1e-14, rtol=8.9e-16))
    if vals[-1] == 0.0:
        roots.append(float(grid[-1]))
    return sorted(roots)


def turning_points(kappa: float, eps: float, p: Params, branch: int = 0) -> tuple[float, float]:
    """Turning points of the branch-th admissible component.

    Thin selector over :func:`component_intervals`; a degenerate component
    returns coinciding endpoints (the relative equilibrium angle).
    """
    ivs = component_intervals(kappa, eps, p)
    if not ivs:
        raise ValueError(f"no admissible motion at kappa={kappa}, eps={eps}")
    if not 0 <= branch < len(ivs):
        raise ValueError(f"branch {branch} out of range, {len(ivs)} component(s)")
    return ivs[branch]


def component_intervals(
    kappa: float, eps: float, p: Params, n_grid: int = 2000, tol_fp: float = 1e-10
) -> list[tuple[float, float]]:
    """Connected theta-intervals of the admissible region {V <= eps}.

    Returns a sorted list of (theta_lo, theta_hi).  Degenerate components
    (relative equilibria, eps exactly at a well bottom) come back with
    theta_lo == theta_hi.  For kappa = 0 the admissible set lives on the
    meridian circle; intervals touching a pole include the pole point and
    stand for the pole-crossing component.
    """
    from scipy.optimize import brentq

    V = lambda th: effective_potential(th, kappa, p)
    crit = critical_thetas(kappa, p)

    if kappa == 0.0:
        lo_edge, hi_edge = 0.0, math.pi
    else:
        # clip the scan where the centrifugal wall exceeds eps by a margin
        lo_edge, hi_edge = 1e-6, math.pi - 1e-6

    grid = sorted(set(np.linspace(lo_edge, hi_edge, n_grid).tolist() + crit))
    vals = [V(t) - eps for t in grid]

    scale = max(1.0, abs(eps))
    intervals: list[tuple[float, float]] = []

    # degenerate components first: critical points sitting exactly on the level
    degen = [tc for tc in crit if abs(V(tc) - eps) <= tol_fp * scale]
    if kappa == 0.0:
        for pole in (0.0, math.pi):
            if abs(V(pole) - eps) <= tol_fp * scale:
                degen.append(pole)

    # breakpoints: refined sign changes plus exact-level grid nodes; segment
    # membership is decided at midpoints, so a node that merely touches the
    # level cannot flip the interval parity
    breaks = [grid[0], grid[-1]]
    for i in range(len(grid) - 1):
        va, vb = vals[i], vals[i + 1]
        if va == 0.0:
            breaks.append(grid[i])
        elif va * vb < 0.0:
            breaks.append(
                brentq(lambda th: V(th) - eps, grid[i], grid[i + 1], xtol=1e-14, rtol=8.9e-16)
            )
    breaks = sorted(set(breaks))

    for u, v in zip(breaks[:-1], breaks[1:]):
        if V(0.5 * (u + v)) - eps < 0.0:
            if intervals and intervals[-1][1] == u:
                intervals[-1] = (intervals[-1][0], v)
            else:
                intervals.append((u, v))

    for tc in degen:
        if not any(lo - 1e-9 <= tc <= hi + 1e-9 for lo, hi in intervals):
            intervals.append((tc, tc))

    intervals.sort()
    return intervals
