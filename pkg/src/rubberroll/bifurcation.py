"""Steady rotations, their stability, and the bifurcation diagram.

The reduced system has relative equilibria (theta, p_theta) = (theta0, 0) at
the zeros of G0.  Their images on the (kappa, eps) plane of integral values
form the bifurcation set: a one-parameter family of curves traced by the
inclination theta0, a parabola of equatorial rolling in the balanced case
alpha = 0, and the two rest points at the poles.  This module evaluates all
of them, classifies linear stability, finds the fold point where stability
changes along the curve, and assembles the labeled diagram with its
region-of-possible-motions boundary.

Sign conventions: the curve is symmetric under kappa -> -kappa; sampled
curves carry the kappa >= 0 half.  Steady-rotation circle radii are signed by
sin/cos of the inclination, so radii for theta0 > pi/2 come out negative;
magnitudes are the geometric radii.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .dynamics import FullState, component_intervals, effective_potential, g0, g0_prime
from .geometry import profile
from .model import Params

__all__ = [
    "PermanentRotation",
    "CurveSample",
    "BifurcationCurve",
    "FixedPointImage",
    "CuspPoint",
    "BifurcationDiagram",
    "omega0_sq",
    "permanent_rotation",
    "permanent_rotation_state",
    "sigma_theta_kappa_sq",
    "sigma_theta_eps",
    "branch_ranges",
    "sigma_theta_curve",
    "equator_parabola",
    "equator_kappa_c",
    "linear_stability",
    "inclined_equilibrium",
    "cusp",
    "rpm_boundary",
    "rpm_floor",
    "diagram",
    "connected_components",
]

CENTER = "center"
SADDLE = "saddle"

_EDGE = 1e-9          # inset used when sampling up to open interval ends


@dataclass(frozen=True)
class PermanentRotation:
    """A steady rotation at constant inclination and its invariants."""

    theta0: float
    omega0: float
    kappa: float
    eps: float
    rho_c: float        # center-of-mass circle radius (signed by tan theta0)
    rho_p: float        # contact-point circle radius (signed)
    stability: str      # "center" or "saddle"
    lambda_sq: float
    z_c: float


@dataclass(frozen=True)
class CurveSample:
    theta0: float
    kappa: float
    eps: float
    stability: str
    lambda_sq: float


@dataclass(frozen=True)
class BifurcationCurve:
    label: str
    samples: list[CurveSample]


@dataclass(frozen=True)
class FixedPointImage:
    label: str
    kappa: float
    eps: float
    isolated: bool
    stable: bool


@dataclass(frozen=True)
class CuspPoint:
    theta: float
    kappa: float
    eps: float
    kind: str           # "cusp" (alpha > 0) or "tangency" (alpha = 0)


@dataclass(frozen=True)
class BifurcationDiagram:
    params: Params
    diagram_type: str               # one of "a".."e"
    boundary: bool                  # parameters sit on a region boundary
    curves: list[BifurcationCurve]
    points: list[FixedPointImage]
    cusp: CuspPoint | None
    two_torus_region: bool          # a wedge with two connected components exists
    rpm_boundary: BifurcationCurve  # lower envelope eps_min(kappa)
    kappa_symmetric: bool = True


def omega0_sq(theta: float, p: Params) -> float:
    """Squared rate of the steady rotation at inclination theta.

    May be negative; the caller decides admissibility.  Raises at the equator
    and the poles where the family is not defined by this formula.
    """
    s = math.sin(theta)
    c = math.cos(theta)
    if abs(s) < 1e-15 or abs(c) < 1e-15:
        raise ValueError(f"steady-rotation rate undefined at theta={theta}")
    b2 = p.beta * p.beta
    Z = math.sqrt(b2 * s * s + c * c)
    w = Z + p.alpha * c
    J2 = (c * c + p.nu * s * s) / p.eta + w * w
    return -s * s * (c * (1.0 - b2) + p.alpha * Z) / (c * Z * J2)


def sigma_theta_kappa_sq(theta0: float, p: Params) -> float:
    """kappa^2 along the steady-rotation curve; negative means no rotation."""
    s = math.sin(theta0)
    c = math.cos(theta0)
    b2 = p.beta * p.beta
    Z = math.sqrt(b2 * s * s + c * c)
    if p.alpha == 0.0:
        return s ** 4 * (b2 - 1.0) / Z
    if abs(c) < 1e-15:
        raise ValueError("sigma_theta diverges at the equator for alpha != 0")
    return s ** 4 * ((b2 - 1.0) / Z - p.alpha / c)


def sigma_theta_eps(theta0: float, p: Params) -> float:
    """eps along the steady-rotation curve (closed form)."""
    s = math.sin(theta0)
    c = math.cos(theta0)
    Z = math.sqrt(p.beta * p.beta * s * s + c * c)
    val = (3.0 * Z * Z - 1.0) / (2.0 * Z)
    if p.alpha != 0.0:
        if abs(c) < 1e-15:
            raise ValueError("sigma_theta diverges at the equator for alpha != 0")
        val += p.alpha * (3.0 * c * c - 1.0) / (2.0 * c)
    return val


def linear_stability(theta0: float, kappa: float, p: Params, tol: float = 1e-8) -> tuple[float, str]:
    """Eigenvalue square and type of a reduced fixed point.

    lambda^2 = G0'(theta0)/B(theta0); negative is a center, positive a
    saddle.  The point must satisfy G0(theta0) = 0 at this kappa (the poles
    with kappa = 0 qualify).
    """
    resid = g0(theta0, kappa, p)
    if abs(resid) > tol:
        raise ValueError(f"(theta0={theta0}, kappa={kappa}) is not a fixed point: G0={resid}")
    B = profile(theta0, p, pole_mode=True).B
    lam2 = g0_prime(theta0, kappa, p) / B
    return lam2, (CENTER if lam2 < 0.0 else SADDLE)


def permanent_rotation(theta0: float, p: Params) -> PermanentRotation:
    """Steady rotation at inclination theta0 with full invariant data."""
    w2 = omega0_sq(theta0, p)
    if w2 < 0.0:
        raise ValueError(f"no steady rotation at theta0={theta0}: omega0^2={w2} < 0")
    s = math.sin(theta0)
    c = math.cos(theta0)
    ev = profile(theta0, p)
    omega0 = math.sqrt(w2)
    kappa = ev.J * omega0 * s
    eps = (0.0 if kappa == 0.0 else kappa * kappa / (2.0 * s * s)) + ev.U
    t = s / c
    rho_c = ev.Z * t + p.alpha * s
    rho_p = (p.beta * p.beta / ev.Z) * t
    lam2, stab = linear_stability(theta0, kappa, p)
    return PermanentRotation(
        theta0=theta0, omega0=omega0, kappa=kappa, eps=eps,
        rho_c=rho_c, rho_p=rho_p, stability=stab, lambda_sq=lam2, z_c=ev.U,
    )


def permanent_rotation_state(theta0: float, p: Params, phi: float = 0.0) -> FullState:
    """Full-system state of the steady rotation, for dynamic cross-checks.

    The angular velocity points along the unit transverse direction
    gamma x (e3 x gamma)/|...| = (e3 - cos(theta) gamma)/sin(theta), which
    keeps the no-spin constraint satisfied exactly.
    """
    w2 = omega0_sq(theta0, p)
    if w2 < 0.0:
        raise ValueError(f"no steady rotation at theta0={theta0}")
    s = math.sin(theta0)
    c = math.cos(theta0)
    gamma = np.array([s * math.sin(phi), s * math.cos(phi), c])
    e3 = np.array([0.0, 0.0, 1.0])
    omega = math.sqrt(w2) * (e3 - c * gamma) / s
    return FullState(omega=omega, gamma=gamma)


def inclined_equilibrium(p: Params) -> float | None:
    """Inclination of the tilted rest position, the zero of the rate numerator.

    The numerator n(theta) = cos(theta)(1 - beta^2) + alpha Z(theta) is
    monotone, so a sign change over (0, pi) pins a unique root; it exists
    precisely for beta^2 >= 1 + alpha (cos > 0 side) or beta^2 <= 1 - alpha
    (cos < 0 side).  Root-finding on n is the primary path; the closed form
    cos^2 = alpha^2 beta^2 / ((1 - beta^2)(1 - beta^2 - alpha^2)) only seeds
    the bracket.
    """
    b2 = p.beta * p.beta
    a = p.alpha

    def n(th: float) -> float:
        c = math.cos(th)
        s = math.sin(th)
        return c * (1.0 - b2) + a * math.sqrt(b2 * s * s + c * c)

    if a == 0.0:
        return None if b2 == 1.0 else math.pi / 2.0
    n0 = 1.0 + a - b2
    npi = b2 - 1.0 + a
    if n0 == 0.0:
        return 0.0
    if npi == 0.0:
        return math.pi
    if n0 * npi > 0.0:
        return None
    return brentq(n, 1e-15, math.pi - 1e-15, xtol=1e-12, rtol=8.9e-16)


def branch_ranges(p: Params) -> list[tuple[float, float, bool, bool]]:
    """theta0 intervals where the steady-rotation curve exists.

    Each entry is (lo, hi, lo_closed, hi_closed).  The structure follows the
    sign analysis of kappa^2(theta0): for beta^2 < 1 - alpha a single arc
    (pi/2, theta*); for 1 - alpha < beta^2 < 1 + alpha the arc (pi/2, pi);
    above 1 + alpha additionally (0, theta*] on the small-angle side.  For
    alpha = 0 with beta > 1 the two open arcs meet the equator, where the
    curve ends on the rolling parabola.
    """
    a, b2 = p.alpha, p.beta * p.beta
    ts = inclined_equilibrium(p)
    out: list[tuple[float, float, bool, bool]] = []
    if a == 0.0:
        if b2 > 1.0:
            out.append((0.0, math.pi / 2.0, False, False))
            out.append((math.pi / 2.0, math.pi, False, False))
        return out
    if b2 < 1.0 - a:
        out.append((math.pi / 2.0, ts, False, False))
    elif b2 <= 1.0 + a:
        out.append((math.pi / 2.0, math.pi, False, False))
    else:
        out.append((0.0, ts, False, True))
        out.append((math.pi / 2.0, math.pi, False, False))
    return out


def cusp(p: Params) -> CuspPoint | None:
    """Fold of the steady-rotation curve, where stability changes.

    Solves G0 = 0 together with dG0/dtheta = 0.  kappa^2 enters both
    equations linearly, so it is eliminated and the remaining scalar
    condition is rooted in theta.  Exists only for beta^2 > 1 + alpha; in
    the balanced case the solution sits at the equator where the curve is
    tangent to the rolling parabola, reported with kind="tangency".
    """
    a, b2 = p.alpha, p.beta * p.beta
    if b2 <= 1.0 + a:
        return None
    if a == 0.0:
        kc = equator_kappa_c(p)
        return CuspPoint(theta=math.pi / 2.0, kappa=kc, eps=kc * kc / 2.0 + p.beta, kind="tangency")

    ts = inclined_equilibrium(p)

    def fold_fn(th: float) -> float:
        # eliminate kappa^2 = -s^3 a0 / c from G0 = 0, substitute in G0'
        s = math.sin(th)
        c = math.cos(th)
        Z = math.sqrt(b2 * s * s + c * c)
        a0 = a * s + (1.0 - b2) * s * c / Z
        da0 = a * c + (1.0 - b2) * ((c * c - s * s) / Z - (b2 - 1.0) * s * s * c * c / (Z ** 3))
        return da0 + a0 * (1.0 + 2.0 * c * c) / (c * s)

    lo, hi = 1e-6, ts - 1e-12
    grid = np.linspace(lo, hi, 4001)
    vals = [fold_fn(t) for t in grid]
    th_c = None
    for i in range(len(grid) - 1):
        if vals[i] == 0.0:
            th_c = float(grid[i]); break
        if vals[i] * vals[i + 1] < 0.0:
            th_c = brentq(fold_fn, float(grid[i]), float(grid[i + 1]), xtol=1e-12, rtol=8.9e-16)
            break
    if th_c is None:
        return None
    k2 = sigma_theta_kappa_sq(th_c, p)
    if k2 < 0.0:
        return None
    kc = math.sqrt(k2)
    return CuspPoint(theta=th_c, kappa=kc, eps=sigma_theta_eps(th_c, p), kind="cusp")


def equator_kappa_c(p: Params) -> float:
    """Stability threshold of equatorial rolling in the balanced case.

    The equator fixed point is a center iff |kappa| exceeds this value;
    below it (slow rolling) the point is a saddle.  Zero when beta <= 1,
    meaning rolling is stable at every rate.
    """
    if p.alpha != 0.0:
        raise ValueError("equatorial rolling family requires alpha = 0")
    b2 = p.beta * p.beta
    if b2 <= 1.0:
        return 0.0
    return math.sqrt((b2 - 1.0) / p.beta)


def equator_parabola(
    p: Params, kappa_max: float = 3.0, n_samples: int = 601
) -> BifurcationCurve:
    """Image of equatorial rolling, eps = kappa^2/2 + beta (alpha = 0 only)."""
    if p.alpha != 0.0:
        raise ValueError("the equatorial rolling curve exists only for alpha = 0")
    kc = equator_kappa_c(p)
    samples = []
    for k in np.linspace(0.0, kappa_max, n_samples):
        eps = k * k / 2.0 + p.beta
        lam2 = g0_prime(math.pi / 2.0, float(k), p) / profile(math.pi / 2.0, p).B
        stab = CENTER if k > kc else (SADDLE if kc > 0.0 else CENTER)
        samples.append(CurveSample(theta0=math.pi / 2.0, kappa=float(k), eps=eps,
                                   stability=stab, lambda_sq=lam2))
    return BifurcationCurve(label="sigma_pi2", samples=samples)


def _curve_point(theta0: float, p: Params) -> tuple[float, float] | None:
    k2 = sigma_theta_kappa_sq(theta0, p)
    if k2 < 0.0:
        return None
    return math.sqrt(k2), sigma_theta_eps(theta0, p)


def _sample_arc(
    p: Params,
    lo: float,
    hi: float,
    lo_closed: bool,
    hi_closed: bool,
    n_init: int,
    ds_max: float,
    eps_max: float,
    kappa_max: float,
) -> list[CurveSample]:
    """Adaptively sample one theta0 arc to arc length <= ds_max in (kappa, eps).

    Refinement applies inside the plotting window |kappa| <= kappa_max,
    eps <= eps_max; one sample beyond each window exit is kept so the curve
    visibly leaves the frame.
    """
    a = lo + (_EDGE if not lo_closed else 0.0)
    b = hi - (_EDGE if not hi_closed else 0.0)
    thetas = list(np.linspace(a, b, n_init))
    pts: dict[float, tuple[float, float] | None] = {}

    def pt(th: float):
        if th not in pts:
            pts[th] = _curve_point(th, p)
        return pts[th]

    def in_window(q) -> bool:
        return q is not None and q[0] <= kappa_max and q[1] <= eps_max

    i = 0
    budget = 20000
    while i < len(thetas) - 1 and budget > 0:
        t0, t1 = thetas[i], thetas[i + 1]
        q0, q1 = pt(t0), pt(t1)
        if (in_window(q0) or in_window(q1)) and q0 is not None and q1 is not None:
            ds = math.hypot(q1[0] - q0[0], q1[1] - q0[1])
            if ds > ds_max and t1 - t0 > 1e-12:
                thetas.insert(i + 1, 0.5 * (t0 + t1))
                budget -= 1
                continue
        i += 1

    out: list[CurveSample] = []
    for th in thetas:
        q = pt(th)
        if q is None:
            continue
        k, e = q
        lam2 = g0_prime(th, k, p) / profile(th, p, pole_mode=True).B
        out.append(CurveSample(theta0=float(th), kappa=k, eps=e,
                               stability=CENTER if lam2 < 0.0 else SADDLE, lambda_sq=lam2))
    return out


def sigma_theta_curve(
    p: Params,
    n_samples: int = 200,
    *,
    ds_max: float = 1e-3,
    eps_max: float | None = None,
    kappa_max: float | None = None,
) -> list[BifurcationCurve]:
    """All steady-rotation curve branches, labeled and stability-tagged.

    Labels: "sigma_spi" for the branch at inclinations beyond the equator,
    "sigma_s0"/"sigma_u" for the center/saddle pieces of the small-angle
    branch split at the fold, and "sigma_s0" for the whole small-angle
    branch in the balanced case.
    """
    if eps_max is None:
        eps_max = _default_eps_max(p)
    if kappa_max is None:
        kappa_max = _default_kappa_max(p, eps_max)
    cp = cusp(p)
    curves: list[BifurcationCurve] = []
    for (lo, hi, lc, hc) in branch_ranges(p):
        if lo >= math.pi / 2.0:
            samples = _sample_arc(p, lo, hi, lc, hc, n_samples, ds_max, eps_max, kappa_max)
            curves.append(BifurcationCurve(label="sigma_spi", samples=samples))
        elif cp is not None and cp.kind == "cusp" and lo < cp.theta < hi:
            s1 = _sample_arc(p, lo, cp.theta, lc, True, n_samples, ds_max, eps_max, kappa_max)
            s2 = _sample_arc(p, cp.theta, hi, True, hc, n_samples, ds_max, eps_max, kappa_max)
            curves.append(BifurcationCurve(label="sigma_s0", samples=s1))
            curves.append(BifurcationCurve(label="sigma_u", samples=s2))
        else:
            samples = _sample_arc(p, lo, hi, lc, hc, n_samples, ds_max, eps_max, kappa_max)
            curves.append(BifurcationCurve(label="sigma_s0", samples=samples))
    return curves


def rpm_floor(kappa: float, p: Params) -> float:
    """Global minimum of the effective potential at this kappa.

    The lower edge of the region of possible motions on the (kappa, eps)
    plane.  At kappa = 0 the potential continues smoothly through the poles,
    so the candidates include both pole values.
    """
    n = 721
    if kappa == 0.0:
        grid = np.linspace(0.0, math.pi, n)
    else:
        barrier = max(1e-6, abs(kappa) * 1e-3)
        grid = np.linspace(barrier, math.pi - barrier, n)
    vals = [effective_potential(float(t), kappa, p) for t in grid]
    i = int(np.argmin(vals))
    lo = grid[max(0, i - 1)]
    hi = grid[min(n - 1, i + 1)]
    if hi - lo < 1e-15:
        return float(vals[i])
    res = minimize_scalar(
        lambda t: effective_potential(float(t), kappa, p),
        bounds=(float(lo), float(hi)), method="bounded",
        options={"xatol": 1e-13},
    )
    return float(min(res.fun, vals[i]))


def rpm_boundary(p: Params, kappa_max: float, n_samples: int = 241) -> BifurcationCurve:
    """Lower envelope eps_min(kappa) of the region of possible motions."""
    samples = []
    for k in np.linspace(0.0, kappa_max, n_samples):
        e = rpm_floor(float(k), p)
        samples.append(CurveSample(theta0=float("nan"), kappa=float(k), eps=e,
                                   stability=CENTER, lambda_sq=float("nan")))
    return BifurcationCurve(label="rpm_boundary", samples=samples)


def _default_eps_max(p: Params) -> float:
    cands = [1.0 + p.alpha, 1.0 - p.alpha]
    ts = inclined_equilibrium(p)
    if ts is not None and 0.0 < ts < math.pi:
        cands.append(profile(ts, p).U)
    cp = cusp(p)
    if cp is not None:
        cands.append(cp.eps)
    return max(cands) + 1.0


def _default_kappa_max(p: Params, eps_max: float) -> float:
    # find where each branch leaves the eps window and take the largest kappa
    k_best = 1.0
    for (lo, hi, lc, hc) in branch_ranges(p):
        a = lo + (0.0 if lc else _EDGE)
        b = hi - (0.0 if hc else _EDGE)
        for th in np.linspace(a, b, 2001):
            q = _curve_point(float(th), p)
            if q is not None and q[1] <= eps_max and q[0] > k_best:
                k_best = q[0]
    if p.alpha == 0.0 and p.beta > 1.0:
        k_best = max(k_best, equator_kappa_c(p) + 1.0)
    k_best = max(k_best, math.sqrt(max(2.0 * (eps_max - p.beta), 0.0)) if p.alpha == 0.0 else k_best)
    return k_best


def diagram(
    p: Params,
    *,
    n_samples: int = 200,
    ds_max: float = 1e-3,
    eps_max: float | None = None,
    kappa_max: float | None = None,
    boundary_tol: float = 1e-12,
) -> BifurcationDiagram:
    """Assemble the labeled bifurcation diagram and classify its type.

    Types by the (alpha, beta^2) region: "a" alpha>0, beta^2 < 1-alpha;
    "b" alpha>0, 1-alpha < beta^2 < 1+alpha; "c" alpha>0, beta^2 > 1+alpha;
    "d" alpha=0, beta^2 < 1; "e" alpha=0, beta^2 > 1.  Parameters on a
    region boundary resolve to the higher-beta^2 type with the boundary
    flag set.
    """
    a, b2 = p.alpha, p.beta * p.beta
    boundary = False
    if a == 0.0:
        if abs(b2 - 1.0) <= boundary_tol:
            dtype, boundary = "e", True
        else:
            dtype = "d" if b2 < 1.0 else "e"
    else:
        if abs(b2 - (1.0 - a)) <= boundary_tol:
            dtype, boundary = "b", True
        elif abs(b2 - (1.0 + a)) <= boundary_tol:
            dtype, boundary = "c", True
        elif b2 < 1.0 - a:
            dtype = "a"
        elif b2 < 1.0 + a:
            dtype = "b"
        else:
            dtype = "c"

    if eps_max is None:
        eps_max = _default_eps_max(p)
    if kappa_max is None:
        kappa_max = _default_kappa_max(p, eps_max)

    curves = sigma_theta_curve(p, n_samples, ds_max=ds_max, eps_max=eps_max, kappa_max=kappa_max)
    if a == 0.0:
        curves.append(equator_parabola(p, kappa_max=kappa_max))

    points = [
        FixedPointImage(label="sigma_0", kappa=0.0, eps=1.0 + a,
                        isolated=b2 < 1.0 + a, stable=b2 > 1.0 + a),
        FixedPointImage(label="sigma_pi", kappa=0.0, eps=1.0 - a,
                        isolated=b2 < 1.0 - a, stable=b2 > 1.0 - a),
    ]
    cp = cusp(p)
    return BifurcationDiagram(
        params=p,
        diagram_type=dtype,
        boundary=boundary,
        curves=curves,
        points=points,
        cusp=cp,
        two_torus_region=(cp is not None and cp.kind == "cusp"),
        rpm_boundary=rpm_boundary(p, kappa_max),
    )


def connected_components(kappa: float, eps: float, p: Params) -> tuple[int, list[tuple[float, float]]]:
    """Count of connected components of the admissible inclination set.

    Returns the number of intervals of {theta : V(theta) <= eps} together
    with the intervals themselves (0 outside the region of possible
    motions, 1 on a single torus, 2 in the wedge between the saddle branch
    and the small-angle center branch).
    """
    ivs = component_intervals(kappa, eps, p)
    return len(ivs), ivs
