"""Command-line front end.

Subcommands
-----------
simulate
    Integrate the reduced (theta, p_theta, kappa) or the full (omega, gamma)
    system and write the absolute-space trajectory CSV.
trajectory
    Absolute-space reconstruction from reduced initial data, with optional
    angle and position seeds.
bifurcation
    Build the labeled (kappa, eps) diagram for (alpha, beta) and write JSON.
rotation-number
    Rotation number N on a point or grid of (kappa, eps); CSV output.
resonance
    Sampled N = -n resonance loci over a kappa range; CSV per n.
classify
    Trajectory class of one (kappa, eps, branch) point; JSON output.
verify
    Self-check suite (conservation, reduction oracle, measure invariance,
    steady-rotation identities, formula arbitration); exit 3 on failure.

Config files given with --config hold ``key = value`` lines whose keys
mirror the long flag names; explicit flags win.  All numeric output uses 17
significant digits.  RUBBERROLL_LOG selects the log level.  Exit codes:
0 success, 1 invalid parameters or usage, 2 numerical failure, 3 failed
verification.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .model import Params, validate
from .geometry import B_SIGN_DERIVED, B_SIGN_PAPER, profile
from .dynamics import (
    FullState,
    component_intervals,
    effective_potential,
    integrals,
    lift,
    measure_density,
    full_field,
    reduce_state,
    reduced_energy,
    ReducedState,
)
from .integrate import IntegrationError, PoleError, integrate
from .bifurcation import (
    diagram,
    inclined_equilibrium,
    permanent_rotation,
    sigma_theta_eps,
    sigma_theta_kappa_sq,
)
from .reconstruct import (
    classify,
    epsilon_min,
    reconstruct_from_full,
    reconstruct_trajectory,
    resonance_curve,
    rotation_number,
)

log = logging.getLogger("rubberroll")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_VERIFY = 3

_CSV_HEADER = ["t", "theta", "p_theta", "psi", "phi",
               "x_c", "y_c", "z_c", "x_p", "y_p", "E_drift", "F1_drift"]


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit with code 1, not 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _g(x: float) -> str:
    return format(float(x), ".17g")


def _read_config(path: str) -> dict[str, str]:
    """Parse a key = value config file; '#' starts a comment."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{ln}: expected key = value")
            key, val = line.split("=", 1)
            out[key.strip().replace("-", "_")] = val.strip()
    return out


def _merge_config(args: argparse.Namespace, parser: _Parser) -> None:
    """Fill unset (None) options from the --config file, flags winning."""
    if not getattr(args, "config", None):
        return
    try:
        cfg = _read_config(args.config)
    except (OSError, ValueError) as ex:
        parser.error(str(ex))
    casts = {"n_kappa": int, "n_energy": int, "samples": int, "branch": int,
             "jobs": int, "seed": int, "max_steps": int, "n": str,
             "omega": str, "gamma": str, "out": str, "b_sign": str}
    for key, val in cfg.items():
        if not hasattr(args, key):
            continue
        if getattr(args, key) is not None:
            continue
        cast = casts.get(key, float)
        try:
            setattr(args, key, cast(val))
        except ValueError:
            parser.error(f"config key {key}: cannot parse {val!r}")


def _params(args: argparse.Namespace, parser: _Parser,
            default_nu_eta: float | None = None) -> Params:
    vals = {}
    for name in ("alpha", "beta", "nu", "eta"):
        v = getattr(args, name, None)
        if v is None:
            if name in ("nu", "eta") and default_nu_eta is not None:
                v = default_nu_eta
            else:
                parser.error(f"--{name} is required")
        vals[name] = float(v)
    p = Params(**vals)
    bad = validate(p)
    if bad:
        parser.error("; ".join(bad))
    return p


def _require(args: argparse.Namespace, parser: _Parser, *names: str) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            parser.error(f"--{name.replace('_', '-')} is required")


def _triple(text: str, parser: _Parser, flag: str) -> np.ndarray:
    parts = text.split(",")
    if len(parts) != 3:
        parser.error(f"{flag} expects three comma-separated numbers")
    try:
        return np.array([float(v) for v in parts])
    except ValueError:
        parser.error(f"{flag}: cannot parse {text!r}")


def _span(text: str, parser: _Parser, flag: str) -> tuple[float, float]:
    parts = text.split(":")
    if len(parts) != 2:
        parser.error(f"{flag} expects lo:hi")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        parser.error(f"{flag}: cannot parse {text!r}")


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_g(v) for v in row])


def _json_clean(obj):
    """Recursively replace non-finite floats with None for JSON output."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _json_clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_clean(v) for v in obj]
    return obj


def _emit_json(payload, out: str | None) -> None:
    text = json.dumps(_json_clean(payload), indent=2) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# --- simulate / trajectory ---


def _path_rows(path, kappa: float, p: Params, b_sign: str):
    """CSV rows from an AbsolutePath; E_drift from the reduced energy."""
    e0 = reduced_energy(float(path.theta[0]), float(path.p_theta[0]),
                        kappa, p, b_sign=b_sign)
    for i in range(len(path.t)):
        e = reduced_energy(float(path.theta[i]), float(path.p_theta[i]),
                           kappa, p, b_sign=b_sign)
        yield (path.t[i], path.theta[i], path.p_theta[i], path.psi[i],
               path.phi[i], path.x_c[i], path.y_c[i], path.z_c[i],
               path.x_p[i], path.y_p[i], e - e0, 0.0)


def cmd_simulate(args: argparse.Namespace, parser: _Parser) -> int:
    p = _params(args, parser)
    _require(args, parser, "tmax")
    reduced_style = args.theta0 is not None or args.kappa is not None
    full_style = args.omega is not None or args.gamma is not None
    if reduced_style == full_style:
        parser.error("give either --kappa/--theta0 or --omega/--gamma")
    n = int(args.samples or 2001)
    t_eval = np.linspace(0.0, float(args.tmax), n)
    tols = dict(tol_abs=float(args.tol_abs or 1e-12),
                tol_rel=float(args.tol_rel or 1e-10))
    out = args.out or "simulate.csv"

    try:
        if reduced_style:
            _require(args, parser, "kappa", "theta0")
            kappa = float(args.kappa)
            theta0 = float(args.theta0)
            if args.energy is not None:
                # p_theta0 from the energy level, upward branch
                se = profile(theta0, p, b_sign=args.b_sign, pole_mode=True)
                v = effective_potential(theta0, kappa, p)
                gap = float(args.energy) - v
                if gap < 0.0:
                    parser.error(f"--energy {args.energy} below the potential {v:.6g}")
                p0 = math.sqrt(2.0 * gap / se.B)
            else:
                p0 = float(args.ptheta0 or 0.0)
            path = reconstruct_trajectory((theta0, p0), kappa,
                                          (0.0, float(args.tmax)), p,
                                          b_sign=args.b_sign, t_eval=t_eval, **tols)
            rows = list(_path_rows(path, kappa, p, args.b_sign))
            drifts = (max(abs(r[10]) for r in rows), 0.0)
        else:
            _require(args, parser, "omega", "gamma")
            w = _triple(args.omega, parser, "--omega")
            g = _triple(args.gamma, parser, "--gamma")
            if abs(float(g @ g) - 1.0) > 1e-6:
                parser.error(f"--gamma must be a unit vector, |gamma|^2 = {g @ g:.6g}")
            if abs(float(w @ g)) > 1e-6:
                parser.error(f"--omega must have no vertical spin, omega.gamma = {w @ g:.6g}")
            state = FullState(omega=w, gamma=g)
            path = reconstruct_from_full(state, (0.0, float(args.tmax)), p,
                                         t_eval=t_eval, **tols)
            traj = integrate("full", state.as_array(), (0.0, float(args.tmax)),
                             p, t_eval=t_eval, **tols)
            c0 = integrals(state, p)
            rows = []
            for i in range(len(path.t)):
                ci = integrals(FullState.from_array(traj.y_eval[i]), p)
                rows.append((path.t[i], path.theta[i], path.p_theta[i],
                             path.psi[i], path.phi[i], path.x_c[i], path.y_c[i],
                             path.z_c[i], path.x_p[i], path.y_p[i],
                             ci.eps - c0.eps, ci.F1 - c0.F1))
            drifts = (max(abs(r[10]) for r in rows), max(abs(r[11]) for r in rows))
    except (PoleError, IntegrationError, ValueError) as ex:
        print(f"numerical failure: {ex}", file=sys.stderr)
        return EXIT_NUMERIC

    _write_csv(out, _CSV_HEADER, rows)
    print(f"max |E drift| = {_g(drifts[0])}, max |F1 drift| = {_g(drifts[1])}",
          file=sys.stderr)
    log.info("wrote %s (%d rows)", out, len(rows))
    return EXIT_OK


def cmd_trajectory(args: argparse.Namespace, parser: _Parser) -> int:
    p = _params(args, parser)
    _require(args, parser, "tmax", "kappa", "theta0")
    n = int(args.samples or 2001)
    t_eval = np.linspace(0.0, float(args.tmax), n)
    try:
        path = reconstruct_trajectory(
            (float(args.theta0), float(args.ptheta0 or 0.0)), float(args.kappa),
            (0.0, float(args.tmax)), p,
            psi0=float(args.psi0 or 0.0), phi0=float(args.phi0 or 0.0),
            x0=float(args.x0 or 0.0), y0=float(args.y0 or 0.0),
            b_sign=args.b_sign,
            tol_abs=float(args.tol_abs or 1e-12),
            tol_rel=float(args.tol_rel or 1e-10),
            t_eval=t_eval)
    except (PoleError, IntegrationError, ValueError) as ex:
        print(f"numerical failure: {ex}", file=sys.stderr)
        return EXIT_NUMERIC
    out = args.out or "trajectory.csv"
    _write_csv(out, _CSV_HEADER, _path_rows(path, float(args.kappa), p, args.b_sign))
    log.info("wrote %s", out)
    return EXIT_OK


# --- bifurcation ---


def cmd_bifurcation(args: argparse.Namespace, parser: _Parser) -> int:
    p = _params(args, parser, default_nu_eta=1.0)
    try:
        d = diagram(p)
    except (ValueError, IntegrationError) as ex:
        print(f"numerical failure: {ex}", file=sys.stderr)
        return EXIT_NUMERIC
    payload = {
        "params": {"alpha": p.alpha, "beta": p.beta, "nu": p.nu, "eta": p.eta},
        "diagram_type": d.diagram_type,
        "boundary": d.boundary,
        "two_torus_region": d.two_torus_region,
        "kappa_symmetric": d.kappa_symmetric,
        "cusp": None if d.cusp is None else {
            "theta": d.cusp.theta, "kappa": d.cusp.kappa,
            "eps": d.cusp.eps, "kind": d.cusp.kind},
        "curves": [{
            "label": c.label,
            "samples": [{"theta0": s.theta0, "kappa": s.kappa, "eps": s.eps,
                         "stability": s.stability, "lambda_sq": s.lambda_sq}
                        for s in c.samples]} for c in d.curves],
        "points": [{"label": q.label, "kappa": q.kappa, "eps": q.eps,
                    "isolated": q.isolated, "stable": q.stable}
                   for q in d.points],
        "rpm_boundary": {
            "label": d.rpm_boundary.label,
            "samples": [{"theta0": s.theta0, "kappa": s.kappa, "eps": s.eps,
                         "stability": s.stability, "lambda_sq": s.lambda_sq}
                        for s in d.rpm_boundary.samples]},
    }
    _emit_json(payload, args.out)
    return EXIT_OK


# --- rotation number / resonance / classify ---


def _rn_point(task):
    """Grid worker: one (kappa, eps) rotation number or None."""
    kappa, eps, branch, p, b_sign, tol_abs, tol_rel = task
    if kappa == 0.0:
        n_comp = len(component_intervals(kappa, eps, p))
        if branch >= n_comp:
            return None
        return (kappa, eps, 0.0, 0.0)
    try:
        rn = rotation_number(kappa, eps, p, branch, b_sign=b_sign,
                             tol_abs=tol_abs, tol_rel=tol_rel)
    except (ValueError, RuntimeError):
        return None
    return (kappa, eps, rn.N, rn.err)


def cmd_rotation_number(args: argparse.Namespace, parser: _Parser) -> int:
    p = _params(args, parser)
    if (args.kappa is None) == (args.kappa_range is None):
        parser.error("give exactly one of --kappa or --kappa-range")
    if (args.energy is None) == (args.energy_range is None):
        parser.error("give exactly one of --energy or --energy-range")
    if args.kappa is not None:
        kappas = [float(args.kappa)]
    else:
        lo, hi = _span(args.kappa_range, parser, "--kappa-range")
        kappas = [float(v) for v in np.linspace(lo, hi, int(args.n_kappa or 11))]
    if args.energy is not None:
        energies = [float(args.energy)]
    else:
        lo, hi = _span(args.energy_range, parser, "--energy-range")
        energies = [float(v) for v in np.linspace(lo, hi, int(args.n_energy or 11))]
    branch = int(args.branch or 0)
    tasks = [(k, e, branch, p, args.b_sign,
              float(args.tol_abs or 1e-12), float(args.tol_rel or 1e-10))
             for k in kappas for e in energies]
    jobs = int(args.jobs or 1)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_rn_point, tasks))
    else:
        results = [_rn_point(t) for t in tasks]
    rows = [r for r in results if r is not None]
    out = args.out or "rotation_number.csv"
    _write_csv(out, ["kappa", "eps", "N", "N_err"], rows)
    log.info("wrote %s (%d of %d grid points admissible)", out, len(rows), len(tasks))
    return EXIT_OK


def _res_slice(task):
    """Grid worker: resonance points of one kappa slice."""
    n, kappa, p, eps_max, b_sign, tol_abs, tol_rel = task
    pts = resonance_curve(n, p, (kappa, kappa), n_kappa=1, eps_max=eps_max,
                          b_sign=b_sign, tol_abs=tol_abs, tol_rel=tol_rel)
    return [(q.kappa, q.eps, q.N, q.N_err, q.branch) for q in pts]


def cmd_resonance(args: argparse.Namespace, parser: _Parser) -> int:
    p = _params(args, parser)
    _require(args, parser, "kappa_range")
    orders = [int(v) for v in str(args.n or "0").split(",")]
    lo, hi = _span(args.kappa_range, parser, "--kappa-range")
    kappas = [float(v) for v in np.linspace(lo, hi, int(args.n_kappa or 25))]
    jobs = int(args.jobs or 1)
    base = args.out or "resonance.csv"
    for order in orders:
        tasks = [(order, k, p, args.eps_max, args.b_sign,
                  float(args.tol_abs or 1e-12), float(args.tol_rel or 1e-10))
                 for k in kappas if abs(k) >= 1e-9]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                chunks = list(pool.map(_res_slice, tasks))
        else:
            chunks = [_res_slice(t) for t in tasks]
        rows = [r for ch in chunks for r in ch]
        if len(orders) == 1:
            out = base
        else:
            stem, ext = os.path.splitext(base)
            out = f"{stem}_n{order}{ext or '.csv'}"
        _write_csv(out, ["kappa", "eps", "N", "N_err", "branch"], rows)
        log.info("wrote %s (%d resonance points)", out, len(rows))
    return EXIT_OK


def cmd_classify(args: argparse.Namespace, parser: _Parser) -> int:
    p = _params(args, parser)
    _require(args, parser, "kappa", "energy")
    try:
        tc = classify(float(args.kappa), float(args.energy), p,
                      int(args.branch or 0), b_sign=args.b_sign)
    except (ValueError, RuntimeError) as ex:
        print(f"numerical failure: {ex}", file=sys.stderr)
        return EXIT_NUMERIC
    payload = {
        "params": {"alpha": p.alpha, "beta": p.beta, "nu": p.nu, "eta": p.eta},
        "kappa": float(args.kappa),
        "eps": float(args.energy),
        "branch": int(args.branch or 0),
        "kind": tc.kind,
        "N": tc.N,
        "N_err": tc.N_err,
        "resonance": None if tc.resonance is None else list(tc.resonance),
        "targets": list(tc.targets),
        "near_separatrix": tc.near_separatrix,
    }
    _emit_json(payload, args.out)
    return EXIT_OK


# --- verify ---


def _check(name: str, ok: bool, detail: str, failures: list[str]) -> None:
    tag = "PASS" if ok else "FAIL"
    print(f"{tag} {name}: {detail}")
    if not ok:
        failures.append(name)


def _random_valid_state(rng: np.random.Generator, p: Params) -> FullState:
    g = rng.normal(size=3)
    g /= np.linalg.norm(g)
    w = rng.normal(size=3)
    w -= (w @ g) * g
    return FullState(omega=w, gamma=g)


def cmd_verify(args: argparse.Namespace, parser: _Parser) -> int:
    if args.alpha is None and args.beta is None:
        p = Params(alpha=0.5, beta=3.0,
                   nu=float(args.nu or 0.5), eta=float(args.eta or 0.5))
    else:
        p = _params(args, parser, default_nu_eta=0.5)
    quick = bool(args.quick)
    b_sign = args.b_sign
    rng = np.random.default_rng(int(args.seed or 0))
    failures: list[str] = []
    tols = dict(tol_abs=1e-12, tol_rel=1e-12)

    # conservation of F0, F1, kappa, eps along the full flow
    n_states, t_end = (3, 10.0) if quick else (12, 100.0)
    worst = np.zeros(4)
    for _ in range(n_states):
        s = _random_valid_state(rng, p)
        c0 = integrals(s, p)
        traj = integrate("full", s.as_array(), (0.0, t_end), p, **tols)
        c1 = integrals(FullState.from_array(traj.y[-1]), p)
        worst = np.maximum(worst, [
            abs(c1.F0 - c0.F0), abs(c1.F1 - c0.F1),
            abs(c1.kappa - c0.kappa) / max(abs(c0.kappa), 1e-300),
            abs(c1.eps - c0.eps) / max(abs(c0.eps), 1e-300)])
    _check("conservation", bool(np.all(worst <= [1e-10, 1e-10, 1e-8, 1e-8])),
           f"max |dF0|={worst[0]:.2e} |dF1|={worst[1]:.2e} "
           f"rel |dkappa|={worst[2]:.2e} rel |deps|={worst[3]:.2e}", failures)

    # reduced chart reproduces the full-system theta(t)
    n_orb, t_red = (2, 10.0) if quick else (5, 50.0)
    worst_th = 0.0
    tries = 0
    done = 0
    while done < n_orb and tries < 40:
        tries += 1
        s = _random_valid_state(rng, p)
        g3 = float(s.gamma[2])
        if abs(g3) > 0.98:
            continue
        rc = reduce_state(s, p)
        t_eval = np.linspace(0.0, t_red, 501)
        full = integrate("full", s.as_array(), (0.0, t_red), p,
                         t_eval=t_eval, **tols)
        th_full = np.arccos(np.clip(full.y_eval[:, 5], -1.0, 1.0))
        red = integrate("reduced", (rc.theta, rc.p_theta), (0.0, t_red), p,
                        kappa=rc.kappa, b_sign=b_sign, t_eval=t_eval, **tols)
        worst_th = max(worst_th, float(np.max(np.abs(red.y_eval[:, 0] - th_full))))
        done += 1
    _check("reduction", worst_th <= 1e-6,
           f"max |theta_red - theta_full| = {worst_th:.2e} on {done} orbits", failures)

    # the phase flow preserves the rho-weighted volume
    n_div = 20 if quick else 100
    f = full_field(p)
    h = 1e-5
    worst_div = 0.0
    for _ in range(n_div):
        s = _random_valid_state(rng, p)
        y = s.as_array()
        div = 0.0
        for i in range(6):
            yp = y.copy(); yp[i] += h
            ym = y.copy(); ym[i] -= h
            fp = measure_density(float(yp[5]), p) * f(0.0, yp)[i]
            fm = measure_density(float(ym[5]), p) * f(0.0, ym)[i]
            div += (fp - fm) / (2.0 * h)
        scale = float(np.linalg.norm(measure_density(float(y[5]), p) * f(0.0, y)))
        worst_div = max(worst_div, abs(div) / scale)
    _check("measure", worst_div <= 1e-6,
           f"max relative |div(rho f)| = {worst_div:.2e} over {n_div} states", failures)

    # steady-rotation branch identities and endpoint limits
    e0 = sigma_theta_eps(1e-8, p)
    epi = sigma_theta_eps(math.pi - 1e-8, p)
    k0 = sigma_theta_kappa_sq(1e-8, p)
    kpi = sigma_theta_kappa_sq(math.pi - 1e-8, p)
    lim_ok = (abs(e0 - (1.0 + p.alpha)) <= 1e-6 and abs(k0) <= 1e-6
              and abs(epi - (1.0 - p.alpha)) <= 1e-6 and abs(kpi) <= 1e-6)
    worst_fp = 0.0
    for th0 in (0.3, 0.7, 1.0, 2.2, 2.8):
        try:
            pr = permanent_rotation(th0, p)
        except ValueError:
            continue
        se = profile(th0, p, b_sign=b_sign)
        s, c = math.sin(th0), math.cos(th0)
        res = (pr.kappa ** 2 * c / s ** 3 + p.alpha * s
               + (1.0 - p.beta ** 2) * s * c / se.Z)
        worst_fp = max(worst_fp, abs(res))
    _check("steady-rotations", lim_ok and worst_fp <= 1e-8,
           f"endpoint limits ({e0:.6f}, {epi:.6f}); "
           f"max fixed-point residual = {worst_fp:.2e}", failures)

    # kinetic cross-term sign: reduced energy must reproduce the full energy
    worst_e = 0.0
    for _ in range(3 if quick else 8):
        s = _random_valid_state(rng, p)
        if abs(float(s.gamma[2])) > 0.99:
            continue
        c0 = integrals(s, p)
        rc = reduce_state(s, p)
        e_red = reduced_energy(rc.theta, rc.p_theta, rc.kappa, p, b_sign=b_sign)
        worst_e = max(worst_e, abs(e_red - c0.eps) / max(abs(c0.eps), 1e-300))
    _check("energy-form", worst_e <= 1e-10,
           f"max relative |eps_reduced - eps_full| = {worst_e:.2e} "
           f"(b_sign={b_sign})", failures)

    # circulation threshold: root-found height maximum against the two
    # closed forms (adopted +alpha^2 form; sign-flipped variant rejected)
    a, b = p.alpha, p.beta
    if b * b > 1.0 + a:
        th_star = inclined_equilibrium(p)
        u_star = profile(th_star, p, pole_mode=True).U
        adopted = b * math.sqrt((b * b - 1.0 + a * a) / (b * b - 1.0))
        d_adopted = abs(u_star - adopted)
        variant = None
        d_variant = math.inf
        arg = (1.0 + a * a - b * b) / (1.0 - b * b)
        if arg >= 0.0:
            variant = b * math.sqrt(arg)
            d_variant = abs(u_star - variant)
        ok = d_adopted <= 1e-9 and d_variant > 1e-3
        detail = (f"U(theta*)={u_star:.9f}; adopted form off by {d_adopted:.2e}; "
                  f"sign-flipped variant off by {d_variant:.2e}")
    else:
        ok = abs(epsilon_min(p) - (1.0 + a)) <= 1e-12
        detail = f"pole regime, eps_min={epsilon_min(p):.9f}"
    _check("threshold-form", ok, detail, failures)

    if not quick:
        # absolute-space reconstruction against direct kinematics
        th0, pt0, kap = 0.9, 0.3, 0.7
        state = lift(ReducedState(theta=th0, p_theta=pt0), kap, 0.0, p)
        t_eval = np.linspace(0.0, 30.0, 601)
        pa = reconstruct_trajectory((th0, pt0), kap, (0.0, 30.0), p,
                                    b_sign=b_sign, t_eval=t_eval, **tols)
        pb = reconstruct_from_full(state, (0.0, 30.0), p, t_eval=t_eval, **tols)
        worst_p = max(float(np.max(np.abs(pa.x_c - pb.x_c))),
                      float(np.max(np.abs(pa.y_c - pb.y_c))),
                      float(np.max(np.abs(pa.psi - pb.psi))))
        zres = float(np.max(np.abs(
            pa.z_c - (p.alpha * np.cos(pa.theta)
                      + np.array([profile(t, p).Z for t in pa.theta])))))
        _check("reconstruction", worst_p <= 1e-6 and zres <= 1e-9,
               f"max quadrature-vs-kinematic gap = {worst_p:.2e}, "
               f"height identity residual = {zres:.2e}", failures)

    if failures:
        print(f"{len(failures)} check(s) failed: {', '.join(failures)}")
        return EXIT_VERIFY
    print("all checks passed")
    return EXIT_OK


# --- parser wiring ---


def _add_common(sp: _Parser, *, params: bool = True) -> None:
    if params:
        sp.add_argument("--alpha", type=float, help="axis offset ratio a/b3 in [0, 1]")
        sp.add_argument("--beta", type=float, help="equatorial axis ratio b1/b3 > 0")
        sp.add_argument("--nu", type=float, help="inertia ratio i3/i1 in (0, 2]")
        sp.add_argument("--eta", type=float, help="mass ratio m b3^2/i1 > 0")
    sp.add_argument("--b-sign", choices=[B_SIGN_DERIVED, B_SIGN_PAPER],
                    default=None, help="kinetic cross-term sign variant")
    sp.add_argument("--tol-abs", type=float, default=None)
    sp.add_argument("--tol-rel", type=float, default=None)
    sp.add_argument("--out", type=str, default=None, help="output file path")
    sp.add_argument("--config", type=str, default=None,
                    help="key = value file; flags win over file values")


def build_parser() -> _Parser:
    parser = _Parser(prog="rubberroll",
                     description="Rolling ellipsoid of revolution: reduced dynamics, "
                                 "bifurcation diagrams, and absolute trajectories.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("simulate", help="integrate and write a trajectory CSV")
    _add_common(sp)
    sp.add_argument("--kappa", type=float, help="area-integral constant (reduced style)")
    sp.add_argument("--theta0", type=float, help="initial inclination (reduced style)")
    sp.add_argument("--ptheta0", type=float, help="initial theta rate (default 0)")
    sp.add_argument("--energy", type=float,
                    help="energy level fixing |ptheta0| (alternative to --ptheta0)")
    sp.add_argument("--omega", type=str, help="w1,w2,w3 (full style)")
    sp.add_argument("--gamma", type=str, help="g1,g2,g3 (full style)")
    sp.add_argument("--tmax", type=float, help="integration horizon")
    sp.add_argument("--samples", type=int, help="output rows (default 2001)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("trajectory", help="absolute-space reconstruction CSV")
    _add_common(sp)
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--theta0", type=float)
    sp.add_argument("--ptheta0", type=float)
    sp.add_argument("--psi0", type=float, help="initial proper-rotation angle")
    sp.add_argument("--phi0", type=float, help="initial precession angle")
    sp.add_argument("--x0", type=float, help="initial center-of-mass x")
    sp.add_argument("--y0", type=float, help="initial center-of-mass y")
    sp.add_argument("--tmax", type=float)
    sp.add_argument("--samples", type=int)
    sp.set_defaults(func=cmd_trajectory)

    sp = sub.add_parser("bifurcation", help="labeled (kappa, eps) diagram JSON")
    _add_common(sp)
    sp.set_defaults(func=cmd_bifurcation)

    sp = sub.add_parser("rotation-number", help="N over a (kappa, eps) point or grid")
    _add_common(sp)
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--kappa-range", type=str, help="lo:hi")
    sp.add_argument("--n-kappa", type=int, help="grid size (default 11)")
    sp.add_argument("--energy", type=float)
    sp.add_argument("--energy-range", type=str, help="lo:hi")
    sp.add_argument("--n-energy", type=int, help="grid size (default 11)")
    sp.add_argument("--branch", type=int, help="component index (default 0)")
    sp.add_argument("--jobs", type=int, help="parallel workers (default 1)")
    sp.set_defaults(func=cmd_rotation_number)

    sp = sub.add_parser("resonance", help="N = -n loci over a kappa range")
    _add_common(sp)
    sp.add_argument("--n", type=str, help="resonance orders, comma-separated (default 0)")
    sp.add_argument("--kappa-range", type=str, help="lo:hi")
    sp.add_argument("--n-kappa", type=int, help="grid size (default 25)")
    sp.add_argument("--eps-max", type=float, help="upper energy cut per slice")
    sp.add_argument("--jobs", type=int)
    sp.set_defaults(func=cmd_resonance)

    sp = sub.add_parser("classify", help="trajectory class of one (kappa, eps) point")
    _add_common(sp)
    sp.add_argument("--kappa", type=float)
    sp.add_argument("--energy", type=float)
    sp.add_argument("--branch", type=int)
    sp.set_defaults(func=cmd_classify)

    sp = sub.add_parser("verify", help="self-check suite; exit 3 on failure")
    _add_common(sp)
    sp.add_argument("--quick", action="store_true", help="sub-second subset")
    sp.add_argument("--seed", type=int, help="random-state seed (default 0)")
    sp.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=getattr(logging, os.environ.get("RUBBERROLL_LOG", "WARNING").upper(),
                      logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        sub = parser
        _merge_config(args, sub)
        if getattr(args, "b_sign", None) is None:
            args.b_sign = B_SIGN_DERIVED
        return args.func(args, sub)
    except SystemExit as ex:
        return int(ex.code or 0)


if __name__ == "__main__":
    sys.exit(main())
