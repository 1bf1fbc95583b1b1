"""Batch driver: experiment configs in, CSV/snapshot/heatmap files out.

Subcommands: disp, landau, maxwell, glfront, cont, tint, render.  Every run
writes the exact config it used next to its outputs.  Exit codes: 0 success,
1 config validation error, 2 numerical failure (partial outputs are left in
place).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import amplitude as amp
from . import continuation as cont
from . import grid as gridmod
from . import model, timestep
from .amplitude import AmplitudeState
from .model import ModelParams

__all__ = ["main", "ConfigError", "cmd_disp", "cmd_landau", "cmd_maxwell",
           "cmd_glfront", "cmd_cont", "cmd_tint", "cmd_render"]


class ConfigError(ValueError):
    pass


def _require(cfg: dict, key: str, path: str):
    if key not in cfg:
        raise ConfigError(f"missing config key {path}.{key}")
    return cfg[key]


def _model_params(cfg: dict) -> ModelParams:
    m = cfg.get("model", {})
    try:
        return ModelParams(lam=float(m.get("lambda", 3.1)),
                           d=float(m.get("d", 60.0)),
                           sigma=float(m.get("sigma", 0.0)))
    except ValueError as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc


def _domain(cfg: dict) -> gridmod.DomainSpec:
    dom = _require(cfg, "domain", "")
    try:
        return gridmod.build_domain(
            dom.get("l1", 2), dom.get("l2", 2),
            dom.get("nx", 129), dom.get("ny", 97),
            quasi1d=bool(dom.get("quasi1d", False)))
    except ValueError as exc:
        raise ConfigError(f"invalid domain: {exc}") from exc


def _cont_settings(cfg: dict) -> cont.ContSettings:
    c = cfg.get("cont", {})
    try:
        return cont.ContSettings(
            ds0=c.get("ds0", 0.01), dsmin=c.get("dsmin", 1e-7),
            dsmax=c.get("dsmax", 0.05), newton_tol=c.get("newton_tol", 1e-9),
            max_newton=c.get("max_newton", 10), n_eigs=c.get("n_eigs", 16),
            bif_loc_tol=c.get("bif_loc_tol", 1e-4))
    except ValueError as exc:
        raise ConfigError(f"invalid continuation settings: {exc}") from exc


def _outdir(cfg: dict, args) -> Path:
    out = Path(args.out or cfg.get("output", {}).get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_config_copy(cfg: dict, out: Path) -> None:
    (out / "config.used.json").write_text(json.dumps(cfg, indent=1, sort_keys=True))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


# ---------------------------------------------------------------------------
# dispersion
# ---------------------------------------------------------------------------

def cmd_disp(cfg: dict, out: Path, verbose: bool = False) -> None:
    p = _model_params(cfg)
    dcfg = cfg.get("disp", {})
    k_min = float(dcfg.get("k_min", 0.0))
    k_max = float(dcfg.get("k_max", 2.0))
    num = int(dcfg.get("num", 401))
    if num < 2 or k_max <= k_min or k_min < 0:
        raise ConfigError("disp needs k_min >= 0 < k_max and num >= 2")
    rows = []
    for k in np.linspace(k_min, k_max, num):
        r = model.mu_pm(p, float(k))
        rows.append([float(k), r.mu_plus, r.mu_minus, int(r.is_complex)])
    _write_csv(out / "dispersion.csv", ["k", "mu_plus", "mu_minus", "is_complex"], rows)
    lam_c, k_c = model.critical_values(p.d)
    summary = {"lambda_c": lam_c, "k_c": k_c, "lambda": p.lam, "d": p.d,
               "mu_plus_max": max(r[1] for r in rows)}
    (out / "disp_summary.json").write_text(json.dumps(summary, indent=1))
    if verbose:
        print(f"lambda_c={lam_c:.6f} k_c={k_c:.6f}")


# ---------------------------------------------------------------------------
# Landau coefficients
# ---------------------------------------------------------------------------

def cmd_landau(cfg: dict, out: Path, verbose: bool = False) -> None:
    p = _model_params(cfg)
    lcfg = cfg.get("landau", {})
    lam_c, _ = model.critical_values(p.d)
    header = ["lambda", "sigma", "c0", "c1", "c2", "c3", "c4", "c31", "c41"]

    lam_lo = float(lcfg.get("lambda_min", 2.4))
    lam_hi = float(lcfg.get("lambda_max", 3.3))
    num = int(lcfg.get("num", 91))
    if num < 2 or lam_hi <= lam_lo or lam_lo <= 0:
        raise ConfigError("landau sweep needs 0 < lambda_min < lambda_max, num >= 2")
    rows = []
    for lam in np.linspace(lam_lo, lam_hi, num):
        c = amp.landau_coefficients(p.with_lam(float(lam)))
        rows.append([c.lam, c.sigma, c.c0, c.c1, c.c2, c.c3, c.c4, c.c31, c.c41])
    _write_csv(out / "landau_lambda_sweep.csv", header, rows)

    scfg = lcfg.get("sigma_sweep")
    if scfg:
        s_lo, s_hi = float(scfg.get("sigma_min", -0.9)), float(scfg.get("sigma_max", 0.2))
        snum = int(scfg.get("num", 111))
        if snum < 2 or s_hi <= s_lo:
            raise ConfigError("sigma_sweep needs sigma_min < sigma_max, num >= 2")
        rows = []
        for sig in np.linspace(s_lo, s_hi, snum):
            c = amp.landau_coefficients(
                ModelParams(lam=lam_c, d=p.d, sigma=float(sig)))
            cf = np.nan
            if c.c3 + 2 * c.c4 != 0:
                cf = amp.fold_criterion(c)
            rows.append([c.lam, c.sigma, c.c0, c.c1, c.c2, c.c3, c.c4,
                         c.c31, c.c41, cf])
        _write_csv(out / "landau_sigma_sweep.csv", header + ["c_f"], rows)
    if verbose:
        print(f"landau sweep written ({num} points)")


# ---------------------------------------------------------------------------
# Maxwell points and bistability windows
# ---------------------------------------------------------------------------

_MAXWELL_KINDS = ("hot", "cold", "homogeneous", "mixed_hot")


def cmd_maxwell(cfg: dict, out: Path, verbose: bool = False) -> None:
    p = _model_params(cfg)
    mcfg = cfg.get("maxwell", {})
    kinds = mcfg.get("kinds", list(_MAXWELL_KINDS))
    bad = [k for k in kinds if k not in _MAXWELL_KINDS]
    if bad:
        raise ConfigError(f"unknown maxwell kinds {bad}")
    rows = []
    for kind in kinds:
        lam_m = amp.maxwell_point(kind, sigma=p.sigma, d=p.d)
        rows.append([kind, lam_m])
        if verbose:
            print(f"maxwell {kind}: {lam_m:.5f}")
    _write_csv(out / "maxwell_points.csv", ["kind", "lambda_m"], rows)

    # energy curves against lambda near the balances, for landscape plots
    lam_c, _ = model.critical_values(p.d)
    rows = []
    for lam in np.linspace(float(mcfg.get("lambda_min", 2.4)),
                           float(mcfg.get("lambda_max", lam_c + 0.015)),
                           int(mcfg.get("num", 121))):
        c = amp.landau_coefficients(p.with_lam(float(lam)))
        row = [float(lam)]
        for sign in (+1, -1):
            T = amp.stripe_amplitude(c, sign)
            P = amp.hexagon_amplitude(c, sign)
            row.append(amp.potential_energy(c, np.array([T, 0, 0])) if T else np.nan)
            row.append(amp.potential_energy(c, np.array([P, P, P])) if P else np.nan)
        rows.append(row)
    _write_csv(out / "energy_sweep.csv",
               ["lambda", "E_stripe_hot", "E_hex_hot", "E_stripe_cold", "E_hex_cold"],
               rows)

    scfg = mcfg.get("sigma_sweep")
    if scfg:
        sig_vals = np.linspace(float(scfg.get("sigma_min", -0.4)),
                               float(scfg.get("sigma_max", 0.0)),
                               int(scfg.get("num", 21)))
        rows = []
        for sig in sig_vals:
            sig = float(sig)
            row = [sig]
            for kind in kinds:
                try:
                    row.append(amp.maxwell_point(kind, sigma=sig, d=p.d))
                except ArithmeticError:
                    row.append(np.nan)
            # cold bistability window: stripe stability end vs hexagon fold
            win_s = amp.stability_window("stripe-", sigma=sig, d=p.d)
            win_h = amp.stability_window("hexagon-", sigma=sig, d=p.d)
            row.append(win_s[1] if win_s else np.nan)
            row.append(win_h[1] if win_h else np.nan)
            rows.append(row)
        _write_csv(out / "maxwell_sigma_sweep.csv",
                   ["sigma"] + [f"lambda_m_{k}" for k in kinds]
                   + ["cold_stripe_stab_end", "cold_hex_stab_end"], rows)
    if verbose:
        print("maxwell tables written")


# ---------------------------------------------------------------------------
# GL fronts
# ---------------------------------------------------------------------------

def cmd_glfront(cfg: dict, out: Path, verbose: bool = False) -> None:
    p = _model_params(cfg)
    fcfg = cfg.get("glfront", {})
    kind = fcfg.get("kind", "hot")
    variant = fcfg.get("variant", "standard")
    if kind not in ("hot", "cold") or variant not in ("standard", "mixed"):
        raise ConfigError(f"glfront: bad kind={kind!r} or variant={variant!r}")
    _, k_c = model.critical_values(p.d)
    L = float(fcfg.get("L", 12 * np.pi / k_c))
    n = int(fcfg.get("n", 8193))
    if n < 16 or L <= 0:
        raise ConfigError("glfront needs n >= 16 and L > 0")
    lam = fcfg.get("lambda")
    if lam is None:
        if variant == "mixed":
            lam = amp.mixed_front_lambda(sigma=p.sigma, d=p.d)
        else:
            lam = amp.maxwell_point(kind, sigma=p.sigma, d=p.d)
    profile = amp.gl_front_solve(float(lam), kind, L, n, variant=variant,
                                 sigma=p.sigma, d=p.d)
    tot = profile.total_energy()
    rows = zip(profile.x, profile.A1, profile.A2, tot)
    _write_csv(out / "front_profile.csv", ["x", "A1", "A2", "E_total"],
               ([float(a), float(b), float(cc), float(dd)] for a, b, cc, dd in rows))
    summary = {
        "kind": profile.kind, "variant": variant, "lambda_requested": float(lam),
        "lambda_standing": profile.lam, "residual": profile.residual,
        "energy_drift": profile.energy_drift(), "max_slope": profile.max_slope(),
    }
    (out / "front_summary.json").write_text(json.dumps(summary, indent=1))
    if verbose:
        print(f"front at lam={profile.lam:.5f}, residual {profile.residual:.1e}, "
              f"drift {summary['energy_drift']:.1e}")


# ---------------------------------------------------------------------------
# continuation experiments
# ---------------------------------------------------------------------------

def _build_start(start_cfg, p: ModelParams, spec, lap, settings, direction):
    if start_cfg == "homogeneous":
        return cont.start_homogeneous(p, lap, settings, direction)
    if not isinstance(start_cfg, dict):
        raise ConfigError(f"unrecognized start spec {start_cfg!r}")
    if "snapshot" in start_cfg:
        fld, meta = gridmod.load_snapshot(start_cfg["snapshot"])
        if fld.spec != spec:
            raise ConfigError("snapshot grid does not match configured domain")
        p_here = p.with_lam(float(meta.get("lambda", p.lam)))
        return cont.point_from_field(fld, p_here, lap, settings, direction)
    if "pattern" in start_cfg:
        pat = start_cfg["pattern"]
        kind = pat.get("kind", "stripe")
        sign = int(pat.get("sign", 1))
        c = amp.landau_coefficients(p)
        if kind == "stripe":
            a = amp.stripe_amplitude(c, sign)
            state = AmplitudeState(a, 0.0, 0.0)
        elif kind == "hexagon":
            a = amp.hexagon_amplitude(c, sign)
            state = AmplitudeState(a, a, a)
        else:
            raise ConfigError(f"unknown pattern kind {kind!r}")
        if state.A1 is None or not np.isfinite(state.A1):
            raise ConfigError(f"{kind} state does not exist at lambda={p.lam}")
        guess = amp.ansatz_reconstruct(p, state, spec)
        return cont.point_from_field(guess, p, lap, settings, direction)
    if "localized" in start_cfg:
        loc = start_cfg["localized"]
        guess = localized_guess(p, spec, kind=loc.get("kind", "hot"),
                                width=float(loc.get("width", 20.0)),
                                background=loc.get("background", "stripe"))
        return cont.point_from_field(guess, p, lap, settings, direction)
    raise ConfigError(f"unrecognized start spec {start_cfg!r}")


def localized_guess(p: ModelParams, spec, kind: str = "hot", width: float = 20.0,
                    background: str = "stripe") -> gridmod.Field:
    """Patch-of-hexagons amplitude profile: hexagons inside, background outside.

    background "stripe" embeds the hexagon patch in stripes, "homogeneous" in
    the flat state; kind picks the hot or cold states.
    """
    c = amp.landau_coefficients(p)
    sign = +1 if kind == "hot" else -1
    P = amp.hexagon_amplitude(c, sign)
    if P is None:
        raise ConfigError(f"no {kind} hexagon state at lambda={p.lam}")
    if background == "stripe":
        T = amp.stripe_amplitude(c, sign)
        if T is None:
            raise ConfigError(f"no {kind} stripe state at lambda={p.lam}")
    elif background == "homogeneous":
        T = 0.0
    else:
        raise ConfigError(f"unknown background {background!r}")
    xs = spec.xs()
    bump = 0.5 * (np.tanh((xs + 0.5 * spec.lx) / width)
                  - np.tanh((xs - 0.5 * spec.lx) / width))
    a1 = T + (P - T) * bump
    a2 = P * bump
    return amp.ansatz_reconstruct_profile(p, a1, a2, spec)


def cmd_cont(cfg: dict, out: Path, verbose: bool = False, threads: int = 1) -> None:
    experiments = cfg.get("experiments")
    if experiments is None:
        experiments = [cfg.get("experiment", {})]
    if not isinstance(experiments, list) or not experiments:
        raise ConfigError("cont needs an experiment or a list of experiments")

    def one(exp):
        label = exp.get("label", "branch")
        subdir = out / label if len(experiments) > 1 else out
        subdir.mkdir(parents=True, exist_ok=True)
        _run_cont_experiment(cfg, exp, subdir, verbose)
        return label

    if threads > 1 and len(experiments) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, experiments))
    else:
        for exp in experiments:
            one(exp)


def _run_cont_experiment(cfg: dict, exp: dict, out: Path, verbose: bool) -> None:
    p = _model_params(cfg)
    spec = _domain(cfg)
    settings = _cont_settings(cfg)
    lap = gridmod.build_laplacian(spec)
    label = exp.get("label", "branch")
    direction = int(exp.get("direction", -1))
    lam_range = exp.get("lambda_range")
    if not (isinstance(lam_range, (list, tuple)) and len(lam_range) == 2
            and lam_range[0] < lam_range[1]):
        raise ConfigError("experiment needs lambda_range [lo, hi]")
    max_points = int(exp.get("max_points", 150))
    snap_every = int(cfg.get("output", {}).get("snapshot_every", 0))

    start_cfg = exp.get("start", "homogeneous")
    if "lambda" in exp:
        p = p.with_lam(float(exp["lambda"]))
    start = _build_start(start_cfg, p, spec, lap, settings, direction)

    switch = exp.get("switch_at")
    if switch is not None:
        pre = cont.run_branch(start, p, lap, settings, tuple(lam_range),
                              max_points=max_points, label=label + "-carrier",
                              stop_after_events=int(switch.get("event_index", 1)))
        bifs = [e for e in pre.events if e.kind == "bifurcation"]
        idx = int(switch.get("event_index", 1))
        if idx < 1 or idx > len(bifs):
            raise ConfigError(
                f"switch event_index {idx} out of range; located "
                f"{len(bifs)} bifurcation events at "
                f"{[round(e.located_lambda, 5) for e in bifs]}")
        ev = bifs[idx - 1]
        cont.save_branch_csv(pre, out / "carrier_branch.csv")
        cont.save_events_csv(pre, out / "carrier_events.csv")
        pt, kernel = cont.branch_switch(
            ev, p, lap, settings, direction=int(switch.get("direction", 1)),
            perturbation=float(switch.get("perturbation", 0.01)))
        kfield = gridmod.Field.from_stacked(spec, kernel)
        gridmod.save_snapshot(kfield, out / "switch_kernel.snap",
                              lam=ev.located_lambda, sigma=p.sigma,
                              label=f"{label}-kernel")
        start = pt

    branch = cont.run_branch(start, p, lap, settings, tuple(lam_range),
                             max_points=max_points, label=label,
                             keep_kernels=bool(exp.get("keep_kernels", False)),
                             stop_after_events=int(exp.get("stop_after_events", 0)))
    cont.save_branch_csv(branch, out / "branch.csv")
    cont.save_events_csv(branch, out / "events.csv")
    if snap_every > 0:
        for i, pt in enumerate(branch.points):
            if i % snap_every == 0 or i == len(branch.points) - 1:
                gridmod.save_snapshot(pt.state, out / f"point{i:04d}.snap",
                                      lam=pt.lam, sigma=p.sigma,
                                      label=f"{label}-p{i}")
    for j, ev in enumerate(branch.events):
        if ev.state is not None:
            gridmod.save_snapshot(ev.state, out / f"event{j:02d}.snap",
                                  lam=ev.located_lambda, sigma=p.sigma,
                                  label=f"{label}-{ev.kind}{j}")
    if verbose:
        print(f"{label}: {len(branch.points)} points, "
              f"{len(branch.events)} events, {branch.termination}")


# ---------------------------------------------------------------------------
# time integration
# ---------------------------------------------------------------------------

def cmd_tint(cfg: dict, out: Path, verbose: bool = False) -> None:
    p = _model_params(cfg)
    spec = _domain(cfg)
    lap = gridmod.build_laplacian(spec)
    tcfg = cfg.get("tint", {})
    if "snapshot" in tcfg:
        fld, meta = gridmod.load_snapshot(tcfg["snapshot"])
        if fld.spec != spec:
            raise ConfigError("snapshot grid does not match configured domain")
        if "lambda_override" not in tcfg:
            p = p.with_lam(float(meta.get("lambda", p.lam)))
    else:
        g = tcfg.get("guess", {})
        fld = gridmod.make_initial_guess(spec, p.lam, A=float(g.get("A", 0.3)),
                                         B=float(g.get("B", 0.15)),
                                         L=float(g.get("L", 12.0)))
    if "lambda_override" in tcfg:
        p = p.with_lam(float(tcfg["lambda_override"]))
    settings = timestep.TimestepSettings(
        dt=float(tcfg.get("dt", 0.1)),
        max_steps=int(tcfg.get("max_steps", 2000)),
        residual_target=float(tcfg.get("residual_target", 1e-3)))
    snap_every = int(tcfg.get("snapshot_every", 0))
    trace_rows = []
    norm_rows = []
    bottom = slice(0, spec.nx)  # y = -ly row

    def cb(step, field, res):
        if snap_every and step % snap_every == 0:
            gridmod.save_snapshot(field, out / f"t{step:05d}.snap", lam=p.lam,
                                  sigma=p.sigma, label=f"tint-{step}")
            trace_rows.append([step] + [float(x) for x in field.u[bottom]])
        norm_rows.append([step, res, gridmod.lp_norm(field, "u", 2.0),
                          gridmod.lp_norm(field, "u", 8.0)])

    result = timestep.integrate_to_residual(fld, p, lap, settings, callback=cb)
    gridmod.save_snapshot(result.field, out / "final.snap", lam=p.lam,
                          sigma=p.sigma, label="tint-final",
                          extra={"steps": result.steps, "reached": result.reached,
                                 "residual": result.residual})
    _write_csv(out / "norms.csv", ["step", "residual_inf", "L2_u", "L8_u"], norm_rows)
    if trace_rows:
        _write_csv(out / "trace_bottom_u.csv",
                   ["step"] + [f"x{i}" for i in range(spec.nx)], trace_rows)
    if tcfg.get("polish"):
        polished = cont.newton_correct(result.field, p, lap,
                                       float(tcfg.get("polish_tol", 1e-9)), 20)
        gridmod.save_snapshot(polished, out / "polished.snap", lam=p.lam,
                              sigma=p.sigma, label="tint-polished")
    if verbose:
        print(f"tint: {result.steps} steps, reached={result.reached}, "
              f"residual {result.residual:.2e}")


def cmd_render(cfg: dict, out: Path, snapshot: str | None = None,
               verbose: bool = False) -> None:
    path = snapshot or cfg.get("render", {}).get("snapshot")
    if not path:
        raise ConfigError("render needs a snapshot path")
    try:
        fld, meta = gridmod.load_snapshot(path)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"unreadable snapshot {path}: {exc}") from exc
    name = Path(path).stem + ".ppm"
    gridmod.write_ppm(fld, out / name)
    if verbose:
        print(f"wrote {out / name} ({meta.get('label', '')})")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "disp": cmd_disp,
    "landau": cmd_landau,
    "maxwell": cmd_maxwell,
    "glfront": cmd_glfront,
    "cont": cmd_cont,
    "tint": cmd_tint,
    "render": cmd_render,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="patcont",
        description="Turing-pattern continuation and amplitude-equation toolbox")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("snapshot", nargs="?",
                        help="snapshot path (render only)")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)

    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return 1
    try:
        out = _outdir(cfg, args)
        _write_config_copy(cfg, out)
        if args.command == "render":
            cmd_render(cfg, out, snapshot=args.snapshot, verbose=args.verbose)
        elif args.command == "cont":
            cmd_cont(cfg, out, verbose=args.verbose, threads=args.threads)
        else:
            _COMMANDS[args.command](cfg, out, verbose=args.verbose)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (cont.NewtonError, cont.BranchSwitchError, amp.FrontCollapse,
            ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
