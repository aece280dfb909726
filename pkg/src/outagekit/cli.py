"""Batch command line front-end.

Subcommands read JSON model/protocol descriptors, run the library, and emit
CSV/JSON artifacts plus a PNG figure per delimited output. Every run writes
a manifest recording the resolved configuration, seed, output hashes and
duration; re-running the same command reproduces the output files
byte-for-byte.

Exit status: 0 success, 2 usage or parse error, 3 domain error (energy
budget below the minimum, infeasible shaping, insufficient data).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from .errors import (
    BelowMinimumEnergyError,
    DescriptorError,
    NoClosedFormError,
    OutagekitError,
    TiltingUnavailableError,
)
from .exponent import (
    PER_BIT_DB_SHIFT,
    eta_to_db,
    exponent_closed_form,
    exponent_curve,
    exponent_numeric,
    min_energy_per_nat,
)
from .feedback import (
    ProtocolParams,
    conjecture_scan,
    general_exponent,
    min_energy_per_nat as protocol_min_energy,
    onoff_envelope,
    onoff_exponent,
)
from .mimo import shape_covariance
from .models import encode_complex_matrix, model_from_descriptor, parse_complex_matrix
from .montecarlo import (
    OutageEstimate,
    estimate_outage,
    estimate_protocol_outage,
    fit_exponent,
    linearized_outage_oracle,
)
from . import report


def _fmt(value) -> str:
    """CSV cell formatting: shortest round-trip float repr, empty for None."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _atomic_write_text(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)
    os.replace(tmp, path)


def _write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(cell) for cell in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _write_json(path: str, obj) -> None:
    _atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(
    primary_out: str,
    command: str,
    config: dict,
    seed: Optional[int],
    outputs: Sequence[str],
    started: float,
    argv: Optional[Sequence[str]] = None,
) -> str:
    manifest = {
        "command": command,
        "argv": list(argv) if argv is not None else None,
        "config": config,
        "seed": seed,
        "version": __version__,
        "outputs": [
            {"path": os.path.abspath(p), "sha256": _sha256(p)} for p in outputs
        ],
        "duration_seconds": time.time() - started,
    }
    path = f"{primary_out}.manifest.json"
    _write_json(path, manifest)
    return path


def _load_json_file(path: str):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise DescriptorError(f"descriptor file not found: {path}")
    except json.JSONDecodeError as exc:
        raise DescriptorError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        )


def _eta_grid(eta_min: float, eta_max: float, points: int, linear: bool) -> np.ndarray:
    if not (eta_min > 0.0 and eta_max > eta_min):
        raise DescriptorError(
            f"need eta_max > eta_min > 0, got [{eta_min}, {eta_max}]"
        )
    if points < 2:
        raise DescriptorError(f"need at least 2 grid points, got {points}")
    if linear:
        return np.linspace(eta_min, eta_max, points)
    return np.geomspace(eta_min, eta_max, points)


def _parse_float_list(text: str, flag: str) -> List[float]:
    try:
        values = [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise DescriptorError(f"{flag} expects a comma-separated float list, got {text!r}")
    if not values:
        raise DescriptorError(f"{flag} list is empty")
    return values


def _parse_int_list(text: str, flag: str) -> List[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise DescriptorError(f"{flag} expects a comma-separated int list, got {text!r}")
    if not values:
        raise DescriptorError(f"{flag} list is empty")
    return values


def _png_path(out_csv: str) -> str:
    stem, _ = os.path.splitext(out_csv)
    return f"{stem}.png"


# -- exponent ---------------------------------------------------------------


def cmd_exponent(args) -> int:
    started = time.time()
    descriptor = _load_json_file(args.model)
    model = model_from_descriptor(descriptor)
    etas = _eta_grid(args.eta_min, args.eta_max, args.points, args.linear_grid)
    curve = exponent_curve(model, etas)
    if not curve.points:
        raise BelowMinimumEnergyError(float(etas[-1]), curve.eta_bar)
    closed: Optional[List[float]] = None
    try:
        closed = [exponent_closed_form(model, p.eta).exponent for p in curve.points]
    except NoClosedFormError:
        closed = None

    header = ["eta", "eta_db", "exponent", "lambda_star"]
    if closed is not None:
        header += ["closed_form", "closed_minus_numeric"]
    if args.per_bit:
        header.append("eta_db_per_bit")
    rows = []
    fig_rows = []
    for i, p in enumerate(curve.points):
        db = float(eta_to_db(p.eta))
        row = [p.eta, db, p.exponent, p.lambda_star]
        fig_row = {"eta_db": db, "exponent": p.exponent, "closed_form": None}
        if closed is not None:
            row += [closed[i], closed[i] - p.exponent]
            fig_row["closed_form"] = closed[i]
        if args.per_bit:
            row.append(db + PER_BIT_DB_SHIFT)
        rows.append(row)
        fig_rows.append(fig_row)
    _write_csv(args.out, header, rows)
    outputs = [args.out]
    if not args.no_plot:
        png = _png_path(args.out)
        report.exponent_figure(fig_rows, model.kind, png)
        outputs.append(png)
    config = {
        "model": descriptor,
        "eta_min": args.eta_min,
        "eta_max": args.eta_max,
        "points": args.points,
        "linear_grid": args.linear_grid,
        "per_bit": args.per_bit,
        "out": os.path.abspath(args.out),
    }
    _write_manifest(args.out, "exponent", config, None, outputs, started, args.argv_used)
    if args.verbose:
        print(f"eta_bar = {curve.eta_bar!r}; dropped {len(curve.dropped)} grid points below it")
    print(f"wrote {args.out} ({len(rows)} rows)")
    return 0


# -- feedback ---------------------------------------------------------------


def cmd_feedback(args) -> int:
    started = time.time()
    taus = _parse_float_list(args.tau, "--tau")
    g0s = _parse_float_list(args.g0, "--g0")
    etas = _eta_grid(args.eta_min, args.eta_max, args.points, args.linear_grid)

    header = ["eta", "eta_db", "exponent", "regime", "x_star", "tau", "g0"]
    if args.per_bit:
        header.append("eta_db_per_bit")
    rows = []
    curves = []
    for tau in taus:
        for g0 in g0s:
            params = ProtocolParams(tau=tau, g0=g0)
            eta_bar = protocol_min_energy(params)
            fig_rows = []
            for eta in etas:
                if eta < eta_bar - 1e-12:
                    continue
                point = (
                    onoff_exponent(tau, float(eta))
                    if g0 == 0.0
                    else general_exponent(params, float(eta))
                )
                db = float(eta_to_db(eta))
                row = [point.eta, db, point.exponent, point.regime, point.x_star, tau, g0]
                if args.per_bit:
                    row.append(db + PER_BIT_DB_SHIFT)
                rows.append(row)
                fig_rows.append({"eta_db": db, "exponent": point.exponent})
            curves.append(((tau, g0), fig_rows))
    if not rows:
        raise BelowMinimumEnergyError(
            float(etas[-1]), min(protocol_min_energy(ProtocolParams(t, g)) for t in taus for g in g0s)
        )
    _write_csv(args.out, header, rows)
    outputs = [args.out]

    stem, _ = os.path.splitext(args.out)
    env_path = f"{stem}_envelope.csv"
    env_rows = []
    env_fig = []
    for eta in etas:
        e = onoff_envelope(float(eta))
        db = float(eta_to_db(eta))
        env_rows.append([e.eta, db, e.tau_opt, e.exponent])
        env_fig.append({"eta_db": db, "exponent": e.exponent})
    _write_csv(env_path, ["eta", "eta_db", "tau_opt", "exponent"], env_rows)
    outputs.append(env_path)

    if args.conjecture is not None:
        eta_c = args.conjecture
        tau_grid = sorted(set(round(0.1 * k, 10) for k in range(1, 31)) | {1.0 / eta_c})
        g0_grid = [round(0.1 * k, 10) for k in range(10)]
        scan = conjecture_scan(eta_c, tau_grid, g0_grid)
        scan_path = f"{stem}_conjecture.json"
        _write_json(
            scan_path,
            {
                "eta": scan.eta,
                "tau_expected": scan.tau_expected,
                "supported": scan.supported,
                "best": None
                if scan.best is None
                else {
                    "tau": scan.best.tau,
                    "g0": scan.best.g0,
                    "exponent": scan.best.exponent,
                },
                "entries": [
                    {
                        "tau": e.tau,
                        "g0": e.g0,
                        "exponent": e.exponent,
                        "feasible": e.feasible,
                    }
                    for e in scan.entries
                ],
            },
        )
        outputs.append(scan_path)
        print(f"conjecture at eta={eta_c:g}: supported={scan.supported}")

    if not args.no_plot:
        png = _png_path(args.out)
        report.feedback_figure(curves, env_fig, png)
        outputs.append(png)
    config = {
        "tau": taus,
        "g0": g0s,
        "eta_min": args.eta_min,
        "eta_max": args.eta_max,
        "points": args.points,
        "linear_grid": args.linear_grid,
        "per_bit": args.per_bit,
        "conjecture": args.conjecture,
        "out": os.path.abspath(args.out),
    }
    _write_manifest(args.out, "feedback", config, None, outputs, started, args.argv_used)
    print(f"wrote {args.out} ({len(rows)} rows) and {env_path}")
    return 0


# -- simulate ---------------------------------------------------------------

_MODE_ALIASES = {"linearized": "linearized", "exact": "exact", "exactrate": "exact"}


def _resolve_sim_config(args) -> dict:
    cfg = _load_json_file(args.config) if args.config else {}
    if not isinstance(cfg, dict):
        raise DescriptorError("simulation config must be a JSON object")
    if args.model is not None and (args.tau is not None or args.g0 is not None):
        raise DescriptorError("give either --model or --tau/--g0, not both")
    if args.model is not None:
        cfg["model"] = _load_json_file(args.model)
        cfg.pop("protocol", None)
    if args.tau is not None or args.g0 is not None:
        if args.tau is None or args.g0 is None:
            raise DescriptorError("protocol runs need both --tau and --g0")
        cfg["protocol"] = {"tau": float(args.tau), "g0": float(args.g0)}
        cfg.pop("model", None)
    for flag, key in [
        ("eta", "eta"),
        ("rho", "rho"),
        ("mode", "mode"),
        ("sampler", "sampler"),
        ("trials", "trials"),
        ("seed", "seed"),
    ]:
        value = getattr(args, flag)
        if value is not None:
            cfg[key] = value
    if args.k_grid is not None:
        cfg["k_grid"] = _parse_int_list(args.k_grid, "--k-grid")

    if ("model" in cfg) == ("protocol" in cfg):
        raise DescriptorError("config needs exactly one of 'model' or 'protocol'")
    if "eta" not in cfg:
        raise DescriptorError("config field 'eta' is required")
    if "k_grid" not in cfg or not cfg["k_grid"]:
        raise DescriptorError("config field 'k_grid' must be a non-empty int list")
    kg = [int(k) for k in cfg["k_grid"]]
    if any(k < 1 for k in kg) or sorted(set(kg)) != kg:
        raise DescriptorError("k_grid must be strictly increasing positive ints")
    cfg["k_grid"] = kg
    cfg["eta"] = float(cfg["eta"])
    cfg["rho"] = float(cfg.get("rho", 1.0))
    mode = str(cfg.get("mode", "linearized")).lower()
    if mode not in _MODE_ALIASES:
        raise DescriptorError(f"mode must be 'linearized' or 'exact', got {cfg.get('mode')!r}")
    cfg["mode"] = _MODE_ALIASES[mode]
    sampler = str(cfg.get("sampler", "plain")).lower()
    if sampler not in ("plain", "tilted"):
        raise DescriptorError(f"sampler must be 'plain' or 'tilted', got {cfg.get('sampler')!r}")
    cfg["sampler"] = sampler
    cfg["trials"] = int(cfg.get("trials", 10000))
    if cfg["trials"] < 1:
        raise DescriptorError("trials must be positive")
    cfg["seed"] = int(cfg.get("seed", 0))
    return cfg


def _oracle_slope(model, cfg, estimates) -> Optional[float]:
    """Fit on exact Gamma-CDF outage values with the run's weighting."""
    if cfg["mode"] != "linearized":
        return None
    try:
        pseudo = []
        for est in estimates:
            p = linearized_outage_oracle(model, cfg["eta"], est.n_channels)
            if not (p > 0.0) or not (est.std_err > 0.0):
                continue
            pseudo.append(
                OutageEstimate(
                    n_channels=est.n_channels,
                    trials=est.trials,
                    outage_prob=p,
                    std_err=est.std_err,
                    log_prob=math.log(p),
                    n_effective=est.n_effective,
                    flagged=False,
                    sampler="oracle",
                    mode="linearized",
                )
            )
        return fit_exponent(pseudo).slope
    except OutagekitError:
        return None


def cmd_simulate(args) -> int:
    started = time.time()
    cfg = _resolve_sim_config(args)
    model = None
    params = None
    if "model" in cfg:
        model = model_from_descriptor(cfg["model"])
    else:
        proto = cfg["protocol"]
        if not isinstance(proto, dict) or "tau" not in proto:
            raise DescriptorError("protocol descriptor needs fields tau and g0")
        params = ProtocolParams(tau=float(proto["tau"]), g0=float(proto.get("g0", 0.0)))
        if cfg["sampler"] == "tilted":
            raise TiltingUnavailableError("feedback protocol")

    estimates = []
    for K in cfg["k_grid"]:
        if model is not None:
            est = estimate_outage(
                model,
                cfg["eta"],
                K,
                cfg["trials"],
                sampler=cfg["sampler"],
                mode=cfg["mode"],
                rho=cfg["rho"] if cfg["mode"] == "exact" else None,
                seed=cfg["seed"],
            )
        else:
            est = estimate_protocol_outage(
                params,
                cfg["eta"],
                K,
                cfg["trials"],
                mode=cfg["mode"],
                rho=cfg["rho"] if cfg["mode"] == "exact" else None,
                seed=cfg["seed"],
            )
        estimates.append(est)
        if args.verbose:
            print(
                f"K={K}: outage={est.outage_prob:.6e} se={est.std_err:.2e} "
                f"n_eff={est.n_effective:.0f} flagged={est.flagged}"
            )

    fit = fit_exponent(estimates)

    analytical: Optional[float] = None
    try:
        if model is not None:
            analytical = exponent_numeric(model, cfg["eta"]).exponent
        else:
            analytical = general_exponent(params, cfg["eta"]).exponent
    except BelowMinimumEnergyError:
        analytical = None
    ratio = fit.slope / analytical if analytical else None
    oracle = _oracle_slope(model, cfg, estimates) if model is not None else None

    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "outage.csv")
    rows = [
        [e.n_channels, e.outage_prob, e.std_err, e.log_prob, e.flagged]
        for e in estimates
    ]
    _write_csv(csv_path, ["K", "outage", "std_err", "log_outage", "flagged"], rows)
    summary_path = os.path.join(args.out_dir, "summary.json")
    _write_json(
        summary_path,
        {
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "n_points": fit.n_points,
            "analytical_exponent": analytical,
            "ratio": ratio,
            "oracle_slope": oracle,
        },
    )
    outputs = [csv_path, summary_path]
    if not args.no_plot:
        png = _png_path(csv_path)
        report.outage_figure(
            [{"K": e.n_channels, "outage": e.outage_prob} for e in estimates],
            fit.slope,
            fit.intercept,
            analytical,
            png,
        )
        outputs.append(png)
    _write_manifest(csv_path, "simulate", cfg, cfg["seed"], outputs, started, args.argv_used)
    ratio_text = f"{ratio:.4f}" if ratio is not None else "n/a"
    print(
        f"wrote {csv_path}; slope={fit.slope:.6f} "
        f"analytical={analytical if analytical is not None else 'n/a'} ratio={ratio_text}"
    )
    return 0


# -- shape ------------------------------------------------------------------


def cmd_shape(args) -> int:
    started = time.time()
    descriptor = _load_json_file(args.psi)
    if not isinstance(descriptor, dict) or "psi" not in descriptor:
        raise DescriptorError("shaping descriptor needs fields psi, n_t, n_r")
    try:
        n_t = int(descriptor["n_t"])
        n_r = int(descriptor["n_r"])
    except KeyError as exc:
        raise DescriptorError(f"shaping descriptor missing field {exc.args[0]!r}")
    psi = parse_complex_matrix(descriptor["psi"], "psi")
    result = shape_covariance(
        psi,
        n_t=n_t,
        n_r=n_r,
        eta=args.eta,
        n_starts=args.starts,
        seed=args.seed,
        max_iters=args.max_iters,
    )
    if args.verbose:
        for i, obj in enumerate(result.start_objectives):
            marker = " <- best" if i == result.best_start else ""
            print(f"start {i}: objective={obj!r} iters={result.iterations[i]}{marker}")
    payload = {
        "eta": result.eta,
        "eta_bar": result.eta_bar,
        "exponent": result.exponent,
        "lambda_star": result.lambda_star,
        "mean_rate_derivative": result.mean_rate_derivative,
        "sigma": encode_complex_matrix(result.sigma),
        "best_start": result.best_start,
        "start_objectives": list(result.start_objectives),
        "iterations": list(result.iterations),
        "n_t": n_t,
        "n_r": n_r,
    }
    _write_json(args.out, payload)
    config = {
        "psi": descriptor,
        "eta": args.eta,
        "starts": args.starts,
        "max_iters": args.max_iters,
        "out": os.path.abspath(args.out),
    }
    _write_manifest(args.out, "shape", config, args.seed, [args.out], started, args.argv_used)
    print(f"wrote {args.out}; exponent={result.exponent!r}")
    return 0


# -- parser -----------------------------------------------------------------


def _add_grid_flags(sub, eta_min_default, eta_max_default, points_default):
    sub.add_argument("--eta-min", type=float, default=eta_min_default)
    sub.add_argument("--eta-max", type=float, default=eta_max_default)
    sub.add_argument("--points", type=int, default=points_default)
    sub.add_argument(
        "--linear-grid",
        action="store_true",
        help="linear eta spacing instead of the default logarithmic grid",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="outagekit",
        description="Wideband outage exponent toolkit for parallel fading channels.",
    )
    parser.add_argument("--version", action="version", version=f"outagekit {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)

    p_exp = subs.add_parser("exponent", help="exponent-vs-eta curve for a fading model")
    p_exp.add_argument("--model", required=True, help="JSON model descriptor file")
    _add_grid_flags(p_exp, 1.0, 10.0, 50)
    p_exp.add_argument("--per-bit", action="store_true", help="add dB-per-bit column")
    p_exp.add_argument("--out", required=True, help="output CSV path")
    p_exp.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    p_exp.add_argument("--verbose", action="store_true")
    p_exp.set_defaults(func=cmd_exponent)

    p_fb = subs.add_parser("feedback", help="feedback protocol exponent curves")
    p_fb.add_argument("--tau", default="0.25,0.5,1,2", help="comma list of thresholds")
    p_fb.add_argument("--g0", default="0", help="comma list of below-power fractions")
    _add_grid_flags(p_fb, 0.5, 20.0, 60)
    p_fb.add_argument("--per-bit", action="store_true", help="add dB-per-bit column")
    p_fb.add_argument(
        "--conjecture",
        type=float,
        default=None,
        metavar="ETA",
        help="also run the best-(tau,g0) grid scan at this eta",
    )
    p_fb.add_argument("--out", required=True, help="output CSV path")
    p_fb.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    p_fb.add_argument("--verbose", action="store_true")
    p_fb.set_defaults(func=cmd_feedback)

    p_sim = subs.add_parser("simulate", help="Monte Carlo outage estimation")
    p_sim.add_argument("--config", help="JSON simulation config file")
    p_sim.add_argument("--model", help="JSON model descriptor file (overrides config)")
    p_sim.add_argument("--tau", type=float, help="protocol threshold (with --g0)")
    p_sim.add_argument("--g0", type=float, help="protocol below-power fraction (with --tau)")
    p_sim.add_argument("--eta", type=float, help="energy per nat")
    p_sim.add_argument("--rho", type=float, help="total energy for exact-rate mode")
    p_sim.add_argument("--mode", choices=["linearized", "exact"], help="rate model")
    p_sim.add_argument("--sampler", choices=["plain", "tilted"], help="sampling scheme")
    p_sim.add_argument("--trials", type=int, help="trials per channel count")
    p_sim.add_argument("--k-grid", help="comma list of channel counts")
    p_sim.add_argument("--seed", type=int, help="RNG seed")
    p_sim.add_argument("--out-dir", required=True, help="output directory")
    p_sim.add_argument("--no-plot", action="store_true", help="skip the PNG figure")
    p_sim.add_argument("--verbose", action="store_true")
    p_sim.set_defaults(func=cmd_simulate)

    p_shape = subs.add_parser("shape", help="transmit covariance shaping")
    p_shape.add_argument("--psi", required=True, help="JSON descriptor with psi, n_t, n_r")
    p_shape.add_argument("--eta", type=float, required=True)
    p_shape.add_argument("--starts", type=int, default=16)
    p_shape.add_argument("--max-iters", type=int, default=5000)
    p_shape.add_argument("--seed", type=int, default=0)
    p_shape.add_argument("--out", required=True, help="output JSON path")
    p_shape.add_argument("--verbose", action="store_true")
    p_shape.set_defaults(func=cmd_shape)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.argv_used = list(argv) if argv is not None else list(sys.argv[1:])
    try:
        return args.func(args)
    except DescriptorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OutagekitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
