"""Command-line front end: runs, thresholds, fits, sweeps, graph dumps.

Every data command writes a CSV of per-point statistics plus a JSON manifest
holding the resolved configuration and derived results; re-feeding a manifest
with ``--manifest`` reruns the identical configuration.  Probabilities are
decimals (0.036, never percent).  Exit codes: 0 success, 2 configuration
error, 3 numerical failure (no crossing / too few usable fit points).
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import algebra, experiments
from .dem import WEIGHT_CAP, build_base_graph
from .experiments import FitError, NoCrossingError
from .lattice import build_lattice
from .noise import Model, NoiseParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


class ConfigError(Exception):
    pass


def _parse_model(text: str) -> Model:
    try:
        return Model(text.lower())
    except ValueError:
        raise ConfigError(f"unknown model {text!r}; choose from lt, ec, pauli, loss")


def _parse_int_list(text: str) -> List[int]:
    try:
        values = [int(tok) for tok in text.split(",") if tok]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise ConfigError("expected at least one integer")
    return values


def _parse_grid(text: str) -> List[float]:
    """Grid spec ``min:max:count`` (linear) or ``min:max:count:log``."""
    parts = text.split(":")
    if len(parts) not in (3, 4):
        raise ConfigError(f"grid spec {text!r} must be min:max:count[:log|:lin]")
    try:
        lo, hi = float(parts[0]), float(parts[1])
        count = int(parts[2])
    except ValueError:
        raise ConfigError(f"could not parse grid spec {text!r}")
    scale = parts[3].lower() if len(parts) == 4 else "lin"
    if count < 2:
        raise ConfigError("grid needs at least 2 points")
    if not (0.0 < lo < hi):
        raise ConfigError("grid bounds must satisfy 0 < min < max")
    if scale == "lin":
        grid = np.linspace(lo, hi, count)
    elif scale == "log":
        grid = np.geomspace(lo, hi, count)
    else:
        raise ConfigError(f"unknown grid scale {scale!r}; use log or lin")
    return [float(x) for x in grid]


def _resolve_seed(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("RHG_SIM_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"RHG_SIM_SEED must be an integer, got {env!r}")
    return 0


def _default_re(model: Model) -> float:
    return 0.0 if model is Model.PAULI else 1.0


def _resolve_rates(args, model: Model) -> Tuple[float, float]:
    """Exactly one of (p_e and/or p_p) or (p with optional r_e)."""
    direct = args.pe is not None or args.pp is not None
    total = args.p is not None
    if direct and total:
        raise ConfigError("give either --pe/--pp or --p (optionally with --re), not both")
    if args.re is not None and not total:
        raise ConfigError("--re only applies together with --p")
    if total:
        r_e = args.re if args.re is not None else _default_re(model)
        if not 0.0 <= r_e <= 1.0:
            raise ConfigError("--re must lie in [0, 1]")
        return args.p * r_e, args.p * (1.0 - r_e)
    if direct:
        return args.pe or 0.0, args.pp or 0.0
    raise ConfigError("no error rates given; use --pe/--pp or --p [--re]")


def _resolve_grid_axis(args, model: Model) -> Tuple[List[float], float]:
    """Map the one grid flag given to (total-rate grid, erasure fraction)."""
    given = [
        name for name, val in
        (("--pe-grid", args.pe_grid), ("--pp-grid", args.pp_grid), ("--p-grid", args.p_grid))
        if val is not None
    ]
    if len(given) != 1:
        raise ConfigError("give exactly one of --pe-grid, --pp-grid, --p-grid")
    if args.re is not None and args.p_grid is None:
        raise ConfigError("--re only applies together with --p-grid")
    if args.pe_grid is not None:
        return _parse_grid(args.pe_grid), 1.0
    if args.pp_grid is not None:
        return _parse_grid(args.pp_grid), 0.0
    r_e = args.re if args.re is not None else _default_re(model)
    if not 0.0 <= r_e <= 1.0:
        raise ConfigError("--re must lie in [0, 1]")
    return _parse_grid(args.p_grid), r_e


def _manifest_path(out: Path) -> Path:
    return out.with_suffix(".json")


def _write_outputs(out, rows, command, config, results, record_timing) -> None:
    out = Path(out)
    experiments.write_csv(out, rows, record_timing=record_timing)
    experiments.write_manifest(_manifest_path(out), command, config, results)


# ---------------------------------------------------------------------------
# command execution from a resolved (JSON-native) config dict


def _exec_shots(config: dict, out: Path) -> List[str]:
    params = NoiseParams(
        p_e=config["p_e"], p_p=config["p_p"], model=Model(config["model"]),
        independent_leak_bits=config.get("independent_leak_bits", False),
    )
    st = experiments.run_batch(
        params, config["d"], config["shots"], config["seed"],
        workers=config["workers"], min_failures=config["min_failures"],
        max_shots=config["max_shots"],
    )
    results = {
        "shots": st.shots, "failures": st.failures,
        "p_l": st.p_l, "stderr": st.stderr,
    }
    _write_outputs(out, [st], "shots", config, results, config["record_timing"])
    return [
        f"{st.model.value} d={st.d} p={st.p:g}: "
        f"p_l={st.p_l:.6g} +- {st.stderr:.3g} ({st.failures}/{st.shots} failures)"
    ]


def _exec_threshold(config: dict, out: Path) -> List[str]:
    est = experiments.estimate_threshold(
        Model(config["model"]), tuple(config["d_pair"]), config["p_grid"],
        config["shots"], config["seed"], r_e=config["r_e"], workers=config["workers"],
    )
    results = {"threshold": experiments.threshold_payload(est)}
    _write_outputs(out, est.rows, "threshold", config, results, config["record_timing"])
    return [
        f"{est.model.value} (d={est.d_small}, d={est.d_large}) crossing: "
        f"p_th={est.p_th:.6g} +- {est.p_th_err:.2g}"
    ]


def _exec_distance_fit(config: dict, out: Path) -> List[str]:
    fit = experiments.fit_distance(
        Model(config["model"]), config["d"], config["p_grid"], config["p_th"],
        config["shots"], config["seed"], r_e=config["r_e"], workers=config["workers"],
        min_point_failures=config["min_point_failures"],
        min_failures=config["min_failures"], max_shots=config["max_shots"],
    )
    results = {"distance_fit": experiments.distance_fit_payload(fit)}
    _write_outputs(out, fit.rows, "distance-fit", config, results, config["record_timing"])
    return [
        f"{fit.model.value} d={fit.d}: slope={fit.slope:.4g} +- {fit.slope_err:.2g} "
        f"({fit.n_used} points below {fit.fit_bound:.4g})"
    ]


def _exec_sweep_re(config: dict, out: Path) -> List[str]:
    estimates = experiments.sweep_re(
        tuple(config["d_pair"]), config["shots"], config["seed"],
        re_grid=config["re_grid"],
        models=[Model(m) for m in config["models"]],
        workers=config["workers"], n_grid=config["n_grid"], span=config["span"],
    )
    rows = [st for est in estimates for st in est.rows]
    results = {"thresholds": [experiments.threshold_payload(e) for e in estimates]}
    _write_outputs(out, rows, "sweep-re", config, results, config["record_timing"])
    return [
        f"{est.model.value} r_e={est.r_e:g}: p_th={est.p_th:.6g} +- {est.p_th_err:.2g}"
        for est in estimates
    ]


def _exec_compare(config: dict, out: Path) -> List[str]:
    cmp_res = experiments.compare_lt_ec(
        config["d_list"], config["p_grid"], config["r_e"], config["shots"],
        config["seed"], workers=config["workers"],
        min_failures=config["min_failures"], max_shots=config["max_shots"],
        min_point_failures=config["min_point_failures"],
    )
    results = {"compare": experiments.compare_payload(cmp_res)}
    _write_outputs(out, cmp_res.rows, "compare", config, results, config["record_timing"])
    lines = []
    for r in cmp_res.ratios:
        eta = "n/a" if math.isnan(r.eta) else f"{r.eta:.3g}"
        flag = " (low confidence)" if r.low_confidence else ""
        lines.append(
            f"d={r.d} p={r.p:g}: p_l_lt={r.p_l_lt:.4g} p_l_ec={r.p_l_ec:.4g} "
            f"eta={eta}{flag}"
        )
    for s in cmp_res.slopes:
        lines.append(
            f"slope {s.model.value} d={s.d}: {s.slope:.4g} +- {s.slope_err:.2g}"
        )
    return lines


def _exec_dump_graph(config: dict, out: Path) -> List[str]:
    params = NoiseParams(
        p_e=config["p_e"], p_p=config["p_p"], model=Model(config["model"]),
        independent_leak_bits=config.get("independent_leak_bits", False),
    )
    graph = build_base_graph(build_lattice(config["d"]), params)
    lines = ["edge,det_a,det_b,logical_mask,prob,weight"]
    for g in range(graph.n_graph_edges):
        lines.append(
            f"{g},{graph.edge_dets[g, 0]},{graph.edge_dets[g, 1]},"
            f"{graph.edge_mask[g]},{experiments.format_float(graph.base_p[g])},"
            f"{experiments.format_float(graph.base_w[g])}"
        )
    Path(out).write_text("\n".join(lines) + "\n")
    results = {
        "n_detectors": graph.n_dets,
        "n_graph_edges": graph.n_graph_edges,
        "weight_cap": WEIGHT_CAP,
        "leak_mix": [float(x) for x in graph.leak_mix],
    }
    experiments.write_manifest(_manifest_path(Path(out)), "dump-graph", config, results)
    return [f"wrote {graph.n_graph_edges} edges over {graph.n_dets} detectors"]


_EXECUTORS = {
    "shots": _exec_shots,
    "threshold": _exec_threshold,
    "distance-fit": _exec_distance_fit,
    "sweep-re": _exec_sweep_re,
    "compare": _exec_compare,
    "dump-graph": _exec_dump_graph,
}


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub, timing: bool = True) -> None:
    sub.add_argument("--seed", type=int, default=None,
                     help="master RNG seed (integer); falls back to RHG_SIM_SEED, then 0")
    sub.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                     help="worker processes (default: available parallelism); "
                          "results are identical for any value")
    sub.add_argument("--out", type=Path, required=True,
                     help="output CSV path; the JSON manifest lands next to it (.json)")
    sub.add_argument("--manifest", type=Path, default=None,
                     help="re-run the exact configuration stored in this manifest "
                          "(other configuration flags are ignored)")
    if timing:
        sub.add_argument("--no-timing", action="store_true",
                         help="write wall_s as 0 for byte-reproducible CSV output")


def _add_rate_flags(sub) -> None:
    sub.add_argument("--pe", type=float, default=None,
                     help="per-gate leak/loss/erasure probability (decimal)")
    sub.add_argument("--pp", type=float, default=None,
                     help="per-gate depolarizing probability (decimal)")
    sub.add_argument("--p", type=float, default=None,
                     help="total per-gate error probability (decimal); split by --re")
    sub.add_argument("--re", type=float, default=None,
                     help="leak fraction of the total rate, in [0,1] "
                          "(default 1, or 0 for the pauli model)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rhgsim",
        description="Monte-Carlo simulator/decoder for a periodic 3D cluster-state "
                    "memory under leakage, loss, erasure, and Pauli noise.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ver = sub.add_parser("verify-algebra",
                           help="print the gate/leak operator identity checks and exit")
    p_ver.add_argument("--pe", type=float, default=0.1,
                       help="leak probability (decimal) at which to evaluate the identities")

    p_shots = sub.add_parser("shots", help="run one Monte-Carlo batch at a single point")
    p_shots.add_argument("--model", required=False, default="lt",
                         help="noise model: lt, ec, pauli, loss")
    p_shots.add_argument("--d", type=int, default=None, help="lattice cells per axis")
    _add_rate_flags(p_shots)
    p_shots.add_argument("--shots", type=int, default=None, help="number of shots")
    p_shots.add_argument("--min-failures", type=int, default=0,
                         help="keep running past --shots until this many failures (0=off)")
    p_shots.add_argument("--max-shots", type=int, default=None,
                         help="hard shot cap for --min-failures mode")
    p_shots.add_argument("--independent-leak-bits", action="store_true",
                         help="reweight leaked interactions with independent-bit marginals")
    _add_common(p_shots)

    p_th = sub.add_parser("threshold", help="estimate a two-size curve crossing")
    p_th.add_argument("--model", default="lt", help="noise model: lt, ec, pauli, loss")
    p_th.add_argument("--d", default=None,
                      help="two lattice sizes, comma separated (e.g. 5,7)")
    p_th.add_argument("--pe-grid", default=None,
                      help="pure leak/loss grid min:max:count[:log|:lin] (decimals)")
    p_th.add_argument("--pp-grid", default=None,
                      help="pure depolarizing grid min:max:count[:log|:lin] (decimals)")
    p_th.add_argument("--p-grid", default=None,
                      help="total-rate grid min:max:count[:log|:lin] (decimals); use with --re")
    p_th.add_argument("--re", type=float, default=None,
                      help="leak fraction in [0,1] for --p-grid")
    p_th.add_argument("--shots", type=int, default=None, help="shots per grid point")
    _add_common(p_th)

    p_fit = sub.add_parser("distance-fit",
                           help="fit the sub-threshold log-log slope at one lattice size")
    p_fit.add_argument("--model", default="lt", help="noise model: lt, ec, pauli, loss")
    p_fit.add_argument("--d", type=int, default=None, help="lattice cells per axis")
    p_fit.add_argument("--pe-grid", default=None,
                       help="pure leak/loss grid min:max:count[:log|:lin] (decimals)")
    p_fit.add_argument("--pp-grid", default=None,
                       help="pure depolarizing grid min:max:count[:log|:lin] (decimals)")
    p_fit.add_argument("--p-grid", default=None,
                       help="total-rate grid min:max:count[:log|:lin] (decimals); use with --re")
    p_fit.add_argument("--re", type=float, default=None,
                       help="leak fraction in [0,1] for --p-grid")
    p_fit.add_argument("--pth", type=float, default=None,
                       help="threshold (decimal) normalizing the fit abscissa; all grid "
                            "points must lie below 10^-0.6 of it")
    p_fit.add_argument("--shots", type=int, default=None, help="shots per grid point")
    p_fit.add_argument("--min-failures", type=int, default=0,
                       help="keep running past --shots until this many failures per point")
    p_fit.add_argument("--max-shots", type=int, default=None,
                       help="hard per-point shot cap for --min-failures mode")
    p_fit.add_argument("--min-point-failures", type=int, default=100,
                       help="points with fewer failures are excluded from the fit")
    _add_common(p_fit)

    p_sw = sub.add_parser("sweep-re",
                          help="threshold versus leak fraction for leak-tracking "
                               "and conversion decoding")
    p_sw.add_argument("--d", default=None, help="two lattice sizes, comma separated")
    p_sw.add_argument("--re-grid", default=None,
                      help="comma-separated leak fractions (default 0.5..1.0 step 0.05 plus 0.98)")
    p_sw.add_argument("--models", default="lt,ec",
                      help="comma-separated models to sweep (default lt,ec)")
    p_sw.add_argument("--shots", type=int, default=None, help="shots per grid point")
    p_sw.add_argument("--n-grid", type=int, default=5,
                      help="rate-grid points per threshold estimate")
    p_sw.add_argument("--span", type=float, default=0.22,
                      help="half-width of the auto-centered rate grid, relative")
    _add_common(p_sw)

    p_cmp = sub.add_parser("compare",
                           help="leak-tracking vs conversion logical rates, ratios, slopes")
    p_cmp.add_argument("--d", default=None, help="lattice sizes, comma separated")
    p_cmp.add_argument("--p-grid", default=None,
                       help="total-rate grid min:max:count[:log|:lin] (decimals)")
    p_cmp.add_argument("--re", type=float, default=None, help="leak fraction in [0,1]")
    p_cmp.add_argument("--shots", type=int, default=None, help="shots per point")
    p_cmp.add_argument("--min-failures", type=int, default=0,
                       help="keep running past --shots until this many failures per point")
    p_cmp.add_argument("--max-shots", type=int, default=None,
                       help="hard per-point shot cap for --min-failures mode")
    p_cmp.add_argument("--min-point-failures", type=int, default=100,
                       help="ratio points with fewer failures are flagged low-confidence")
    _add_common(p_cmp)

    p_dump = sub.add_parser("dump-graph",
                            help="write the prior decoding graph (edges, masks, weights)")
    p_dump.add_argument("--model", default="lt", help="noise model: lt, ec, pauli, loss")
    p_dump.add_argument("--d", type=int, default=None, help="lattice cells per axis")
    _add_rate_flags(p_dump)
    p_dump.add_argument("--independent-leak-bits", action="store_true",
                        help="report independent-bit leak marginals in the manifest")
    _add_common(p_dump, timing=False)

    return parser


def _require(args, name: str):
    value = getattr(args, name.replace("-", "_"))
    if value is None:
        raise ConfigError(f"--{name} is required")
    return value


def _build_config(args) -> dict:
    """Resolve CLI flags into the JSON-native config dict for the executor."""
    cmd = args.command
    seed = _resolve_seed(args.seed)
    record_timing = not getattr(args, "no_timing", False)
    if cmd == "shots":
        model = _parse_model(args.model)
        p_e, p_p = _resolve_rates(args, model)
        return {
            "model": model.value, "d": _require(args, "d"),
            "p_e": p_e, "p_p": p_p,
            "shots": _require(args, "shots"), "seed": seed,
            "workers": args.workers, "min_failures": args.min_failures,
            "max_shots": args.max_shots,
            "independent_leak_bits": args.independent_leak_bits,
            "record_timing": record_timing,
        }
    if cmd == "threshold":
        model = _parse_model(args.model)
        d_pair = _parse_int_list(_require(args, "d"))
        if len(d_pair) != 2:
            raise ConfigError("--d must give exactly two lattice sizes")
        grid, r_e = _resolve_grid_axis(args, model)
        return {
            "model": model.value, "d_pair": d_pair, "p_grid": grid, "r_e": r_e,
            "shots": _require(args, "shots"), "seed": seed,
            "workers": args.workers, "record_timing": record_timing,
        }
    if cmd == "distance-fit":
        model = _parse_model(args.model)
        grid, r_e = _resolve_grid_axis(args, model)
        return {
            "model": model.value, "d": _require(args, "d"),
            "p_grid": grid, "r_e": r_e, "p_th": _require(args, "pth"),
            "shots": _require(args, "shots"), "seed": seed,
            "workers": args.workers, "min_failures": args.min_failures,
            "max_shots": args.max_shots,
            "min_point_failures": args.min_point_failures,
            "record_timing": record_timing,
        }
    if cmd == "sweep-re":
        d_pair = _parse_int_list(_require(args, "d"))
        if len(d_pair) != 2:
            raise ConfigError("--d must give exactly two lattice sizes")
        if args.re_grid is None:
            re_grid = experiments.default_re_grid()
        else:
            try:
                re_grid = [float(tok) for tok in args.re_grid.split(",") if tok]
            except ValueError:
                raise ConfigError(f"bad --re-grid {args.re_grid!r}")
        models = [_parse_model(tok).value for tok in args.models.split(",") if tok]
        if not models:
            raise ConfigError("--models must name at least one model")
        return {
            "d_pair": d_pair, "re_grid": re_grid, "models": models,
            "shots": _require(args, "shots"), "seed": seed,
            "workers": args.workers, "n_grid": args.n_grid, "span": args.span,
            "record_timing": record_timing,
        }
    if cmd == "compare":
        r_e = args.re
        if r_e is None:
            raise ConfigError("--re is required for compare")
        if not 0.0 <= r_e <= 1.0:
            raise ConfigError("--re must lie in [0, 1]")
        return {
            "d_list": _parse_int_list(_require(args, "d")),
            "p_grid": _parse_grid(_require(args, "p-grid")), "r_e": r_e,
            "shots": _require(args, "shots"), "seed": seed,
            "workers": args.workers, "min_failures": args.min_failures,
            "max_shots": args.max_shots,
            "min_point_failures": args.min_point_failures,
            "record_timing": record_timing,
        }
    if cmd == "dump-graph":
        model = _parse_model(args.model)
        p_e, p_p = _resolve_rates(args, model)
        return {
            "model": model.value, "d": _require(args, "d"),
            "p_e": p_e, "p_p": p_p,
            "independent_leak_bits": args.independent_leak_bits,
            "record_timing": record_timing,
        }
    raise ConfigError(f"unknown command {cmd!r}")


def _cmd_verify_algebra(args) -> int:
    try:
        checks = algebra.identity_report(args.pe)
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    width = max(len(name) for name, _, _ in checks)
    ok = True
    for name, passed, dev in checks:
        status = "PASS" if passed else "FAIL"
        print(f"{name:<{width}}  max deviation {dev:9.3e}  {status}")
        ok = ok and passed
    return EXIT_OK if ok else EXIT_NUMERICAL


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify-algebra":
        return _cmd_verify_algebra(args)
    try:
        if args.manifest is not None:
            payload = experiments.read_manifest(args.manifest)
            if payload.get("command") != args.command:
                raise ConfigError(
                    f"manifest was written by {payload.get('command')!r}, "
                    f"not {args.command!r}"
                )
            config = payload["config"]
        else:
            config = _build_config(args)
        summary = _EXECUTORS[args.command](config, args.out)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NoCrossingError, FitError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for line in summary:
        print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
