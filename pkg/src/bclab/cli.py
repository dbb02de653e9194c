"""Command-line front end.

Subcommands: ``thin``, ``simulate-bc``, ``schedule``, ``simulate-smallmax``.
Options may also come from a JSON file given with ``--config``; flags win.
Every output starts with a header naming the version and the resolved
configuration (``#`` lines for CSV, top-level keys for JSON).
"""

import argparse
import csv
import io
import json
import logging
import math
import sys

import numpy as np

from . import __version__, bcsim, smallmax, thinning
from . import scenarios as sc

log = logging.getLogger("bclab")

DEFAULTS = {
    "seed": 0,
    "trials": 1000,
    "workers": 1,
    "horizon": 1000,
    "theta": 0.5,
    "n_min": 16,
    "n_max": 200,
    "out": "-",
    "format": "csv",
    "couple": False,
    "checkpoints": [],
}


class UsageError(Exception):
    pass


def fmt(x):
    """17 significant digits, '.' decimal; integers stay integers."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _header_lines(command, config):
    return [
        f"# bclab {__version__}",
        f"# command: {command}",
        "# config: " + json.dumps(config, sort_keys=True, separators=(",", ":")),
    ]


def _emit(path, text):
    if path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_csv(path, command, config, columns, rows):
    buf = io.StringIO()
    buf.write("\n".join(_header_lines(command, config)) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    _emit(path, buf.getvalue())


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, command, config, data):
    doc = {"bclab_version": __version__, "command": command, "config": config, "data": data}
    _emit(path, json.dumps(_clean(doc), indent=1, sort_keys=True) + "\n")


# ------------------------------------------------------------------ thin


def read_thinning_csv(path):
    """Read columns ``p`` and ``a``; errors cite 1-based file line numbers."""
    fh = sys.stdin if path == "-" else open(path, newline="")
    try:
        lines = [
            (i, line) for i, line in enumerate(fh, start=1)
            if line.strip() and not line.lstrip().startswith("#")
        ]
    finally:
        if fh is not sys.stdin:
            fh.close()
    if not lines:
        return np.zeros(0), np.zeros(0)
    reader = csv.reader([line for _, line in lines])
    header = [h.strip() for h in next(reader)]
    try:
        ip, ia = header.index("p"), header.index("a")
    except ValueError:
        raise UsageError(f"line {lines[0][0]}: header must name columns 'p' and 'a', got {header}")
    p, a = [], []
    for (lineno, _), row in zip(lines[1:], reader):
        try:
            pv, av = float(row[ip]), float(row[ia])
        except (IndexError, ValueError):
            raise UsageError(f"line {lineno}: cannot parse p/a from {row}") from None
        if not 0.0 <= pv <= 1.0:
            raise UsageError(f"line {lineno}: p={pv!r} outside [0, 1]")
        if not av >= 0.0:
            raise UsageError(f"line {lineno}: a={av!r} is negative")
        p.append(pv)
        a.append(av)
    return np.array(p), np.array(a)


def cmd_thin(cfg):
    p, a = read_thinning_csv(cfg["input"])
    plan = thinning.build_plan(p, a)
    bound = plan.weighted_sum()
    log.info("thinned %d weights; sum p'a' = %s (bound 2)", len(plan), fmt(bound))
    cols = ["n", "p", "a", "level_k", "a_prime", "p_prime", "q"]
    levels = [int(k) if math.isfinite(k) else math.inf for k in plan.levels.tolist()]
    rows = zip(
        range(1, len(plan) + 1), plan.p.tolist(), plan.a.tolist(), levels,
        plan.a_prime.tolist(), plan.p_thinned.tolist(), plan.q.tolist(),
    )
    config = {"input": cfg["input"], "weighted_sum": bound}
    write_csv(cfg["out"], "thin", config, cols, rows)
    return 0


# ----------------------------------------------------------- simulate-bc


def _scenario(cfg):
    spec = cfg.get("scenario")
    if spec is None:
        raise UsageError("simulate-bc needs a scenario (--scenario FILE or 'scenario' in --config)")
    if isinstance(spec, str):
        try:
            with open(spec) as fh:
                spec = json.load(fh)
        except OSError as err:
            raise UsageError(f"cannot read scenario file: {err}") from None
        except json.JSONDecodeError as err:
            raise UsageError(f"scenario file is not valid JSON: {err}") from None
        if isinstance(spec, dict) and "scenario" in spec and "variant" not in spec:
            spec = spec["scenario"]
    return sc.scenario_from_dict(spec)


def cmd_simulate_bc(cfg):
    scenario = _scenario(cfg)
    tc = bcsim.TrialConfig(
        horizon=int(cfg["horizon"]), trials=int(cfg["trials"]), seed=int(cfg["seed"]),
        workers=int(cfg["workers"]), checkpoints=tuple(int(h) for h in cfg["checkpoints"]),
    )
    if cfg["couple"]:
        N = tc.horizon
        p = sc.margin_values(scenario.p, 1, N + 1)
        e = sc.contamination_margin(scenario, 1, N + 1)
        plan = thinning.build_plan(p, e)
        log.info("coupling with thinning plan; sum p'a' = %s", fmt(plan.weighted_sum()))
        summary = bcsim.run_with_coupling(scenario, plan, tc)
    else:
        summary = bcsim.run(scenario, tc)
    config = {
        "scenario": sc.scenario_to_dict(scenario), "horizon": tc.horizon,
        "trials": tc.trials, "seed": tc.seed, "couple": bool(cfg["couple"]),
        "checkpoints": [int(h) for h in summary.horizons], "workers": tc.workers,
        "index_grid": "dense" if summary.grid.size == tc.horizon else
        f"n<=1000 then round(1.01^j), horizon > {bcsim.DENSE_LIMIT}",
    }
    if cfg["format"] == "json":
        write_json(cfg["out"], "simulate-bc", config, summary.to_dict())
    else:
        cols, rows = summary.table()
        write_csv(cfg["out"], "simulate-bc", config, cols, rows)
    log.info("mean B count %s (analytic %s)", fmt(summary.mean_count("B")),
             fmt(summary.analytic["sum_pB"]))
    return 0


# -------------------------------------------------------------- schedule


def _params(cfg):
    return smallmax.DistParams(theta=float(cfg["theta"]))


def cmd_schedule(cfg):
    params = _params(cfg)
    sched = smallmax.schedule(params, int(cfg["n_min"]), int(cfg["n_max"]))
    cols = list(smallmax.COLUMNS) + ["x_n"]
    x = [math.exp(t) if abs(t) < 700 else math.nan for t in sched.t_prime_n.tolist()]
    rows = (
        tuple(getattr(r, c) for c in smallmax.COLUMNS) + (xv,)
        for r, xv in zip(sched.rows(), x)
    )
    config = {"theta": params.theta, "n_min": int(cfg["n_min"]), "n_max": int(cfg["n_max"])}
    if cfg["format"] == "json":
        data = [dict(zip(cols, row)) for row in rows]
        write_json(cfg["out"], "schedule", config, data)
    else:
        write_csv(cfg["out"], "schedule", config, cols, rows)
    return 0


# ----------------------------------------------------- simulate-smallmax


def cmd_simulate_smallmax(cfg):
    params = _params(cfg)
    summary = smallmax.simulate(
        params, int(cfg["n_min"]), int(cfg["n_max"]), int(cfg["trials"]),
        seed=int(cfg["seed"]), workers=int(cfg["workers"]),
    )
    config = {
        "theta": params.theta, "n_min": int(cfg["n_min"]), "n_max": int(cfg["n_max"]),
        "trials": int(cfg["trials"]), "seed": int(cfg["seed"]), "workers": int(cfg["workers"]),
    }
    cols, rows = summary.table()
    stats = summary.to_dict()
    if cfg["format"] == "json":
        data = {"summary": stats, "checkpoints": [dict(zip(cols, r)) for r in rows]}
        write_json(cfg["out"], "simulate-smallmax", config, data)
    else:
        write_csv(cfg["out"], "simulate-smallmax", config, cols, rows)
    law = stats["inverse_e_law"]
    log.info("e^-1 law: max |freq - 0.36788| over n >= 30 is %s (4 sigma band %s)",
             law["max_abs_deviation_n_ge_30"], fmt(law["band_4sigma"]))
    return 0


COMMANDS = {
    "thin": cmd_thin,
    "simulate-bc": cmd_simulate_bc,
    "schedule": cmd_schedule,
    "simulate-smallmax": cmd_simulate_smallmax,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file of option values; flags override it")
    common.add_argument("--out", help="output path, '-' for stdout (default)")
    common.add_argument("--format", choices=("csv", "json"))
    common.add_argument("-v", "--verbose", action="store_true")

    sim = argparse.ArgumentParser(add_help=False)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--trials", type=int)
    sim.add_argument("--workers", type=int)

    dist = argparse.ArgumentParser(add_help=False)
    dist.add_argument("--theta", type=float)
    dist.add_argument("--n-min", dest="n_min", type=int)
    dist.add_argument("--n-max", dest="n_max", type=int)

    parser = argparse.ArgumentParser(prog="bclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thin", parents=[common], help="dyadic thinning of a (p, a) CSV")
    p.add_argument("input", nargs="?", help="CSV with columns p and a ('-' for stdin)")

    p = sub.add_parser("simulate-bc", parents=[common, sim],
                       help="Monte Carlo of a contaminated event scenario")
    p.add_argument("--scenario", help="scenario JSON file")
    p.add_argument("--horizon", type=int)
    p.add_argument("--couple", action="store_true", default=None,
                   help="thin with the scenario's own (p_n, e_n) and report primed events")
    p.add_argument("--checkpoints", type=int, nargs="*",
                   help="extra horizons for per-trial cumulative counts")

    sub.add_parser("schedule", parents=[common, dist], help="checkpoint table for the small-maxima df")
    sub.add_parser("simulate-smallmax", parents=[common, sim, dist],
                   help="partial-maxima Monte Carlo at the checkpoints")
    return parser


def resolve(args):
    """Merge built-in defaults, the --config file and explicit flags."""
    cfg = dict(DEFAULTS)
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as err:
            raise UsageError(f"cannot load config {args.config}: {err}") from None
        if not isinstance(loaded, dict):
            raise UsageError("config file must hold a JSON object")
        cfg.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for k, v in vars(args).items():
        if v is not None and k not in ("config", "command", "verbose"):
            cfg[k] = v
    if args.command == "thin" and not cfg.get("input"):
        raise UsageError("thin needs an input CSV")
    for key in ("trials", "workers"):
        if int(cfg[key]) < 1:
            raise UsageError(f"--{key} must be >= 1")
    if args.command == "simulate-bc" and int(cfg["horizon"]) < 1:
        raise UsageError("--horizon must be >= 1")
    if not 0 <= int(cfg["seed"]) < 2**64:
        raise UsageError("--seed must fit in 64 bits")
    if not 0.0 < float(cfg["theta"]) < 1.0:
        raise UsageError("--theta must lie in (0, 1)")
    if args.command in ("schedule", "simulate-smallmax"):
        least = smallmax.minimal_n_min(smallmax.DistParams(theta=float(cfg["theta"])))
        if int(cfg["n_min"]) < least:
            raise UsageError(f"--n-min {cfg['n_min']} is too small; minimal admissible value is {least}")
        if int(cfg["n_max"]) < int(cfg["n_min"]):
            raise UsageError("--n-max must be >= --n-min")
    return cfg


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = resolve(args)
        if args.command == "simulate-bc":
            _scenario(cfg)  # validate before any computation
        return COMMANDS[args.command](cfg)
    except UsageError as err:
        print(f"bclab {args.command}: {err}", file=sys.stderr)
        return 2
    except sc.ScenarioError as err:
        print(f"bclab {args.command}: invalid scenario: {err}", file=sys.stderr)
        return 2
    except (ValueError, bcsim.SimulationError) as err:
        print(f"bclab {args.command}: {err}", file=sys.stderr)
        return 1
