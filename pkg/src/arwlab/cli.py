"""Experiment runner: JSON configs in, CSV/JSON out, reproducible seeding.

Every subcommand validates its parameters (unknown keys rejected, with the
offending key path in the error) before any computation, then derives all
randomness from the single master seed so identical invocations produce
byte-identical outputs.  Exit codes: 0 success, 1 validation error, 2
runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from .chain import (
    DrivingSequence,
    run_chain,
    sample_stationary,
    stationary_density,
)
from .configuration import Configuration
from .engine import State, stabilize
from .errors import ArwError, ConfigSchemaError
from .estimators import (
    exit_probability,
    hitting_tail,
    locate_cutoff,
    mixing_sweep,
    write_csv,
)
from .instructions import InstructionSource
from .oracle import (
    check_abelian,
    check_exact_sampling,
    check_least_action,
    check_preemptive_abelian,
    check_preemptive_jump,
    check_street_sweeper,
)
from .topology import build_interval

# schema: key -> (type, required, default); only these keys are accepted
SCHEMAS = {
    "stabilize": {
        "n": (int, False, None),
        "lambda": (float, True, None),
        "seed": (int, False, 0),
        "init": (list, True, None),
        "out": (str, False, None),
    },
    "chain": {
        "n": (int, True, None),
        "lambda": (float, True, None),
        "t": (int, True, None),
        "driving": (str, False, "uniform"),
        "seed": (int, False, 0),
        "out": (str, False, None),
        "include_config": (bool, False, False),
    },
    "sample-stationary": {
        "n": (int, True, None),
        "lambda": (float, True, None),
        "reps": (int, False, 100),
        "seed": (int, False, 0),
        "out": (str, False, None),
    },
    "density": {
        "n": (int, True, None),
        "lambda": (float, True, None),
        "reps": (int, False, 200),
        "seed": (int, False, 0),
        "out": (str, False, None),
    },
    "hitting-tail": {
        "n": (int, True, None),
        "m_max": (int, True, None),
        "out": (str, False, None),
    },
    "mixing-sweep": {
        "n": (int, True, None),
        "lambda": (float, True, None),
        "t_grid": (list, True, None),
        "driving": (str, False, "uniform"),
        "reps": (int, False, 1000),
        "seed": (int, False, 0),
        "m_grid": (list, False, None),
        "out": (str, False, None),
        "plot_out": (str, False, None),
    },
    "cutoff": {
        "n_grid": (list, True, None),
        "lambda": (float, True, None),
        "eps": (float, False, 0.25),
        "reps": (int, True, None),
        "seed": (int, False, 0),
        "density_reps": (int, False, 400),
        "out": (str, False, None),
    },
    "exit-prob": {
        "n": (int, True, None),
        "lambda": (float, True, None),
        "particles": (int, True, None),
        "placement": (str, False, "central"),
        "side": (str, False, "right"),
        "reps": (int, False, 500),
        "seed": (int, False, 0),
        "out": (str, False, None),
    },
    "verify": {
        "suite": (str, True, None),
        "instances": (int, False, 1000),
        "reps": (int, False, 10000),
        "seed": (int, False, 0),
        "out": (str, False, None),
    },
}

SUITES = ("abelian", "least-action", "preemptive", "jump", "sweeper", "sampling", "all")


def _coerce(key, value, typ):
    if typ is float and isinstance(value, int):
        return float(value)
    if typ is int and isinstance(value, bool):
        raise ConfigSchemaError(key, "expected integer, got boolean")
    if not isinstance(value, typ):
        raise ConfigSchemaError(key, f"expected {typ.__name__}, got {type(value).__name__}")
    return value


def validate(command: str, raw: dict) -> dict:
    """Schema-check a parameter dict; unknown keys rejected with their path."""
    schema = SCHEMAS[command]
    out = {}
    for key, value in raw.items():
        if key not in schema:
            raise ConfigSchemaError(key, f"unknown key for command {command!r}")
        typ, _, _ = schema[key]
        if value is not None:
            out[key] = _coerce(key, value, typ)
    for key, (typ, required, default) in schema.items():
        if key not in out:
            if required:
                raise ConfigSchemaError(key, "required key missing")
            if default is not None:
                out[key] = default
    return out


def _load_params(args, command: str) -> dict:
    raw = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigSchemaError("<root>", f"malformed JSON config: {exc}")
        if not isinstance(raw, dict):
            raise ConfigSchemaError("<root>", "config must be a JSON object")
    for key, value in vars(args).items():
        key = key.replace("-", "_")
        if key in ("command", "config", "threads"):
            continue
        if value is not None:
            raw[key] = value
    # argparse uses lambda_ to dodge the keyword
    if "lambda_" in raw:
        raw["lambda"] = raw.pop("lambda_")
    return validate(command, raw)


def _parse_grid(text: str):
    """Parse 'a:b[:step]' ranges or comma lists into a list of ints."""
    if ":" in text:
        parts = [int(p) for p in text.split(":")]
        if len(parts) == 2:
            lo, hi, step = parts[0], parts[1], 1
        else:
            lo, hi, step = parts
        return list(range(lo, hi + 1, step))
    return [int(p) for p in text.split(",") if p]


def emit_plotdata(rows, path) -> None:
    """Tidy long-format CSV for external plotting of the mixing profile.

    One row per (n, t, series); values clamped to [0, 1] with a clamp flag.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "t_over_n", "series", "value", "clamped"])
        for row in rows:
            n = row["n"]
            for series in ("lower", "upper", "plugin"):
                value = row.get(series, "")
                if value == "" or value is None:
                    continue
                clamped = int(value < 0 or value > 1)
                value = min(1.0, max(0.0, float(value)))
                writer.writerow(
                    [n, f"{row['t'] / n:.6g}", series, f"{value:.6g}", clamped]
                )


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_stabilize(p):
    init = Configuration.from_json(p["init"])
    n = p.get("n", init.n)
    if n != init.n:
        raise ConfigSchemaError("init", f"length {init.n} does not match n={n}")
    topo = build_interval(n)
    src = InstructionSource(topo, p["lambda"], p["seed"])
    report = stabilize(State.initial(init), src)
    result = {
        "final": report.final.config.to_json(),
        "odometer": [int(v) for v in report.final.odometer],
        "visited": sorted(report.visited),
        "exits": report.exits,
        "topples": report.topple_count,
    }
    if p.get("out"):
        with open(p["out"], "w") as fh:
            json.dump(result, fh, indent=2)
    print(
        f"stabilize: n={n} topples={report.topple_count} "
        f"exits={report.exits} visited={len(report.visited)}"
    )
    return 0


def _cmd_chain(p):
    topo = build_interval(p["n"])
    driving = (
        DrivingSequence.central()
        if p["driving"] == "central"
        else DrivingSequence.uniform(p["seed"])
    )
    run = run_chain(
        Configuration.empty(p["n"]), p["t"], driving, topo, p["lambda"], p["seed"]
    )
    if p.get("out"):
        run.to_csv(p["out"], include_config=p["include_config"])
    print(f"chain: n={p['n']} t={p['t']} final count={run.final.count()}")
    return 0


def _cmd_sample_stationary(p):
    from .rng import derive_seed

    topo = build_interval(p["n"])
    rows = []
    for r in range(p["reps"]):
        sample = sample_stationary(topo, p["lambda"], derive_seed(p["seed"], "pi", r))
        rows.append((r, sample.count(), json.dumps(sample.to_json())))
    if p.get("out"):
        with open(p["out"], "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rep", "count", "config"])
            writer.writerows(rows)
    mean = sum(r[1] for r in rows) / len(rows) / p["n"]
    print(f"sample-stationary: n={p['n']} reps={p['reps']} mean density={mean:.6g}")
    return 0


def _cmd_density(p):
    topo = build_interval(p["n"])
    mean, (lo, hi), reps = stationary_density(topo, p["lambda"], p["reps"], p["seed"])
    if p.get("out"):
        write_csv(
            p["out"],
            ["n", "lambda", "reps", "rho_hat", "ci_lo", "ci_hi"],
            [
                {
                    "n": p["n"],
                    "lambda": p["lambda"],
                    "reps": reps,
                    "rho_hat": mean,
                    "ci_lo": lo,
                    "ci_hi": hi,
                }
            ],
        )
    print(f"density: n={p['n']} rho_hat={mean:.6g} ci=[{lo:.6g},{hi:.6g}]")
    return 0


def _cmd_hitting_tail(p):
    ht = hitting_tail(p["n"], p["m_max"])
    if p.get("out"):
        with open(p["out"], "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["m", "tail"])
            for m in range(p["m_max"] + 1):
                writer.writerow([m, f"{ht[m]:.6g}"])
    print(f"hitting-tail: n={p['n']} tail[{p['m_max']}]={ht[p['m_max']]:.6g}")
    return 0


def _cmd_mixing_sweep(p):
    rows = mixing_sweep(
        p["n"],
        p["lambda"],
        p["t_grid"],
        p["driving"],
        p["reps"],
        p["seed"],
        m_grid=p.get("m_grid"),
        out=p.get("out"),
    )
    if p.get("plot_out"):
        emit_plotdata(rows, p["plot_out"])
    print(f"mixing-sweep: n={p['n']} points={len(rows)}")
    return 0


def _cmd_cutoff(p):
    rows = locate_cutoff(
        p["n_grid"],
        p["lambda"],
        p["eps"],
        p["reps"],
        p["seed"],
        density_reps=p["density_reps"],
        out=p.get("out"),
    )
    for row in rows:
        print(
            f"cutoff: n={row['n']} t_lo={row['t_lo']} t_hi={row['t_hi']} "
            f"rho_hat={row['rho_hat']:.6g} window/n={row['window_over_n']:.6g}"
        )
    return 0


def _cmd_exit_prob(p):
    topo = build_interval(p["n"])
    report = exit_probability(
        p["placement"], p["particles"], p["side"], topo, p["lambda"], p["reps"], p["seed"]
    )
    if p.get("out"):
        write_csv(
            p["out"],
            ["n", "lambda", "particles", "side", "frequency", "ci_lo", "ci_hi", "weighted_mean"],
            [
                {
                    "n": p["n"],
                    "lambda": p["lambda"],
                    "particles": p["particles"],
                    "side": p["side"],
                    "frequency": report.frequency,
                    "ci_lo": report.ci[0],
                    "ci_hi": report.ci[1],
                    "weighted_mean": report.weighted_mean,
                }
            ],
        )
    print(
        f"exit-prob: n={p['n']} side={p['side']} frequency={report.frequency:.6g} "
        f"ci=[{report.ci[0]:.6g},{report.ci[1]:.6g}]"
    )
    return 0


def _run_suite(suite, p):
    if suite == "abelian":
        return check_abelian(p["seed"], p["instances"])
    if suite == "least-action":
        return check_least_action(p["seed"], p["instances"])
    if suite == "preemptive":
        return check_preemptive_abelian(p["seed"], p["instances"])
    if suite == "jump":
        return check_preemptive_jump(p["seed"], p["instances"])
    if suite == "sweeper":
        return check_street_sweeper(
            Configuration.all_active(3),
            Configuration.all_active(3),
            8,
            1.0,
            p["reps"],
            p["seed"],
        )
    if suite == "sampling":
        extra = Configuration.single(3, 1, 3)
        return check_exact_sampling(3, 1.0, extra, p["reps"], p["seed"])
    raise ConfigSchemaError("suite", f"unknown suite {suite!r}; one of {SUITES}")


def _cmd_verify(p):
    suites = list(SUITES[:-1]) if p["suite"] == "all" else [p["suite"]]
    results = {}
    ok = True
    for suite in suites:
        verdict = _run_suite(suite, p)
        results[suite] = verdict.to_json()
        ok = ok and verdict.ok
        print(f"verify[{suite}]: {json.dumps(verdict.to_json())}")
    if p.get("out"):
        with open(p["out"], "w") as fh:
            json.dump(results, fh, indent=2)
    return 0 if ok else 2


COMMANDS = {
    "stabilize": _cmd_stabilize,
    "chain": _cmd_chain,
    "sample-stationary": _cmd_sample_stationary,
    "density": _cmd_density,
    "hitting-tail": _cmd_hitting_tail,
    "mixing-sweep": _cmd_mixing_sweep,
    "cutoff": _cmd_cutoff,
    "exit-prob": _cmd_exit_prob,
    "verify": _cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="arwlab",
        description="simulation and verification lab for driven-dissipative ARW",
    )
    sub = parser.add_subparsers(dest="command")

    def add(name, **flags):
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=str, default=None)
        sp.add_argument("--threads", type=int, default=None)
        for flag, kwargs in flags.items():
            sp.add_argument(f"--{flag.rstrip('_').replace('_', '-')}", **kwargs)
        return sp

    add("stabilize", lambda_={"type": float, "dest": "lambda_"}, n={"type": int},
        seed={"type": int}, init={"type": json.loads}, out={"type": str})
    add("chain", n={"type": int}, lambda_={"type": float, "dest": "lambda_"},
        t={"type": int}, driving={"type": str}, seed={"type": int},
        out={"type": str}, include_config={"action": "store_true", "default": None})
    add("sample-stationary", n={"type": int}, lambda_={"type": float, "dest": "lambda_"},
        reps={"type": int}, seed={"type": int}, out={"type": str})
    add("density", n={"type": int}, lambda_={"type": float, "dest": "lambda_"},
        reps={"type": int}, seed={"type": int}, out={"type": str})
    add("hitting-tail", n={"type": int}, m_max={"type": int}, out={"type": str})
    add("mixing-sweep", n={"type": int}, lambda_={"type": float, "dest": "lambda_"},
        t={"type": _parse_grid, "dest": "t_grid"}, driving={"type": str},
        reps={"type": int}, seed={"type": int}, m_grid={"type": _parse_grid},
        out={"type": str}, plot_out={"type": str})
    add("cutoff", n_grid={"type": _parse_grid}, lambda_={"type": float, "dest": "lambda_"},
        eps={"type": float}, reps={"type": int}, seed={"type": int},
        density_reps={"type": int}, out={"type": str})
    add("exit-prob", n={"type": int}, lambda_={"type": float, "dest": "lambda_"},
        particles={"type": int}, placement={"type": str}, side={"type": str},
        reps={"type": int}, seed={"type": int}, out={"type": str})
    add("verify", suite={"type": str}, instances={"type": int}, reps={"type": int},
        seed={"type": int}, out={"type": str})
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage()
        return 1
    try:
        params = _load_params(args, args.command)
    except ConfigSchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return COMMANDS[args.command](params)
    except ConfigSchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ArwError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
