"""Command-line front end.

Exit codes: 0 success, 2 usage or input error, 3 simulation alarm.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import jsonschema

from . import attack_sim as sim
from . import bounds as bd
from . import sampling as sp
from .cglmp_engine import (MAX_STATE_OPT_DIM, REFERENCE_QUANTUM_VALUES, optimize_quantum_value,
                           optimize_state_value)

EXIT_OK, EXIT_USAGE, EXIT_ALARM = 0, 2, 3

SOURCE_SCHEMA = {
    "type": "object",
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["uniform", "santha_vazirani", "sample_fixing", "biased_iid"]},
        "eps": {"type": "number", "minimum": 0, "maximum": 0.5},
        "forced": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "probs": {"type": "array", "items": {"type": "number", "minimum": 0},
                  "minItems": 2, "maxItems": 2},
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["N", "f"],
    "properties": {
        "schema_version": {"const": sim.SCHEMA_VERSION},
        "N": {"type": "integer", "minimum": 2},
        "f": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "d": {"type": "integer", "minimum": 2},
        "test_size": {"type": ["integer", "null"], "minimum": 1},
        "alice_source": SOURCE_SCHEMA,
        "bob_source": SOURCE_SCHEMA,
        "behavior": {"oneOf": [
            {"const": "optimal"},
            {"type": "object", "required": ["d", "table"],
             "properties": {"d": {"type": "integer"},
                            "settings": {"type": "array", "items": {"type": "integer"}},
                            "table": {"type": "array", "items": {"type": "number"}}}},
        ]},
        "assumed_loss": {"type": "number", "minimum": 0, "maximum": 1},
        "threshold": {"type": ["number", "null"]},
        "attack": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["none", "combined", "sublinear", "noisy", "product"]},
                "k": {"type": "number", "minimum": 0, "maximum": 1},
                "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "loss": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "r_obs_min": {"type": "number"},
                "product_model": {"enum": list(sim.PRODUCT_MODELS)},
                "seed": {"type": "integer"},
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class UsageError(Exception):
    pass


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("DIQKD_THREADS", "1")))
    except ValueError:
        return 1


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(round(x, 12))
    return str(x)


def _emit(args, payload: dict, lines: list[str]) -> None:
    if args.json:
        sys.stdout.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    else:
        sys.stdout.write("\n".join(lines) + "\n")


def _unit(name: str, x: float | None) -> None:
    if x is not None and not (0.0 <= x <= 1.0):
        raise UsageError(f"--{name} must lie in [0, 1], got {x}")


# bounds ------------------------------------------------------------------

def cmd_bounds(args) -> int:
    L = args.loss
    _unit("loss", L)
    _unit("robs", args.robs)
    d = args.dim[0] if args.dim else 2
    Q = optimize_quantum_value(d).value
    payload = {
        "L": L,
        "R_of_L": bd.product_state_bound(L),
        "d": d,
        "quantum_value": Q,
        "critical_loss_rate": bd.critical_loss_rate(Q),
        "critical_min_entropy": bd.critical_min_entropy(Q),
        "saturation_loss_rate": bd.SATURATION_LOSS,
    }
    if args.robs is not None:
        a = bd.assess(L, args.robs, args.rq, d)
        payload.update({"R_obs": args.robs, "R_Q": args.rq, "H_of_L": a.H_of_L,
                        "key_bits_per_round": a.key_bits_per_round,
                        "k_ratio": a.k_ratio, "f_max": a.f_max, "status": a.status})
    if args.fraction is not None:
        try:
            payload["R_obs_min"] = sp.required_violation(L, args.fraction, args.rq)
        except ValueError as exc:
            payload["R_obs_min"] = None
            payload["R_obs_min_error"] = str(exc)
    lines = [f"{k:>22} = {_fmt(v)}" for k, v in payload.items()]
    _emit(args, payload, lines)
    return EXIT_OK


# quantum -----------------------------------------------------------------

REFERENCE_ATOL = 1e-3


def _quantum_row(d: int) -> dict:
    q = optimize_quantum_value(d)
    row = {
        "d": d,
        "value": q.value,
        "phases": list(q.phases.as_tuple()),
        "critical_loss_rate": bd.critical_loss_rate(q.value),
        "critical_min_entropy": bd.critical_min_entropy(q.value),
        "optimal_state_value": None,
        "schmidt": None,
    }
    if d <= MAX_STATE_OPT_DIM:
        s = optimize_state_value(d)
        row["optimal_state_value"] = s.value
        row["schmidt"] = s.schmidt.tolist()
    refs = []
    for r in REFERENCE_QUANTUM_VALUES.get(d, ()):
        ref = {"value": r, "difference": q.value - r,
               "matches": abs(q.value - r) <= REFERENCE_ATOL}
        if row["optimal_state_value"] is not None:
            diff = row["optimal_state_value"] - r
            ref["optimal_state_difference"] = diff
            ref["matches_optimal_state"] = abs(diff) <= REFERENCE_ATOL
        refs.append(ref)
    row["references"] = refs
    return row


def cmd_quantum(args) -> int:
    dims = args.dim or [2]
    if any(d < 2 for d in dims):
        raise UsageError("--dim must be >= 2")
    with ThreadPoolExecutor(_threads()) as pool:
        rows = list(pool.map(_quantum_row, dims))
    lines = []
    for row in rows:
        lines.append(f"d={row['d']:<3} value={row['value']:.6f} "
                     f"L*={row['critical_loss_rate']:.6f} "
                     f"H*={row['critical_min_entropy']:.6f} "
                     f"phases={[round(p, 6) for p in row['phases']]}")
        if row["optimal_state_value"] is not None:
            lines.append(f"      optimal state value={row['optimal_state_value']:.6f}")
        for ref in row["references"]:
            tag = "match" if ref["matches"] else "mismatch"
            line = (f"      reference {ref['value']}: maximally entangled {tag} "
                    f"(difference {ref['difference']:+.6f})")
            if "matches_optimal_state" in ref:
                tag = "match" if ref["matches_optimal_state"] else "mismatch"
                line += (f", optimal state {tag} "
                         f"(difference {ref['optimal_state_difference']:+.6f})")
            lines.append(line)
    _emit(args, {"results": rows}, lines)
    return EXIT_OK


# sweep -------------------------------------------------------------------

def _grid(lo: float, hi: float, steps: int) -> list[float]:
    if not lo < hi:
        raise UsageError(f"need lo < hi, got {lo}, {hi}")
    if steps < 2:
        raise UsageError(f"need steps >= 2, got {steps}")
    return [lo + (hi - lo) * i / (steps - 1) for i in range(steps)]


def sweep_rows(variable: str, lo: float, hi: float, steps: int, dims=(2, 4, 32),
               loss: float = 0.03, rq: float = 1.0) -> tuple[list[str], list[list]]:
    """Header and rows for one sweep; rows keep grid order."""
    if variable == "loss":
        xs = _grid(lo, hi, steps)
        if xs[0] < 0 or xs[-1] > 1:
            raise UsageError("loss sweep range must lie in [0, 1]")
        qs = [optimize_quantum_value(d).value for d in dims]
        header = ["L", "R_of_L"] + [f"Q_d{d}" for d in dims]
        fn = lambda L: [L, bd.product_state_bound(L)] + qs  # noqa: E731
    elif variable == "fraction":
        xs = _grid(lo, hi, steps)
        if xs[0] <= 0 or xs[-1] >= 1:
            raise UsageError("fraction sweep range must lie in (0, 1)")
        header = ["f", "R_obs_min"]

        def fn(f):
            try:
                return [f, sp.required_violation(loss, f, rq, tol=1e-9)]
            except ValueError:
                return [f, float("nan")]
    elif variable == "dim":
        lo_i, hi_i = int(lo), int(hi)
        if lo_i < 2 or lo_i >= hi_i:
            raise UsageError("dim sweep needs 2 <= lo < hi")
        xs = sorted({round(lo_i * (hi_i / lo_i) ** (i / (steps - 1))) for i in range(steps)})
        header = ["d", "quantum_value", "critical_loss_rate", "critical_min_entropy",
                  "f_max"]

        def fn(d):
            q = optimize_quantum_value(d).value
            try:
                fmax = sp.solve_secure_fraction(loss, q, rq)
            except ValueError:
                fmax = float("nan")
            return [d, q, bd.critical_loss_rate(q), bd.critical_min_entropy(q), fmax]
    else:
        raise UsageError(f"unknown sweep variable {variable!r}")
    with ThreadPoolExecutor(_threads()) as pool:
        rows = list(pool.map(fn, xs))
    return header, rows


def write_csv(header, rows, stream) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(float(x)) if not isinstance(x, int) else x for x in row])


def cmd_sweep(args) -> int:
    header, rows = sweep_rows(args.variable, args.lo, args.hi, args.steps,
                              tuple(args.dim or (2, 4, 32)), args.loss, args.rq)
    if args.json:
        payload = {"columns": header, "rows": rows}
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    else:
        buf = io.StringIO()
        write_csv(header, rows, buf)
        text = buf.getvalue()
    if args.out:
        try:
            with open(args.out, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc}") from exc
    else:
        sys.stdout.write(text)
    return EXIT_OK


# simulate ------------------------------------------------------------------

def _locate(text: str, path) -> int:
    """1-based line of the JSON element at ``path`` (best effort: key search)."""
    pos = 0
    for key in path:
        if isinstance(key, str):
            hit = text.find(f'"{key}"', pos)
            if hit >= 0:
                pos = hit
    return text.count("\n", 0, pos) + 1


def load_config(path: str) -> tuple[sim.ProtocolConfig, dict]:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(obj), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        where = "/".join(map(str, err.absolute_path)) or "<root>"
        line = _locate(text, list(err.absolute_path))
        raise UsageError(f"{path}:{line}: schema violation at {where}: {err.message}")
    try:
        return sim.config_from_dict(obj), obj.get("attack", {})
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{path}: invalid config: {exc}") from exc


def build_strategy(config: sim.ProtocolConfig, params: dict, seed: int) -> sim.AttackStrategy:
    kind = params.get("kind", "none")
    model = params.get("product_model", "uniform")
    attack_seed = params.get("seed", seed + 1)
    if kind == "none":
        return sim.AttackStrategy()
    if kind == "product":
        return sim.build_combined_attack(config, 0.0, attack_seed, model)
    if kind == "combined":
        return sim.build_combined_attack(config, params.get("k", config.f), attack_seed, model)
    if kind == "sublinear":
        if "alpha" not in params or "k" not in params:
            raise UsageError("sublinear attack needs alpha and k")
        return sim.build_sublinear_attack(config, params["alpha"], params["k"], attack_seed, model)
    if kind == "noisy":
        if "loss" not in params or "r_obs_min" not in params:
            raise UsageError("noisy attack needs loss and r_obs_min")
        return sim.build_noisy_attack(config, params["loss"], params["r_obs_min"], attack_seed,
                                      product_model=model)
    raise UsageError(f"unknown attack kind {kind!r}")


def cmd_simulate(args) -> int:
    config, attack = load_config(args.config)
    attack = dict(attack)
    if args.attack is not None:
        attack["kind"] = args.attack
    for key, val in (("k", args.k), ("alpha", args.alpha), ("loss", args.loss),
                     ("r_obs_min", args.robs), ("product_model", args.product_model)):
        if val is not None:
            attack[key] = val
    try:
        strategy = build_strategy(config, attack, args.seed)
        report = sim.run_protocol(config, strategy, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    text = report.to_json()
    if args.out:
        try:
            with open(args.out, "w", newline="", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            raise UsageError(f"cannot write {args.out}: {exc}") from exc
    if args.json or not args.out:
        sys.stdout.write(text)
    else:
        sys.stdout.write(
            f"R_obs_hat={report.R_obs_hat:.6f} sigma={report.sigma:.6f} "
            f"test={report.test_count} sifted={report.sift_count} "
            f"eve_guess={report.eve_guess_fraction:.6f} loss={report.realized_loss:.6f} "
            f"verdict={report.verdict}\n")
    return EXIT_ALARM if report.alarm else EXIT_OK


# entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diqkd",
        description="Security bounds and attack simulation for DIQKD with biased settings.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("bounds", parents=[common], help="bounds at one loss rate")
    p.add_argument("--loss", type=float, required=True)
    p.add_argument("--robs", type=float)
    p.add_argument("--dim", type=int, action="append")
    p.add_argument("--fraction", type=float)
    p.add_argument("--rq", type=float, default=1.0)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("quantum", parents=[common], help="maximally entangled values")
    p.add_argument("--dim", type=int, action="append")
    p.set_defaults(func=cmd_quantum)

    p = sub.add_parser("sweep", parents=[common], help="CSV parameter sweeps")
    p.add_argument("variable", choices=["loss", "fraction", "dim"])
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--steps", type=int, default=101)
    p.add_argument("--dim", type=int, action="append")
    p.add_argument("--loss", type=float, default=0.03)
    p.add_argument("--rq", type=float, default=1.0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo protocol run")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--attack", choices=["none", "combined", "sublinear", "noisy", "product"])
    p.add_argument("--k", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--loss", type=float, help="loss budget for the noisy attack")
    p.add_argument("--robs", type=float, help="violation floor for the noisy attack")
    p.add_argument("--product-model", choices=list(sim.PRODUCT_MODELS))
    p.set_defaults(func=cmd_simulate)
    return parser


SWEEP_DEFAULTS = {"loss": (0.0, 0.1), "fraction": (0.001, 0.999), "dim": (2, 32)}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "sweep":
        lo, hi = SWEEP_DEFAULTS[args.variable]
        args.lo = lo if args.lo is None else args.lo
        args.hi = hi if args.hi is None else args.hi
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"diqkd {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
