"""Command-line front end: ``covertgg {dist,budget,sweep,whiten}``.

Each subcommand assembles a parameter block from an optional JSON config
file and its flags (flags win), validates it against the shipped schema, and
hands it to the library.  The exit status is 0 exactly when every check the
command performs passes; 2 signals invalid input.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import budget as budget_mod
from . import colored, ggdist, simkit
from .errors import CovertError

OUTPUT_ENV = "COVERTGG_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "covertgg-results"
RUN_SCHEMA = "run_config.schema.json"
MATRIX_SCHEMA = "matrix.schema.json"
KL_MATCH_TOL = 1e-9

INDEX_COLUMNS = ("run_id", "status") + simkit.CSV_COLUMNS + ("K_ci_lo", "K_ci_hi", "formula_norm", "cap_norm")


class InputError(Exception):
    """Invalid user input; reported on stderr with exit status 2."""


def load_schema(name: str) -> dict:
    return json.loads(resources.files("covertgg.schemas").joinpath(name).read_text())


def _where(path) -> str:
    return "/".join(str(p) for p in path) or "<root>"


def validate(config: dict, schema_name: str = RUN_SCHEMA) -> dict:
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(config), key=lambda e: list(e.absolute_path))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        raise InputError(f"{_where(err.absolute_path)}: {err.message} "
                         f"[{schema_name}#/{_where(err.absolute_schema_path)}]")
    return config


def build_config(command: str, args: argparse.Namespace, keys) -> dict:
    config: dict = {}
    if getattr(args, "config", None):
        try:
            config = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(config, dict):
            raise InputError(f"config {args.config} must hold a JSON object")
    config["command"] = command
    for key in keys:
        value = getattr(args, key, None)
        if value is not None and value is not False:
            config[key] = value
    return validate(config)


def _emit(data, args, *, csv_rows=None) -> None:
    fmt = getattr(args, "format", None) or "text"
    if fmt == "json":
        text = json.dumps(data, sort_keys=True, indent=2) + "\n"
    elif fmt == "csv" and csv_rows is not None:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(csv_rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(csv_rows)
        text = buf.getvalue()
    else:
        lines = []
        for key, value in data.items():
            if isinstance(value, (dict, list)):
                value = json.dumps(value, sort_keys=True)
            lines.append(f"{key}\t{value}")
        text = "\n".join(lines) + "\n"
    out = getattr(args, "output", None)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _summary(checks: dict) -> dict:
    checks = {k: bool(v) for k, v in checks.items()}
    return {"checks": checks, "passed": all(checks.values())}


# ---------------------------------------------------------------------------
# dist


def cmd_dist(args) -> int:
    cfg = build_config("dist", args, ("p", "alpha", "z", "entropy", "moment_p", "second_moment", "sample", "seed"))
    params = ggdist.GGParams(cfg["p"], cfg["alpha"])
    if cfg.get("sample"):
        values = ggdist.sample(params, cfg["sample"], cfg.get("seed", 0)).values
        if (args.format or "text") == "json":
            _emit({"samples": values.tolist(), "seed": cfg.get("seed", 0)}, args)
        else:
            _emit_lines([repr(float(v)) for v in values], args)
        return 0
    data: dict = {}
    wanted = [k for k in ("entropy", "moment_p", "second_moment") if cfg.get(k)]
    if not wanted and not cfg.get("z"):
        wanted = ["entropy", "moment_p", "second_moment"]
        data["normalizer"] = ggdist.normalizer(params) / params.alpha
    if "entropy" in wanted:
        data["entropy"] = ggdist.entropy(params)
    if "moment_p" in wanted:
        data["moment_p"] = ggdist.abs_moment_p(params)
    if "second_moment" in wanted:
        data["second_moment"] = ggdist.second_moment(params)
    if cfg.get("z"):
        z = np.asarray(cfg["z"], dtype=float)
        data["z"] = z.tolist()
        data["pdf"] = np.atleast_1d(ggdist.pdf(params, z)).tolist()
        data["cdf"] = np.atleast_1d(ggdist.cdf(params, z)).tolist()
    _emit(data, args, csv_rows=[data] if not cfg.get("z") else None)
    return 0


def _emit_lines(lines, args) -> None:
    text = "\n".join(lines) + "\n"
    if getattr(args, "output", None):
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# budget


def cmd_budget(args) -> int:
    cfg = build_config("budget", args, ("p", "alpha", "delta", "n", "bits"))
    noise = ggdist.GGParams(cfg["p"], cfg["alpha"])
    spec = budget_mod.BudgetSpec(noise, cfg["delta"], cfg["n"])
    res = budget_mod.gamma_achievable(spec)
    gamma_max = budget_mod.gamma_converse_max(spec)
    l_value, l_status = budget_mod.L_theoretical(noise)
    unit = 1.0 / math.log(2.0) if cfg.get("bits") else 1.0
    data = {
        "p": noise.p, "alpha": noise.alpha, "delta": spec.delta, "n": spec.n,
        "gamma_n": res.gamma_n,
        "per_symbol_kl": res.per_symbol_kl,
        "total_kl": res.total_kl,
        "rate_cap": res.rate_cap_nats * unit,
        "rate_unit": "bits" if cfg.get("bits") else "nats",
        "normalized_rate": res.normalized_rate * unit,
        "gamma_converse_max": gamma_max,
        "normalized_gap_achievable": budget_mod.normalized_gap(res.gamma_n, spec),
        "normalized_gap_converse": budget_mod.normalized_gap(gamma_max, spec),
        "L": l_value,
        "L_status": l_status,
    }
    data.update(_summary({
        "total_kl_within_budget": res.total_kl <= spec.delta,
        "converse_above_achievable": gamma_max >= res.gamma_n,
    }))
    row = {k: v for k, v in data.items() if k != "checks"}
    _emit(data, args, csv_rows=[row])
    return 0 if data["passed"] else 1


# ---------------------------------------------------------------------------
# whiten


def load_matrix(path: str, kind: str = "sigma") -> colored.ColoredNoiseModel:
    """Read a noise model from JSON (see ``matrix.schema.json``) or CSV (bare matrix)."""
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"cannot read matrix file {path}: {exc}") from exc
    if p.suffix.lower() == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: not valid JSON ({exc})") from exc
        validator = jsonschema.Draft202012Validator(load_schema(MATRIX_SCHEMA))
        errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
        if errors:
            err = jsonschema.exceptions.best_match(errors)
            raise InputError(f"{path}: {_matrix_location(err.absolute_path)}: {err.message} [{MATRIX_SCHEMA}]")
        kind = "sigma" if "sigma" in doc else "mixing"
        rows = doc[kind]
        mu = doc.get("mu")
    else:
        rows = []
        for r, record in enumerate(csv.reader(io.StringIO(text)), start=1):
            if not record or all(not cell.strip() for cell in record):
                continue
            row = []
            for c, cell in enumerate(record, start=1):
                try:
                    row.append(float(cell))
                except ValueError:
                    raise InputError(f"{path}: row {r}, column {c}: cannot parse {cell.strip()!r} as a number") from None
            rows.append(row)
        mu = None
        if not rows:
            raise InputError(f"{path}: empty matrix")
    size = len(rows)
    for r, row in enumerate(rows, start=1):
        if len(row) != size:
            raise InputError(f"{path}: row {r} has {len(row)} columns, expected {size} (matrix must be square)")
    if mu is not None and len(mu) != size:
        raise InputError(f"{path}: mu has length {len(mu)}, expected {size}")
    mu = np.zeros(size) if mu is None else np.asarray(mu, dtype=float)
    mat = np.asarray(rows, dtype=float)
    if kind == "sigma":
        return colored.ColoredNoiseModel(mu=mu, sigma=mat)
    return colored.ColoredNoiseModel(mu=mu, mixing=mat)


def _matrix_location(path) -> str:
    parts = list(path)
    if len(parts) >= 3 and isinstance(parts[1], int):
        return f"{parts[0]} row {parts[1] + 1}, column {parts[2] + 1}"
    if len(parts) == 2 and isinstance(parts[1], int):
        return f"{parts[0]} row {parts[1] + 1}"
    return _where(parts)


def cmd_whiten(args) -> int:
    cfg = build_config("whiten", args, ("ar1", "n", "matrix", "kind", "input_scale"))
    if cfg.get("matrix"):
        model = load_matrix(cfg["matrix"], cfg.get("kind", "sigma"))
    else:
        model = colored.ar1_model(cfg["n"], cfg["ar1"])
    transport = colored.whiten(model)
    scale = cfg.get("input_scale", 0.01)
    kl_col, kl_white = colored.kl_invariance_check(transport, scale * np.eye(model.n))
    resid = transport.roundtrip_residual()
    data = {
        "n": model.n,
        "kind": "sigma" if model.gaussian else "mixing",
        "lower_triangular": transport.lower_triangular,
        "identity": bool(np.array_equal(transport.forward_matrix, np.eye(model.n))),
        "condition_number": transport.condition_number,
        "roundtrip_residual": resid,
        "input_scale": scale,
        "kl_colored": kl_col,
        "kl_white": kl_white,
        "kl_abs_diff": abs(kl_col - kl_white),
    }
    if getattr(args, "show_matrix", False):
        data["forward_matrix"] = transport.forward_matrix.tolist()
    data.update(_summary({
        "kl_invariant": abs(kl_col - kl_white) <= KL_MATCH_TOL,
        "roundtrip": resid <= colored.ROUNDTRIP_TOL,
    }))
    _emit(data, args)
    return 0 if data["passed"] else 1


# ---------------------------------------------------------------------------
# sweep


def run_id(point: dict) -> str:
    blob = json.dumps(point, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _index_ids(index: Path) -> set:
    if not index.exists():
        return set()
    with index.open(newline="") as fh:
        return {row["run_id"] for row in csv.DictReader(fh)}


def sweep_point(point: dict, workers: int | None) -> dict:
    """Estimate K_n for one n; failures are captured in the record."""
    record = {"run_id": run_id(point), "config": point}
    try:
        noise = ggdist.GGParams(point["p"], point["alpha"])
        spec = budget_mod.BudgetSpec(noise, point["delta"], point["n"])
        exp = simkit.CodingExperiment(spec, 2, point["trials"], point["seed"],
                                      threshold_gamma=point["threshold_gamma"], decoder=point["decoder"])
        est = simkit.estimate_rate(exp, point["target_eps"], method=point["method"], workers=workers)
        warden = None
        if point["warden_trials"]:
            warden = simkit.warden_test(noise, exp.gamma_n, spec.n, point["warden_trials"],
                                        point["seed"], workers=workers).sum_errors
        cap = simkit.rate_cap_normalized(spec)
        formula = budget_mod.normalized_rate_trend(noise, spec.delta, [spec.n])[0]
        record.update(status="ok", estimate=est.to_dict(), row=simkit.csv_row(est, noise, warden),
                      formula_norm=formula, cap_norm=cap,
                      checks={"below_cap": est.k_hat_norm <= cap})
    except CovertError as exc:
        record.update(status=f"error: {exc}", checks={"completed": False})
    return record


def cmd_sweep(args) -> int:
    cfg = build_config("sweep", args, ("p", "alpha", "delta", "target_eps", "trials", "method", "decoder",
                                       "threshold_gamma", "warden_trials", "workers", "seed", "output_dir"))
    out_dir = Path(cfg.get("output_dir") or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT_DIR)
    runs = out_dir / "runs"
    runs.mkdir(parents=True, exist_ok=True)
    index = out_dir / "index.csv"
    known = _index_ids(index)
    base = {
        "p": cfg["p"], "alpha": cfg["alpha"], "delta": cfg["delta"], "target_eps": cfg["target_eps"],
        "trials": cfg["trials"], "method": cfg.get("method", "feinstein"),
        "decoder": cfg.get("decoder", "threshold"), "threshold_gamma": cfg.get("threshold_gamma"),
        "warden_trials": cfg.get("warden_trials", 0), "seed": cfg.get("seed", 0),
    }
    records = []
    for n in cfg["n_list"]:
        point = dict(base, n=n)
        rid = run_id(point)
        path = runs / f"{rid}.json"
        if path.exists():
            record = json.loads(path.read_text())
            print(f"n={n} run {rid}: cached", file=sys.stderr)
        else:
            record = sweep_point(point, cfg.get("workers"))
            _write_atomic(path, json.dumps(record, sort_keys=True, indent=1) + "\n")
            print(f"n={n} run {rid}: {record['status']}"
                  + (f" K_hat_norm={record['row']['K_hat_norm']:.4f}" if record["status"] == "ok" else ""),
                  file=sys.stderr)
        if rid not in known:
            _append_index(index, record)
            known.add(rid)
        records.append(record)
    sweep_id = run_id(dict(base, n_list=cfg["n_list"]))
    _write_plot(out_dir, sweep_id, records, ggdist.GGParams(cfg["p"], cfg["alpha"]))
    checks = {f"n={r['config']['n']}:{k}": v for r in records for k, v in r["checks"].items()}
    data = {"sweep_id": sweep_id, "output_dir": str(out_dir),
            "runs": [r["run_id"] for r in records]}
    data.update(_summary(checks))
    _emit(data, args)
    return 0 if data["passed"] else 1


def _append_index(index: Path, record: dict) -> None:
    new = not index.exists()
    row = {"run_id": record["run_id"], "status": record["status"]}
    if record["status"] == "ok":
        row.update(record["row"])
        row.update(K_ci_lo=record["estimate"]["k_hat_ci"][0], K_ci_hi=record["estimate"]["k_hat_ci"][1],
                   formula_norm=record["formula_norm"], cap_norm=record["cap_norm"])
    else:
        cfg = record["config"]
        row.update(p=cfg["p"], alpha=cfg["alpha"], delta=cfg["delta"], n=cfg["n"])
    with index.open("a", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=INDEX_COLUMNS, lineterminator="\n")
        if new:
            writer.writeheader()
        writer.writerow(row)


def _write_plot(out_dir: Path, sweep_id: str, records, noise) -> None:
    l_value, _ = budget_mod.L_theoretical(noise)
    lines = ["# n K_hat_norm K_ci_lo K_ci_hi formula_norm cap_norm L"]
    for r in sorted(records, key=lambda r: r["config"]["n"]):
        if r["status"] != "ok":
            continue
        lo, hi = r["estimate"]["k_hat_ci"]
        lines.append(f"{r['config']['n']} {r['row']['K_hat_norm']!r} {lo!r} {hi!r} "
                     f"{r['formula_norm']!r} {r['cap_norm']!r} {l_value!r}")
    dat = out_dir / f"sweep_{sweep_id}.dat"
    _write_atomic(dat, "\n".join(lines) + "\n")
    script = "\n".join([
        "set logscale x",
        "set xlabel 'n'",
        "set ylabel 'normalized rate (nats / sqrt(n delta))'",
        "set key bottom right",
        f"plot '{dat.name}' using 1:2:3:4 with yerrorbars title 'Monte Carlo K_n', \\",
        f"     '{dat.name}' using 1:5 with linespoints title 'formula', \\",
        f"     '{dat.name}' using 1:6 with lines title 'converse cap', \\",
        f"     '{dat.name}' using 1:7 with lines dashtype 2 title 'L'",
        "",
    ])
    _write_atomic(out_dir / f"sweep_{sweep_id}.gp", script)


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covertgg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats=("json", "csv", "text")):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--format", choices=formats)
        p.add_argument("--output", help="write the report here instead of stdout")

    d = sub.add_parser("dist", help="density, entropy, moments and samples of N_p(0, alpha^p)")
    d.add_argument("--p", type=float)
    d.add_argument("--alpha", type=float)
    d.add_argument("--z", type=float, nargs="+", help="evaluate pdf and cdf at these points")
    d.add_argument("--entropy", action="store_true")
    d.add_argument("--moment-p", dest="moment_p", action="store_true", help="E|Z|^p")
    d.add_argument("--second-moment", dest="second_moment", action="store_true", help="E[Z^2]")
    d.add_argument("--sample", type=int, metavar="N", help="print N samples")
    d.add_argument("--seed", type=int)
    common(d)
    d.set_defaults(func=cmd_dist)

    b = sub.add_parser("budget", help="covert output scale, divergence and rate cap for a KL budget")
    b.add_argument("--p", type=float)
    b.add_argument("--alpha", type=float)
    b.add_argument("--delta", type=float)
    b.add_argument("--n", type=int)
    b.add_argument("--bits", action="store_true", help="show rates in bits")
    common(b)
    b.set_defaults(func=cmd_budget)

    s = sub.add_parser("sweep", help="Monte Carlo estimate of the normalized covert rate over n")
    s.add_argument("--p", type=float)
    s.add_argument("--alpha", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--target-eps", dest="target_eps", type=float)
    s.add_argument("--trials", type=int)
    s.add_argument("--method", choices=("feinstein", "codebook"))
    s.add_argument("--decoder", choices=("threshold", "ml"))
    s.add_argument("--threshold-gamma", dest="threshold_gamma", type=float)
    s.add_argument("--warden-trials", dest="warden_trials", type=int)
    s.add_argument("--workers", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--output-dir", dest="output_dir", help=f"defaults to ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT_DIR}")
    common(s, ("json", "text"))
    s.set_defaults(func=cmd_sweep)

    w = sub.add_parser("whiten", help="whitening transport for noise with memory, with a KL invariance check")
    w.add_argument("--ar1", type=float, metavar="RHO")
    w.add_argument("--n", type=int)
    w.add_argument("--matrix", help="JSON or CSV matrix file")
    w.add_argument("--kind", choices=("sigma", "mixing"), help="meaning of a CSV matrix (default sigma)")
    w.add_argument("--input-scale", dest="input_scale", type=float,
                   help="input covariance multiple of I for the KL check (default 0.01)")
    w.add_argument("--show-matrix", dest="show_matrix", action="store_true")
    common(w, ("json", "text"))
    w.set_defaults(func=cmd_whiten)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, CovertError) as exc:
        print(f"covertgg {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
