"""Command-line harness.

Subcommands: ``replicate``, ``sweep-detect``, ``simulate``, ``calibrate-cost``.
Option values come from built-in defaults, then ``--config`` (a JSON object,
optionally with one sub-object per subcommand), then command-line flags.

Exit codes: 0 success (including expected detections), 1 statistical or
verification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

from . import bench, records, simnet, streams
from .detgen import DriftSpec, ModelConfig
from .detmath import AuditParams, sweep
from .exceptions import AsymVerifyError, UnderdeterminedFitError
from .seqlab import SEGMENT_INJECTION, AltModel, TamperPlan, apply_tamper, default_alt_model, honest_claim
from .svg import PALETTE, LineChart, Series
from .verify import CostLedger, replay_divergence, verify_span, verify_with_drift

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

# 50257 rather than a power of two: with a power-of-two vocabulary the FNV-1a
# chain leaves most low bits of the digest fixed and outputs repeat heavily.
MODEL_DEFAULTS = {"model_id": "ref", "model_seed": 0, "vocab": 50257, "max_output": 4096,
                  "prompt": None, "prompt_len": 16}

DEFAULTS: dict[str, dict[str, Any]] = {
    "replicate": {**MODEL_DEFAULTS, "m": 200, "k": 20, "spans": 5, "span_max": 50, "tamper_segment": None,
                  "drift": None, "drift_seed": 0},
    "sweep-detect": {"k": "20", "f": "2", "r": "1..4", "q": "1..20"},
    "simulate": {**MODEL_DEFAULTS, "k": "20", "f": "2", "r": "1..4", "q": "1..20", "trials": 10000,
                 "mode": "oracle", "m": 400, "max_outside": 2},
    "calibrate-cost": {"rows": None, "include_prefill": False, "fit_rows": None},
}
COMMON_DEFAULTS = {"seed": 0, "out": "asymverify-out", "format": "csv", "svg": False}


class UsageError(AsymVerifyError, ValueError):
    pass


def parse_int_list(spec: Any) -> list[int]:
    """``5``, ``"1..4"``, ``"1-4"``, ``"1,2,8"`` or ``[1, 2]`` to a list of ints."""
    if isinstance(spec, int):
        return [spec]
    if isinstance(spec, (list, tuple)):
        return [int(x) for x in spec]
    out: list[int] = []
    for part in str(spec).split(","):
        part = part.strip()
        if not part:
            continue
        sep = ".." if ".." in part else ("-" if "-" in part[1:] else None)
        if sep:
            lo, hi = part.split(sep, 1)
            lo_i, hi_i = int(lo), int(hi)
            if hi_i < lo_i:
                raise UsageError(f"empty range {part!r}")
            out.extend(range(lo_i, hi_i + 1))
        else:
            out.append(int(part))
    if not out:
        raise UsageError(f"no values in {spec!r}")
    return out


def _merge(command: str, args: argparse.Namespace) -> dict:
    cfg = {**COMMON_DEFAULTS, **DEFAULTS[command]}
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        flat = {k.replace("-", "_"): v for k, v in data.items() if not isinstance(v, dict)}
        section = {k.replace("-", "_"): v for k, v in data.get(command, {}).items()}
        for src in (flat, section):
            for key, value in src.items():
                if key not in cfg:
                    raise UsageError(f"unknown config key {key!r} for {command}")
                cfg[key] = value
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _model(cfg: dict) -> ModelConfig:
    return ModelConfig(str(cfg["model_id"]), int(cfg["model_seed"]), int(cfg["vocab"]), int(cfg["max_output"]))


def _prompt(cfg: dict, model: ModelConfig) -> list[int]:
    if cfg["prompt"] is not None:
        return parse_int_list(cfg["prompt"])
    key = streams.derive_key(int(cfg["seed"]), 4)
    return [streams.draw(key, i) % model.vocab_size for i in range(int(cfg["prompt_len"]))]


def _grid(cfg: dict) -> list[AuditParams]:
    try:
        axes = {name: parse_int_list(cfg[name]) for name in ("k", "f", "r", "q")}
        return sorted({AuditParams(k, f, r, q) for k in axes["k"] for f in axes["f"]
                       for r in axes["r"] for q in axes["q"]})
    except ValueError as exc:
        raise UsageError(f"invalid grid: {exc}") from None


class _Output:
    def __init__(self, cfg: dict, command: str):
        self.dir = Path(cfg["out"])
        self.command = command
        self.format = cfg["format"]
        if self.format not in ("csv", "json"):
            raise UsageError("--format must be csv or json")
        self.dir.mkdir(parents=True, exist_ok=True)

    def table(self, header: Sequence[str], rows: list[Sequence]) -> Path:
        if self.format == "csv":
            path = self.dir / f"{self.command}.csv"
            path.write_text(records.csv_text(header, rows))
        else:
            path = self.dir / f"{self.command}.json"
            path.write_text(records.json_rows_text(header, rows))
        return path

    def record(self, config: dict, results: dict) -> Path:
        rec = records.make_record(self.command, config, results)
        return records.write_record(rec, self.dir / f"{self.command}.record.json")

    def svg(self, chart: LineChart) -> Path:
        path = self.dir / f"{self.command}.svg"
        path.write_text(chart.render())
        return path


def _print_table(header: Sequence[str], rows: list[Sequence]) -> None:
    cells = [[records._cell(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(header)]
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for r in cells:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)))


def _random_spans(seed: int, m: int, count: int, span_max: int) -> list[tuple[int, int]]:
    spans = []
    for i in range(count):
        key = streams.derive_key(seed, 3, i)
        start = streams.draw(key, 0) % m
        length = 1 + streams.draw(key, 1) % span_max
        spans.append((start, min(m, start + length)))
    return spans


def cmd_replicate(cfg: dict) -> tuple[int, dict]:
    """Generate, tamper one segment, replay spans on both claims."""
    model = _model(cfg)
    m, k = int(cfg["m"]), int(cfg["k"])
    seed = int(cfg["seed"])
    honest = honest_claim(model, _prompt(cfg, model), m, k)
    seg = cfg["tamper_segment"]
    seg = streams.draw(streams.derive_key(seed, 5), 0) % k if seg is None else int(seg)
    if not 0 <= seg < k:
        raise UsageError(f"tamper_segment must lie in [0, {k})")
    plan = TamperPlan(SEGMENT_INJECTION, {seg}, AltModel(default_alt_model(model)))
    tampered = apply_tamper(honest, plan, reanchor=True)
    drift = None if cfg["drift"] is None else DriftSpec(float(cfg["drift"]), int(cfg["drift_seed"]))

    spans = _random_spans(seed, m, int(cfg["spans"]), int(cfg["span_max"]))
    rows = []
    outcomes = []
    unexpected = 0
    for label, claim, claim_spans in (("honest", honest, spans),
                                      ("tampered", tampered, spans + [honest.segmentation.span(seg)])):
        bad = set(replay_divergence(model, claim))
        for span in claim_spans:
            if drift is None:
                out = verify_span(model, claim, span)
            else:
                out = verify_with_drift(model, drift, claim, span)
            expected = "mismatch" if any(span[0] <= p < span[1] for p in bad) else "match"
            if drift is None and out.verdict != expected:
                unexpected += 1
            rows.append((label, span[0], span[1], out.verdict, out.first_mismatch, expected,
                         out.cost.prefill_tokens, out.cost.decode_tokens))
            outcomes.append({"claim": label, **out.to_dict(), "expected": expected})

    _print_table(records.REPLICATE_HEADER, rows)
    if drift is not None:
        print(f"drift mode: flip_probability={drift.flip_probability}; expected column assumes a matching stack")
    out = _Output(cfg, "replicate")
    out.table(records.REPLICATE_HEADER, rows)
    results = {
        "model": model.to_dict(),
        "m": m,
        "k": k,
        "tampered_segment": seg,
        "tampered_span": list(honest.segmentation.span(seg)),
        "drift_mode": drift is not None,
        "drift": None if drift is None else drift.to_dict(),
        "outcomes": outcomes,
        "unexpected": unexpected,
    }
    out.record(cfg, results)
    if unexpected:
        print(f"{unexpected} verdict(s) disagree with the replay oracle", file=sys.stderr)
        return EXIT_FAIL, results
    return EXIT_OK, results


def _detect_chart(title: str) -> LineChart:
    return LineChart(title=title, xlabel="validators q", ylabel="P(detect)", y_range=(0.0, 1.0))


def cmd_sweep_detect(cfg: dict) -> tuple[int, dict]:
    grid = _grid(cfg)
    rows = sweep(grid)
    table = [(r.k, r.f, r.r, r.q, r.p_detect) for r in rows]
    out = _Output(cfg, "sweep-detect")
    path = out.table(records.SWEEP_HEADER, table)
    if cfg["svg"]:
        chart = _detect_chart("Exact detection probability")
        groups: dict[tuple, list] = {}
        for r in rows:
            groups.setdefault((r.k, r.f, r.r), []).append(r)
        for (k, f, r), pts in groups.items():
            chart.add(Series(f"k={k} f={f} r={r}", [p.q for p in pts], [p.p_detect for p in pts]))
        out.svg(chart)
    results = {"rows": [dict(zip(records.SWEEP_HEADER, row)) for row in table]}
    out.record(cfg, results)
    print(f"wrote {len(table)} rows to {path}")
    return EXIT_OK, results


def cmd_simulate(cfg: dict) -> tuple[int, dict]:
    grid = _grid(cfg)
    mode = cfg["mode"]
    if mode not in simnet.MODES:
        raise UsageError(f"--mode must be one of {simnet.MODES}")
    trials = int(cfg["trials"])
    if trials < 1:
        raise UsageError("--trials must be >= 1")
    model = _model(cfg)
    prompt = _prompt(cfg, model)
    m = int(cfg["m"])
    seed = int(cfg["seed"])
    templates = {}
    table = []
    points = []
    outside = 0
    disagreements = 0
    for params in grid:
        if params.k not in templates:
            if params.k > m:
                raise UsageError(f"k={params.k} exceeds m={m}")
            templates[params.k] = honest_claim(model, prompt, m, params.k)
        pseed = simnet.point_seed(seed, params)
        rep = simnet.run_experiment(templates[params.k], params, trials, pseed, mode,
                                    keep_trials=mode == simnet.FULL)
        point = {**rep.to_dict(), "point_seed": pseed}
        if mode == simnet.FULL:
            paired = simnet.oracle_detections(params, trials, pseed)
            agree = int(sum(bool(a) == o.detected for a, o in zip(paired, rep.outcomes)))
            disagreements += trials - agree
            point["paired_oracle_agreement"] = agree / trials
            cost = sum((o.total_cost for o in rep.outcomes), CostLedger())
            point["total_cost"] = cost.to_dict()
        points.append(point)
        outside += not rep.within_3sigma
        table.append((params.k, params.f, params.r, params.q, trials, rep.exact_detect, rep.empirical_detect,
                      rep.abs_error, rep.three_sigma, rep.within_3sigma))

    out = _Output(cfg, "simulate")
    path = out.table(records.SIMULATE_HEADER, table)
    if cfg["svg"]:
        chart = _detect_chart(f"Exact (lines) vs empirical (markers), N={trials}")
        groups: dict[tuple, list] = {}
        for row in table:
            groups.setdefault(row[:3], []).append(row)
        for i, ((k, f, r), pts) in enumerate(groups.items()):
            color = PALETTE[i % len(PALETTE)]
            chart.add(Series(f"k={k} f={f} r={r}", [p[3] for p in pts], [p[5] for p in pts], color=color))
            chart.add(Series(f"empirical r={r}", [p[3] for p in pts], [p[6] for p in pts], markers=True,
                             line=False, color=color))
        out.svg(chart)
    max_outside = int(cfg["max_outside"])
    results = {"points": points, "outside_3sigma": outside, "max_outside": max_outside,
               "paired_disagreements": disagreements if mode == simnet.FULL else None}
    out.record(cfg, results)
    print(f"{len(table)} grid points, {outside} outside 3 sigma (allowed {max_outside}); wrote {path}")
    status = EXIT_OK
    if outside > max_outside:
        print("statistical acceptance failed", file=sys.stderr)
        status = EXIT_FAIL
    if disagreements:
        print(f"{disagreements} full-mode verdicts disagree with the oracle", file=sys.stderr)
        status = EXIT_FAIL
    return status, results


def cmd_calibrate_cost(cfg: dict) -> tuple[int, dict]:
    rows = bench.load_rows(cfg["rows"])
    include_prefill = bool(cfg["include_prefill"])
    which = cfg["fit_rows"] or ("all" if include_prefill else "verification")
    if which not in ("all", "verification"):
        raise UsageError("--fit-rows must be all or verification")
    fit_rows = rows if which == "all" else [r for r in rows if r.kind == "verification"]
    try:
        model = bench.fit(fit_rows, include_prefill=include_prefill)
    except UnderdeterminedFitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE, {}
    report = model.report
    warnings = []
    if report.degenerate:
        warnings.append("design matrix is rank deficient (prefill + decode tokens constant); "
                        "prefill rate dropped and fixed at 0")

    gens = [r for r in rows if r.kind == "generation"]
    ratios = {r.label: r for r in bench.ratio_table(rows)} if len(gens) == 1 else {}
    table = []
    for r in rows:
        pred = bench.estimate(model, CostLedger(r.prefill_extra_tokens if model.prefill_rate_s else 0,
                                                      r.decode_tokens))
        ratio = ratios[r.label].ratio if r.label in ratios else None
        table.append((r.label, r.seconds, ratio, r.reported_ratio, pred, (pred - r.seconds) / r.seconds))

    print(f"fit on {report.n_rows} rows: overhead={model.fixed_overhead_s:.4f}s "
          f"decode={model.decode_rate_s:.5f}s/token prefill={model.prefill_rate_s:.5f}s/token "
          f"R^2={report.r2:.6f} max|residual|={report.max_relative_residual:.2%}")
    for w in warnings:
        print(f"warning: {w}")
    _print_table(records.CALIBRATE_HEADER, table)
    out = _Output(cfg, "calibrate-cost")
    out.table(records.CALIBRATE_HEADER, table)
    results = {
        "model": model.to_dict(),
        "fit_rows": which,
        "warnings": warnings,
        "ratios": [r.to_dict() for r in ratios.values()],
    }
    out.record(cfg, results)
    return EXIT_OK, results


COMMANDS: dict[str, Callable[[dict], tuple[int, dict]]] = {
    "replicate": cmd_replicate,
    "sweep-detect": cmd_sweep_detect,
    "simulate": cmd_simulate,
    "calibrate-cost": cmd_calibrate_cost,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), help="table format")
    common.add_argument("--svg", action="store_true", default=None, help="also write an SVG chart")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--model-id", dest="model_id")
    model.add_argument("--model-seed", dest="model_seed", type=int)
    model.add_argument("--vocab", type=int)
    model.add_argument("--max-output", dest="max_output", type=int)
    model.add_argument("--prompt", help="comma-separated prompt token ids")
    model.add_argument("--prompt-len", dest="prompt_len", type=int, help="length of a seeded random prompt")

    grid = argparse.ArgumentParser(add_help=False)
    for name, what in (("k", "segments"), ("f", "tampered segments"), ("r", "checks per validator"),
                       ("q", "validators")):
        grid.add_argument(f"--{name}", help=f"{what}: N, A..B or comma list")

    p = argparse.ArgumentParser(prog="asymverify", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    rep = sub.add_parser("replicate", parents=[common, model], help="targeted replay of honest and tampered claims")
    rep.add_argument("--m", type=int, help="output length")
    rep.add_argument("--k", type=int, help="segments")
    rep.add_argument("--spans", type=int, help="number of random spans to check")
    rep.add_argument("--span-max", dest="span_max", type=int)
    rep.add_argument("--tamper-segment", dest="tamper_segment", type=int)
    rep.add_argument("--drift", type=float, help="validator flip probability (simulated hardware drift)")
    rep.add_argument("--drift-seed", dest="drift_seed", type=int)

    sub.add_parser("sweep-detect", parents=[common, grid], help="exact detection probability over a grid")

    sim = sub.add_parser("simulate", parents=[common, model, grid], help="Monte Carlo check of detection rates")
    sim.add_argument("--trials", type=int)
    sim.add_argument("--mode", choices=simnet.MODES)
    sim.add_argument("--m", type=int, help="output length of the audited claim")
    sim.add_argument("--max-outside", dest="max_outside", type=int,
                     help="grid points allowed outside 3 sigma")

    cal = sub.add_parser("calibrate-cost", parents=[common], help="fit the linear cost model and effort ratios")
    cal.add_argument("--rows", help="JSON measurement rows (default: bundled reference timings)")
    cal.add_argument("--include-prefill", dest="include_prefill", action="store_true", default=None)
    cal.add_argument("--fit-rows", dest="fit_rows", choices=("all", "verification"))
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _merge(args.command, args)
        status, _ = COMMANDS[args.command](cfg)
    except (AsymVerifyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return status


if __name__ == "__main__":
    sys.exit(main())
