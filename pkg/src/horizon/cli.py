"""Command-line front end: ``horizon run|sweep|probe``.

Exit codes: 0 success, 2 configuration error, 3 protocol error, 4 range
error. ``HORIZON_SEED`` in the environment overrides the config's ``seed``.
"""

import argparse
import csv
import io
import os
import sys
from pathlib import Path

from . import analysis
from .config import RunConfig, format_config, parse_config
from .engine import FRAMES_PER_BLOCK, RolloutCommand, build_engine
from .errors import ConfigError, HorizonError
from .export import map_to_csv, map_to_pgm, write_text

SWEEP_PARAMS = ("capacity", "delta", "f0", "n_blocks")
BAND_WIDTH = 3


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    cfg = parse_config(text)
    env = os.environ.get("HORIZON_SEED")
    if env is not None:
        try:
            cfg = cfg.replace(seed=int(env))
        except ValueError:
            raise ConfigError(f"HORIZON_SEED must be an integer, got {env!r}") from None
    return cfg


def emit(out, trace, fmap, cfg, layer):
    out = Path(out)
    write_text(out / "trace.jsonl", trace.trace_jsonl())
    write_text(out / "cache_trace.jsonl", trace.cache_jsonl())
    write_text(out / f"attnmap_layer{layer}.csv", map_to_csv(fmap))
    write_text(out / f"attnmap_layer{layer}.pgm", map_to_pgm(fmap))
    write_text(out / "config.txt", format_config(cfg))


def capture_layer(cfg):
    return cfg.layers // 2 if cfg.capture_layer is None else cfg.capture_layer


def cmd_run(cfg: RunConfig, out):
    engine = build_engine(cfg)
    trace = engine.rollout(cfg.n_blocks, cfg.schedule)
    fmap = analysis.trace_attention_map(trace)
    emit(out, trace, fmap, cfg, engine.capture_layer)
    return trace, fmap


def cmd_probe(cfg: RunConfig, out):
    fmap, trace = analysis.rope_probe_map(cfg, return_trace=True)
    emit(out, trace, fmap, cfg, capture_layer(cfg))
    return trace, fmap


def first_cut_frame(cfg):
    for c in cfg.schedule:
        if c.kind == "cut" and c.at_block <= cfg.n_blocks:
            return FRAMES_PER_BLOCK * (c.at_block - 1) + 1
    return None


def map_metrics(fmap, cut_frame):
    row = {
        "band_mass": analysis.band_mass(fmap, BAND_WIDTH),
        "sink_column_mass": analysis.sink_column_mass(fmap),
        "cut_disjointness": "",
        "segment_disjointness": "",
    }
    if cut_frame is not None:
        row["cut_disjointness"] = analysis.cut_disjointness(fmap, cut_frame)
        row["segment_disjointness"] = analysis.cut_disjointness(fmap, cut_frame, rows="segment")
    return row


def sweep_member(cfg: RunConfig, param, value):
    if param == "delta":
        if not any(c.kind == "cut" for c in cfg.schedule):
            raise ConfigError("a delta sweep needs at least one cut in the schedule")
        sched = [RolloutCommand.cut(value, c.at_block, forced=c.forced) if c.kind == "cut" else c
                 for c in cfg.schedule]
        # the sweep is an extrapolation study: out-of-horizon jumps still run
        return cfg.replace(schedule=sched, force_cut=True).validate()
    return cfg.replace(**{param: value}).validate()


def cmd_sweep(cfg: RunConfig, param, values, out):
    if param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    if not values:
        raise ConfigError("sweep needs at least one value")
    out = Path(out)
    rows = []
    for value in values:
        member = sweep_member(cfg, param, value)
        sub = out / f"{param}_{value}"
        trace, fmap = cmd_run(member, sub)
        pmap = analysis.rope_probe_map(member)
        cut_frame = first_cut_frame(member)
        row = {"param": param, "value": value}
        row.update(map_metrics(fmap, cut_frame))
        row.update({f"probe_{k}": v for k, v in map_metrics(pmap, cut_frame).items()})
        row["max_coordinate"] = max(trace.all_coordinates())
        row["peak_residency"] = trace.peak_residency()
        deltas = [c.delta for c in member.schedule if c.kind == "cut" and c.at_block <= member.n_blocks]
        row["out_of_horizon"] = any(d > member.f_limit for d in deltas)
        rows.append(row)

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (f"{v:.9g}" if isinstance(v, float) else v) for k, v in r.items()})
    write_text(out / "summary.csv", buf.getvalue())
    if param == "delta":
        write_text(out / "monotonicity.txt", monotonicity_report(rows))
    return rows


def monotonicity_report(rows):
    pts = sorted((r["value"], r["probe_cut_disjointness"]) for r in rows)
    ok = all(b[1] >= a[1] for a, b in zip(pts, pts[1:]))
    lines = [f"probe_cut_disjointness nondecreasing in delta: {'yes' if ok else 'no'}"]
    lines += [f"delta={d} probe_cut_disjointness={v:.9g}" for d, v in pts]
    return "\n".join(lines) + "\n"


def _parse_values(text):
    parts = [p.strip() for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError("--values is empty")
    try:
        return [int(p) for p in parts]
    except ValueError:
        raise ConfigError(f"--values must be integers, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="horizon", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="roll out the toy model and write traces and maps")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--force-cut", action="store_true", help="allow cuts beyond the trained horizon")
    s = sub.add_parser("sweep", help="repeat a run over one parameter")
    s.add_argument("--config", required=True)
    s.add_argument("--param", required=True)
    s.add_argument("--values", required=True)
    s.add_argument("--out", required=True)
    pr = sub.add_parser("probe", help="run with the analytic RoPE probe head")
    pr.add_argument("--config", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--force-cut", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if getattr(args, "force_cut", False):
            cfg = cfg.replace(force_cut=True)
        if args.command == "run":
            cmd_run(cfg, args.out)
        elif args.command == "probe":
            cmd_probe(cfg, args.out)
        else:
            rows = cmd_sweep(cfg, args.param, _parse_values(args.values), args.out)
            if args.param == "delta":
                sys.stdout.write(monotonicity_report(rows))
    except HorizonError as exc:
        print(f"horizon: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
