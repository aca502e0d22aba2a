"""Command line: ``run`` one episode, ``sweep`` a parameter, ``verify`` oracles."""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .harness import (
    SWEEPABLE,
    ExperimentConfig,
    HarnessError,
    audit_violations,
    generate_instance,
    raw_records,
    run_episode,
    run_sweep_episodes,
    summarize,
    to_csv,
    RAW_FIELDS,
    CSV_FIELDS,
    topology_summary,
)
from .schedulers import SchedulerKind

ALIASES = {"U": "num_devices", "F": "num_files", "C": "connectivity", "E": "mean_erasure",
           "scheduler": "schedulers", "jitter": "erasure_jitter"}
FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(name: str, raw: str):
    if name in ("schedulers",):
        return tuple(s.strip() for s in raw.split(",") if s.strip())
    if name == "sweep_values":
        return tuple(float(v) for v in raw.split(",") if v.strip())
    if name == "sweep_param":
        return raw.strip() or None
    if name == "baseline_complete_overlay":
        low = raw.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise ValueError(f"not a boolean: {raw!r}")
        return low in ("true", "1", "yes")
    if name in ("num_devices", "num_files", "max_cluster_size", "iterations", "seed"):
        return int(raw)
    return float(raw)


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment; keys may use the short aliases."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, _, value = (p.strip() for p in line.partition("="))
        name = ALIASES.get(key, key)
        if name not in FIELDS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        try:
            out[name] = _convert(name, value)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return out


def format_config(cfg: ExperimentConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if isinstance(v, tuple):
            v = ",".join(str(x) for x in v)
        elif v is None:
            v = ""
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("-U", "--num-devices", type=int, dest="num_devices")
    p.add_argument("-F", "--num-files", type=int, dest="num_files")
    p.add_argument("-C", "--connectivity", type=float)
    p.add_argument("-E", "--mean-erasure", type=float, dest="mean_erasure")
    p.add_argument("--erasure-jitter", type=float, dest="erasure_jitter")
    p.add_argument("--pmp-factor", type=float, dest="pmp_factor")
    p.add_argument("--schedulers", help="comma-separated: " + ",".join(k.value for k in SchedulerKind))
    p.add_argument("--max-cluster-size", type=int, dest="max_cluster_size")
    p.add_argument("--iterations", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--baseline-complete-overlay", action="store_const", const=True,
                   dest="baseline_complete_overlay")


def build_config(args) -> ExperimentConfig:
    values = {}
    if args.config:
        values.update(parse_config_text(args.config.read_text()))
    for name in FIELDS:
        v = getattr(args, name, None)
        if v is None:
            continue
        if name == "schedulers":
            v = _convert(name, v)
        values[name] = v
    if getattr(args, "param", None):
        values["sweep_param"] = args.param
    if getattr(args, "values", None):
        values["sweep_values"] = _convert("sweep_values", args.values)
    return ExperimentConfig(**values)


def cmd_run(args) -> int:
    cfg = build_config(args)
    kind = SchedulerKind(args.scheduler or cfg.schedulers[0])
    seq = np.random.SeedSequence([cfg.seed, 0, args.episode])
    inst, chan = seq.spawn(2)
    state = generate_instance(cfg, np.random.default_rng(inst))
    if kind is SchedulerKind.SINGLE_TRANSMITTER and cfg.baseline_complete_overlay:
        state = state.with_topology(np.ones_like(state.connectivity))
    out = args.out
    print(f"# {topology_summary(state)} scheduler={kind.value}", file=out)
    res = run_episode(state, kind, np.random.default_rng(chan), max_cluster_size=cfg.max_cluster_size,
                      p_bs=cfg.p_bs, audit=args.audit, keep_plans=True)
    for rec in res.rounds:
        parts = []
        for e in rec.plan.entries:
            who = "BS" if e.transmitter < 0 else str(e.transmitter)
            parts.append(f"{who}:{{{','.join(map(str, sorted(e.files)))}}}->{sorted(e.targets)}")
        flag = " fallback" if rec.fallback else ""
        print(f"round {rec.round}{flag}: " + " ".join(parts), file=out)
        if rec.weights:
            print("  weights " + " ".join(f"{k}={v:.6g}" for k, v in rec.weights.items()), file=out)
    print(f"completion_time {res.completion_time}", file=out)
    for u, m in enumerate(res.metrics):
        print(f"device {u}: demand={m.initial_demand} delay={m.decoding_delay} "
              f"erasures={m.erasure_count} completion={m.completion_round}", file=out)
    if args.audit:
        bad = sum(audit_violations(r.weights) for r in res.rounds)
        if bad:
            print(f"weight ordering violated in {bad} rounds", file=sys.stderr)
            return 1
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args)

    def progress(done):
        if args.verbose:
            print(f"\r{done} episodes", end="", file=sys.stderr, flush=True)

    rows = run_sweep_episodes(cfg, jobs=args.jobs, audit=args.audit, progress=progress)
    if args.verbose:
        print(file=sys.stderr)
    text = to_csv(raw_records(rows), RAW_FIELDS) if args.raw else to_csv(summarize(cfg, rows), CSV_FIELDS)
    if args.output:
        args.output.write_text(text)
    else:
        args.out.write(text)
    if args.audit and any(r.audit_violations for r in rows):
        print("weight ordering violated", file=sys.stderr)
        return 1
    return 0


def cmd_verify(args) -> int:
    from . import verify

    results = verify.run_suites(args.suite, instances=args.instances, seed=args.seed or 0)
    failed = 0
    for r in results:
        print(r.line(), file=args.out)
        failed += not r.passed
    return 1 if failed else 0


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="idnc-d2d", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="one episode with a per-round trace")
    _add_config_args(r)
    r.add_argument("--scheduler", choices=[k.value for k in SchedulerKind])
    r.add_argument("--episode", type=int, default=0, help="iteration index used to derive the seed")
    r.add_argument("--audit", action="store_true", help="log and check per-round plan weights")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="mean completion time per sweep value and scheduler (CSV)")
    _add_config_args(s)
    s.add_argument("--param", choices=sorted(SWEEPABLE))
    s.add_argument("--values", help="comma-separated sweep values")
    s.add_argument("--jobs", type=int, default=1, help="worker processes")
    s.add_argument("--raw", action="store_true", help="one row per episode")
    s.add_argument("--audit", action="store_true", help="check per-round plan weight ordering")
    s.add_argument("-o", "--output", type=Path)
    s.add_argument("-v", "--verbose", action="store_true")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="oracle and property suites")
    v.add_argument("--suite", default="all",
                   choices=["all", "clique", "identity", "objective", "bijection", "erasures", "calibration"])
    v.add_argument("--instances", type=int, help="instances per suite (default per suite)")
    v.add_argument("--seed", type=int)
    v.set_defaults(func=cmd_verify)
    return p


def main(argv=None, out=None) -> int:
    args = make_parser().parse_args(argv)
    args.out = out or sys.stdout
    try:
        return args.func(args)
    except (ValueError, HarnessError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
