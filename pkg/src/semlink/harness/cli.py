"""Command-line entry point: ``semlink <subcommand> [flags]``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

import argparse
import os
import sys

import numpy as np

from ..kb import save_kb
from .config import ALLOCATORS, AXES, ConfigError, load_config, make_config
from .experiment import (compare_allocators, export_importance_map, load_artifacts, run_episode,
                         run_sweep, train_policy, write_training_curve)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _parse_values(text):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            v = float(tok)
        except ValueError as exc:
            raise ConfigError(f"sweep value {tok!r} is not a number") from exc
        out.append(int(v) if v.is_integer() and "." not in tok else v)
    if not out:
        raise ConfigError("--values needs at least one number")
    return tuple(out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--seed", type=int, help="master seed (u64)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--profile", choices=("desk", "full"))
    common.add_argument("--allocator", help="allocator name, or a comma list where several apply")
    common.add_argument("--axis", choices=tuple(AXES))
    common.add_argument("--values", help="comma-separated sweep values")
    common.add_argument("--trials", type=int)
    common.add_argument("--kb", help="knowledge-base file (default <out>/kb.bin)")

    p = argparse.ArgumentParser(prog="semlink", description="Semantic OFDM link simulator")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("train-codec", parents=[common], help="train codec, store codec and task relevance")
    sub.add_parser("train-dppo", parents=[common], help="train a bit-allocation policy")
    sub.add_parser("run-sweep", parents=[common], help="sweep one axis and write a CSV table")
    sub.add_parser("compare", parents=[common], help="paired allocator comparison")
    sub.add_parser("export-importance", parents=[common], help="per-semantic importance and bits")
    sub.add_parser("selftest", parents=[common], help="quick end-to-end check")
    return p


def config_from_args(args):
    over = {}
    if args.seed is not None:
        if args.seed < 0 or args.seed >= 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        over["seed"] = args.seed
    if args.out:
        over["out"] = args.out
    if args.trials is not None:
        over["trials"] = args.trials
    if args.axis:
        over["axis"] = args.axis
    if args.values:
        over["values"] = _parse_values(args.values)
    if args.allocator:
        names = tuple(a.strip() for a in args.allocator.split(",") if a.strip())
        bad = [a for a in names if a not in ALLOCATORS]
        if bad:
            raise ConfigError(f"unknown allocator(s) {bad}; choose from {ALLOCATORS}")
        over["allocator"] = names[0]
        over["allocators"] = names
    if args.config:
        cfg = load_config(args.config, args.profile)
        cfg = make_config({**cfg.to_dict(), **over}, args.profile or cfg.profile)
    else:
        cfg = make_config(over, args.profile)
    kb = args.kb or cfg.kb or os.path.join(cfg.out, "kb.bin")
    return cfg.replace(kb=kb)


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def cmd_train_codec(cfg):
    art = load_artifacts(cfg.replace(kb=None))
    save_kb(cfg.kb, art.knowledge_base())
    print(f"codec train accuracy {art.codec.train_accuracy:.4f}; wrote {cfg.kb}")


def cmd_train_dppo(cfg):
    art = load_artifacts(cfg, require_kb=True)
    variant = cfg.allocator if cfg.allocator in ("dppo", "dppo_simplified") else "dppo"
    res = train_policy(cfg, art, variant)
    name = "training_curve.csv" if variant == "dppo" else f"training_curve_{variant}.csv"
    write_training_curve(res.curve, os.path.join(cfg.out, name))
    save_kb(cfg.kb, art.knowledge_base())
    r = res.rewards()
    print(f"{variant}: final-50 mean reward {r[-50:].mean():.4f}; wrote {cfg.kb}")


def cmd_run_sweep(cfg):
    if cfg.axis is None:
        raise ConfigError("run-sweep needs --axis (or 'axis' in the config)")
    text, _ = run_sweep(cfg)
    path = os.path.join(cfg.out, f"sweep_{cfg.axis}.csv")
    _write(path, text)
    print(f"wrote {path}")


def cmd_compare(cfg):
    text, _ = compare_allocators(cfg)
    path = os.path.join(cfg.out, "compare.csv")
    _write(path, text)
    print(f"wrote {path}")


def cmd_export_importance(cfg):
    art = load_artifacts(cfg)
    path = os.path.join(cfg.out, "importance.csv")
    _write(path, export_importance_map(cfg, art))
    print(f"wrote {path}")


SELFTEST_OVERRIDES = {"C": 8, "d": 16, "n_samples": 400, "n_train": 300, "codec_epochs": 150,
                      "hidden": 32, "B": 24, "trials": 6, "dppo_iterations": 3,
                      "dppo": {"hidden": [16, 16], "epochs": 2, "batch_episodes": 2}}


def cmd_selftest(cfg):
    """Small end-to-end run: codec, a short DPPO fit, all allocators on a
    few paired episodes, and bookkeeping checks.  Writes ``selftest.csv``."""
    scfg = make_config({**cfg.to_dict(), **SELFTEST_OVERRIDES, "kb": None, "axis": "snr_db",
                        "values": (0.0, 10.0),
                        "allocators": ("dppo", "dppo_simplified", "eam", "rbam", "ram",
                                       "analog_baseline")}, "desk")
    art = load_artifacts(scfg)
    for variant in ("dppo", "dppo_simplified"):
        train_policy(scfg, art, variant)
    text, results = run_sweep(scfg, art)
    problems = []
    code = scfg.link().code
    map_size = scfg.W * scfg.H
    for (value, name), eps in results.items():
        for r in eps:
            if not r.ok:
                problems.append(f"{name}@{value}: failed in {r.failed_stage}")
            elif name != "analog_baseline":
                if r.bits_used != map_size * r.bits.sum() or r.bits.sum() > scfg.B:
                    problems.append(f"{name}@{value}: bit accounting mismatch")
                coded = sum(code.coded_length(map_size * b) for b in r.bits)
                if r.coded_bits != coded or r.pad_bits < 0 or (r.pad_bits and (r.coded_bits + r.pad_bits) % 6):
                    problems.append(f"{name}@{value}: coded bit count mismatch")
    again = run_episode(scfg, art, 0, "rbam", 7)
    first = run_episode(scfg, art, 0, "rbam", 7)
    if again.weighted_distortion != first.weighted_distortion or not np.array_equal(again.bits, first.bits):
        problems.append("episode not reproducible")
    path = os.path.join(cfg.out, "selftest.csv")
    _write(path, text)
    if problems:
        for p in problems:
            print("FAIL", p)
        raise RuntimeError(f"selftest found {len(problems)} problem(s)")
    print(f"selftest ok; wrote {path}")


COMMANDS = {"train-codec": cmd_train_codec, "train-dppo": cmd_train_dppo, "run-sweep": cmd_run_sweep,
            "compare": cmd_compare, "export-importance": cmd_export_importance,
            "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = config_from_args(args)
        os.makedirs(cfg.out, exist_ok=True)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure past config is a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
