"""Command line entry point ``levyeuler``.

Exit status: 0 when every verdict passes, 1 on a failed verdict or too many
aborted paths, 2 on an invalid config.
"""
from __future__ import annotations

import argparse
import sys
from importlib import resources
from pathlib import Path

from .config import ConfigError, ExperimentConfig, load, parse
from .levy_measure import ConfigurationError
from .path_driver import build_skeleton

EXIT_OK, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


def preset_names() -> list[str]:
    root = resources.files("levyeuler") / "presets"
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    name = name[:-4] if name.endswith(".cfg") else name
    return (resources.files("levyeuler") / "presets" / f"{name}.cfg").read_text(encoding="utf-8")


def load_any(ref: str) -> ExperimentConfig:
    """A config path, or the name of a shipped preset."""
    path = Path(ref)
    if path.is_file():
        return load(path)
    stem = ref[:-4] if ref.endswith(".cfg") else ref
    if stem in preset_names():
        return parse(preset_text(stem), f"preset:{stem}.cfg")
    raise ConfigError("no such config file or preset", None, ref)


def _cmd_run(args) -> int:
    from .runner import run

    cfg = load_any(args.config)
    res, out = run(cfg, args.out, args.workers)
    for c in res.checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}")
    if not res.valid:
        print(f"INVALID  aborted paths {res.aborted}/{res.paths}")
    print(f"verdict: {'pass' if res.passed else 'fail'}  ({out})")
    return EXIT_OK if res.passed else EXIT_FAIL


def _cmd_presets(args) -> int:
    for name in preset_names():
        cfg = parse(preset_text(name), f"preset:{name}.cfg")
        print(f"{name:40s} {cfg.kind:9s} {cfg.claim}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    cfg = load_any(args.config)
    print(f"ok: {cfg.name} ({cfg.kind}), hash {cfg.config_hash}")
    return EXIT_OK


def _cmd_dump_skeleton(args) -> int:
    cfg = load_any(args.config)
    skel = build_skeleton(cfg.seed, args.path_index, cfg.driver_spec())
    sys.stdout.write(skel.to_json() + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="levyeuler", description="Euler-scheme convergence experiments for "
                                                              "stable-like Lévy-driven SDEs.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment config or preset")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (overrides LEVYEULER_OUT)")
    r.add_argument("--workers", type=int, help="worker processes (overrides LEVYEULER_WORKERS)")
    r.set_defaults(fn=_cmd_run)
    p = sub.add_parser("presets", help="list shipped presets")
    p.set_defaults(fn=_cmd_presets)
    v = sub.add_parser("validate", help="parse and validate a config")
    v.add_argument("config")
    v.set_defaults(fn=_cmd_validate)
    d = sub.add_parser("dump-skeleton", help="print one path skeleton as JSON")
    d.add_argument("config")
    d.add_argument("path_index", type=int)
    d.set_defaults(fn=_cmd_dump_skeleton)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ConfigurationError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
