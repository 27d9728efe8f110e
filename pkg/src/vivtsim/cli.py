"""Command-line front end.

Subcommands:
    run        simulate a trace and print the statistics
    check      simulate with per-event invariant and oracle auditing
    gen-trace  emit a self-contained trace + page table + config bundle
    rlut-size  print the reverse-table storage cost table

Exit codes: 0 success, 1 invariant/oracle violation, 2 usage or parse error.
"""

import argparse
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .geometry import CacheConfig, ConfigError
from .mmu import PageTable, PageTableError, dump_page_table, load_page_table
from .rlut import bytes_needed
from .sim import InvariantViolationError, run_trace
from .stats import report
from .trace import TraceError, format_trace, parse_trace
from .tracegen import generate_trace


class ConfigFileError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


@dataclass(frozen=True)
class RunConfig:
    cache: CacheConfig = CacheConfig()
    cores: int = 1
    translate_latency: int = 2
    fetch_latency: int = 8


_CACHE_KEYS = ("cache_size", "line_size", "assoc_log2", "page_size",
               "va_width", "pa_width", "synonym_limit")
_RUN_KEYS = ("cores", "translate_latency", "fetch_latency")


def parse_config(text: str) -> RunConfig:
    """Parse the `key = value` config format; unknown keys are rejected and
    missing keys fall back to the defaults."""
    cache_kwargs = {}
    run_kwargs = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError(line_no, f"expected `key = value`, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        try:
            number = int(value, 0)
        except ValueError:
            raise ConfigFileError(line_no, f"bad integer {value!r} for {key}") from None
        if key in _CACHE_KEYS:
            if key in cache_kwargs:
                raise ConfigFileError(line_no, f"duplicate key {key}")
            cache_kwargs[key] = number
        elif key in _RUN_KEYS:
            if key in run_kwargs:
                raise ConfigFileError(line_no, f"duplicate key {key}")
            run_kwargs[key] = number
        else:
            raise ConfigFileError(line_no, f"unknown key {key!r}")
    return RunConfig(cache=CacheConfig(**cache_kwargs), **run_kwargs)


def render_config(config: RunConfig) -> str:
    lines = [f"{key} = {getattr(config.cache, key)}" for key in _CACHE_KEYS]
    lines += [f"{key} = {getattr(config, key)}" for key in _RUN_KEYS]
    return "\n".join(lines) + "\n"


def rlut_size_table(synonym_limits=(1, 2)) -> str:
    lines = ["Cache-size  S  Bytes-needed"]
    for s in synonym_limits:
        for kb in (4, 8, 16, 32):
            lines.append(f"{kb:>7}KB  {s}  {bytes_needed(kb * 1024, s):>6}")
    return "\n".join(lines) + "\n"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vivtsim",
        description="Trace-driven simulator for synonym-safe, coherent VIVT caches.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_args(p):
        p.add_argument("--config", required=True, help="config file (key = value lines)")
        p.add_argument("--trace", required=True, help="trace file")
        p.add_argument("--pagetable", help="page table file (defaults to identity mapping)")
        p.add_argument("--csv", action="store_true", help="emit CSV instead of a table")

    p_run = sub.add_parser("run", help="simulate a trace")
    add_run_args(p_run)
    p_run.add_argument("--check", action="store_true",
                       help="audit invariants and the oracle after every event")

    p_check = sub.add_parser("check", help="simulate with per-event auditing")
    add_run_args(p_check)

    p_gen = sub.add_parser("gen-trace", help="generate a trace bundle")
    p_gen.add_argument("--seed", type=int, required=True)
    p_gen.add_argument("--events", type=int, required=True)
    p_gen.add_argument("--cores", type=int, default=1)
    p_gen.add_argument("--synonym-groups", type=int, default=0)
    p_gen.add_argument("--write-ratio", type=float, default=0.3)
    p_gen.add_argument("--ctx-switch-ratio", type=float, default=0.0)
    p_gen.add_argument("--config", help="config file the trace should target")
    p_gen.add_argument("-o", "--out", required=True, help="output directory")

    p_size = sub.add_parser("rlut-size", help="print the reverse-table storage table")
    p_size.add_argument("--s", type=int, help="print rows for one synonym limit only")
    return parser


def _load_run_inputs(args):
    config = parse_config(Path(args.config).read_text())
    events = parse_trace(Path(args.trace).read_text())
    if args.pagetable:
        table = load_page_table(Path(args.pagetable).read_text())
    else:
        table = PageTable(identity=True)
    return config, events, table


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in ("run", "check"):
            config, events, table = _load_run_inputs(args)
            check = args.command == "check" or getattr(args, "check", False)
            stats = run_trace(events, config.cache, core_count=config.cores,
                              page_table=table, check_mode=check,
                              translate_latency=config.translate_latency,
                              fetch_latency=config.fetch_latency)
            sys.stdout.write(report(stats, csv_form=args.csv))
            return 0

        if args.command == "gen-trace":
            if args.config:
                config = parse_config(Path(args.config).read_text())
            else:
                config = RunConfig()
            config = replace(config, cores=args.cores)
            events, table = generate_trace(
                args.seed, args.cores, args.events, args.synonym_groups,
                args.write_ratio, args.ctx_switch_ratio, config.cache)
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            (out / "trace.txt").write_text(format_trace(events))
            (out / "pagetable.txt").write_text(dump_page_table(table))
            (out / "config.txt").write_text(render_config(config))
            print(f"wrote {out / 'trace.txt'}, {out / 'pagetable.txt'}, {out / 'config.txt'}")
            return 0

        if args.command == "rlut-size":
            limits = (args.s,) if args.s is not None else (1, 2)
            sys.stdout.write(rlut_size_table(limits))
            return 0
    except InvariantViolationError as exc:
        print(f"violation: {exc}", file=sys.stderr)
        for violation in exc.violations[:20]:
            print(f"  {violation}", file=sys.stderr)
        return 1
    except (ConfigError, ConfigFileError, TraceError, PageTableError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    raise SystemExit(main())
