"""Command-line front end.

Subcommands: simulate, sweep, gen-trace, classify, verify. Flags override
config-file fields, which override built-in defaults. Exit codes: 0 ok,
1 user error, 2 internal legality violation (a simulator bug, never user
error).
"""

import argparse
import csv
import io
import json
import os
import sys
import time

from . import config as config_mod
from .addrmap import ConflictClass
from .config import ConfigError, SimConfig
from .device import load_command_stream, verify_stream
from .engine import run_simulation
from .trace import SyntheticConfig, generate, parse, serialize, thin_writes

EXIT_OK = 0
EXIT_USER_ERROR = 1
EXIT_LEGALITY = 2

SWEEPABLE = ("rapl_limit", "th_b")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; keep 2 reserved for legality faults.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _common_flags(p):
    p.add_argument("--config", metavar="PATH", help="JSON configuration file")
    p.add_argument("--policy", choices=("BASELINE_FCFS", "MULTIPARTITION", "PALP"))
    p.add_argument("--trace", metavar="PATH", help="trace file (overrides config)")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--rapl", type=float, metavar="X", help="RAPL limit, pJ/access")
    p.add_argument("--thb", type=int, metavar="N", help="starvation threshold")


def build_parser():
    parser = _Parser(prog="pcmsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation and write reports")
    _common_flags(p)
    p.add_argument("--dump-commands", action="store_true",
                   help="also write the issued command stream")

    p = sub.add_parser("sweep", help="run one simulation per parameter value")
    _common_flags(p)
    p.add_argument("--param", required=True, choices=SWEEPABLE)
    p.add_argument("--values", required=True,
                   help="comma-separated parameter values")

    p = sub.add_parser("gen-trace", help="generate a synthetic trace file")
    _common_flags(p)
    p.add_argument("--out-file", required=True, metavar="PATH")
    p.add_argument("--requests", type=int)
    p.add_argument("--read-fraction", type=float)
    p.add_argument("--bank-locality", type=float)
    p.add_argument("--partition-spread", type=float)
    p.add_argument("--inter-arrival", type=float)
    p.add_argument("--write-thinning", type=float, default=0.0, metavar="F",
                   help="drop this fraction of writes (cache absorption)")

    p = sub.add_parser("classify", help="bank-conflict histogram of a trace")
    _common_flags(p)
    p.add_argument("--window", metavar="N|fcfs", default="fcfs",
                   help="conflict window in cycles, or `fcfs` coexistence")

    p = sub.add_parser("verify", help="check a command-stream file offline")
    _common_flags(p)
    p.add_argument("--stream", required=True, metavar="PATH")

    return parser


def _overrides(args) -> dict:
    over = {}
    if args.policy is not None:
        over["scheduler.policy"] = args.policy
    if args.trace is not None:
        over["trace"] = {"file": args.trace}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.out is not None:
        over["output_dir"] = args.out
    if args.rapl is not None:
        over["scheduler.rapl_limit"] = args.rapl
    if args.thb is not None:
        over["scheduler.th_b"] = args.thb
    return over


def _load_trace(cfg: SimConfig):
    if cfg.trace_file is not None:
        with open(cfg.trace_file) as f:
            return parse(f)
    if cfg.synthetic is not None:
        return generate(cfg.synthetic, cfg.scheme, cfg.geometry)
    raise ConfigError("no trace configured (use --trace or the config file)")


def _run(cfg: SimConfig, records, collect=False):
    return run_simulation(
        records,
        geometry=cfg.geometry,
        timing=cfg.timing,
        scheme=cfg.scheme,
        sched_cfg=cfg.scheduler,
        p_sa=cfg.p_sa,
        p_wd=cfg.p_wd,
        queue_capacity=cfg.queue_capacity,
        collect=collect,
        config_echo=cfg.echo(),
    )


def _write_report(report, out_dir: str, stem: str = "report"):
    os.makedirs(out_dir, exist_ok=True)
    payload = report.to_dict()
    payload["metadata"] = {"generated_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
    json_path = os.path.join(out_dir, f"{stem}.json")
    with open(json_path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
    csv_path = os.path.join(out_dir, f"{stem}.csv")
    with open(csv_path, "w") as f:
        f.write(report.csv_header() + "\n")
        f.write(report.to_csv_row() + "\n")
    return json_path, csv_path


def cmd_simulate(args) -> int:
    cfg = config_mod.load(args.config, _overrides(args))
    records = _load_trace(cfg)
    result = _run(cfg, records)
    violations = verify_stream(result.commands, cfg.timing)
    if violations:
        print(f"internal error: emitted command stream has "
              f"{len(violations)} violations", file=sys.stderr)
        for v in violations[:10]:
            print(f"  {v}", file=sys.stderr)
        return EXIT_LEGALITY
    json_path, csv_path = _write_report(result.report, cfg.output_dir)
    if args.dump_commands:
        from .device import dump_command_stream
        with open(os.path.join(cfg.output_dir, "commands.txt"), "w") as f:
            f.write(dump_command_stream(result.commands))
    r = result.report
    print(f"policy={r.policy} requests={r.requests} total_cycles={r.total_cycles} "
          f"avg_access_latency={r.avg_access_latency:.2f} "
          f"avg_power={r.avg_power:.4f} peak_power={r.peak_power:.4f}")
    print(f"report: {json_path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        if args.param == "th_b":
            values = [int(v) for v in args.values.split(",") if v.strip()]
        else:
            values = [float(v) for v in args.values.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad sweep values {args.values!r}") from None
    if not values:
        raise ConfigError("sweep needs at least one value")
    values.sort()  # merged table is ordered by parameter value

    rows = []
    out_dir = None
    for value in values:
        over = _overrides(args)
        over[f"scheduler.{args.param}"] = value
        cfg = config_mod.load(args.config, over)
        out_dir = cfg.output_dir
        records = _load_trace(cfg)
        result = _run(cfg, records)
        violations = verify_stream(result.commands, cfg.timing)
        if violations:
            print(f"internal error: {len(violations)} violations at "
                  f"{args.param}={value}", file=sys.stderr)
            return EXIT_LEGALITY
        rows.append((value, result.report))
        _write_report(result.report, out_dir,
                      stem=f"report_{args.param}_{value}")

    os.makedirs(out_dir, exist_ok=True)
    sweep_path = os.path.join(out_dir, "sweep.csv")
    with open(sweep_path, "w") as f:
        f.write(args.param + "," + rows[0][1].csv_header() + "\n")
        for value, report in rows:
            f.write(f"{value}," + report.to_csv_row() + "\n")
    for value, report in rows:
        print(f"{args.param}={value}: total_cycles={report.total_cycles} "
              f"pairs={report.pairs_rww + report.pairs_rwr} "
              f"avg_power={report.avg_power:.4f}")
    print(f"sweep table: {sweep_path}")
    return EXIT_OK


def cmd_gen_trace(args) -> int:
    cfg = config_mod.load(args.config, _overrides(args))
    base = cfg.synthetic or SyntheticConfig(seed=cfg.seed)
    fields = {
        "request_count": args.requests,
        "read_fraction": args.read_fraction,
        "bank_locality": args.bank_locality,
        "partition_spread": args.partition_spread,
        "inter_arrival": args.inter_arrival,
        "seed": args.seed,
    }
    params = vars(base).copy()
    params.update({k: v for k, v in fields.items() if v is not None})
    syn = SyntheticConfig(**params)
    records = generate(syn, cfg.scheme, cfg.geometry)
    if args.write_thinning:
        records = thin_writes(records, args.write_thinning, seed=syn.seed)
    with open(args.out_file, "w") as f:
        f.write(serialize(records))
    print(f"wrote {len(records)} requests to {args.out_file}")
    return EXIT_OK


def cmd_classify(args) -> int:
    cfg = config_mod.load(args.config, _overrides(args))
    records = _load_trace(cfg)
    window = None
    if args.window != "fcfs":
        try:
            window = int(args.window)
        except ValueError:
            raise ConfigError(f"bad --window {args.window!r}") from None
    from .trace import classify_conflicts
    shares = classify_conflicts(records, cfg.scheme, cfg.geometry,
                                window=window, timing=cfg.timing)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["class", "fraction"])
    for cls in (ConflictClass.RR, ConflictClass.RW, ConflictClass.WW,
                ConflictClass.NONE):
        writer.writerow([cls.value, f"{shares[cls]:.6f}"])
    text = buf.getvalue()
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "conflicts.csv")
        with open(path, "w") as f:
            f.write(text)
        print(f"histogram: {path}")
    else:
        print(text, end="")
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = config_mod.load(args.config, _overrides(args))
    try:
        with open(args.stream) as f:
            commands = load_command_stream(f.read())
    except OSError as exc:
        raise ConfigError(f"cannot read stream: {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    violations = verify_stream(commands, cfg.timing)
    if violations:
        for v in violations:
            print(v)
        print(f"{len(violations)} violations in {len(commands)} commands")
        return EXIT_USER_ERROR
    print(f"ok: {len(commands)} commands, no violations")
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "gen-trace": cmd_gen_trace,
    "classify": cmd_classify,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USER_ERROR


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
