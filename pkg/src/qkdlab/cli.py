"""Command-line front end.

Exit codes: 0 success (aborted protocols included), 1 failed invariant
in ``verify``, 2 invalid config or arguments, 3 enumeration capacity
exceeded. Data goes to files or stdout; diagnostics go to stderr.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from . import verify as verify_mod
from .adversary import eve_joint
from .ecc import leak_covered_expanded, leak_open, leak_parity
from .errors import CapacityError, SingularityError, ValidationError
from .hashing import lhl_key_length, lhl_min_distance, lhl_required_exponent, markov_individual_bound
from .pipeline import ProtocolConfig, net_key, run_protocol, sweep_tradeoff
from .reports import config_from_dict, config_to_dict, load_config, round12, write_reports_csv, write_trace_json
from .secmetrics import check_p1_bound, min_entropy

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_CAPACITY = 0, 1, 2, 3


def _err(msg: str) -> None:
    print(f"qkdlab: {msg}", file=sys.stderr)


def _load(args) -> tuple[ProtocolConfig, dict]:
    overrides = list(args.set or [])
    if args.oracle is not None:
        overrides.append(f"oracle={'true' if args.oracle == 'on' else 'false'}")
    if args.config:
        return load_config(args.config, overrides)
    return config_from_dict({}, overrides)


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_run(args) -> int:
    cfg, _ = _load(args)
    trace, report = run_protocol(cfg)
    out = _outdir(args)
    write_trace_json(out / "trace.json", trace, report, cfg)
    write_reports_csv(out / "report.csv", [report])
    _err(f"wrote {out / 'trace.json'} and {out / 'report.csv'}" + (" (protocol aborted)" if report.aborted else ""))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg, sweep = _load(args)
    d_grid = sweep.get("d_grid", [])
    qber_grid = sweep.get("qber_grid", [])
    if not d_grid or not qber_grid:
        raise ValidationError("sweep needs non-empty sweep.d_grid and sweep.qber_grid")
    rows = sweep_tradeoff(cfg, d_grid, qber_grid, threads=args.threads)
    out = _outdir(args)
    write_reports_csv(out / "sweep.csv", rows)
    manifest = {"config": config_to_dict(cfg), "d_grid": d_grid, "qber_grid": qber_grid, "rows": len(rows)}
    (out / "manifest.json").write_bytes((json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    _err(f"wrote {len(rows)} rows to {out / 'sweep.csv'}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify_mod.run_all(max_bits=args.max_bits, faults=args.inject_fault or ())
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        _err(f"failed groups: {', '.join(failed)}")
        return EXIT_FAILED
    return EXIT_OK


def bound_table(cfg: ProtocolConfig) -> dict:
    """Closed-form evaluation of every accounting formula at one parameter point."""
    n, qber, f, d = cfg.n_sifted, cfg.channel_qber, cfg.f_factor, cfg.d_target
    if cfg.l_bound is not None:
        l_bits = float(cfg.l_bound)
    else:
        l_bits = min_entropy(eve_joint(cfg.attack, n))
    out_bits = lhl_key_length(l_bits, d)
    leak = leak_open(n, qber, f)
    try:
        expanded = leak_covered_expanded(n, qber)
    except SingularityError:
        expanded = math.inf
    table = {
        "n_sifted": n,
        "qber": qber,
        "f_factor": f,
        "d_target": d,
        "l_bits": l_bits,
        "p1_bound": check_p1_bound(d, max(out_bits, 1)),
        "out_bits_two_log": out_bits,
        "out_bits_single_log": lhl_key_length(l_bits, d, log_factor=1.0),
        "out_bits_half_prefactor": lhl_key_length(l_bits, d, half_prefactor=True),
        "required_exponent_one_bit": lhl_required_exponent(1, d),
        "d_floor": lhl_min_distance(l_bits, 0),
        "d_floor_at_out_bits": lhl_min_distance(l_bits, out_bits) if l_bits >= out_bits else None,
        "leak_open": leak,
        "leak_parity": leak_parity(n, qber),
        "leak_covered_expanded": expanded if math.isfinite(expanded) else None,
        "net_bits": net_key(out_bits, leak, cfg.auth_cost_bits),
        "markov_exponent_after_two_conversions": -math.log2(
            markov_individual_bound(markov_individual_bound(2.0**-l_bits, 2.0**16), 2.0**16)
        ) if l_bits > 32 else None,
        "conv_qber_threshold": cfg.qber_threshold,
        "conv_auth_cost_bits": cfg.auth_cost_bits,
    }
    return {k: round12(v) if isinstance(v, float) else v for k, v in table.items()}


def cmd_report(args) -> int:
    cfg, _ = _load(args)
    table = bound_table(cfg)
    out = _outdir(args)
    text = json.dumps(table, indent=2) + "\n"
    (out / "bounds.json").write_bytes(text.encode("utf-8"))
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qkdlab", description="Exact QKD post-processing laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", metavar="PATH", help="JSON config file")
        p.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
        p.add_argument("--set", metavar="KEY=VALUE", action="append", help="override a config key (repeatable)")
        p.add_argument("--oracle", choices=("on", "off"), help="force exact oracle mode on or off")
        p.add_argument("--threads", type=int, default=1, metavar="N", help="worker threads (speed only)")

    for name, fn, help_text in (
        ("run", cmd_run, "run one protocol round"),
        ("sweep", cmd_sweep, "sweep d_target x channel QBER"),
        ("report", cmd_report, "evaluate closed-form bounds at one parameter point"),
    ):
        p = sub.add_parser(name, help=help_text)
        common(p)
        p.set_defaults(func=fn)

    p = sub.add_parser("verify", help="run every invariant suite")
    common(p)
    p.add_argument("--max-bits", type=int, default=8, metavar="N", help="largest key length enumerated (default 8)")
    p.add_argument("--inject-fault", action="append", choices=verify_mod.FAULTS, help="deliberately break one check")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CapacityError as exc:
        _err(f"capacity exceeded: {exc}")
        return EXIT_CAPACITY
    except ValidationError as exc:
        _err(f"invalid input: {exc}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
