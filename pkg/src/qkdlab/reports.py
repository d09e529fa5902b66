"""Config parsing and CSV/JSON artifacts.

CSV files use a fixed column order (``REPORT_COLUMNS``), comma separators,
LF line endings and a mandatory header. Floats are written with 12
significant digits; missing oracle values are empty cells.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import io
import json
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

from .adversary import AttackModel, PipelineTrace
from .errors import ValidationError
from .gf2 import bits_to_str
from .pipeline import KeyRateReport, ProtocolConfig
from .secmetrics import security_report

CONFIG_KEYS = tuple(f.name for f in dataclasses.fields(ProtocolConfig))
ATTACK_KEYS = tuple(f.name for f in dataclasses.fields(AttackModel))
SWEEP_KEYS = ("d_grid", "qber_grid")

REPORT_COLUMNS = (
    "n_sifted",
    "d_target",
    "channel_qber",
    "measured_qber",
    "aborted",
    "key_bits_corrected",
    "disclosed_bits",
    "cover_bits_used",
    "residual_block_errors",
    "l_assumed",
    "out_bits",
    "hash_degenerate",
    "leak_ec",
    "net_bits",
    "d_floor",
    "pguess_sifted",
    "pguess_corrected",
    "pguess_final",
    "l_oracle_sifted",
    "l_oracle_corrected",
    "l_oracle_final",
    "entropy_assumption_violated",
    "conv_qber_threshold",
    "conv_auth_cost_bits",
)
_INT_COLUMNS = {"n_sifted", "key_bits_corrected", "disclosed_bits", "cover_bits_used",
                "residual_block_errors", "out_bits", "conv_auth_cost_bits"}
_BOOL_COLUMNS = {"aborted", "hash_degenerate", "entropy_assumption_violated"}


def fmt_float(x: float) -> str:
    return format(float(x), ".12g")


def round12(x: float) -> float:
    return float(fmt_float(x))


def _plain(value: Any) -> Any:
    if isinstance(value, enum.Enum):
        return value.value
    if dataclasses.is_dataclass(value):
        return {f.name: _plain(getattr(value, f.name)) for f in dataclasses.fields(value)}
    return value


def config_to_dict(cfg: ProtocolConfig) -> dict:
    return _plain(cfg)


def _coerce(key: str, value: Any, default: Any) -> Any:
    if isinstance(value, str) and not isinstance(default, (str, enum.Enum)) and default is not None:
        try:
            value = json.loads(value)
        except json.JSONDecodeError:
            raise ValidationError(f"cannot parse value for {key!r}: {value!r}") from None
    if isinstance(default, bool) and not isinstance(value, bool):
        raise ValidationError(f"{key!r} must be true or false")
    if isinstance(default, int) and not isinstance(default, bool) and not (isinstance(value, int) and not isinstance(value, bool)):
        raise ValidationError(f"{key!r} must be an integer")
    if isinstance(default, float) and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ValidationError(f"{key!r} must be a number")
    return value


def config_from_dict(data: Mapping[str, Any], overrides: Iterable[str] = ()) -> tuple[ProtocolConfig, dict]:
    """Strictly parse a config mapping plus ``key=value`` overrides.

    Returns the protocol config and the (possibly empty) sweep block.
    Unknown keys anywhere are errors.
    """
    data = json.loads(json.dumps(data))
    if not isinstance(data, dict):
        raise ValidationError("config must be a JSON object")
    for item in overrides:
        if "=" not in item:
            raise ValidationError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        target = data
        for p in parts[:-1]:
            target = target.setdefault(p, {})
            if not isinstance(target, dict):
                raise ValidationError(f"override {key!r} descends into a non-object")
        target[parts[-1]] = raw.strip()

    unknown = set(data) - set(CONFIG_KEYS) - {"sweep"}
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
    defaults = ProtocolConfig()
    kwargs: dict[str, Any] = {}
    for key, value in data.items():
        if key in ("sweep", "attack"):
            continue
        default = getattr(defaults, key)
        if key == "l_bound":
            default = 0.0 if value is not None and value != "null" else None
            if value == "null":
                value = None
        kwargs[key] = _coerce(key, value, default)

    attack = data.get("attack", {})
    if not isinstance(attack, dict):
        raise ValidationError("attack must be an object")
    bad = set(attack) - set(ATTACK_KEYS)
    if bad:
        raise ValidationError(f"unknown attack keys: {', '.join(sorted(bad))}")
    attack_defaults = AttackModel()
    kwargs["attack"] = AttackModel(
        **{k: _coerce(f"attack.{k}", v, getattr(attack_defaults, k)) for k, v in attack.items()}
    )

    sweep = data.get("sweep", {})
    if not isinstance(sweep, dict):
        raise ValidationError("sweep must be an object")
    bad = set(sweep) - set(SWEEP_KEYS)
    if bad:
        raise ValidationError(f"unknown sweep keys: {', '.join(sorted(bad))}")
    sweep = {k: json.loads(v) if isinstance(v, str) else v for k, v in sweep.items()}
    for k, v in sweep.items():
        if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            raise ValidationError(f"sweep.{k} must be a list of numbers")
    try:
        return ProtocolConfig(**kwargs), sweep
    except TypeError as exc:
        raise ValidationError(str(exc)) from None


def load_config(path: str | Path, overrides: Iterable[str] = ()) -> tuple[ProtocolConfig, dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_dict(data, overrides)


def report_row(report: KeyRateReport) -> dict:
    chain = report.oracle_pguess_chain or (None, None, None)
    return {
        "n_sifted": report.n_sifted,
        "d_target": report.d_target,
        "channel_qber": report.channel_qber,
        "measured_qber": report.measured_qber,
        "aborted": report.aborted,
        "key_bits_corrected": report.key_bits_corrected,
        "disclosed_bits": report.disclosed_bits,
        "cover_bits_used": report.cover_bits_used,
        "residual_block_errors": report.residual_block_errors,
        "l_assumed": report.l_assumed,
        "out_bits": report.out_bits,
        "hash_degenerate": report.hash_degenerate,
        "leak_ec": report.leak_ec,
        "net_bits": report.net_bits,
        "d_floor": report.d_floor,
        "pguess_sifted": chain[0],
        "pguess_corrected": chain[1],
        "pguess_final": chain[2],
        "l_oracle_sifted": report.l_oracle_sifted,
        "l_oracle_corrected": report.l_oracle_corrected,
        "l_oracle_final": report.l_oracle_final,
        "entropy_assumption_violated": report.entropy_assumption_violated,
        "conv_qber_threshold": report.qber_threshold,
        "conv_auth_cost_bits": report.auth_cost_bits,
    }


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return fmt_float(value)


def reports_to_csv(reports: Iterable[KeyRateReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for r in reports:
        row = report_row(r)
        writer.writerow([_cell(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def write_reports_csv(path: str | Path, reports: Iterable[KeyRateReport]) -> None:
    Path(path).write_bytes(reports_to_csv(reports).encode("utf-8"))


def read_reports_csv(path: str | Path) -> list[dict]:
    """Parse a report CSV back into typed dicts."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != REPORT_COLUMNS:
            raise ValidationError(f"{path}: unexpected CSV header")
        rows = []
        for raw in reader:
            row: dict[str, Any] = {}
            for col, text in raw.items():
                if text == "":
                    row[col] = None
                elif col in _BOOL_COLUMNS:
                    row[col] = text == "true"
                elif col in _INT_COLUMNS:
                    row[col] = int(text)
                else:
                    row[col] = float(text)
            rows.append(row)
        return rows


def transcript_digest(transcript: list) -> str:
    blob = json.dumps(transcript, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _round_tree(value: Any) -> Any:
    if isinstance(value, float):
        return round12(value)
    if isinstance(value, dict):
        return {k: _round_tree(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round_tree(v) for v in value]
    return value


def trace_to_dict(trace: PipelineTrace, report: KeyRateReport, cfg: ProtocolConfig | None = None) -> dict:
    stages = {}
    for name, stage in trace.stages().items():
        entry: dict[str, Any] = {"key": None if stage.key is None else bits_to_str(stage.key)}
        if stage.joint is not None:
            sec = security_report(stage.joint)
            entry.update(
                n_key_bits=stage.joint.n_key_bits,
                pguess=sec.pguess,
                min_entropy_bits=sec.min_entropy_bits,
                stat_distance=sec.stat_distance,
                mutual_info_bits=sec.mutual_info_bits,
            )
        stages[name] = entry
    out = {
        "config": config_to_dict(cfg) if cfg is not None else None,
        "stages": stages,
        "public_transcript": trace.public_transcript,
        "transcript_sha256": transcript_digest(trace.public_transcript),
        "report": report_row(report),
    }
    return _round_tree(out)


def write_trace_json(path: str | Path, trace: PipelineTrace, report: KeyRateReport, cfg: ProtocolConfig | None = None) -> None:
    text = json.dumps(trace_to_dict(trace, report, cfg), indent=2, sort_keys=True) + "\n"
    Path(path).write_bytes(text.encode("utf-8"))


def read_trace_json(path: str | Path) -> dict:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    for key in ("stages", "public_transcript", "transcript_sha256", "report"):
        if key not in data:
            raise ValidationError(f"{path}: trace lacks {key!r}")
    if transcript_digest(data["public_transcript"]) != data["transcript_sha256"]:
        raise ValidationError(f"{path}: transcript digest mismatch")
    return data
