"""CSV emission and parsing, run manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from datetime import datetime, timezone
from pathlib import Path

SWEEP_COLUMNS = (
    "scenario", "mode", "h_spec", "P", "sigma2", "epsilon", "stream_id", "Q_or_aWL",
    "dmin", "union_bound", "trials", "errors", "pe", "rate_bound", "r_of_P",
)
GAIN_SCAN_COLUMNS = ("h_num", "h_den_or_tag", "case", "a", "W", "theory_dof", "measured_slope", "degenerate")
GAMMA_COLUMNS = ("n", "m", "case", "a", "W", "L", "verdict")

_FLOAT = {"P", "sigma2", "epsilon", "dmin", "union_bound", "pe", "rate_bound", "r_of_P", "theory_dof",
          "measured_slope", "kappa_hat", "bound", "measured", "G0", "G1", "G2", "G3"}
_INT = {"trials", "errors", "n", "m", "a", "W", "L", "Qmax", "p"}
_BOOL = {"degenerate", "passed"}


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _parse(col: str, s: str):
    if s == "":
        return None
    if col in _BOOL:
        return s == "true"
    if col in _INT:
        try:
            return int(s)
        except ValueError:
            return s
    if col in _FLOAT:
        return float(s)
    return s


def parse_csv(text: str) -> list[dict]:
    r = csv.reader(io.StringIO(text))
    header = next(r)
    return [{c: _parse(c, v) for c, v in zip(header, row)} for row in r]


def write_csv(path: Path, columns, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(emit_csv(columns, rows))
    return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def write_manifest(out: Path, *, digest: str, seed: int, version: str, started: str, files: list[Path],
                   warnings: list[str], status: str = "ok", extra: dict | None = None) -> Path:
    man = {
        "config_digest": digest,
        "seed": seed,
        "tool_version": version,
        "started": started,
        "finished": now(),
        "status": status,
        "files": {p.name: sha256_file(p) for p in files},
        "warnings": warnings,
    }
    if extra:
        man.update(extra)
    path = out / "manifest.json"
    path.write_text(json.dumps(man, indent=2, sort_keys=True) + "\n")
    return path


def write_error(out: Path, kind: str, message: str, code: int) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "error.json"
    path.write_text(json.dumps({"error": kind, "message": message, "exit_code": code, "time": now()}, indent=2) + "\n")
    return path
