"""Run directories and deterministic JSON / CSV / SVG artifacts."""
from __future__ import annotations

import csv
import json
import math
import os
import time
from pathlib import Path

import numpy as np

OUTPUT_ENV = "FIELDCLT_OUTPUT"
DEFAULT_ROOT = "fieldclt-runs"
CSV_SCHEMA_VERSION = 1


def to_jsonable(obj):
    """Plain JSON types; non-finite floats become strings so the output stays valid JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, DEFAULT_ROOT))


def run_directory(command: str, seed: int, root: Path | None = None,
                  exact: Path | None = None) -> Path:
    """``<root>/<command>-<UTC time>-seed<seed>`` unless an exact directory is given."""
    if exact is not None:
        path = Path(exact)
    else:
        stamp = time.strftime("%Y%m%dT%H%M%SZ", time.gmtime())
        base = (root or output_root()) / f"{command}-{stamp}-seed{seed}"
        path, k = base, 1
        while path.exists():
            path = base.with_name(f"{base.name}-{k}")
            k += 1
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_json(path: Path, obj) -> Path:
    path = Path(path)
    path.write_text(dumps(obj))
    return path


def write_csv(path: Path, schema: str, header, rows) -> Path:
    """CSV whose first line names the schema and its version."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# schema: fieldclt.{schema}/v{CSV_SCHEMA_VERSION}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list, np.ndarray)):
        return " ".join(str(_cell(a)) for a in v)
    return v


def read_csv(path: Path) -> tuple[str, list[str], list[list[str]]]:
    with Path(path).open() as fh:
        schema = fh.readline().strip().removeprefix("# schema: ")
        rows = list(csv.reader(fh))
    return schema, rows[0], rows[1:]


def write_svg(path: Path, text: str) -> Path:
    path = Path(path)
    path.write_text(text)
    return path
