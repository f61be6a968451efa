"""CSV/JSON result files with an embedded run manifest.

CSV files start with two comment lines, ``# schema: <name>/<version>`` and
``# manifest: <json>``, followed by a header row.  Floats are written with
``repr`` so they re-parse to the identical double.  Timestamps are kept out
of result files and go to a ``<command>.manifest.json`` sidecar instead, so
reruns with the same inputs rewrite byte-identical results.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .fedsim import ConvergenceTable

CONVERGENCE_SCHEMA = ("convergence", 1)
ENERGY_BY_DIM_SCHEMA = ("energy_by_dim", 1)
ALLOCATION_SCHEMA = ("allocation", 1)
SWEEP_SCHEMA = ("sweep", 1)

NOT_REACHED = "not_reached"


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def make_manifest(command: str, config: dict, seed, inputs=()) -> dict:
    """Deterministic run description: identical manifests imply identical results."""
    return {
        "tool": "flhdc",
        "version": __version__,
        "command": command,
        "seed": seed,
        "config_hash": config_hash(config),
        "inputs": {os.path.basename(p): file_digest(p) for p in inputs},
    }


def write_sidecar(out_dir, manifest: dict, started: datetime, outputs) -> str:
    path = os.path.join(out_dir, f"{manifest['command']}.manifest.json")
    record = dict(manifest, started=started.isoformat(),
                  finished=datetime.now(timezone.utc).isoformat(),
                  outputs=sorted(os.path.basename(o) for o in outputs))
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _cell(value) -> str:
    if value is None:
        return ""
    # repr of a Python float round-trips exactly; numpy scalars are converted first
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    return str(value)


def write_csv(path, schema: tuple[str, int], columns, rows, manifest: dict | None = None) -> None:
    buf = io.StringIO()
    buf.write(f"# schema: {schema[0]}/{schema[1]}\n")
    if manifest is not None:
        buf.write(f"# manifest: {json.dumps(manifest, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path):
    """Return ``(schema, manifest, rows)`` with every cell as a string."""
    schema, manifest = None, None
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# schema:"):
            name, _, version = line.split(":", 1)[1].strip().partition("/")
            schema = (name, int(version))
        elif line.startswith("# manifest:"):
            manifest = json.loads(line.split(":", 1)[1])
        elif line.strip():
            body.append(line)
    rows = list(csv.DictReader(body))
    return schema, manifest, rows


def write_json(path, obj: dict, manifest: dict | None = None) -> None:
    out = dict(obj)
    if manifest is not None:
        out["manifest"] = manifest
    with open(path, "w") as fh:
        json.dump(_jsonable(out), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _jsonable(obj):
    # NaN/inf are not JSON; they become null
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def convergence_rows(table: ConvergenceTable):
    for d, j in sorted(table.entries.items()):
        yield {"d": d, "J_d": NOT_REACHED if j is None else j,
               "target_accuracy": table.target_accuracy,
               "epsilon": "" if table.epsilon is None else table.epsilon,
               "replications": table.replications}


CONVERGENCE_COLUMNS = ["d", "J_d", "target_accuracy", "epsilon", "replications"]


def write_convergence(path, table: ConvergenceTable, manifest=None, fmt: str = "csv") -> None:
    if fmt == "csv":
        write_csv(path, CONVERGENCE_SCHEMA, CONVERGENCE_COLUMNS, convergence_rows(table), manifest)
    else:
        write_json(path, {"schema": "/".join(map(str, CONVERGENCE_SCHEMA)),
                          "entries": {str(d): j for d, j in sorted(table.entries.items())},
                          "target_accuracy": table.target_accuracy,
                          "epsilon": table.epsilon, "replications": table.replications,
                          "J_max": table.J_max}, manifest)


def read_convergence(path) -> ConvergenceTable:
    """Load a convergence table written by :func:`write_convergence` (CSV or JSON)."""
    with open(path) as fh:
        first = fh.read(1)
    if first == "{":
        with open(path) as fh:
            obj = json.load(fh)
        return ConvergenceTable({int(d): j for d, j in obj["entries"].items()},
                                obj["target_accuracy"], obj.get("epsilon"),
                                obj["replications"], obj.get("J_max"))
    schema, _, rows = read_csv(path)
    if schema is not None and schema[0] != CONVERGENCE_SCHEMA[0]:
        raise ValueError(f"{path} holds a {schema[0]} table, not a convergence table")
    if not rows:
        raise ValueError(f"{path} has no rows")
    missing = set(CONVERGENCE_COLUMNS) - set(rows[0])
    if missing:
        raise ValueError(f"{path} lacks columns {sorted(missing)}")
    entries = {int(r["d"]): None if r["J_d"] == NOT_REACHED else int(r["J_d"]) for r in rows}
    eps = rows[0]["epsilon"]
    return ConvergenceTable(entries, float(rows[0]["target_accuracy"]),
                            float(eps) if eps else None, int(rows[0]["replications"]))
