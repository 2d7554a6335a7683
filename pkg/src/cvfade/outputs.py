"""Deterministic CSV/JSON writers shared by the CLI commands.

Every CSV starts with a `# metadata:` comment line (config hash, seed,
generator) followed by an RFC-4180-style header row.  No timestamps anywhere:
reruns with identical inputs must be byte-identical.
"""
from __future__ import annotations

import csv
import io
import json


def format_number(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    return format(float(x), ".17g")


def metadata_line(meta: dict) -> str:
    return "# metadata: " + json.dumps(meta, sort_keys=True, separators=(",", ":"))


def render_csv(meta: dict, header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(metadata_line(meta) + "\r\n")
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else format_number(v) for v in row])
    return buf.getvalue()


def write_text(path, text: str):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_json(path, obj: dict):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
