"""Plain-text matrix fixtures for logits, labels and feature maps.

A file holds one or more blocks. Each block is a one-line JSON header followed
by ``rows`` lines of whitespace-separated decimals::

    {"rows": 2, "cols": 3, "role": "features_teacher"}
    0.1 0.2 0.3
    0.0 1.0 0.5

Blank lines and lines starting with ``#`` are ignored.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ROLES = ("logits_student", "logits_teacher", "labels", "features_teacher", "features_student")


@dataclass
class MatrixBlock:
    role: str
    values: np.ndarray
    meta: dict = field(default_factory=dict)


def parse_blocks(text: str, source: str = "<string>") -> list:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    blocks = []
    i = 0
    while i < len(lines):
        try:
            header = json.loads(lines[i])
        except json.JSONDecodeError as exc:
            raise ValueError(f"{source}: expected a JSON header, got {lines[i][:40]!r}") from exc
        if not isinstance(header, dict) or "rows" not in header or "cols" not in header:
            raise ValueError(f"{source}: header needs 'rows' and 'cols'")
        rows, cols = int(header["rows"]), int(header["cols"])
        role = header.get("role", "")
        if role and role not in ROLES:
            raise ValueError(f"{source}: unknown role {role!r}")
        body = lines[i + 1:i + 1 + rows]
        if len(body) != rows:
            raise ValueError(f"{source}: block declares {rows} rows, found {len(body)}")
        try:
            values = np.array([[float(tok) for tok in ln.split()] for ln in body])
        except ValueError as exc:
            raise ValueError(f"{source}: non-numeric matrix entry") from exc
        if values.shape != (rows, cols):
            raise ValueError(f"{source}: block shape {values.shape} != declared ({rows}, {cols})")
        meta = {k: v for k, v in header.items() if k not in ("rows", "cols", "role")}
        blocks.append(MatrixBlock(role, values, meta))
        i += 1 + rows
    return blocks


def read_blocks(path) -> list:
    path = Path(path)
    return parse_blocks(path.read_text(), str(path))


def format_blocks(blocks) -> str:
    out = []
    for blk in blocks:
        values = np.atleast_2d(blk.values)
        header = {"rows": values.shape[0], "cols": values.shape[1], "role": blk.role, **blk.meta}
        out.append(json.dumps(header))
        out.extend(" ".join(repr(float(v)) for v in row) for row in values)
    return "\n".join(out) + "\n"


def write_blocks(path, blocks) -> None:
    Path(path).write_text(format_blocks(blocks))
