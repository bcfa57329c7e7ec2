"""Gene-row CSV files: the transcribed representative-solution tables that
ship with the package, and user-supplied genes files in the same layout.

A genes file needs the columns Kp, Ki, Kd; lambda and mu are optional
and a blank (or "-") value in both marks an integer-order PID row. A
``solution`` column, when present, labels the rows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from fopid_avr.folib import ControllerGenes

BLANK = {"", "-", "--"}


@dataclass(frozen=True)
class GeneRow:
    label: str
    genes: ControllerGenes
    mode: str
    published: dict = field(default_factory=dict)


def _num(text):
    text = (text or "").strip()
    return None if text in BLANK else float(text)


def read_gene_rows(path_or_lines) -> list[GeneRow]:
    if isinstance(path_or_lines, (str, Path)):
        with open(path_or_lines, newline="") as fh:
            return read_gene_rows(fh.read().splitlines())
    reader = csv.DictReader(path_or_lines)
    missing = {"Kp", "Ki", "Kd"} - set(reader.fieldnames or ())
    if missing:
        raise ValueError(f"genes file lacks columns {sorted(missing)}")
    rows = []
    for i, rec in enumerate(reader, start=1):
        lam, mu = _num(rec.get("lambda")), _num(rec.get("mu"))
        pid = lam is None and mu is None
        genes = ControllerGenes(
            _num(rec["Kp"]),
            _num(rec["Ki"]),
            _num(rec["Kd"]),
            1.0 if lam is None else lam,
            1.0 if mu is None else mu,
        )
        published = {k: float(v) for k, v in rec.items() if k in ("J1", "J2", "J3") and _num(v) is not None}
        label = (rec.get("solution") or "").strip() or f"row{i}"
        rows.append(GeneRow(label, genes, "pid" if pid else "fopid", published))
    return rows


def table_path(number: int) -> Path:
    return Path(str(resources.files("fopid_avr") / "data" / f"table{number}.csv"))


def load_table(number: int) -> list[GeneRow]:
    """Rows of published table ``number`` (1-6)."""
    return read_gene_rows(table_path(number))


def table_row(number: int, label: str) -> GeneRow:
    for row in load_table(number):
        if row.label == label:
            return row
    raise KeyError(f"no solution {label!r} in table {number}")
