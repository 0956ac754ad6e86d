"""Deterministic report serialization.

Reports are self-describing: every JSON file embeds the resolved experiment
spec (command, seed, all resolved parameters) so a run can be regenerated
exactly from its own output.  Output paths are deliberately not embedded,
so two same-seed runs into different directories produce byte-identical
files.  CSV follows RFC 4180 (UTF-8, header row, CRLF); floats use a fixed
12-significant-digit format in table cells.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

FLOAT_FMT = ".12g"


@dataclass(frozen=True)
class ExperimentSpec:
    """The resolved inputs of one CLI run."""

    command: str
    seed: int
    params: dict

    def to_dict(self) -> dict:
        return {"command": self.command, "seed": self.seed, "params": dict(self.params)}


def format_cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format(value, FLOAT_FMT)
    return str(value)


def write_csv(path, header, rows) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])


def write_json(path, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def report_payload(spec: ExperimentSpec, results) -> dict:
    return {"spec": spec.to_dict(), "results": results}


def load_schema(name: str) -> dict:
    text = resources.files("kljnsim").joinpath(f"schemas/{name}.schema.json").read_text("utf-8")
    return json.loads(text)
