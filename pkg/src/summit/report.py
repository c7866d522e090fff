"""Report tables over one or more experiment run directories.

ROUGE cells are scaled x100 at this layer only (the library stays in
[0, 1]); the evaluator score stays on its native 1-5 scale. The
faithfulness column, when present, is the mean remote-scorer output.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import MissingStats

MISSING_CELL = "—"

#: (stats metric key, column header, x100 scaling)
COLUMNS = (
    ("rouge1", "R1", True),
    ("rouge2", "R2", True),
    ("rougeL", "RL", True),
    ("gpt_eval", "GPT-Eval", False),
    ("faithfulness", "Faithfulness", False),
    ("topic_similarity", "TopicSim", True),
)


@dataclass
class ReportRow:
    label: str
    cells: dict[str, float]


def load_run_stats(run_dir: str | Path) -> dict:
    stats_path = Path(run_dir) / "stats.json"
    if not stats_path.exists():
        raise MissingStats(f"no stats.json in {run_dir}")
    return json.loads(stats_path.read_text(encoding="utf-8"))


def build_rows(run_dirs: list[str | Path], include_init: bool = False) -> list[ReportRow]:
    """One row per run (final summaries), ordered by run label.

    ``include_init`` adds a ``<label>:init`` row per run for side-by-side
    initial-vs-final comparison. Runs sharing a manifest name (e.g. a run and
    its replay) are disambiguated with their directory name.
    """
    loaded = [(load_run_stats(run_dir), Path(run_dir).name) for run_dir in run_dirs]
    names = [stats.get("run", {}).get("name") or dirname for stats, dirname in loaded]
    rows = []
    for (stats, dirname), name in zip(loaded, names):
        label = f"{name} ({dirname})" if names.count(name) > 1 else name
        labelled = [(label, "final")]
        if include_init:
            labelled.insert(0, (f"{label}:init", "init"))
        for row_label, phase in labelled:
            metrics = stats.get("metrics", {}).get(phase, {})
            rows.append(
                ReportRow(
                    label=row_label,
                    cells={key: metrics[key]["mean"] for key, _, _ in COLUMNS if key in metrics},
                )
            )
    rows.sort(key=lambda r: r.label)
    return rows


def _active_columns(rows: list[ReportRow]):
    return [
        (key, header, scaled)
        for key, header, scaled in COLUMNS
        if any(key in row.cells for row in rows)
    ]


def _cell(row: ReportRow, key: str, scaled: bool) -> str:
    if key not in row.cells:
        return MISSING_CELL
    value = row.cells[key] * 100 if scaled else row.cells[key]
    return f"{value:.2f}"


def format_table(rows: list[ReportRow]) -> str:
    columns = _active_columns(rows)
    headers = ["Run"] + [header for _, header, _ in columns]
    body = [[row.label] + [_cell(row, key, scaled) for key, _, scaled in columns] for row in rows]
    widths = [max(len(str(cell)) for cell in col) for col in zip(*([headers] + body))]
    lines = [
        "  ".join(header.ljust(width) for header, width in zip(headers, widths)).rstrip(),
        "  ".join("-" * width for width in widths),
    ]
    for cells in body:
        lines.append("  ".join(str(c).ljust(width) for c, width in zip(cells, widths)).rstrip())
    return "\n".join(lines)


def write_csv(rows: list[ReportRow], path: str | Path) -> None:
    columns = _active_columns(rows)
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run"] + [header for _, header, _ in columns])
        for row in rows:
            writer.writerow([row.label] + [_cell(row, key, scaled) for key, _, scaled in columns])
