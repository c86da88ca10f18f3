"""Render evaluation results as fixed-format tables (markdown or csv).

Column precision is fixed: mAP, mean precision, and mean recall at one
decimal; attack success rate at two decimals; effect counts as integers.
"""

from __future__ import annotations

from typing import Dict, List, Sequence

from .errors import ParameterError
from .types import CLASSES

FORMATS = ("markdown", "csv")

MAP_COLUMNS = ("Dataset", "Model", "Non-Attack mAP", "Under-Attack mAP")
EFFECT_COLUMNS = (
    "Dataset",
    "Model",
    "FN Person",
    "FN Car",
    "FN Truck",
    "FN Bus",
    "FP Person",
    "FP Car",
    "FP Truck",
    "FP Bus",
    "SR",
    "MP",
    "MR",
)


def format_percent(fraction: float, decimals: int) -> str:
    """Render a [0, 1] fraction as a fixed-precision percentage string."""
    return f"{fraction * 100.0:.{decimals}f}%"


def _table(columns: Sequence[str], rows: List[Sequence[str]], fmt: str) -> str:
    if fmt == "markdown":
        lines = [
            "| " + " | ".join(columns) + " |",
            "|" + "|".join(" --- " for _ in columns) + "|",
        ]
        lines += ["| " + " | ".join(row) + " |" for row in rows]
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        lines = [",".join(columns)]
        lines += [",".join(row) for row in rows]
        return "\n".join(lines) + "\n"
    raise ParameterError(f"report format must be one of {FORMATS}, got {fmt!r}")


def render_map_table(entries: Sequence[dict], fmt: str = "markdown") -> str:
    """mAP comparison, one row per (dataset, model) evaluation."""
    rows = [
        (
            str(e["dataset"]),
            str(e["model"]),
            format_percent(e["non_attack_map"], 1),
            format_percent(e["under_attack_map"], 1),
        )
        for e in entries
    ]
    return _table(MAP_COLUMNS, rows, fmt)


def render_effects_table(entries: Sequence[dict], fmt: str = "markdown") -> str:
    """Attack-effect counts, success rate, and operating-point precision/recall."""
    rows = []
    for e in entries:
        hiding: Dict[str, int] = e["hiding_fn"]
        creating: Dict[str, int] = e["creating_fp"]
        rows.append(
            (
                str(e["dataset"]),
                str(e["model"]),
                *(str(int(hiding.get(cls.value, 0))) for cls in CLASSES),
                *(str(int(creating.get(cls.value, 0))) for cls in CLASSES),
                format_percent(e["success_rate"], 2),
                format_percent(e["mean_precision"], 1),
                format_percent(e["mean_recall"], 1),
            )
        )
    return _table(EFFECT_COLUMNS, rows, fmt)
