# report_encoder.py
"""
Kodery raportów do formatów zewnętrznych.

- BoundReport: CSV (jeden wiersz na rozdzielczość) albo tablica JSON
- DistanceReport: obiekt JSON {per_k, total, remainder_bound, estimator, seed}
- CheckReport: tablica JSON z werdyktem i świadkiem

Liczby zmiennoprzecinkowe zapisujemy przez repr, więc ten sam raport
daje zawsze identyczne bajty.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from models import BoundReport, CheckReport, DistanceReport, SerializationError

BOUND_COLUMNS = (
    "theorem", "variant", "n", "m", "C_A", "C_v", "C_c", "K", "L", "n_max",
    "bound", "measured", "pass", "num_tuples", "seed", "hypothesis_violated",
)

FORMAT_CSV = "csv"
FORMAT_JSON = "json"


def _cell(value) -> str:
    """Pojedyncza komórka CSV: puste pole dla None, repr dla float."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def bound_report_row(report: BoundReport) -> Dict[str, object]:
    """
    Spłaszcza BoundReport do słownika z kolumnami BOUND_COLUMNS.

    :param report: wiersz przebiegu
    :return: słownik kolumna -> wartość
    """
    used = report.constants_used
    return {
        "theorem": report.theorem,
        "variant": report.variant,
        "n": report.n,
        "m": report.m,
        "C_A": used.get("C_A"),
        "C_v": used.get("C_v"),
        "C_c": used.get("C_c"),
        "K": used.get("K"),
        "L": used.get("L"),
        "n_max": used.get("n_max"),
        "bound": report.bound_value,
        "measured": report.measured,
        "pass": report.passed,
        "num_tuples": report.num_tuples,
        "seed": report.seed,
        "hypothesis_violated": report.hypothesis_violated,
    }


def encode_bound_reports_csv(reports: Sequence[BoundReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BOUND_COLUMNS)
    for report in reports:
        row = bound_report_row(report)
        writer.writerow([_cell(row[c]) for c in BOUND_COLUMNS])
    return buf.getvalue()


def encode_bound_reports_json(reports: Sequence[BoundReport]) -> str:
    return _dumps([bound_report_row(r) for r in reports])


def encode_distance_report_json(report: DistanceReport) -> str:
    return _dumps(asdict(report))


def encode_check_reports_json(reports: Sequence[CheckReport]) -> str:
    return _dumps([asdict(r) for r in reports])


def encode_check_reports_csv(reports: Sequence[CheckReport]) -> str:
    columns = ("check", "resolution", "passed", "measured", "threshold", "trials", "witness")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for report in reports:
        row = asdict(report)
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def decode_bound_reports_csv(text: str) -> List[Dict[str, str]]:
    """
    Odczytuje CSV raportu do listy słowników (wartości jako tekst).

    :raises SerializationError: nagłówek niezgodny z BOUND_COLUMNS
    """
    reader = csv.DictReader(io.StringIO(text))
    if tuple(reader.fieldnames or ()) != BOUND_COLUMNS:
        raise SerializationError(f"unexpected report header: {reader.fieldnames}")
    return list(reader)


def _dumps(payload) -> str:
    try:
        return json.dumps(payload, indent=2, sort_keys=False, allow_nan=False) + "\n"
    except ValueError as e:
        raise SerializationError(f"report holds a non-finite number: {e}") from e


def write_report(text: str, path: Optional[Path]) -> None:
    """
    Zapisuje zakodowany raport do pliku, tworząc katalogi; bez ścieżki nic nie robi.

    :param text: zakodowany raport
    :param path: plik docelowy albo None
    """
    if path is None:
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(text.encode("utf-8"))
