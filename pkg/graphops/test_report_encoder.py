import json

import pytest

from models import BoundReport, CheckReport, DistanceReport, DistanceRow, SerializationError
from report_encoder import (
    BOUND_COLUMNS,
    decode_bound_reports_csv,
    encode_bound_reports_csv,
    encode_bound_reports_json,
    encode_check_reports_csv,
    encode_check_reports_json,
    encode_distance_report_json,
    write_report,
)


def _report(**overrides) -> BoundReport:
    fields = dict(
        theorem="approximation",
        variant="main",
        constants_used={"C_A": 1.0, "C_v": 1.0, "C_c": 0.0, "n": 4, "m": None},
        bound_value=1.5,
        measured=0.1,
        n=4,
        num_tuples=8,
        seed=0,
    )
    fields.update(overrides)
    return BoundReport(**fields)


def test_bound_csv_layout():
    text = encode_bound_reports_csv([_report(), _report(n=16, bound_value=0.625, measured=0.9)])
    lines = text.splitlines()
    assert lines[0] == ",".join(BOUND_COLUMNS)
    assert lines[1] == "approximation,main,4,,1.0,1.0,0.0,,,,1.5,0.1,true,8,0,false"
    rows = decode_bound_reports_csv(text)
    assert [r["pass"] for r in rows] == ["true", "false"]
    assert rows[1]["bound"] == "0.625"


def test_bound_csv_with_gnn_constants():
    report = _report(constants_used={"C_A": 2.0, "C_v": 1.0, "C_c": 0.0, "K": 3, "L": 2, "n_max": 4})
    row = decode_bound_reports_csv(encode_bound_reports_csv([report]))[0]
    assert (row["K"], row["L"], row["n_max"]) == ("3", "2", "4")


def test_float_cells_keep_every_digit():
    report = _report(bound_value=0.1 + 0.2)
    row = decode_bound_reports_csv(encode_bound_reports_csv([report]))[0]
    assert float(row["bound"]) == 0.1 + 0.2


def test_unmeasured_row():
    row = decode_bound_reports_csv(encode_bound_reports_csv([_report(measured=None)]))[0]
    assert row["measured"] == "" and row["pass"] == ""


def test_decode_rejects_foreign_header():
    with pytest.raises(SerializationError):
        decode_bound_reports_csv("n,bound\n4,1.5\n")


def test_bound_json():
    payload = json.loads(encode_bound_reports_json([_report()]))
    assert payload[0]["pass"] is True
    assert payload[0]["m"] is None
    assert list(payload[0]) == list(BOUND_COLUMNS)


def test_non_finite_values_are_refused():
    with pytest.raises(SerializationError):
        encode_bound_reports_json([_report(measured=float("nan"), passed=False)])


def test_distance_json():
    report = DistanceReport(
        per_k=[DistanceRow(1, 0.25, 8), DistanceRow(2, 0.5, 8)],
        total=0.25,
        remainder_bound=0.25,
        estimator="paired",
        seed=7,
    )
    payload = json.loads(encode_distance_report_json(report))
    assert payload["per_k"][1] == {"k": 2, "dH_estimate": 0.5, "num_tuples": 8}
    assert payload["total"] == 0.25 and payload["seed"] == 7


def test_check_reports():
    reports = [
        CheckReport("self-adjoint", True, 0.0, 1e-9, 100),
        CheckReport("constant-to-constant", False, 0.3, 1e-9, 16, resolution=4, witness="trial 2, cell 3"),
    ]
    payload = json.loads(encode_check_reports_json(reports))
    assert payload[1]["witness"] == "trial 2, cell 3"
    lines = encode_check_reports_csv(reports).splitlines()
    assert lines[0] == "check,resolution,passed,measured,threshold,trials,witness"
    assert lines[2] == "constant-to-constant,4,false,0.3,1e-09,16,\"trial 2, cell 3\""


def test_write_report(tmp_path):
    target = tmp_path / "nested" / "out.csv"
    write_report("a,b\n", target)
    assert target.read_bytes() == b"a,b\n"
    write_report("ignored", None)
    assert list(tmp_path.iterdir()) == [tmp_path / "nested"], "no path, no file"
