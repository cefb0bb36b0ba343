import math

import numpy as np
import pytest

from nandwalk.nand import worst_case_table
from nandwalk.records import ExperimentRecord, fit_loglog, parse_record, read_columns, read_record


def test_fit_identity_and_sqrt():
    xs = [2.0**i for i in range(1, 9)]
    slope, intercept, r2 = fit_loglog(xs, xs)
    assert abs(slope - 1.0) <= 1e-12 and abs(intercept) <= 1e-12 and r2 == pytest.approx(1.0)
    slope, intercept, _ = fit_loglog(xs, [7 * math.sqrt(x) for x in xs])
    assert abs(slope - 0.5) <= 1e-12
    assert intercept == pytest.approx(math.log2(7), abs=1e-12)


def test_fit_rejects_bad_input():
    with pytest.raises(ValueError):
        fit_loglog([1, 2], [1, 2])
    with pytest.raises(ValueError):
        fit_loglog([1, 2, 0], [1, 2, 3])
    with pytest.raises(ValueError):
        fit_loglog([1, 2, 3], [1, -2, 3])
    with pytest.raises(ValueError):
        fit_loglog([1, 2, 3], [1, 2])


def test_classical_table_slope():
    table = worst_case_table(range(14, 25))
    slope, _, _ = fit_loglog([2.0**d for d, _, _ in table], [float(max(a, b)) for _, a, b in table])
    assert slope == pytest.approx(0.7537, abs=0.01)


def make_record():
    rows = [{"n": n, "N": 2**n, "queries": 10 * 2 ** (0.6 * n), "k": 1 + n % 2} for n in range(2, 9)]
    return ExperimentRecord("sweep", {"eps": 0.01}, rows, seed=3)


@pytest.mark.parametrize("fmt", ["csv", "jsonl"])
def test_round_trip_preserves_fits(tmp_path, fmt):
    rec = make_record()
    path = tmp_path / f"rec.{fmt}"
    path.write_text(rec.dump(fmt))
    back = read_record(path)
    assert back.header() == rec.header()
    assert back.rows == rec.rows
    before = fit_loglog([r["N"] for r in rec.rows], [r["queries"] for r in rec.rows])
    after = fit_loglog(*read_columns(path, "N", "queries"))
    assert before == after


def test_read_columns_filter_and_missing(tmp_path):
    path = tmp_path / "rec.csv"
    path.write_text(make_record().to_csv())
    xs, _ = read_columns(path, "N", "queries", {"k": "1"})
    assert xs == [4.0, 16.0, 64.0, 256.0]
    with pytest.raises(KeyError):
        read_columns(path, "N", "nope")


def test_plain_csv_without_header(tmp_path):
    path = tmp_path / "plain.csv"
    path.write_text("N,queries\n4,8\n16,32\n64,128\n")
    assert read_columns(path, "N", "queries") == ([4.0, 16.0, 64.0], [8.0, 32.0, 128.0])


def test_csv_header_is_single_line():
    text = make_record().to_csv()
    first, second = text.splitlines()[:2]
    assert first.startswith("# ") and "timestamp" in first
    assert second == "n,N,queries,k"


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        ExperimentRecord("x", {}, [{"a": float("nan")}])
    with pytest.raises(ValueError):
        ExperimentRecord("x", {}, [{"a": np.inf}])


def test_parse_errors():
    with pytest.raises(ValueError):
        parse_record("")
    with pytest.raises(ValueError):
        parse_record('{"n": 1}\n')
    with pytest.raises(ValueError):
        make_record().dump("xml")
