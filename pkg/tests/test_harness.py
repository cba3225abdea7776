import csv
import io
import json

import pytest

from etalab.harness import (
    CSV_COLUMNS,
    ConfigError,
    GoldenRow,
    SweepConfig,
    SweepRow,
    emit_csv,
    emit_manifest,
    oracle_cases,
    run_examples,
    run_sweep,
)


def _tiny_config(**over):
    base = dict(master_seed=5, grid_sizes=(3,), exponents=(1.0,),
                n_predict=4, workers=1)
    base.update(over)
    return SweepConfig(**base)


def test_config_defaults_valid():
    cfg = SweepConfig()
    assert cfg.grid_sizes == (10, 15, 20, 25, 30)
    assert cfg.exponents == (1.0, 2.0, 3.0, 4.0)
    assert cfg.tau2 == 0.5
    assert cfg.n_predict == 100


@pytest.mark.parametrize("bad", [
    {"grid_sizes": ()},
    {"grid_sizes": (0,)},
    {"exponents": ()},
    {"n_predict": 0},
    {"tau2": 0.0},
    {"od_alpha": -1.0},
    {"workers": 0},
    {"u": -0.5},
])
def test_config_rejects_bad_values(bad):
    with pytest.raises(ConfigError):
        _tiny_config(**bad)


def test_config_from_dict_rejects_unknown_keys():
    with pytest.raises(ConfigError, match="unknown"):
        SweepConfig.from_dict({"grid_sizes": [3], "typo_key": 1})


def test_config_json_roundtrip(tmp_path):
    cfg = _tiny_config()
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    again = SweepConfig.from_json(path)
    assert again == cfg


def test_emit_csv_header_only():
    buf = io.StringIO()
    emit_csv([], buf)
    assert buf.getvalue().strip() == ",".join(CSV_COLUMNS)


def test_emit_csv_roundtrip():
    row = SweepRow(3, 1.0, -0.5, 0.25, 0.125, -0.75, -1.0)
    buf = io.StringIO()
    emit_csv([row], buf)
    buf.seek(0)
    parsed = list(csv.DictReader(buf))
    assert len(parsed) == 1
    assert tuple(parsed[0]) == CSV_COLUMNS
    assert float(parsed[0]["seg_simple"]) == -0.5
    assert float(parsed[0]["lb"]) == -1.0


def test_run_sweep_deterministic_and_seed_sensitive():
    rows_a = run_sweep(_tiny_config())
    rows_b = run_sweep(_tiny_config())
    rows_c = run_sweep(_tiny_config(master_seed=6))
    assert [r.as_tuple() for r in rows_a] == [r.as_tuple() for r in rows_b]
    assert [r.as_tuple() for r in rows_a] != [r.as_tuple() for r in rows_c]


def test_run_sweep_worker_count_invariant():
    serial = run_sweep(_tiny_config(grid_sizes=(3, 4), exponents=(1.0, 2.0)))
    parallel = run_sweep(_tiny_config(grid_sizes=(3, 4), exponents=(1.0, 2.0),
                                      workers=3))
    buf_a, buf_b = io.StringIO(), io.StringIO()
    emit_csv(serial, buf_a)
    emit_csv(parallel, buf_b)
    assert buf_a.getvalue() == buf_b.getvalue()


def test_sweep_row_count_matches_grid():
    rows = run_sweep(_tiny_config(grid_sizes=(3, 4), exponents=(1.0, 2.0)))
    assert len(rows) == 4
    assert [(r.grid_size, r.alpha) for r in rows] == \
        [(3, 1.0), (3, 2.0), (4, 1.0), (4, 2.0)]


def test_sweep_ordering_lb_bayes_seg():
    for row in run_sweep(_tiny_config(grid_sizes=(3, 4), n_predict=6)):
        assert row.lb <= row.bayes_optimal + 1e-12
        assert row.bayes_optimal <= row.seg_simple + 1e-12


def test_emit_manifest(tmp_path):
    cfg = _tiny_config()
    path = tmp_path / "manifest.json"
    emit_manifest(cfg, path, wall_time_s=1.25)
    payload = json.loads(path.read_text())
    assert payload["seed"] == 5
    assert payload["config"]["grid_sizes"] == [3]
    assert payload["kernel_backend"] in ("numba", "numpy")
    assert payload["wall_time_s"] == 1.25
    assert payload["code_version"]


def test_golden_row_formatting():
    ok = GoldenRow("g", "x", 1.0, 1.0001, 5e-4)
    miss = GoldenRow("g", "x", 1.0, 2.0, 5e-4, advisory=True)
    fail = GoldenRow("g", "x", 1.0, 2.0, 5e-4)
    assert "PASS" in ok.format()
    assert "MISS (advisory)" in miss.format()
    assert "FAIL" in fail.format()
    assert ok.ok and not miss.ok and not fail.ok


def test_run_examples_failures_confined_to_bayes_table():
    report = run_examples()
    assert len(report.rows) > 40
    bad = report.strict_failures
    # the one internally inconsistent bundled table
    assert bad
    assert {r.group for r in bad} == {"bayes"}
    for row in report.rows:
        if row.group != "bayes" and not row.advisory:
            assert row.ok, row.format()
    assert report.notes
    assert not report.passed


def test_oracle_cases_shapes():
    assert [name for name, _, _ in oracle_cases("reference")] == \
        ["seg_optimal", "gseg_whole_optimal", "route_optimal", "bayes_optimal"]
    assert len(oracle_cases("negcov")) == 2
    assert len(oracle_cases("merge")) == 2
    with pytest.raises(ConfigError):
        oracle_cases("nope")
    for name, pred, closed in oracle_cases("reference"):
        assert closed > 0.0
        assert pred.route
