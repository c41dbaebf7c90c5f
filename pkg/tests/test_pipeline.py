import json

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from tvpar.arp import ar_p_inference
from tvpar.bandwidth import empirical_nh_grid, robustness_bandwidth
from tvpar.data import load_series, read_panel, transform_inflation, transform_rex
from tvpar.exceptions import (
    ConfigError,
    DataError,
    LengthMismatch,
    NonpositiveCpi,
    NonpositiveInput,
)
from tvpar.inference import infer_point
from tvpar.local import TimeSeries
from tvpar.pipeline import (
    TRAJECTORY_FIELDS,
    RunConfig,
    analyze,
    choose_p,
    format_trajectory_csv,
    load_table,
    read_trajectory_csv,
    write_trajectory_csv,
)
from tvpar.simulation import parse_dgp, simulate_path


def write_cpi(path, n, seed=0):
    # CPI whose monthly inflation is a persistent AR(1) around .3%
    rng = np.random.default_rng(seed)
    infl = np.empty(n)
    prev = 0.0
    for t in range(n):
        prev = 0.9 * prev + 0.1 * rng.standard_normal()
        infl[t] = 0.3 + prev
    cpi = 100 * np.cumprod(np.r_[1.0, 1 + infl / 100])
    dates = pd.date_range("1950-01-01", periods=n + 1, freq="MS").strftime("%Y-%m")
    pd.DataFrame({"date": dates, "cpi": cpi}).to_csv(path, index=False)
    return path


@pytest.fixture(scope="module")
def cpi_813(tmp_path_factory):
    return write_cpi(tmp_path_factory.mktemp("data") / "us.csv", 813)


class TestTransforms:
    def test_inflation_examples(self):
        assert_allclose(transform_inflation([100, 101]), [1.0])
        assert_array_equal(transform_inflation(np.full(5, 120.0)), np.zeros(4))
        assert_allclose(transform_inflation([100, 100, 102.01]), [0.0, 2.01])

    def test_inflation_rejects(self):
        with pytest.raises(NonpositiveCpi):
            transform_inflation([100, 0, 101])
        with pytest.raises(DataError):
            transform_inflation([100])

    def test_rex_examples(self):
        assert_array_equal(transform_rex(np.ones(3), np.ones(3), np.ones(3)), np.ones(3))
        assert transform_rex([2.0], [110.0], [100.0])[0] == pytest.approx(2.2)

    def test_rex_rejects(self):
        with pytest.raises(LengthMismatch):
            transform_rex([1.0, 2.0], [1.0], [1.0, 1.0])
        with pytest.raises(NonpositiveInput):
            transform_rex([1.0], [-1.0], [1.0])


class TestIngest:
    def test_load_inflation(self, tmp_path):
        p = tmp_path / "c.csv"
        pd.DataFrame({"date": ["2000-01", "2000-02", "2000-03", "2000-04"],
                      "cpi": [100, 100, 102.01, 102.01]}).to_csv(p, index=False)
        s = load_series(p, transform="inflation")
        assert_allclose(s.values, [0.0, 2.01, 0.0])
        assert s.labels == ("2000-02", "2000-03", "2000-04")

    def test_load_rex(self, tmp_path):
        p = tmp_path / "r.csv"
        pd.DataFrame({"date": ["1", "2", "3"], "nex": [2.0, 2.0, 1.0],
                      "cpi": [110.0, 100.0, 100.0], "us": [100.0, 100.0, 50.0]}).to_csv(p, index=False)
        s = load_series(p, "nex", "real_exchange_rate", base_column="us", cpi_column="cpi")
        assert_allclose(s.values, [2.2, 2.0, 2.0])
        with pytest.raises(ConfigError):
            load_series(p, "nex", "real_exchange_rate")

    def test_rejects_missing(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("date,x\n2000-01,1\n2000-02,\n2000-03,3\n")
        with pytest.raises(DataError):
            read_panel(p)

    def test_rejects_unordered_dates(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("date,x\n2000-02,1\n2000-01,2\n2000-03,3\n")
        with pytest.raises(DataError):
            read_panel(p)
        p.write_text("date,x\n2000-01,1\n2000-01,2\n2000-03,3\n")
        with pytest.raises(DataError):
            read_panel(p)

    def test_numeric_dates_ordered_numerically(self, tmp_path):
        p = tmp_path / "num.csv"
        p.write_text("date,x\n" + "".join(f"{i},{i}\n" for i in range(12)))
        assert len(read_panel(p)) == 12
        p.write_text("date,x\n2,1\n10,2\n9,3\n")
        with pytest.raises(DataError):
            read_panel(p)

    def test_rejects_missing_date_and_file(self, tmp_path):
        p = tmp_path / "nd.csv"
        p.write_text("x,y\n1,2\n")
        with pytest.raises(DataError):
            read_panel(p)
        with pytest.raises(DataError):
            read_panel(tmp_path / "absent.csv")

    def test_column_choice(self, tmp_path):
        p = tmp_path / "two.csv"
        p.write_text("date,a,b\n1,1,4\n2,2,5\n3,3,6\n")
        with pytest.raises(DataError):
            load_series(p)
        assert_array_equal(load_series(p, "b").values, [4, 5, 6])
        with pytest.raises(DataError):
            load_series(p, "c")


class TestConfig:
    def test_alpha_range(self):
        with pytest.raises(ConfigError):
            RunConfig("x.csv", alpha=1.5)

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"input": "x.csv", "bandwith": 3})

    def test_needs_input(self):
        with pytest.raises(ConfigError):
            RunConfig.from_dict({"alpha": 0.1})

    def test_bad_p_and_transform(self):
        with pytest.raises(ConfigError):
            RunConfig("x.csv", p=0)
        with pytest.raises(ConfigError):
            RunConfig("x.csv", transform="log")

    def test_table_sources(self, tmp_path):
        assert load_table("embedded").provenance["source"] == "embedded"
        with pytest.raises(ConfigError):
            load_table(str(tmp_path / "none.csv"))


def test_choose_p():
    tests = {1: {"p_value": 0.01}, 6: {"p_value": 0.2}, 12: {"p_value": 0.5}}
    assert choose_p(tests) == (6, ())
    p, flags = choose_p({1: {"p_value": 0.01}, 6: {"error": "x"}, 12: {"p_value": 0.02}})
    assert p == 12 and flags


class TestCsv:
    def test_round_trip(self, tmp_path):
        y = simulate_path(parse_dgp("flat 0.90", n=300), 1).series
        pts = [infer_point(y, t, 100) for t in (0.1, 0.5, 1.0)]
        from tvpar.pipeline import trajectory_rows

        rows = trajectory_rows(pts, ["a", "b", "c"])
        back = read_trajectory_csv(write_trajectory_csv(rows, tmp_path / "t.csv"))
        for r, b in zip(rows, back):
            for k in ("tau", "rho_hat", "mue", "ci_low", "ci_high", "nh_used"):
                assert r[k] == b[k]
            assert b["date"] == r["date"]

    def test_nan_round_trip(self, tmp_path):
        row = dict(date="x", tau=0.5, rho_hat=float("nan"), mue=float("nan"), ci_low=float("nan"),
                   ci_high=float("nan"), nh_used=3, flags="error:WindowTooSmall")
        back = read_trajectory_csv(write_trajectory_csv([row], tmp_path / "n.csv"))[0]
        assert np.isnan(back["rho_hat"]) and back["flags"] == "error:WindowTooSmall"

    def test_header(self):
        assert format_trajectory_csv([]).strip() == ",".join(TRAJECTORY_FIELDS)


@pytest.fixture(scope="module")
def result(cpi_813, tmp_path_factory):
    out = tmp_path_factory.mktemp("out")
    cfg = {"input": str(cpi_813), "transform": "inflation", "robustness": True,
           "benchmark": True, "output_dir": str(out)}
    return analyze(cfg)


class TestAnalyze:

    def test_rows_per_block(self, result):
        n = result.series.n
        assert n == 813
        assert len(result.rows) == 3 * n
        blocks = result.summary["blocks"]
        assert blocks == [result.nh_us, robustness_bandwidth(result.nh_us), 2 * n]
        assert [r["nh_used"] for r in result.rows[::n]] == blocks

    def test_empirical_grid(self, result):
        assert_array_equal(result.bandwidth.grid, empirical_nh_grid(813))
        assert result.bandwidth.grid[0] == 163 and result.bandwidth.grid[-1] == 1626
        assert result.summary["bandwidth"]["grid_above_n"]

    def test_dates_and_taus(self, result):
        first = result.rows[0]
        assert first["date"] == "1950-02"
        assert first["tau"] == pytest.approx(1 / 813)
        assert result.rows[812]["tau"] == 1.0

    def test_benchmark_flat(self, result):
        n = result.series.n
        bench = result.rows[2 * n:]
        direct = ar_p_inference(result.series, 0.5, 2 * n, 1, 0.10)
        assert {r["mue"] for r in bench} == {direct.mue_point}
        assert {r["ci_low"] for r in bench} == {direct.ci_low}

    def test_summary(self, result):
        s = json.loads(result.summary_path.read_text())
        assert s["n"] == 813
        assert s["table_provenance"]["source"] == "embedded"
        assert set(s["ljung_box"]["by_p"]) == {"1", "6", "12"}
        assert s["config"]["alpha"] == 0.10
        assert s["rows"] == 3 * 813

    def test_csv_matches_rows(self, result):
        back = read_trajectory_csv(result.trajectory_path)
        assert len(back) == len(result.rows)
        assert back[100]["mue"] == result.rows[100]["mue"] or np.isnan(result.rows[100]["mue"])

    def test_deterministic(self, result, cpi_813, tmp_path):
        cfg = {"input": str(cpi_813), "transform": "inflation", "robustness": True,
               "benchmark": True, "output_dir": str(tmp_path)}
        again = analyze(cfg)
        assert again.trajectory_path.read_bytes() == result.trajectory_path.read_bytes()


class TestAnalyzeOptions:
    def test_constant_parameter_matches_direct(self, tmp_path):
        y = simulate_path(parse_dgp("flat 0.99", n=1000), 4).series
        res = analyze(RunConfig("unused", fixed_nh=2000, taus=[0.25, 0.5, 1.0], alpha=0.05,
                                lb_residuals="full", output_dir=str(tmp_path)), series=y)
        direct = infer_point(y, 1.0, 2000, 0.05)
        assert {r["mue"] for r in res.rows} == {direct.mue_point}
        assert len(res.rows) == 3

    def test_partial_failures_flagged(self, tmp_path):
        y = TimeSeries(simulate_path(parse_dgp("flat 0.5", n=200), 5).series.values)
        res = analyze(RunConfig("unused", fixed_nh=8, taus=[0.5, 1.0], lb_residuals="full",
                                output_dir=str(tmp_path)), series=y)
        assert res.rows[0]["flags"] == ""
        assert res.rows[1]["flags"] == "error:WindowTooSmall"
        assert res.summary["flagged_rows"] == 1

    def test_auto_p(self, tmp_path):
        rng = np.random.default_rng(6)
        from scipy import signal

        y = signal.lfilter([1.0], [1.0, -0.3, -0.3, -0.2, 0.0, 0.0, -0.1], rng.standard_normal(1500))[500:]
        res = analyze(RunConfig("unused", p="auto", fixed_nh=2000, taus=[0.5],
                                lb_residuals="full", output_dir=str(tmp_path)), series=TimeSeries(y))
        assert res.p == 6
