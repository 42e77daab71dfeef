import csv
import xml.etree.ElementTree as ET
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from sophlearn import cli
from sophlearn.config import config_from_entries, dump_config, load_config, parse_text
from sophlearn.harness import (CSV_HEADER, SVG_NS, ConfigError, ExperimentConfig, GridSpec, TrialRecord,
                               bootstrap_contrasts, emit_learning_curves, episode_world, learning_curves,
                               moving_average, one_way_anova, read_events, read_records, run_experiment, summarize,
                               validate_svg, write_records)
from sophlearn.planner import SearchConfig

TINY = dict(episodes=1, iterations=2, max_steps=25, search=SearchConfig(horizon=1))


def anova_oracle(groups):
    """F from the textbook sums of squares, written out longhand."""
    allv = [x for g in groups for x in g]
    grand = sum(allv) / len(allv)
    ssb = 0.0
    ssw = 0.0
    for g in groups:
        m = sum(g) / len(g)
        ssb += len(g) * (m - grand) ** 2
        for x in g:
            ssw += (x - m) ** 2
    k, n = len(groups), len(allv)
    return (ssb / (k - 1)) / (ssw / (n - k))


# -- statistics -----------------------------------------------------------------------------


def test_anova_textbook_example():
    groups = [[6, 8, 4, 5, 3, 4], [8, 12, 9, 11, 6, 8], [13, 9, 11, 8, 7, 12]]
    F, p = one_way_anova(groups)
    # hand computation: SSB = 84, SSW = 68, df = (2, 15)
    assert F == pytest.approx((84 / 2) / (68 / 15), abs=1e-6)
    assert p == pytest.approx(stats.f.sf(F, 2, 15), abs=1e-12)


def test_anova_matches_direct_formula_on_random_data():
    rng = np.random.default_rng(0)
    for _ in range(100):
        k = int(rng.integers(2, 6))
        groups = [rng.normal(rng.normal(50, 10), 20, size=int(rng.integers(2, 30))).tolist() for _ in range(k)]
        F, p = one_way_anova(groups)
        assert F == pytest.approx(anova_oracle(groups), rel=1e-6, abs=1e-6)
        assert p == pytest.approx(stats.f_oneway(*groups).pvalue, abs=1e-6)


def test_anova_degenerate_cases():
    with pytest.warns(RuntimeWarning):
        assert one_way_anova([[3, 3], [3, 3], [3, 3]]) == (0.0, 1.0)
    with pytest.warns(RuntimeWarning):
        F, p = one_way_anova([[1, 1], [2, 2]])
    assert F == np.inf and p == 0.0
    with pytest.raises(ValueError):
        one_way_anova([[1, 2]])
    with pytest.raises(ValueError):
        one_way_anova([[1, 2], [3]])


def _records(values_by_alg, iterations=10):
    out = []
    for alg, sampler in values_by_alg.items():
        for ep in range(5):
            for it in range(iterations):
                out.append(TrialRecord(alg, ep, it, int(sampler(ep, it)), "Dead", "Food", 0, 0.0, 0))
    return out


def test_bootstrap_identical_sets_straddle_zero():
    rng = np.random.default_rng(1)
    vals = rng.integers(10, 60, size=(5, 10))
    recs = _records({"SL": lambda e, i: vals[e, i], "SI": lambda e, i: vals[e, i]})
    c = bootstrap_contrasts(recs, (0, 9), n_boot=2000)[("SL", "SI")]
    assert c.estimate == pytest.approx(0.0)
    assert c.ci_low <= 0 <= c.ci_high and not c.excludes_zero


def test_bootstrap_detects_injected_shift():
    rng = np.random.default_rng(2)
    vals = rng.normal(40, 3, size=(5, 10))
    recs = _records({"SL": lambda e, i: vals[e, i] + 5, "SI": lambda e, i: vals[e, i], "BA": lambda e, i: 30})
    out = bootstrap_contrasts(recs, (0, 9), n_boot=4000, seed=3)
    c = out[("SL", "SI")]
    assert c.estimate == pytest.approx(5.0, abs=0.6)
    assert c.excludes_zero and c.ci_low > 0
    assert set(out) == {("SL", "SI"), ("SL", "BA"), ("SI", "BA")}
    again = bootstrap_contrasts(recs, (0, 9), n_boot=4000, seed=3)
    assert again[("SL", "SI")] == c
    by_ep = bootstrap_contrasts(recs, (0, 9), n_boot=2000, unit="episode")[("SL", "SI")]
    assert by_ep.estimate == pytest.approx(c.estimate, abs=1.0)


def test_bootstrap_errors():
    recs = _records({"SL": lambda e, i: 1, "SI": lambda e, i: 2})
    with pytest.raises(ConfigError):
        bootstrap_contrasts(recs, (50, 60))
    with pytest.raises(ConfigError):
        bootstrap_contrasts([r for r in recs if r.algorithm == "SL"], (0, 9))
    with pytest.raises(ConfigError):
        bootstrap_contrasts(recs, (0, 9), unit="cell")


def test_learning_curves_and_summary():
    recs = _records({"SI": lambda e, i: 10 + i, "BA": lambda e, i: 20})
    curves = learning_curves(recs)
    assert curves["SI"][:, 0].tolist() == [10 + i for i in range(10)]
    assert np.all(curves["BA"][:, 2] == 5)
    s = summarize(recs, (5, 9))
    assert s.anova[1] < 0.05
    np.testing.assert_allclose(moving_average([1, 2, 3, 4], 2), [1, 1.5, 2.5, 3.5])


# -- records ---------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = ExperimentConfig(algorithms=("SL", "BA+UCB"), out_dir=str(out), **TINY)
    records, events = run_experiment(cfg)
    return cfg, out, records, events


def test_record_count_and_invariants(tiny_run):
    cfg, out, records, _ = tiny_run
    assert len(records) == len(cfg.algorithms) * cfg.episodes * cfg.iterations
    for r in records:
        assert 1 <= r.steps_survived <= cfg.max_steps
        assert (r.outcome == "MaxSteps") == (r.steps_survived == cfg.max_steps)
        assert r.outcome == "MaxSteps" or r.death_cause
    assert [r.row() for r in read_records(out / "records.csv")] == [r.row() for r in records]
    assert (out / "states" / "BA_UCB_0.json").exists()


def test_csv_is_byte_identical_across_runs(tiny_run, tmp_path):
    cfg, out, _, _ = tiny_run
    again = replace(cfg, out_dir=str(tmp_path))
    run_experiment(again)
    assert (tmp_path / "records.csv").read_bytes() == (out / "records.csv").read_bytes()
    assert (tmp_path / "events.csv").read_bytes() == (out / "events.csv").read_bytes()
    raw = (out / "records.csv").read_bytes()
    assert b"\r" not in raw
    assert raw.splitlines()[0].decode() == ",".join(CSV_HEADER)


def test_single_record_run():
    cfg = ExperimentConfig(algorithms=("SI",), episodes=1, iterations=1, max_steps=5,
                           search=SearchConfig(horizon=0))
    records, _ = run_experiment(cfg)
    assert len(records) == 1


def test_events_round_trip(tiny_run):
    _, out, _, events = tiny_run
    assert read_events(out / "events.csv") == events
    for e in events:
        assert e.first_resource_step >= 1


def test_read_records_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        read_records(p)


def test_experiment_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(scenario="nope")
    with pytest.raises(ConfigError):
        ExperimentConfig(algorithms=("SL", "PPO"))
    with pytest.raises(ConfigError):
        ExperimentConfig(episodes=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(start="five")
    with pytest.raises(ConfigError):
        ExperimentConfig(grid=GridSpec(limits=(10, 10, 10)))


def test_episode_world_is_seeded():
    cfg = ExperimentConfig()
    a, b = episode_world(cfg, 3), episode_world(cfg, 3)
    np.testing.assert_array_equal(a.layouts, b.layouts)
    assert not np.array_equal(a.layouts, episode_world(cfg, 4).layouts)


# -- charts ----------------------------------------------------------------------------------------


def _polylines(path):
    root = ET.parse(path).getroot()
    return root, root.findall(f".//{{{SVG_NS}}}polyline")


def test_constant_series_is_horizontal(tmp_path):
    recs = _records({"SI": lambda e, i: 30})
    emit_learning_curves(recs, tmp_path / "c.svg")
    _, lines = _polylines(tmp_path / "c.svg")
    for pl in lines:
        ys = {p.split(",")[1] for p in pl.get("points").split()}
        assert len(ys) == 1


def test_two_algorithms_give_two_lines_and_two_overlays(tmp_path):
    recs = _records({"SL": lambda e, i: 30 + i, "BA": lambda e, i: 25})
    path = tmp_path / "c.svg"
    emit_learning_curves(recs, path)
    root, lines = _polylines(path)
    assert sorted(pl.get("class") for pl in lines) == ["mean", "mean", "moving-average", "moving-average"]
    legend = [t.text for t in root.iter(f"{{{SVG_NS}}}text") if t.get("class") == "legend-entry"]
    assert legend == ["SL", "BA"]
    assert validate_svg(str(path)) == []
    with open(tmp_path / "c.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 20


def test_validate_svg_flags_problems():
    assert validate_svg(b"<svg") and "not well-formed" in validate_svg(b"<svg")[0]
    bad = (f'<svg xmlns="{SVG_NS}" width="1" height="1" viewBox="0 0 1 1">'
           f'<polyline points="1,2,3"/><foreignObject/><line x1="0"/></svg>').encode()
    problems = validate_svg(bad)
    assert any("coordinate pairs" in p for p in problems)
    assert any("unsupported element" in p for p in problems)
    assert any("line lacks" in p for p in problems)
    assert validate_svg(b'<svg xmlns="http://example.com"/>')


def test_emit_requires_records(tmp_path):
    with pytest.raises(ValueError):
        emit_learning_curves([], tmp_path / "x.svg")


# -- config files and CLI --------------------------------------------------------------------------


def test_config_round_trip():
    for cfg in (ExperimentConfig(), ExperimentConfig.desk(), ExperimentConfig.paper()):
        assert config_from_entries(parse_text(dump_config(cfg))) == cfg


def test_config_file_overrides(tmp_path):
    p = tmp_path / "exp.cfg"
    p.write_text("# demo\nscenario = full-model\nalgorithms = SL, BA\nsearch.horizon = 2\n"
                 "grid.k = 2\nlayout.0 = Food@1,1;Water@2,2;Sleep@3,3\n", encoding="utf-8")
    cfg = load_config(p)
    assert cfg.scenario == "full-model" and cfg.algorithms == ("SL", "BA") and cfg.search.horizon == 2
    assert cfg.grid.cells_per_resource == 2
    assert cfg.grid.layouts is not None


@pytest.mark.parametrize("text", ["nonsense line", "episodes = 0", "bogus.key = 1", "episodes = 1\nepisodes = 2",
                                  "search.horizon = many", "grid.limits = 1,2"])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        config_from_entries(parse_text(text))


def test_cli_end_to_end(tmp_path, capsys):
    cfg_path = tmp_path / "exp.cfg"
    cfg_path.write_text("algorithms = SI, BA\nepisodes = 1\niterations = 2\nmax_steps = 20\nsearch.horizon = 1\n",
                        encoding="utf-8")
    out = tmp_path / "res"
    assert cli.main(["run", "--config", str(cfg_path), "--out", str(out), "--seed", "4"]) == 0
    assert (out / "config.txt").exists() and (out / "records.csv").exists()
    assert load_config(out / "config.txt").seed == 4
    assert cli.main(["stats", "--records", str(out / "records.csv"), "--window", "0..1", "--n-boot", "200"]) == 0
    text = capsys.readouterr().out
    assert "ANOVA" in text and "SI-BA" in text
    assert cli.main(["plot", "--records", str(out / "records.csv"), "--out", str(tmp_path / "c.svg")]) == 0
    assert cli.main(["replay", "--state", str(out / "states" / "SI_0.json")]) == 0
    assert "chosen action" in capsys.readouterr().out
    assert cli.main(["config", "--profile", "desk"]) == 0
    assert "search.horizon = 3" in capsys.readouterr().out


def test_cli_reports_errors(tmp_path, capsys):
    assert cli.main(["stats", "--records", str(tmp_path / "missing.csv")]) == 2
    recs = _records({"SL": lambda e, i: 1, "SI": lambda e, i: 2})
    write_records(recs, tmp_path / "r.csv")
    assert cli.main(["stats", "--records", str(tmp_path / "r.csv"), "--window", "9..3"]) == 2
    assert "error" in capsys.readouterr().err
