import io
from dataclasses import replace

import numpy as np
import pytest

from conftest import PRINTED_TABLE, PRINTED_TOTAL
from spin1bell.analyzer import DetectionModel, expected_counts, joint_probabilities
from spin1bell.bell import SETTING_LABELS, chsh
from spin1bell.experiment import (
    LAB_SETTINGS,
    CountRow,
    CountTable,
    DataError,
    ExperimentConfig,
    concat,
    correct_counts,
    estimate_bell,
    probability_table,
    simulate_counts,
    table_from_means,
)
from spin1bell.qstate import OUTCOMES, make_noisy_state, outcome_index


def model_table(cfg: ExperimentConfig) -> CountTable:
    """Noiseless counts equal to the forward model's expectation."""
    state = make_noisy_state(cfg.p)
    tables = []
    for label, (a, b) in cfg.settings.pairs().items():
        raw = expected_counts(joint_probabilities(state, a, b), cfg.det, cfg.corrected_per_interval)
        tables.append(
            table_from_means(label, a, b, {(x, y): raw[outcome_index(x), outcome_index(y)] for x in OUTCOMES for y in OUTCOMES})
        )
    return concat(tables)


def test_simulation_is_deterministic():
    cfg = ExperimentConfig(seed=42)
    assert simulate_counts(cfg) == simulate_counts(cfg)
    assert simulate_counts(cfg) != simulate_counts(replace(cfg, seed=43))


def test_simulation_shape():
    table = simulate_counts(ExperimentConfig(seed=1))
    assert table.labels() == list(SETTING_LABELS)
    assert len(table.rows) == 36
    for label in SETTING_LABELS:
        assert table.interval_grid(label).shape == (12, 3, 3)
        assert np.allclose(table.interval_grid(label).mean(axis=0), table.mean_grid(label))
    assert table.settings() == LAB_SETTINGS


def test_zero_probability_outcomes_have_zero_counts():
    cfg = ExperimentConfig(p=1.0, det=DetectionModel(1, 1), corrected_rate=1e6, seed=5)
    cfg = replace(cfg, settings=replace(cfg.settings, alpha=0.0, alpha_prime=0.0, beta=0.0, beta_prime=0.0))
    table = simulate_counts(cfg)
    for label in SETTING_LABELS:
        grid = table.mean_grid(label)
        allowed = np.zeros((3, 3), bool)
        allowed[0, 2] = allowed[1, 1] = allowed[2, 0] = True
        assert np.all(grid[~allowed] == 0)
        assert np.all(grid[allowed] > 0)


def test_corrected_totals_recover_rate():
    det = DetectionModel()
    totals = []
    for seed in range(100):
        corrected = correct_counts(simulate_counts(ExperimentConfig(seed=seed)), det)
        totals.extend(corrected.mean_grid(label).sum() for label in SETTING_LABELS)
    totals = np.array(totals)
    stderr = totals.std(ddof=1) / np.sqrt(totals.size)
    assert abs(totals.mean() - 520.35) < 4 * stderr


def test_correct_counts_inverts_forward_model():
    cfg = ExperimentConfig(p=0.5)
    table = model_table(cfg)
    corrected = correct_counts(table, cfg.det)
    state = make_noisy_state(cfg.p)
    for label, (a, b) in cfg.settings.pairs().items():
        expected = cfg.corrected_per_interval * joint_probabilities(state, a, b)
        assert np.allclose(corrected.mean_grid(label), expected, rtol=1e-12, atol=1e-12)


def test_correct_counts_printed_rows(printed_table, lab_det):
    corrected = correct_counts(printed_table, lab_det).mean_grid("ab'")
    assert corrected[0, 0] == pytest.approx(2.20 / (0.431 * 0.434), rel=1e-12)
    assert corrected[0, 0] == pytest.approx(11.71, rel=0.01)
    assert corrected[0, 1] == pytest.approx(21.92 / 0.431, rel=1e-12)
    assert corrected[0, 1] == pytest.approx(50.47, rel=0.01)
    assert corrected[1, 1] == 66.50


def test_correct_counts_rejects_zero_efficiency():
    with pytest.raises(ValueError):
        DetectionModel(0.0, 0.4)


def test_probability_table_printed(printed_table, lab_det):
    corrected = correct_counts(printed_table, lab_det)
    probs = probability_table(corrected)["ab'"]
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    # the printed Prob. column divides Mod. by the printed total
    assert 11.71 / PRINTED_TOTAL == pytest.approx(0.0225, abs=5e-5)
    assert 96.05 / PRINTED_TOTAL == pytest.approx(0.1846, abs=5e-5)
    for (a, b), (_, _, pct) in PRINTED_TABLE.items():
        assert 100 * probs[outcome_index(a), outcome_index(b)] == pytest.approx(pct, abs=0.1)


def test_probability_table_zero_total():
    table = table_from_means("ab", 0, 0, {(a, b): 0.0 for a in OUTCOMES for b in OUTCOMES})
    with pytest.raises(DataError, match="zero"):
        probability_table(table)


def test_noiseless_round_trip_is_exact():
    cfg = ExperimentConfig()
    est = estimate_bell(model_table(cfg), cfg.det)
    assert est.method == "poisson-propagation"  # no per-interval data
    assert est.S == pytest.approx(chsh(make_noisy_state(cfg.p), cfg.settings), abs=1e-10)


def test_large_rate_round_trip():
    cfg = ExperimentConfig(corrected_rate=520.35 * 1000, seed=9)
    est = estimate_bell(simulate_counts(cfg), cfg.det)
    assert abs(est.S - chsh(make_noisy_state(cfg.p), cfg.settings)) < 0.01


def test_sigma_scales_with_counts():
    cfg = ExperimentConfig(seed=3)
    base = estimate_bell(simulate_counts(cfg), cfg.det)
    big = estimate_bell(simulate_counts(replace(cfg, corrected_rate=cfg.corrected_rate * 100)), cfg.det)
    assert base.sigma / big.sigma == pytest.approx(10, rel=0.35)
    # Poisson propagation scales exactly with the counts
    table = simulate_counts(cfg)
    scaled = CountTable(tuple(replace(r, mean_counts=100 * r.mean_counts, intervals=None) for r in table.rows))
    a = estimate_bell(table, cfg.det, method="poisson-propagation").sigma
    b = estimate_bell(scaled, cfg.det, method="poisson-propagation").sigma
    assert a / b == pytest.approx(10, rel=1e-9)


def test_estimate_invariant_under_interval_order():
    cfg = ExperimentConfig(seed=11)
    table = simulate_counts(cfg)
    perm = np.random.default_rng(0).permutation(cfg.n_intervals)
    shuffled = CountTable(tuple(replace(r, intervals=tuple(np.array(r.intervals)[perm])) for r in table.rows))
    for method in ("bootstrap", "interval-scatter", "poisson-propagation"):
        a = estimate_bell(table, cfg.det, method=method)
        b = estimate_bell(shuffled, cfg.det, method=method)
        assert a.S == pytest.approx(b.S, abs=1e-12)
        if method != "bootstrap":
            assert a.sigma == pytest.approx(b.sigma, abs=1e-12)
        else:
            assert a.sigma == pytest.approx(b.sigma, rel=0.15)


def test_bootstrap_agrees_with_poisson_on_average():
    ratios = []
    for seed in range(40):
        cfg = ExperimentConfig(seed=seed)
        est = estimate_bell(simulate_counts(cfg), cfg.det, seed=seed)
        ratios.append(est.sigma / est.cross_check_sigma)
    assert abs(np.mean(ratios) - 1) < 0.30


def test_estimate_fields():
    cfg = ExperimentConfig(seed=2)
    est = estimate_bell(simulate_counts(cfg), cfg.det)
    assert est.method == "bootstrap"
    assert set(est.E) == set(SETTING_LABELS)
    assert est.sigma > 0
    assert all(s > 0 for _, s in est.E.values())
    d = est.to_dict()
    assert set(d) >= {"S", "sigma", "E", "method", "settings", "efficiencies"}
    assert d["efficiencies"] == {"eta_a": 0.431, "eta_b": 0.434}


def test_estimate_requires_four_settings(printed_table, lab_det):
    with pytest.raises(DataError, match="setting labels"):
        estimate_bell(printed_table, lab_det)


def test_estimate_rejects_inconsistent_angles():
    table = simulate_counts(ExperimentConfig(seed=0))
    rows = [replace(r, alpha_deg=5.0) if r.setting_label == "a'b'" else r for r in table.rows]
    with pytest.raises(DataError, match="inconsistent"):
        estimate_bell(CountTable(tuple(rows)), DetectionModel())


def test_missing_outcome_row():
    table = simulate_counts(ExperimentConfig(seed=0))
    with pytest.raises(DataError, match="missing outcome"):
        estimate_bell(CountTable(table.rows[1:]), DetectionModel())


def test_csv_round_trip():
    table = simulate_counts(ExperimentConfig(seed=7))
    buf = io.StringIO()
    table.to_csv(buf)
    header = buf.getvalue().splitlines()[0].split(",")
    assert header[:8] == [
        "setting_label", "alpha_deg", "beta_deg", "outcome_a", "outcome_b", "mean_counts", "n_intervals", "interval_s",
    ]
    assert header[8:] == [f"c{k}" for k in range(1, 13)]
    buf.seek(0)
    assert CountTable.from_csv(buf) == table


def test_csv_means_only(printed_table):
    buf = io.StringIO()
    printed_table.to_csv(buf)
    assert "+1" in buf.getvalue() and "-1" in buf.getvalue()
    buf.seek(0)
    back = CountTable.from_csv(buf)
    assert back == printed_table
    assert back.interval_grid("ab'") is None


@pytest.mark.parametrize(
    "text, match",
    [
        ("", "empty"),
        ("setting_label,alpha_deg\n", "missing column"),
        ("setting_label,alpha_deg,beta_deg,outcome_a,outcome_b,mean_counts,n_intervals,interval_s\n"
         "ab,0,0,2,0,1.0,12,60\n", "line 2, field 'outcome_a'"),
        ("setting_label,alpha_deg,beta_deg,outcome_a,outcome_b,mean_counts,n_intervals,interval_s\n"
         "ab,0,0,1,0,abc,12,60\n", "line 2, field 'mean_counts'"),
        ("setting_label,alpha_deg,beta_deg,outcome_a,outcome_b,mean_counts,n_intervals,interval_s\n"
         "ab,0,0,1,0,-3,12,60\n", "nonnegative"),
        ("setting_label,alpha_deg,beta_deg,outcome_a,outcome_b,mean_counts,n_intervals,interval_s,c1\n"
         "ab,0,0,1,0,3,12,60,3\n", "interval columns"),
    ],
)
def test_csv_errors(text, match):
    with pytest.raises(DataError, match=match):
        CountTable.from_csv(io.StringIO(text))


def test_config_from_dict():
    cfg = ExperimentConfig.from_dict(
        {
            "settings": {"alpha": -16, "alpha_prime": 4, "beta": -6, "beta_prime": 14},
            "p": 0.69,
            "det": {"eta_a": 0.431, "eta_b": 0.434},
            "corrected_rate": 520,
            "n_intervals": 12,
            "interval_s": 60,
            "seed": 4,
        }
    )
    assert cfg.settings == LAB_SETTINGS and cfg.seed == 4
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
    assert ExperimentConfig.from_dict({"settings": [0, 22.5, 11.25, 33.75]}).settings.beta == 11.25


@pytest.mark.parametrize(
    "data",
    [{"n_intervals": 1}, {"corrected_rate": 0}, {"p": 2}, {"bogus": 1}, {"settings": [1, 2]}, {"det": {"eta_a": 0}}],
)
def test_config_validation(data):
    with pytest.raises(DataError):
        ExperimentConfig.from_dict(data)


def test_count_row_negative():
    with pytest.raises(DataError):
        CountTable((CountRow("ab", 0, 0, 1, 1, -1.0, 12, 60.0),))
