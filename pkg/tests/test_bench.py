import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from abcd.bench import (
    CSV_HEADER,
    GridRow,
    Metrics,
    evaluate,
    fingerprint,
    prf,
    run_grid,
    run_stream,
    score_detections,
    spearman,
    subspace_accuracy,
    write_metrics_csv,
)
from abcd.detector import ChangeReport, DetectorConfig
from abcd.exceptions import DomainError, UndefinedCorrelationError
from abcd.generators import Change, gen_normal
from abcd.models import ModelConfig


def brute_force_score(detections, changes, end):
    bounds = list(changes[1:]) + [end]
    tp, delays = 0, []
    for c, upper in zip(changes, bounds):
        inside = [t for t in detections if c < t <= upper]
        if inside:
            tp += 1
            delays.append(min(inside) - c)
    mtd = sum(delays) / len(delays) if delays else math.nan
    return tp, len(detections) - tp, len(changes) - tp, mtd


# scoring


def test_score_example():
    tp, fp, fn, mtd = score_detections([1100], [1000, 2000], 4000)
    assert (tp, fp, fn, mtd) == (1, 0, 1, 100.0)
    precision, recall, f1 = prf(tp, fp, fn)
    assert (precision, recall) == (1.0, 0.5)
    assert f1 == pytest.approx(2 / 3)


def test_detection_before_first_change_is_false_positive():
    assert score_detections([500], [1000], 2000)[:3] == (0, 1, 1)


def test_immediate_detection():
    changes = [100, 400, 900]
    tp, fp, fn, mtd = score_detections([c + 1 for c in changes], changes, 1000)
    assert (tp, fp, fn, mtd) == (3, 0, 0, 1.0)


def test_duplicate_detections_are_false_positives():
    assert score_detections([1100, 1200, 1300], [1000], 2000) == (1, 2, 0, 100.0)


def test_detection_on_change_point_belongs_to_previous_window():
    assert score_detections([2000], [1000, 2000], 3000)[:3] == (1, 0, 1)


def test_unsorted_input_rejected():
    with pytest.raises(DomainError):
        score_detections([5, 3], [1], 10)
    with pytest.raises(DomainError):
        score_detections([5], [4, 1], 10)


def test_no_detections():
    tp, fp, fn, mtd = score_detections([], [10, 20], 30)
    assert (tp, fp, fn) == (0, 0, 2) and math.isnan(mtd)
    assert prf(0, 0, 2) == (0.0, 0.0, 0.0)


@given(
    st.lists(st.integers(1, 500), max_size=10, unique=True).map(sorted),
    st.lists(st.integers(0, 520), max_size=30).map(sorted),
)
def test_score_matches_brute_force(changes, detections):
    got = score_detections(detections, changes, 500)
    want = brute_force_score(detections, changes, 500)
    assert got[:3] == want[:3]
    assert (math.isnan(got[3]) and math.isnan(want[3])) or got[3] == pytest.approx(want[3])
    tp, fp, fn, mtd = got
    assert tp + fn == len(changes)
    assert all(0 <= v <= 1 for v in prf(tp, fp, fn))
    if tp:
        assert mtd >= 1


# subspace accuracy


def test_subspace_accuracy_examples():
    assert subspace_accuracy({1, 2, 3}, {1, 2, 3}, 10) == 1.0
    assert subspace_accuracy(set(range(3, 10)), {0, 1, 2}, 10) == 0.0
    assert subspace_accuracy({2, 3, 4}, {1, 2, 3}, 10) == pytest.approx(0.8)


# spearman


def test_spearman_examples():
    assert spearman([1, 2, 3, 4], [2, 5, 7, 9]) == pytest.approx(1.0)
    assert spearman([1, 2, 3, 4], [9, 7, 5, 2]) == pytest.approx(-1.0)
    assert spearman([1, 2, 2, 4], [10, 20, 20, 40]) == pytest.approx(1.0)


def test_spearman_undefined():
    with pytest.raises(UndefinedCorrelationError):
        spearman([1.0], [2.0])
    with pytest.raises(UndefinedCorrelationError):
        spearman([1, 1, 1], [1, 2, 3])
    with pytest.raises(DomainError):
        spearman([1, 2], [1, 2, 3])


def test_spearman_matches_scipy():
    from scipy.stats import spearmanr

    rng = np.random.default_rng(0)
    x, y = rng.integers(0, 5, 30), rng.normal(size=30)
    assert spearman(x, y) == pytest.approx(spearmanr(x, y).statistic, abs=1e-12)


@given(
    # a coarse grid keeps both transforms strictly monotone in float64
    st.lists(st.tuples(st.integers(-200, 200), st.integers(-200, 200)), min_size=3, max_size=30),
)
def test_spearman_invariant_under_monotone_transform(pairs):
    xs, ys = [p[0] / 4 for p in pairs], [p[1] / 4 for p in pairs]
    try:
        rho = spearman(xs, ys)
    except UndefinedCorrelationError:
        return
    assert -1 <= rho <= 1
    assert spearman([math.atan(v) * 3 + 1 for v in xs], [v**3 for v in ys]) == pytest.approx(rho, abs=1e-9)


# metrics


def test_evaluate_sacc_and_pairs():
    truth = [Change(1000, (0, 1, 2), 0.3), Change(2000, (0, 1, 2), 0.1)]
    reports = [
        ChangeReport(1100, 1010, 0.01, (1, 2, 3), 5.0),
        ChangeReport(1150, 1120, 0.01, (1,), 1.0),
        ChangeReport(2200, 2020, 0.01, (0, 1, 2), 2.0),
    ]
    m = evaluate(reports, truth, 10, 3000)
    assert (m.tp, m.fp, m.fn) == (2, 1, 0)
    assert m.mtd == pytest.approx(150.0)
    assert m.sacc == pytest.approx((0.8 + 1.0) / 2)
    assert m.spearman_rho == pytest.approx(1.0)


def test_evaluate_without_true_positives():
    m = evaluate([], [Change(1000, (0,), 0.3)], 4, 2000)
    assert math.isnan(m.mtd) and math.isnan(m.sacc) and math.isnan(m.spearman_rho)
    assert m.f1 == 0.0


# grid


def same_rows(a, b):
    return [repr(r.csv_row()) for r in a] == [repr(r.csv_row()) for r in b]


def small_stream(seed):
    return gen_normal(6, 3, "mean", (0.3,), 600, seed=seed)


CONFIGS = [DetectorConfig(n_min=50), DetectorConfig(n_min=50, tau=1.0)]


def test_run_stream_reports_sorted():
    res = run_stream(small_stream(1), CONFIGS[0], "a")
    times = [r.t_detected for r in res.detections]
    assert times == sorted(times)
    assert res.fingerprint == fingerprint("a", CONFIGS[0])


def test_grid_cardinality_and_fingerprints():
    streams = [small_stream(s) for s in range(3)]
    rows = run_grid(streams, CONFIGS)
    assert len(rows) == 6
    assert len({r.fingerprint for r in rows}) == 6
    assert [(r.stream_id, r.config) for r in rows] == [(f"s{i}", c) for i in range(3) for c in CONFIGS]
    assert len(run_grid(streams[:1], CONFIGS[:1])) == 1


def test_grid_is_deterministic():
    s = small_stream(4)
    rows = run_grid([s, s], CONFIGS[:1], stream_ids=["x", "y"])
    assert repr(rows[0].csv_row()[3:]) == repr(rows[1].csv_row()[3:])
    assert same_rows(rows, run_grid([s, s], CONFIGS[:1], stream_ids=["x", "y"]))


def test_grid_parallel_matches_serial():
    streams = [small_stream(s) for s in range(2)]
    serial = run_grid(streams, CONFIGS)
    parallel = run_grid(streams, CONFIGS, jobs=2)
    assert same_rows(serial, parallel)


def test_failed_cell_does_not_stop_grid():
    bad = DetectorConfig(n_min=50, model=ModelConfig(eta=0.01))
    rows = run_grid([small_stream(5)], [CONFIGS[0], bad, CONFIGS[1]])
    assert [r.failed for r in rows] == [False, True, False]
    assert "bottleneck" in rows[1].error or "eta" in rows[1].error
    buf = io.StringIO()
    write_metrics_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0].split(",") == CSV_HEADER
    assert len(lines) == 3


def test_grid_needs_inputs():
    with pytest.raises(DomainError):
        run_grid([], CONFIGS)


def test_csv_row_matches_header():
    m = Metrics(1, 0, 0, 1.0, 1.0, 1.0, 10.0, 0.9, math.nan)
    row = GridRow("s", "normal-m", 3, CONFIGS[0], "f", m)
    assert len(row.csv_row()) == len(CSV_HEADER)
