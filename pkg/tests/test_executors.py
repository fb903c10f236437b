import math
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cityforge.errors import ValidationError
from cityforge.executors import (
    KIND_ANOMALY,
    KIND_CLASSIFICATION,
    MAX_SCORE,
    REASON_FLATLINE,
    REASON_NONE,
    REASON_ZSCORE,
    AnomalyModel,
    ClassifierModel,
    ExecutorConfig,
    classify,
    score_anomaly,
    train_anomaly,
    train_classifier,
)

LIGHT_SAMPLES = [("night", 0.0), ("sunlight", 100.0), ("overcast", 300.0)]


def light_model():
    return train_classifier(LIGHT_SAMPLES)


# -- classifier ------------------------------------------------------------

def test_classifier_centroids_are_tag_means():
    model = train_classifier(
        [("a", 1.0), ("a", 3.0), ("b", 10.0), ("a", 2.0)]
    )
    assert model.centroids["a"] == (2.0, 3)
    assert model.centroids["b"] == (10.0, 1)


def test_light_level_feed_tags():
    model = light_model()
    feed = [0.0, 75.0, 200.0, 45.0, 33.0, 181.0, 63.0, 1237.0, 177.0, 40.0]
    tags = [classify(model, x).tag for x in feed]
    assert tags == [
        "night", "sunlight", "overcast", "night", "night",
        "sunlight", "sunlight", "overcast", "sunlight", "night",
    ]


def test_midpoint_tie_goes_to_greater_centroid():
    # 200 sits exactly between sunlight (100) and overcast (300)
    result = classify(light_model(), 200.0)
    assert result.tag == "overcast"
    assert result.confidence == 0.5


def test_equal_centroid_tie_goes_to_lexicographic_tag():
    model = train_classifier([("beta", 5.0), ("alpha", 5.0)])
    assert classify(model, 7.0).tag == "alpha"


def test_confidence_is_distance_ratio():
    # 75: d1 = 25 (sunlight), d2 = 75 (night) -> 75 / 100
    assert classify(light_model(), 75.0).confidence == pytest.approx(0.75)


def test_single_centroid_confidence_is_one():
    model = train_classifier([("only", 42.0)])
    result = classify(model, -1000.0)
    assert result.tag == "only"
    assert result.confidence == 1.0


def test_exact_centroid_hit_confidence_is_one():
    assert classify(light_model(), 100.0).confidence == 1.0


def test_classifier_training_rejects_bad_values():
    with pytest.raises(ValidationError):
        train_classifier([])
    with pytest.raises(ValidationError):
        train_classifier([("a", float("nan"))])
    with pytest.raises(ValidationError):
        train_classifier([("a", True)])
    with pytest.raises(ValidationError):
        classify(light_model(), float("inf"))


@given(
    samples=st.lists(
        st.tuples(st.sampled_from(["a", "b", "c"]), st.floats(-1e6, 1e6)),
        min_size=2,
        max_size=30,
    ),
    x=st.floats(-1e6, 1e6),
)
def test_classified_tag_minimizes_distance(samples, x):
    model = train_classifier(samples)
    result = classify(model, x)
    best = min(abs(x - c) for c, _ in model.centroids.values())
    assert abs(x - model.centroids[result.tag][0]) == best


@given(
    samples=st.lists(
        st.tuples(st.sampled_from(["lo", "mid", "hi"]), st.floats(-1e3, 1e3)),
        min_size=2,
        max_size=20,
    ),
    x=st.floats(-1e3, 1e3),
    shift=st.floats(-1e3, 1e3),
    scale=st.floats(0.01, 100.0),
)
@settings(deadline=None)
def test_classifier_shift_scale_equivariance(samples, x, shift, scale):
    """An affine map with positive scale applied to both the training set and
    the query must not change the winning tag."""
    base = classify(train_classifier(samples), x)
    mapped = [(tag, scale * v + shift) for tag, v in samples]
    moved = classify(train_classifier(mapped), scale * x + shift)
    # centroid means under float arithmetic can shift a strict tie either
    # way, so only clear wins are compared
    distances = sorted(
        abs(x - c) for c, _ in train_classifier(samples).centroids.values()
    )
    if len(distances) > 1 and math.isclose(distances[0], distances[1], rel_tol=1e-9, abs_tol=1e-9):
        return
    assert moved.tag == base.tag


# -- anomaly scorer --------------------------------------------------------

def test_anomaly_training_stats_match_population_formulas():
    values = [2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]
    model = train_anomaly(values)
    assert model.mean == pytest.approx(5.0)
    assert model.std_dev == pytest.approx(statistics.pstdev(values))
    assert model.count == len(values)


def test_zscore_threshold_fires_strictly_above():
    model = train_anomaly([0.0, 10.0] * 10)  # mean 5, std 5
    assert not score_anomaly(model.copy(), 20.0).anomalous  # z == 3.0 exactly
    hit = score_anomaly(model.copy(), 20.1)
    assert hit.anomalous
    assert hit.reason == REASON_ZSCORE
    assert hit.score == pytest.approx(abs(20.1 - 5.0) / 5.0)


def test_flatline_needs_a_full_window():
    config = ExecutorConfig(kind=KIND_ANOMALY, flatline_window=4)
    model = train_anomaly([0.0, 10.0] * 10, config)
    results = [score_anomaly(model, 5.0) for _ in range(4)]
    assert [r.reason for r in results[:3]] == [REASON_NONE] * 3
    assert results[3].reason == REASON_FLATLINE
    assert results[3].anomalous


def test_flatline_reason_wins_over_zscore():
    config = ExecutorConfig(kind=KIND_ANOMALY, flatline_window=3)
    model = train_anomaly([0.0, 10.0] * 10, config)
    for _ in range(2):
        score_anomaly(model, 50.0)
    result = score_anomaly(model, 50.0)  # both detectors fire here
    assert result.anomalous
    assert result.reason == REASON_FLATLINE


def test_flatline_epsilon_tolerates_jitter():
    config = ExecutorConfig(kind=KIND_ANOMALY, flatline_window=3, flatline_epsilon=0.5)
    model = train_anomaly([0.0, 10.0] * 10, config)
    for value in (5.0, 5.2):
        score_anomaly(model, value)
    assert score_anomaly(model, 5.4).reason == REASON_FLATLINE


def test_zero_variance_model_scores():
    model = train_anomaly([7.0, 7.0, 7.0])
    same = score_anomaly(model.copy(), 7.0)
    assert same.score == 0.0 and not same.anomalous
    other = score_anomaly(model.copy(), 7.0001)
    assert other.score == MAX_SCORE
    assert other.anomalous and other.reason == REASON_ZSCORE


def test_without_adaptation_statistics_never_move():
    model = train_anomaly([1.0, 2.0, 3.0])
    before = (model.mean, model.std_dev, model.count)
    for x in [1.5, 2.5, 1.0, 2.0]:
        score_anomaly(model, x)
    assert (model.mean, model.std_dev, model.count) == before


def test_online_adaptation_matches_batch_recomputation():
    config = ExecutorConfig(kind=KIND_ANOMALY, z_threshold=100.0, online_adaptation=True)
    training = [1.0, 2.0, 3.0, 4.0, 5.0]
    stream = [2.2, 3.7, 1.1, 4.9, 2.8, 3.3, 0.5, 5.5, 2.0, 3.0]
    model = train_anomaly(training, config)
    for x in stream:
        score_anomaly(model, x)
    everything = training + stream
    assert model.count == len(everything)
    assert model.mean == pytest.approx(statistics.fmean(everything), abs=1e-9)
    assert model.std_dev == pytest.approx(statistics.pstdev(everything), abs=1e-9)


def test_adaptation_skips_anomalous_readings():
    config = ExecutorConfig(kind=KIND_ANOMALY, z_threshold=2.0, online_adaptation=True)
    model = train_anomaly([0.0, 10.0] * 10, config)
    score_anomaly(model, 500.0)  # rejected, must not poison the mean
    assert model.mean == pytest.approx(5.0)
    assert model.count == 20


@given(
    values=st.lists(st.floats(-1e4, 1e4), min_size=2, max_size=50),
    x=st.floats(-1e4, 1e4),
)
def test_score_matches_independent_zscore(values, x):
    model = train_anomaly(values)
    result = score_anomaly(model, x)
    mean = sum(values) / len(values)
    std = math.sqrt(sum((v - mean) ** 2 for v in values) / len(values))
    if std > 0:
        assert result.score == pytest.approx(abs(x - mean) / std, rel=1e-9, abs=1e-9)


# -- model serialization ---------------------------------------------------

def test_classifier_model_round_trip():
    model = light_model()
    again = ClassifierModel.from_dict(model.to_dict())
    assert again.centroids == model.centroids


def test_anomaly_model_round_trip_drops_streaming_window():
    config = ExecutorConfig(kind=KIND_ANOMALY, flatline_window=3)
    model = train_anomaly([1.0, 2.0, 3.0], config)
    score_anomaly(model, 2.0)
    again = AnomalyModel.from_dict(model.to_dict())
    assert (again.mean, again.std_dev, again.count, again.m2) == (
        model.mean, model.std_dev, model.count, model.m2,
    )
    assert list(again.recent) == []  # window is live state, not model state


def test_executor_config_validation():
    with pytest.raises(ValidationError):
        ExecutorConfig(kind="other")
    with pytest.raises(ValidationError):
        ExecutorConfig(kind=KIND_ANOMALY, z_threshold=0.0)
    with pytest.raises(ValidationError):
        ExecutorConfig(kind=KIND_ANOMALY, flatline_window=1)
    with pytest.raises(ValidationError):
        ExecutorConfig(kind=KIND_CLASSIFICATION, flatline_epsilon=-1e-9)


def test_executor_config_wire_round_trip():
    config = ExecutorConfig(
        kind=KIND_ANOMALY, z_threshold=2.5, flatline_window=6,
        flatline_epsilon=0.01, online_adaptation=True,
    )
    assert ExecutorConfig.from_dict(KIND_ANOMALY, config.to_dict()) == config
