import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import central_difference
from orsa import aggnet, synthgen
from orsa.ensemble import EnsembleMember, predict_ensemble, select_k, synthetic_members
from orsa.lof import lof_scores
from orsa.trainer import (
    OrsaConfig,
    SampleTargets,
    compute_targets,
    loss_contributions,
    oracle_target,
    orsa_loss,
    orsa_loss_grad,
    sample_targets,
    selection_frequency,
    train,
    train_step,
    weight_heatmap,
)


def test_loss_examples():
    assert orsa_loss(2.0, [2.0, 2.0], [0.5, 0.5]) == 0.0
    assert orsa_loss(0.0, [2.0], [1.0]) == 4.0
    assert orsa_loss(2.0, [1.0, 3.0], [0.5, 0.5]) == 1.0


def test_loss_length_mismatch():
    with pytest.raises(ValueError):
        orsa_loss(0.0, [1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        orsa_loss_grad(0.0, [1.0, 2.0], [1.0])


def test_grad_examples():
    assert orsa_loss_grad(0.0, [2.0], [1.0]) == -4.0
    vals, w = np.array([1.0, 4.0, 6.0]), np.array([0.2, 0.3, 0.5])
    assert orsa_loss_grad(w @ vals, vals, w) == pytest.approx(0.0, abs=1e-14)


@settings(deadline=None)
@given(st.floats(-3, 3), st.lists(st.floats(-3, 3), min_size=1, max_size=6), st.data())
def test_grad_matches_finite_difference(y_pred, values, data):
    raw = data.draw(st.lists(st.floats(0.1, 1), min_size=len(values), max_size=len(values)))
    w = np.array(raw) / sum(raw)
    fd = central_difference(lambda v: orsa_loss(v, values, w), y_pred, 1e-5)
    assert abs(fd - orsa_loss_grad(y_pred, values, w)) <= 1e-8


def test_oracle_hard_minimum():
    y = np.array([0.3, -1.2, 0.8, -1.1, 0.0])
    assert oracle_target(y, OrsaConfig(1, 1)) == -1.2


def test_oracle_identical_outputs():
    assert oracle_target(np.full(6, 0.7), OrsaConfig(4, 3)) == pytest.approx(0.7, abs=1e-15)


def test_oracle_average_limit_near_equal():
    y = np.random.default_rng(0).normal(0.5, 0.01, 30)
    t = oracle_target(y, OrsaConfig(30, 29))
    assert abs(t - y.mean()) <= 0.05 * abs(y.mean())


def test_oracle_rejects_bad_k():
    with pytest.raises(ValueError):
        oracle_target(np.zeros(3), OrsaConfig(4, 1))
    with pytest.raises(ValueError):
        oracle_target(np.zeros(3), OrsaConfig(2, 3))


@pytest.mark.parametrize("kw", [{"steps": 0}, {"batch_size": 0}, {"k_s": 0}, {"mode": "avg"}])
def test_config_validation(kw):
    args = {"k_s": 2, "k_lof": 2, **kw}
    with pytest.raises(ValueError):
        OrsaConfig(**args)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=12, unique=True), st.data())
def test_oracle_is_per_sample_optimum(y, data):
    y = np.array(y)
    n = len(y)
    cfg = OrsaConfig(data.draw(st.integers(1, n)), data.draw(st.integers(1, n - 1)))
    t = compute_targets(y[None, :], cfg)
    best = orsa_loss(t.target, t.values, t.weights)[0]
    grid = t.target[0] + np.linspace(-1, 1, 201)
    assert np.all(best <= orsa_loss(grid, np.tile(t.values, (201, 1)), np.tile(t.weights, (201, 1))) + 1e-12)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=12), st.data())
def test_mode_duality(y, data):
    y = np.array(y)
    n = len(y)
    k_s, k_lof = data.draw(st.integers(1, n)), data.draw(st.integers(1, n - 1))
    lo = oracle_target(y, OrsaConfig(k_s, k_lof, "min"))
    hi = oracle_target(-y, OrsaConfig(k_s, k_lof, "max"))
    assert abs(hi + lo) <= 1e-12


def test_equal_weight_reduction():
    values = np.array([0.1, 0.5, 0.9, 1.4])
    w = np.full(4, 1.0) / 4  # reciprocal of unit LOF, normalised
    assert orsa_loss(0.3, values, w) == pytest.approx(np.mean((values - 0.3) ** 2), rel=1e-14)


def test_weight_shrinkage_on_outliers(small_dataset):
    members = synthetic_members(small_dataset)
    samples = small_dataset.pooled_samples()[::5]
    cfg = OrsaConfig(4, 4)
    y = predict_ensemble(members, samples)
    t = compute_targets(y, cfg)
    outliers = [i for i, lab in enumerate(small_dataset.labels) if lab != "regular"]
    checked = 0
    for row, idx, w in zip(y, t.indices, t.weights):
        scores = lof_scores(row, cfg.k_lof)[idx]
        for pos, dev in enumerate(idx):
            if dev in outliers and scores[pos] > scores.mean():
                assert w[pos] <= 1 / cfg.k_s
                checked += 1
    assert checked > 100


def _toy_members(outputs):
    return [EnsembleMember(i, lambda s, c=c: np.full(len(s), c)) for i, c in enumerate(outputs)]


def test_train_step_zero_upstream_keeps_params():
    params = aggnet.init(aggnet.NetConfig(2))
    batch = np.random.default_rng(0).uniform(-1, 1, (8, 2))
    y = aggnet.forward(params, batch)
    targets = SampleTargets(np.zeros((8, 1), int), y[:, None], np.ones((8, 1)), y, 1)
    new, _, rec = train_step(params, aggnet.adam_init(params), batch, targets, OrsaConfig(1, 1))
    assert rec.loss == 0.0
    for (a, b), (c, d) in zip(params, new):
        np.testing.assert_array_equal(a, c)
        np.testing.assert_array_equal(b, d)


def test_train_step_k1_is_plain_regression():
    params = aggnet.init(aggnet.NetConfig(2, (4,)))
    x = np.array([[0.2, -0.4]])
    members = _toy_members([0.5, -0.3, 0.9])
    cfg = OrsaConfig(1, 1)
    t = sample_targets(members, x, cfg)
    assert t.target[0] == -0.3
    new, _, _ = train_step(params, aggnet.adam_init(params), x, t, cfg)
    y_pred = aggnet.forward(params, x)
    expected_grads = aggnet.backward(params, x, 2 * (y_pred - (-0.3)))
    ref, _ = aggnet.adam_update(params, expected_grads, aggnet.adam_init(params))
    for (a, b), (c, d) in zip(new, ref):
        np.testing.assert_array_equal(a, c)
        np.testing.assert_array_equal(b, d)


def test_train_step_rejects_empty_batch():
    params = aggnet.init(aggnet.NetConfig(2))
    with pytest.raises(ValueError):
        train_step(params, aggnet.adam_init(params), np.zeros((0, 2)),
                   SampleTargets(*(np.zeros((0, 1)),) * 3, np.zeros(0), 1), OrsaConfig(1, 1))


@pytest.fixture(scope="module")
def toy_type1():
    cfg = synthgen.SynthConfig(n_devices=5, samples_per_device=300,
                               outlier_assignment={2: "type1"}, seed=3)
    ds = synthgen.generate_dataset(cfg)
    return ds, synthetic_members(ds)


@pytest.fixture(scope="module")
def toy_run(toy_type1):
    ds, members = toy_type1
    return train(members, ds, OrsaConfig(3, 3, steps=400, batch_size=16, seed=5))


def test_type1_equal_exceeds_weighted(toy_run):
    _, metrics = toy_run
    weighted, equal = loss_contributions(metrics)
    assert equal[2] > weighted[2]
    assert equal[2] / weighted[2] > 5


def test_train_deterministic(toy_type1, toy_run):
    ds, members = toy_type1
    params, metrics = train(members, ds, OrsaConfig(3, 3, steps=400, batch_size=16, seed=5))
    np.testing.assert_array_equal(metrics.loss, toy_run[1].loss)
    np.testing.assert_array_equal(metrics.selection, toy_run[1].selection)
    for (a, b), (c, d) in zip(params, toy_run[0]):
        np.testing.assert_array_equal(a, c)


def test_selection_window_partition_and_total(toy_run):
    _, m = toy_run
    whole = selection_frequency(m, 200)
    parts = selection_frequency(m, 100, stop=300) + selection_frequency(m, 100)
    np.testing.assert_array_equal(whole, parts)
    assert whole.sum() == 200 * m.batch_size * m.k_s
    with pytest.raises(ValueError):
        selection_frequency(m, 401)


def test_loss_contribution_additivity(toy_run):
    _, m = toy_run
    weighted, _ = loss_contributions(m, 250)
    assert weighted.sum() == pytest.approx(m.loss[-250:].sum(), rel=1e-12)


def test_selection_all_devices_when_k_is_n(toy_type1):
    ds, members = toy_type1
    _, m = train(members, ds, OrsaConfig(5, 4, steps=20, batch_size=8))
    np.testing.assert_array_equal(selection_frequency(m), np.full(5, 20 * 8))


def test_identical_members_equal_contributions():
    members = _toy_members([0.4] * 4)
    _, m = train(members, np.random.default_rng(0).uniform(-1, 1, (50, 2)),
                 OrsaConfig(3, 2, steps=30, batch_size=8))
    weighted, equal = loss_contributions(m)
    np.testing.assert_allclose(weighted, equal, rtol=1e-12)


def test_heatmap_columns_sum_to_one(small_dataset):
    members = synthetic_members(small_dataset)
    batch = small_dataset.pooled_samples()[:64]
    h = weight_heatmap(members, batch, OrsaConfig(4, 4))
    assert h.shape == (10, 64)
    np.testing.assert_allclose(h.sum(axis=0), 1.0, atol=1e-12)
    assert np.all((h > 0).sum(axis=0) <= 4)


def test_type2_heatmap_centre_vs_corner():
    # type-2 device at index 0 so the tie-break keeps it selected where it is regular
    cfg = synthgen.SynthConfig(n_devices=8, samples_per_device=10,
                               outlier_assignment={0: "type2"}, seed=2)
    ds = synthgen.generate_dataset(cfg)
    area = ds.devices[0].area
    members = synthetic_members(ds, error=0.0)
    lo, hi = np.array(area.lower), np.array(area.upper)
    corner = np.where(lo + 1 > 1 - hi, -1.0, 1.0)
    h = weight_heatmap(members, np.vstack([area.center, corner]), OrsaConfig(3, 3))
    assert h[0, 0] < 0.01
    assert h[0, 1] == pytest.approx(1 / 3)
