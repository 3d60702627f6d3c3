import numpy as np
import pytest

from orsa import synthgen
from orsa.synthgen import (
    OffsetArea,
    OffsetDraws,
    SynthConfig,
    default_base,
    device_outputs,
    generate_dataset,
    artificial_config,
    smooth_offset,
)

AREA = OffsetArea((-0.5, 0.0), (0.3, 0.6))


def config(**kw):
    kw.setdefault("outlier_assignment", {})
    return SynthConfig(**kw)


def test_base_deterministic():
    s = np.random.default_rng(0).uniform(-1, 1, (50, 2))
    np.testing.assert_array_equal(default_base()(s), default_base()(s))


def test_base_range():
    s = np.random.default_rng(1).uniform(-1, 1, (10_000, 2))
    f = default_base()(s)
    assert f.min() >= -1.5 and f.max() <= 1.5


def test_base_lipschitz():
    base = default_base()
    bound = base.lipschitz_bound()
    rng = np.random.default_rng(2)
    s = rng.uniform(-1, 1, (5000, 2))
    delta = rng.normal(scale=1e-2, size=s.shape)
    t = np.clip(s + delta, -1, 1)
    ratio = np.abs(base(s) - base(t)) / np.linalg.norm(s - t, axis=1)
    assert ratio.max() <= bound


def test_base_round_trip():
    base = default_base(3)
    assert synthgen.BaseFunction.from_dict(base.to_dict()) == base


def test_smooth_offset_centre_and_boundary():
    assert smooth_offset(AREA, np.array(AREA.center)) == pytest.approx(-1.0, abs=1e-15)
    corners = [(-0.5, 0.0), (0.3, 0.6), (-0.5, 0.3), (-0.1, 0.6)]
    for c in corners:
        assert smooth_offset(AREA, np.array(c)) == 0.0


def test_smooth_offset_outside_zero_and_continuous():
    assert smooth_offset(AREA, np.array([0.9, -0.9])) == 0.0
    # just inside the edge the bump is already tiny
    edge = np.array([0.3 - 1e-9, 0.3])
    assert abs(smooth_offset(AREA, edge)) < 1e-6


def test_smooth_offset_range():
    s = np.random.default_rng(3).uniform(-1, 1, (5000, 2))
    b = smooth_offset(AREA, s)
    assert b.min() >= -1 and b.max() <= 0


def test_area_validation():
    with pytest.raises(ValueError):
        OffsetArea((0.0, 0.0), (0.0, 0.5))
    with pytest.raises(ValueError):
        OffsetArea((-1.5, 0.0), (0.0, 0.5))


def test_type1_level_shift():
    cfg = config()
    s = np.random.default_rng(4).uniform(-1, 1, (100, 2))
    draws = OffsetDraws.from_rng(np.random.default_rng(5), 100)
    np.testing.assert_allclose(device_outputs("type1", s, cfg, draws=draws), cfg.base(s) - 1, atol=1e-15)


def test_type3_zero_probability_is_base():
    cfg = config(p1=0.0)
    s = np.random.default_rng(6).uniform(-1, 1, (200, 2))
    draws = OffsetDraws.from_rng(np.random.default_rng(7), 200)
    np.testing.assert_array_equal(device_outputs("type3", s, cfg, AREA, draws), cfg.base(s))


def test_type4_zero_scale_is_base():
    cfg = config(p1=1.0, scale_range=(0.0, 0.0))
    s = np.random.default_rng(8).uniform(-1, 1, (200, 2))
    draws = OffsetDraws.from_rng(np.random.default_rng(9), 200)
    np.testing.assert_array_equal(device_outputs("type4", s, cfg, AREA, draws), cfg.base(s))


def test_outlier_needs_area():
    with pytest.raises(ValueError):
        device_outputs("type2", np.zeros((1, 2)), config())


def test_single_sample_helper():
    cfg = config()
    y = synthgen.device_output("type1", np.array([0.2, -0.3]), np.random.default_rng(0), cfg)
    assert y == pytest.approx(float(cfg.base(np.array([[0.2, -0.3]]))[0]) - 1)


def test_artificial_dataset_shape():
    ds = generate_dataset(artificial_config(samples_per_device=50))
    assert ds.n_devices == 30
    assert sum(lab != "regular" for lab in ds.labels) == 4
    assert {ds.labels[i] for i in (21, 26, 20, 0)} == set(synthgen.OUTLIER_TYPES)


def test_same_seed_bit_identical():
    a = generate_dataset(artificial_config(samples_per_device=100))
    b = generate_dataset(artificial_config(samples_per_device=100))
    for ta, tb in zip(a.devices, b.devices):
        assert ta.samples.tobytes() == tb.samples.tobytes()
        assert ta.outputs.tobytes() == tb.outputs.tobytes()
        assert ta.area == tb.area


def test_tiny_dataset():
    ds = generate_dataset(config(n_devices=2, samples_per_device=1))
    assert [len(t.outputs) for t in ds.devices] == [1, 1]


@pytest.mark.parametrize(
    "kw",
    [
        {"n_devices": 1},
        {"samples_per_device": 0},
        {"p1": 1.5},
        {"noise_sigma": -0.1},
        {"scale_range": (1.0, -1.0)},
        {"outlier_assignment": {40: "type1"}},
        {"outlier_assignment": {0: "type9"}},
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        config(**kw)


def test_missing_assignment_rejected():
    with pytest.raises(ValueError, match="outlier_assignment"):
        SynthConfig()
    with pytest.raises(ValueError, match="outlier_assignment"):
        SynthConfig.from_dict({"n_devices": 3})


def test_config_round_trip():
    cfg = artificial_config(seed=4)
    assert SynthConfig.from_dict(cfg.to_dict()) == cfg


def test_type2_equals_base_outside_area():
    ds = generate_dataset(artificial_config(samples_per_device=3000))
    t = ds.devices[26]
    outside = ~t.area.contains(t.samples)
    assert outside.sum() > 100
    base = ds.config.base(t.samples[outside])
    np.testing.assert_array_equal(t.outputs[outside], base)


def test_mean_absolute_deviation_ordering():
    # matched: types 2-4 share one area and one set of per-sample draws
    mads = []
    for seed in range(6):
        cfg = config(seed=seed)
        rng = np.random.default_rng(seed)
        s = rng.uniform(-1, 1, (20_000, 2))
        area = synthgen.sample_area(rng, 2)
        draws = OffsetDraws.from_rng(rng, len(s))
        base = cfg.base(s)
        mads.append([
            np.abs(device_outputs(lab, s, cfg, area, draws) - base).mean()
            for lab in synthgen.OUTLIER_TYPES
        ])
    mean = np.mean(mads, axis=0)
    assert mean[0] >= mean[1] >= mean[2] >= mean[3]


def test_regular_residuals():
    ds = generate_dataset(config(n_devices=2, samples_per_device=10_000, seed=11))
    for t in ds.devices:
        r = t.outputs - ds.config.base(t.samples)
        assert abs(r.mean()) <= 0.01
        assert abs(r.std() - 0.1) <= 0.01


def test_keyed_uniform_properties():
    s = np.random.default_rng(0).uniform(-1, 1, (20_000, 2))
    u = synthgen.keyed_uniform(s, 123, 0)
    assert 0 < u.min() and u.max() < 1
    assert abs(u.mean() - 0.5) < 0.01
    np.testing.assert_array_equal(u, synthgen.keyed_uniform(s, 123, 0))
    assert not np.array_equal(u, synthgen.keyed_uniform(s, 123, 1))
    assert not np.array_equal(u, synthgen.keyed_uniform(s, 124, 0))
