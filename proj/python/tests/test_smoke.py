import math

import numpy as np
import pytest

import shrimpmorph as sm


def test_corpus_is_deterministic():
    a = sm.generate_corpus(4, seed=3)
    b = sm.generate_corpus(4, seed=3)
    assert [s.sample_id for s in a] == ["synth-000000", "synth-000001", "synth-000002", "synth-000003"]
    for x, y in zip(a, b):
        assert np.array_equal(x.rgb, y.rgb)
        assert np.array_equal(x.depth, y.depth)
        assert x.gt_skeleton == y.gt_skeleton


def test_sample_arrays_have_image_shape():
    s = sm.generate_corpus(1, seed=1)[0]
    assert s.rgb.shape == (96, 128, 3)
    assert s.depth.shape == (96, 128)
    assert s.depth.dtype == np.float32
    assert sm.validate_skeleton(s.gt_skeleton) == []


def test_measurements_follow_taxonomy():
    s = sm.generate_corpus(1, seed=2, view_mix=1.0, rostrum_break_prob=0.0)[0]
    px = sm.pixel_measurements(s.gt_skeleton)
    assert len(px) == 16
    assert set(px) <= set(sm.variable_names())


def test_metrics_basics():
    s = sm.generate_corpus(1, seed=5)[0]
    gt = s.gt_skeleton
    assert sm.oks(gt, gt) == 1.0
    assert sm.pck([gt], [gt], 10.0) == 100.0
    assert sm.map_50_95([0.7, 0.7, 0.7]) == 50.0
    with pytest.raises(sm.Error):
        sm.map_50_95([])


def test_svr_recovers_line():
    pairs = [(float(x), 0.05 * x + 0.3) for x in range(10, 200, 7)]
    m = sm.fit_svr("TL", pairs, epsilon=0.0, c=10.0)
    assert abs(m.alpha - 0.05) < 1e-6
    assert abs(m.beta - 0.3) < 1e-6
    ols = sm.fit_least_squares("TL", pairs)
    assert abs(m.predict(123.0) - ols.predict(123.0)) < 1e-4


def test_pose_shapes_and_decode():
    assert sm.PoseNetConfig.desk().output_shape() == (24, 32, 23)
    assert sm.PoseNetConfig.full().output_shape() == (48, 64, 23)
    gt = sm.generate_corpus(1, seed=9)[0].gt_skeleton
    back = sm.decode_round_trip(gt)
    for a, b in zip(gt.keypoints, back.keypoints):
        assert math.hypot(a.x - b.x, a.y - b.y) < 1.0


def test_kv_config_parse():
    assert sm.parse_kv_config("a = 1 # note\n\nb=x\n") == {"a": "1", "b": "x"}
    with pytest.raises(sm.Error):
        sm.parse_kv_config("no equals sign")
