import math

import numpy as np
import pytest

from attncert import (
    ScoreBox,
    baseline_directional_max,
    baseline_directional_min,
    directional_min,
    softmax_output_box,
)

K3_MIN = -0.6804790632423976
K3_BASELINE = -0.7236071038285609


def box(lower, upper):
    return ScoreBox(lower=np.asarray(lower, float), upper=np.asarray(upper, float))


def test_degenerate_uniform():
    ob = softmax_output_box(box([0.0, 0.0], [0.0, 0.0]))
    assert np.array_equal(ob.a_lo, [0.5, 0.5])
    assert np.array_equal(ob.a_hi, [0.5, 0.5])


def test_k2_symmetric_box():
    ob = softmax_output_box(box([-1.0, -1.0], [1.0, 1.0]))
    lo = 1.0 / (1.0 + math.e**2)
    hi = math.e**2 / (1.0 + math.e**2)
    assert ob.a_lo == pytest.approx([lo, lo], abs=1e-15)
    assert ob.a_hi == pytest.approx([hi, hi], abs=1e-15)


def test_single_coordinate():
    ob = softmax_output_box(box([3.0], [7.0]))
    assert np.array_equal(ob.a_lo, [1.0])
    assert np.array_equal(ob.a_hi, [1.0])


def test_k3_fixture_values():
    ob = softmax_output_box(box([-1.0] * 3, [1.0] * 3))
    a_lo = 1.0 / (1.0 + 2.0 * math.e**2)
    a_hi = math.e**2 / (math.e**2 + 2.0)
    assert ob.a_lo == pytest.approx([a_lo] * 3, abs=1e-12)
    assert ob.a_hi == pytest.approx([a_hi] * 3, abs=1e-12)
    v = baseline_directional_min([-1.0, 0.0, 1.0], box([-1.0] * 3, [1.0] * 3))
    assert v == pytest.approx(K3_BASELINE, abs=1e-12)
    assert v < K3_MIN  # strictly looser than the exact solver here


def test_baseline_coincides_with_exact_on_k2():
    v = baseline_directional_min([0.0, 1.0], box([-1.0, -1.0], [1.0, 1.0]))
    assert v == pytest.approx(0.11920292202211755, abs=1e-15)


def test_all_ones_direction_loose():
    b = box([-2.0, 1.0], [0.5, 3.0])
    v = baseline_directional_min([1.0, 1.0], b)
    assert v <= 1.0
    assert directional_min([1.0, 1.0], b).value == 1.0


def test_output_box_invariants_and_containment():
    rng = np.random.default_rng(31)
    for _ in range(300):
        k = int(rng.integers(1, 12))
        centers = rng.uniform(-3, 3, k)
        w = rng.uniform(0, 2, k)
        b = box(centers - w, centers + w)
        ob = softmax_output_box(b)
        assert np.all(ob.a_lo >= 0.0)
        assert np.all(ob.a_lo <= ob.a_hi)
        assert np.all(ob.a_hi <= 1.0)
        pts = rng.uniform(b.lower, b.upper, size=(200, k))
        e = np.exp(pts - pts.max(axis=1, keepdims=True))
        soft = e / e.sum(axis=1, keepdims=True)
        assert np.all(soft >= ob.a_lo[None, :] - 1e-12)
        assert np.all(soft <= ob.a_hi[None, :] + 1e-12)


def test_soundness_by_sampling():
    rng = np.random.default_rng(32)
    for _ in range(300):
        k = int(rng.integers(1, 12))
        centers = rng.uniform(-3, 3, k)
        w = rng.uniform(0, 2, k)
        c = rng.uniform(-2, 2, k)
        b = box(centers - w, centers + w)
        base = baseline_directional_min(c, b)
        pts = rng.uniform(b.lower, b.upper, size=(200, k))
        e = np.exp(pts - pts.max(axis=1, keepdims=True))
        vals = (e @ c) / e.sum(axis=1)
        assert vals.min() >= base - 1e-9


def test_dominance_with_strictness():
    rng = np.random.default_rng(33)
    strict = 0
    n = 500
    for _ in range(n):
        k = int(rng.integers(2, 12))
        centers = rng.uniform(-2, 2, k)
        w = rng.uniform(0.2, 1.5, k)
        c = rng.uniform(-2, 2, k)
        c[0] = abs(c[0]) + 0.1
        c[1] = -abs(c[1]) - 0.1  # force mixed signs
        b = box(centers - w, centers + w)
        exact = directional_min(c, b).value
        base = baseline_directional_min(c, b)
        assert exact >= base - 1e-12
        if exact > base + 1e-9:
            strict += 1
    assert strict / n >= 0.3


def test_max_by_negation():
    rng = np.random.default_rng(34)
    for _ in range(50):
        k = int(rng.integers(1, 8))
        centers = rng.uniform(-2, 2, k)
        w = rng.uniform(0, 1, k)
        c = rng.uniform(-2, 2, k)
        b = box(centers - w, centers + w)
        assert baseline_directional_max(c, b) == -baseline_directional_min(-c, b)
