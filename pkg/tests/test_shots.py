import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_homography
from pitchpos.shots import (DEFAULT_TAU, ShotScore, ShotSegment, ShotType, classify_shot, classify_shots,
                            shot_change_score)


def reference_score(hs):
    """Direct transcription of the statistic with plain loops."""
    n = len(hs)
    canon = [None if H is None else [H[i][j] / H[2][2] for i in range(3) for j in range(3)] for H in hs]
    good = [c for c in canon if c is not None]
    norm = []
    for c in canon:
        if c is None:
            norm.append(None)
            continue
        row = []
        for e in range(9):
            lo = min(g[e] for g in good)
            hi = max(g[e] for g in good)
            row.append(0.0 if hi == lo else (c[e] - lo) / (hi - lo))
        norm.append(row)
    total = 0.0
    for t in range(n - 1):
        a, b = norm[t], norm[t + 1]
        total += 3.0 if a is None or b is None else math.sqrt(sum((x - y) ** 2 for x, y in zip(a, b)))
    return total / (n - 1)


def random_walk(rng, n, step=0.01):
    H = random_homography(rng)
    out = [H]
    for _ in range(n - 1):
        H = H * (1 + step * rng.normal(size=(3, 3)))
        H = H / H[2, 2]
        out.append(H)
    return out


def shot(hs, start=0):
    return ShotSegment(start, start + len(hs) - 1, hs)


def test_constant_shot_scores_zero(rng):
    H = random_homography(rng)
    assert shot_change_score(shot([H.copy() for _ in range(30)])).mean_change == 0.0


@pytest.mark.parametrize("n", [2, 5, 10])
def test_alternating_scores_sqrt_of_differing_entries(rng, n):
    A = random_homography(rng)
    B = A.copy()
    B[0, 1] += 1.0
    B[1, 2] -= 4.0
    B[2, 0] *= 2
    hs = [A if t % 2 == 0 else B for t in range(n)]
    assert shot_change_score(shot(hs)).mean_change == pytest.approx(math.sqrt(3), abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(2, 40), st.floats(0.0, 0.3))
def test_score_matches_reference(seed, n, fail):
    rng = np.random.default_rng(seed)
    hs = random_walk(rng, n)
    for t in range(n):
        if rng.random() < fail:
            hs[t] = None
    if all(h is None for h in hs):
        return
    got = shot_change_score(shot(hs)).mean_change
    assert got == pytest.approx(reference_score(hs), rel=1e-9, abs=1e-12)
    assert got >= 0


@given(st.integers(0, 2**32 - 1), st.lists(st.floats(-50, 50).filter(lambda s: abs(s) > 1e-3), min_size=1))
def test_score_invariant_to_projective_scale(seed, scales):
    rng = np.random.default_rng(seed)
    hs = random_walk(rng, 12)
    scaled = [h * scales[i % len(scales)] for i, h in enumerate(hs)]
    a = shot_change_score(shot(hs)).mean_change
    assert shot_change_score(shot(scaled)).mean_change == pytest.approx(a, rel=1e-9, abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(0, 7), st.floats(-10, 10).filter(lambda a: abs(a) > 1e-2),
       st.floats(-100, 100))
def test_score_invariant_to_affine_entry_rescaling(seed, entry, a, b):
    rng = np.random.default_rng(seed)
    hs = random_walk(rng, 12)
    moved = []
    for h in hs:
        g = h.copy().ravel()
        g[entry] = a * g[entry] + b
        moved.append(g.reshape(3, 3))
    s0 = shot_change_score(shot(hs)).mean_change
    assert shot_change_score(shot(moved)).mean_change == pytest.approx(s0, rel=1e-6, abs=1e-9)


def test_failed_frames_contribute_max_change(rng):
    H = random_homography(rng)
    hs = [H, None, H, H]
    # pairs: (H, fail) 3, (fail, H) 3, (H, H) 0
    assert shot_change_score(shot(hs)).mean_change == pytest.approx(2.0)
    assert shot_change_score(shot([None, None])).mean_change == 3.0


def test_single_frame_shot_unclassifiable(rng):
    s = shot_change_score(shot([random_homography(rng)]))
    assert not s.classifiable
    assert classify_shot(s) is ShotType.OTHER


def test_classification_threshold():
    assert DEFAULT_TAU == 0.35
    assert classify_shot(ShotScore(0.0, 0.35)) is ShotType.MAIN_CAMERA
    assert classify_shot(ShotScore(0.35, 0.35)) is ShotType.MAIN_CAMERA
    assert classify_shot(ShotScore(0.36, 0.35)) is ShotType.OTHER


def test_segment_validation(rng):
    H = random_homography(rng)
    with pytest.raises(ValueError):
        ShotSegment(5, 4, [])
    with pytest.raises(ValueError):
        ShotSegment(0, 2, [H, H])


def test_classify_shots_labels_each(rng):
    H = random_homography(rng)
    smooth = shot([H] * 10)
    broken = shot([H, None] * 5, start=10)
    labels = [c for _, _, c in classify_shots([smooth, broken])]
    assert labels == [ShotType.MAIN_CAMERA, ShotType.OTHER]
