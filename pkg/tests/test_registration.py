import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_homography, random_pose
from oracles import mc_iou
from pitchpos import polygon
from pitchpos.camera import CameraPose, pose_to_homography, preset, sample_poses
from pitchpos.field import render_edge_image
from pitchpos.homography import apply_many, canonicalize, corner_error, fit_dlt, orient
from pitchpos.registration import (DescriptorConfig, FeatureDB, InvalidFeatureError, RefinementParams,
                                   build_feature_db, descriptor, iou_part,
                                   refine_homography, register_frame, retrieve_nearest, view_polygon)

SIZE = (1280, 720)
# whole pitch in view at 10 px/m
TOP = np.array([[10.0, 0, 115], [0, 10.0, 20], [0, 0, 1]])


@pytest.fixture(scope="module")
def small_db(template):
    return build_feature_db(sample_poses(preset("wc14-base", count=40, seed=7)), template)


def perturb_corners(H, pts, max_px, rng):
    uv, _ = apply_many(H, pts)
    ang = rng.uniform(0, 2 * np.pi, len(pts))
    r = rng.uniform(0, max_px, len(pts))
    return canonicalize(fit_dlt(pts, uv + np.c_[r * np.cos(ang), r * np.sin(ang)]))


# -- descriptor -----------------------------------------------------------------

def test_descriptor_unit_norm_and_identical(template, rng):
    edges = render_edge_image(template, random_homography(rng))
    a, b = descriptor(edges), descriptor(edges.copy())
    assert np.array_equal(a, b)
    assert abs(np.linalg.norm(a) - 1) < 1e-6
    assert len(a) == DescriptorConfig().dim == 920


def test_descriptor_empty_is_zero_and_rejected(small_db):
    v = descriptor(np.zeros((720, 1280), np.uint8))
    assert not v.any()
    with pytest.raises(InvalidFeatureError):
        retrieve_nearest(small_db, v)


def test_descriptor_shift_monotone():
    img = np.zeros((180, 320), np.uint8)
    img[40:140, 100] = 1
    img[90, 60:260] = 1
    base = descriptor(img)
    d1 = np.linalg.norm(descriptor(np.roll(img, 1, axis=1)) - base)
    d50 = np.linalg.norm(descriptor(np.roll(img, 50, axis=1)) - base)
    assert 0 < d1 < d50


# -- database and retrieval --------------------------------------------------------

def test_db_rows_unit_and_counts(small_db):
    assert len(small_db) + small_db.excluded == 40
    assert np.allclose(np.linalg.norm(small_db.descriptors, axis=1), 1, atol=1e-6)


def test_db_excludes_empty_render(template):
    away = CameraPose(52, -45, 17, 3000, 180, -10)
    db = build_feature_db([random_pose(np.random.default_rng(0)), away], template)
    assert len(db) == 1 and db.excluded == 1


def test_db_build_is_byte_deterministic(template, tmp_path):
    poses = sample_poses(preset("wc14-base", count=6, seed=3))
    a = build_feature_db(poses, template)
    b = build_feature_db(sample_poses(preset("wc14-base", count=6, seed=3)), template)
    assert a.to_bytes() == b.to_bytes()
    a.save(tmp_path / "db.bin")
    c = FeatureDB.load(tmp_path / "db.bin")
    assert c.to_bytes() == a.to_bytes()
    assert c.poses == a.poses and c.config == a.config


def test_db_rejects_corrupt_bytes(small_db):
    data = small_db.to_bytes()
    with pytest.raises(ValueError):
        FeatureDB.from_bytes(b"XXXXXXXX" + data[8:])
    with pytest.raises(ValueError):
        FeatureDB.from_bytes(data[:100])


def test_retrieve_self_first(small_db):
    for i in (0, 5, len(small_db) - 1):
        pose, dist, idx = retrieve_nearest(small_db, small_db.descriptors[i])[0]
        assert idx == i and dist == 0.0 and pose == small_db.poses[i]


def test_retrieve_k_equals_n_is_full_sorted_list(small_db, rng):
    q = small_db.descriptors[3] + 0.01 * rng.normal(size=small_db.descriptors.shape[1])
    hits = retrieve_nearest(small_db, q, k=len(small_db))
    assert sorted(h[2] for h in hits) == list(range(len(small_db)))
    assert all(a[1] <= b[1] for a, b in zip(hits, hits[1:]))
    with pytest.raises(ValueError):
        retrieve_nearest(small_db, q, k=len(small_db) + 1)


@given(st.integers(0, 2**32 - 1), st.integers(1, 10))
def test_retrieve_matches_linear_scan(small_db, seed, k):
    q = np.random.default_rng(seed).normal(size=small_db.descriptors.shape[1])
    got = [h[2] for h in retrieve_nearest(small_db, q, k)]
    dists = [float(np.sqrt(sum((float(x) - y) ** 2 for x, y in zip(row, q)))) for row in small_db.descriptors]
    want = sorted(range(len(dists)), key=lambda i: (dists[i], i))[:k]
    assert got == want


def test_retrieve_ties_go_to_lower_index(small_db):
    db = FeatureDB(np.vstack([small_db.descriptors[:3], small_db.descriptors[:3]]), small_db.poses[:3] * 2)
    hits = retrieve_nearest(db, db.descriptors[1], k=2)
    assert [h[2] for h in hits] == [1, 4]


def test_rank1_recovers_db_pose(small_db, template):
    for i in (2, 11, 23):
        pose = small_db.poses[i]
        edges = render_edge_image(template, pose_to_homography(pose))
        hit = retrieve_nearest(small_db, descriptor(edges))[0]
        assert hit[0] == pose and hit[1] < 1e-6


# -- refinement ---------------------------------------------------------------------

def test_refine_zero_residual_keeps_h(template, rng):
    for _ in range(10):
        H = random_homography(rng)
        observed = render_edge_image(template, H)
        if not observed.any():
            continue
        res = refine_homography(H, observed, template)
        assert res.refined
        assert np.allclose(res.H, H, atol=1e-6 * np.abs(H).max())
        assert res.iterations <= 1


def test_refine_empty_image_unrefined(template, rng):
    H = random_homography(rng)
    res = refine_homography(H, np.zeros((720, 1280), np.uint8), template)
    assert not res.refined
    assert np.allclose(res.H, canonicalize(H))


def test_refine_recovers_two_pixel_corner_perturbation(template):
    rng = np.random.default_rng(3)
    observed = render_edge_image(template, TOP)
    C = template.corners
    for _ in range(10):
        H0 = perturb_corners(TOP, C, 2.0, rng)
        res = refine_homography(H0, observed, template)
        assert corner_error(res.H, TOP, C) <= 0.5


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1), st.floats(0.5, 12))
def test_refine_never_increases_residual(template, seed, px):
    rng = np.random.default_rng(seed)
    H = random_homography(rng)
    observed = render_edge_image(template, H)
    uv = np.array([[0, 0], [1280, 0], [1280, 720], [0, 720.0]])
    Hinv = np.linalg.inv(orient(H, SIZE))
    q = np.c_[uv, np.ones(4)] @ Hinv.T
    if np.any(q[:, 2] <= 0):
        return
    H0 = perturb_corners(H, q[:, :2] / q[:, 2:], px, rng)
    res = refine_homography(H0, observed, template)
    assert res.residual <= res.initial_residual
    if not res.refined:
        assert np.array_equal(res.H, canonicalize(H0))


def test_refinement_params_validation():
    with pytest.raises(ValueError):
        RefinementParams(max_iterations=0)
    with pytest.raises(ValueError):
        RefinementParams(convergence_threshold=0)
    with pytest.raises(ValueError):
        RefinementParams(damping=1.0)


def test_register_frame_recovers_db_pose(small_db, template):
    pose = small_db.poses[4]
    H = pose_to_homography(pose)
    res = register_frame(render_edge_image(template, H), small_db, template, k=2)
    assert res.refined
    assert iou_part(res.H, H, SIZE, template) > 0.99


# -- iou_part -----------------------------------------------------------------------

def sees_field(H, template):
    rect = polygon.rectangle(0, 0, template.length, template.width)
    return polygon.area(view_polygon(H, SIZE, rect)) > 0


def test_iou_identical_is_one(template, rng):
    n = 0
    while n < 20:
        H = random_homography(rng)
        if sees_field(H, template):  # otherwise the union is empty and the value is 0
            assert iou_part(H, H.copy(), SIZE, template) == 1.0
            n += 1


def test_iou_disjoint_halves_is_zero(template):
    left = pose_to_homography(CameraPose(20, -30, 17, 3000, -20, -25))
    right = pose_to_homography(CameraPose(85, -30, 17, 3000, 20, -25))
    assert iou_part(left, right, SIZE, template) == 0.0


def test_iou_degenerate_warns(template):
    away = pose_to_homography(CameraPose(52, -45, 17, 3000, 180, -10))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert iou_part(away, away, SIZE, template) == 0.0
    assert any(issubclass(x.category, RuntimeWarning) for x in w)


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5).filter(lambda s: abs(s) > 1e-3))
def test_iou_symmetric_and_scale_invariant(template, seed, scale):
    rng = np.random.default_rng(seed)
    A, B = random_homography(rng), random_homography(rng)
    v = iou_part(A, B, SIZE, template)
    assert 0.0 <= v <= 1.0
    assert abs(v - iou_part(B, A, SIZE, template)) < 1e-9
    assert abs(v - iou_part(scale * A, B, SIZE, template)) < 1e-9


def test_iou_matches_monte_carlo(template):
    rng = np.random.default_rng(11)
    for _ in range(8):
        A = random_homography(rng)
        # nearby pose so the overlap is non-trivial
        B = perturb_corners(A, np.array([[30, 20], [70, 20], [70, 50], [30, 50.0]]), 80, rng)
        assert abs(iou_part(A, B, SIZE, template) - mc_iou(A, B, template, 200_000, rng)) < 0.01
