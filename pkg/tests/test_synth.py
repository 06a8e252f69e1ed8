import numpy as np
import pytest
from scipy import stats

from pitchpos.field import standard_field
from pitchpos.homography import apply_many, canonicalize
from pitchpos.projection import detection_anchor
from pitchpos.synth import (PALETTES, MatchConfig, NoiseConfig, corrupt_detections, corrupt_homographies,
                            generate_match, main_camera_shot, other_camera_shot, project_players)
from pitchpos.teams import assign_teams, embed_hsv


@pytest.fixture(scope="module")
def long_match():
    return generate_match(MatchConfig(n_frames=1000), seed=11)


def test_same_seed_same_match():
    a = generate_match(MatchConfig(n_frames=50), seed=3)
    b = generate_match(MatchConfig(n_frames=50), seed=3)
    c = generate_match(MatchConfig(n_frames=50), seed=4)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.homographies, b.homographies)
    assert a.poses == b.poses
    assert not np.array_equal(a.positions, c.positions)


def test_positions_within_field(long_match):
    P = long_match.positions
    assert P.shape == (1000, 23, 2)
    assert P[..., 0].min() >= 0 and P[..., 0].max() <= 105
    assert P[..., 1].min() >= 0 and P[..., 1].max() <= 68


def test_speed_cap(long_match):
    cfg = long_match.config
    step = np.linalg.norm(np.diff(long_match.positions, axis=0), axis=-1)
    assert step.max() <= cfg.v_max / cfg.fps + 1e-9


def test_homographies_match_poses(long_match):
    from pitchpos.camera import pose_to_homography
    for t in (0, 500, 999):
        H = pose_to_homography(long_match.poses[t], long_match.config.image_size)
        assert np.allclose(canonicalize(H), canonicalize(long_match.homographies[t]))


def test_camera_stays_in_range(long_match):
    cfg = long_match.config
    pans = np.array([p.pan for p in long_match.poses])
    tilts = np.array([p.tilt for p in long_match.poses])
    focals = np.array([p.focal for p in long_match.poses])
    assert pans.min() >= cfg.pan_limits[0] and pans.max() <= cfg.pan_limits[1]
    assert tilts.min() >= cfg.tilt_limits[0] and tilts.max() <= cfg.tilt_limits[1]
    assert focals.min() >= cfg.focal_range[0] - 1e-9 and focals.max() <= cfg.focal_range[1] + 1e-9
    assert np.abs(np.diff(pans)).max() < 1.0  # smooth panning


def test_team_palettes_separated():
    dh = abs(PALETTES["A"][0] - PALETTES["B"][0])
    assert min(dh, 1 - dh) * 360 >= 60


def test_zero_noise_anchors_exact():
    match = generate_match(MatchConfig(n_frames=30), seed=5)
    frames = corrupt_detections(match, NoiseConfig(), seed=0)
    for t, frame in enumerate(frames):
        uv, vis = project_players(match, t)
        assert sorted(d.player for d in frame) == sorted(np.flatnonzero(vis).tolist())
        for d in frame:
            box = (d.detection.x1, d.detection.y1, d.detection.x2, d.detection.y2)
            assert np.allclose(detection_anchor(box), uv[d.player], atol=1e-9)
            assert d.hsv == pytest.approx(PALETTES[match.palette_keys[d.player]])


def test_zero_corruption_is_identity():
    match = generate_match(MatchConfig(n_frames=30), seed=5)
    Hs, mask = corrupt_homographies(match, NoiseConfig(), seed=1)
    assert not mask.any() and np.array_equal(Hs, match.homographies)


def test_dropout_binomial():
    match = generate_match(MatchConfig(n_frames=300), seed=6)
    visible = sum(project_players(match, t)[1].sum() for t in range(match.n_frames))
    kept = sum(len(f) for f in corrupt_detections(match, NoiseConfig(dropout=0.3), seed=2))
    lo, hi = stats.binom.interval(0.9999, visible, 0.7)
    assert lo <= kept <= hi


def test_dropout_ten_visible_players():
    # frames with exactly 10 visible players keep 7 on average
    match = generate_match(MatchConfig(n_frames=400), seed=6)
    ten = [t for t in range(match.n_frames) if project_players(match, t)[1].sum() == 10]
    assert len(ten) >= 5
    counts = []
    for seed in range(20):
        frames = corrupt_detections(match, NoiseConfig(dropout=0.3), seed=seed)
        counts += [len(frames[t]) for t in ten]
    n = len(counts)
    lo, hi = stats.binom.interval(0.9999, 10 * n, 0.7)
    assert lo <= sum(counts) <= hi


def test_corruption_count_binomial(long_match):
    _, mask = corrupt_homographies(long_match, NoiseConfig(h_corrupt_prob=0.1), seed=9)
    assert 70 <= mask.sum() <= 130


def test_corruption_moves_corners_by_magnitude():
    match = generate_match(MatchConfig(n_frames=20), seed=2)
    Hs, mask = corrupt_homographies(match, NoiseConfig(h_corrupt_prob=1.0, h_corrupt_magnitude=20.0), seed=3)
    corners = standard_field().corners
    for t in range(20):
        # back-projecting the true corner images through the corrupted H lands 20 m away
        uv, _ = apply_many(match.homographies[t], corners)
        moved, _ = apply_many(np.linalg.inv(Hs[t]), uv)
        assert np.allclose(np.linalg.norm(moved - corners, axis=1), 20.0, atol=1e-6)
    assert mask.all()


def test_false_positives_labelled_other():
    match = generate_match(MatchConfig(n_frames=60), seed=8)
    frames = corrupt_detections(match, NoiseConfig(false_positive_rate=0.5), seed=8)
    dets = [d for f in frames for d in f]
    fp = [i for i, d in enumerate(dets) if d.player < 0]
    assert fp and all(dets[i].truth_label == "O" for i in fp)
    labels, _ = assign_teams(np.array([d.detection.frame for d in dets]),
                             np.array([embed_hsv(*d.hsv) for d in dets]))
    assert all(labels[i] == "O" for i in fp)


def test_referee_excluded_from_gt_but_detected():
    match = generate_match(MatchConfig(n_frames=40), seed=1)
    assert "REF" not in [match.roles[i] for i in match.gt_players]
    frames = corrupt_detections(match, NoiseConfig(), seed=1)
    ref = match.roles.index("REF")
    assert any(d.player == ref for f in frames for d in f)
    with_ref = generate_match(MatchConfig(n_frames=40, referee_in_gt=True), seed=1)
    assert ref in with_ref.gt_players


def test_noise_config_validation():
    with pytest.raises(ValueError):
        NoiseConfig(dropout=1.5)
    with pytest.raises(ValueError):
        NoiseConfig(anchor_sigma=-1)


def test_shot_generators_reproducible():
    a, b = main_camera_shot(30, seed=2), main_camera_shot(30, seed=2)
    assert all(np.array_equal(x, y) for x, y in zip(a.homographies, b.homographies))
    c, d = other_camera_shot(30, seed=2), other_camera_shot(30, seed=2)
    assert [h is None for h in c.homographies] == [h is None for h in d.homographies]
    assert c.start == 0 and c.end == 29
