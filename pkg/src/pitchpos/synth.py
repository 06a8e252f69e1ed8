"""Synthetic matches with full ground truth, and controlled corruptions of them.

Everything is reproducible from ``(config, seed)``; independent aspects draw
from separate PCG64 streams spawned from one ``SeedSequence``.
"""

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraPose, pose_to_homography, preset, projection_matrix, sample_poses
from .field import standard_field
from .homography import canonicalize, fit_dlt, orient
from .projection import Detection
from .shots import ShotSegment

# HSV palettes; team hues are 144 degrees apart
PALETTES = {
    "A": (0.00, 0.85, 0.85),
    "B": (0.60, 0.80, 0.80),
    "GK_A": (0.17, 0.90, 0.95),
    "GK_B": (0.80, 0.75, 0.75),
    "REF": (0.00, 0.05, 0.12),
    "FP": (0.10, 0.25, 0.55),
}

# rough 4-4-2 home positions for a team attacking toward +x, in pitch fractions
_FORMATION = [(0.05, 0.50),
              (0.22, 0.15), (0.20, 0.38), (0.20, 0.62), (0.22, 0.85),
              (0.40, 0.12), (0.38, 0.38), (0.38, 0.62), (0.40, 0.88),
              (0.55, 0.40), (0.55, 0.60)]


def _streams(seed, n):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


@dataclass(frozen=True)
class MatchConfig:
    n_frames: int = 200
    fps: float = 25.0
    length: float = 105.0
    width: float = 68.0
    players_per_team: int = 11
    referee: bool = True
    referee_in_gt: bool = False
    v_max: float = 8.0
    camera_location: tuple = (52.0, -45.0, 17.0)
    focal_range: tuple = (2600.0, 3600.0)
    pan_limits: tuple = (-35.0, 35.0)
    tilt_limits: tuple = (-15.0, -5.0)
    image_size: tuple = (1280, 720)
    player_height: float = 1.8
    track_gain: float = 3.0  # camera aim overshoots centroid moves, as broadcast cameras lead play


@dataclass
class SyntheticMatch:
    config: MatchConfig
    seed: int
    positions: np.ndarray  # (T, P, 2) meters
    teams: list  # per player: "A", "B" or "R"
    roles: list  # per player: "FP", "GK" or "REF"
    poses: list  # CameraPose per frame
    homographies: np.ndarray  # (T, 3, 3) canonical field->image

    @property
    def n_frames(self):
        return len(self.positions)

    @property
    def palette_keys(self):
        keys = []
        for team, role in zip(self.teams, self.roles):
            if role == "REF":
                keys.append("REF")
            elif role == "GK":
                keys.append(f"GK_{team}")
            else:
                keys.append(team)
        return keys

    @property
    def gt_players(self):
        """Indices of players reported in ground-truth positional data."""
        return [i for i, r in enumerate(self.roles) if r != "REF" or self.config.referee_in_gt]

    def gt_frame(self, t):
        idx = self.gt_players
        return self.positions[t, idx], [self.teams[i] for i in idx], idx


def _trajectories(cfg, rng):
    """Waypoint-following players around a slowly moving centre of play."""
    L, W = cfg.length, cfg.width
    T = cfg.n_frames
    dt = 1.0 / cfg.fps
    homes = []
    teams, roles = [], []
    for team, flip in (("A", False), ("B", True)):
        for k, (fx, fy) in enumerate(_FORMATION[: cfg.players_per_team]):
            x = (1 - fx) * L if flip else fx * L
            homes.append((x, fy * W))
            teams.append(team)
            roles.append("GK" if k == 0 else "FP")
    if cfg.referee:
        homes.append((L / 2, W / 2))
        teams.append("R")
        roles.append("REF")
    homes = np.array(homes)
    P = len(homes)

    # centre of play: waypoints across the middle of the pitch at <= 3 m/s
    centre = np.empty((T, 2))
    c = np.array([L / 2, W / 2])
    target = c.copy()
    for t in range(T):
        if np.linalg.norm(target - c) < 0.5:
            target = np.array([rng.uniform(0.2 * L, 0.8 * L), rng.uniform(0.3 * W, 0.7 * W)])
        step = target - c
        n = np.linalg.norm(step)
        if n > 3.0 * dt:
            step *= 3.0 * dt / n
        c = c + step
        centre[t] = c

    spread = np.array([12.0, 9.0])
    pos = np.empty((T, P, 2))
    cur = homes.copy()
    wp = homes + rng.uniform(-1, 1, (P, 2)) * spread
    speed = rng.uniform(0.3, 1.0, P) * cfg.v_max
    lo, hi = np.array([0.5, 0.5]), np.array([L - 0.5, W - 0.5])
    for t in range(T):
        shift = (centre[t] - np.array([L / 2, W / 2])) * np.array([0.6, 0.4])
        anchor = homes + shift
        anchor[[i for i, r in enumerate(roles) if r == "GK"]] = homes[[i for i, r in enumerate(roles) if r == "GK"]]
        if cfg.referee:
            anchor[-1] = centre[t]
        reached = np.linalg.norm(wp - cur, axis=1) < 0.5
        if reached.any():
            wp[reached] = anchor[reached] + rng.uniform(-1, 1, (reached.sum(), 2)) * spread
            speed[reached] = rng.uniform(0.3, 1.0, reached.sum()) * cfg.v_max
        wp = np.clip(wp, lo, hi)
        d = wp - cur
        n = np.linalg.norm(d, axis=1)
        scale = np.minimum(1.0, speed * dt / np.maximum(n, 1e-12))
        cur = np.clip(cur + d * scale[:, None], lo, hi)
        pos[t] = cur
    return pos, teams, roles


def _camera_path(cfg, centroid, rng):
    """Camera aimed at the smoothed player centroid, with a slow zoom cycle."""
    cx, cy, cz = cfg.camera_location
    T = len(centroid)
    f0, f1 = cfg.focal_range
    phase = rng.uniform(0, 2 * np.pi)
    period = rng.uniform(8.0, 16.0) * cfg.fps
    poses = []
    mid = np.array([cfg.length / 2, cfg.width / 2])
    target = mid + cfg.track_gain * (centroid - mid)
    aim = target[0].copy()
    for t in range(T):
        aim += 0.1 * (target[t] - aim)
        dx, dy = aim[0] - cx, aim[1] - cy
        pan = np.degrees(np.arctan2(dx, dy))
        tilt = -np.degrees(np.arctan2(cz, np.hypot(dx, dy)))
        pan = float(np.clip(pan, *cfg.pan_limits))
        tilt = float(np.clip(tilt, *cfg.tilt_limits))
        focal = f0 + (f1 - f0) * 0.5 * (1 + np.sin(phase + 2 * np.pi * t / period))
        poses.append(CameraPose(cx, cy, cz, float(focal), pan, tilt))
    return poses


def generate_match(cfg=MatchConfig(), seed=0):
    traj_rng, cam_rng = _streams(seed, 2)
    pos, teams, roles = _trajectories(cfg, traj_rng)
    poses = _camera_path(cfg, pos.mean(axis=1), cam_rng)
    Hs = np.array([pose_to_homography(p, cfg.image_size) for p in poses])
    return SyntheticMatch(cfg, seed, pos, teams, roles, poses, Hs)


# -- observations -------------------------------------------------------------

@dataclass(frozen=True)
class NoiseConfig:
    anchor_sigma: float = 0.0
    dropout: float = 0.0
    false_positive_rate: float = 0.0
    color_sigma: float = 0.0
    h_corrupt_prob: float = 0.0
    h_corrupt_magnitude: float = 20.0

    def __post_init__(self):
        for name in ("dropout", "h_corrupt_prob"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must be a probability")
        for name in ("anchor_sigma", "color_sigma", "false_positive_rate", "h_corrupt_magnitude"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass
class SynthDetection:
    detection: Detection
    hsv: tuple
    player: int  # index into the match's players, -1 for false positives
    truth_label: str  # "A", "B" or "O" (goalkeepers, referee, false positives)


def _box(P, xy, height, anchor):
    top = P @ np.array([xy[0], xy[1], height, 1.0])
    h = max(anchor[1] - top[1] / top[2], 2.0)
    w = 0.4 * h
    return anchor[0] - w / 2, anchor[1] - h, anchor[0] + w / 2, anchor[1]


def _noisy_color(key, sigma, rng):
    h, s, v = PALETTES[key]
    if sigma > 0:
        h, s, v = h + rng.normal(0, sigma), s + rng.normal(0, sigma), v + rng.normal(0, sigma)
    return float(h % 1.0), float(np.clip(s, 0, 1)), float(np.clip(v, 0, 1))


def project_players(match, t, H=None):
    """Image anchors of all players in frame ``t`` and a visibility mask."""
    W, Hh = match.config.image_size
    H = orient(match.homographies[t] if H is None else H, match.config.image_size)
    xy = match.positions[t]
    hom = xy @ H[:, :2].T + H[:, 2]
    front = hom[:, 2] > 1e-9
    uv = hom[:, :2] / np.where(front, hom[:, 2], 1.0)[:, None]
    vis = front & (uv[:, 0] >= 0) & (uv[:, 0] < W) & (uv[:, 1] >= 0) & (uv[:, 1] < Hh)
    return uv, vis


def corrupt_detections(match, noise=NoiseConfig(), seed=0):
    """Per-frame detections with colour features, derived from ground truth."""
    cfg = match.config
    W, Hh = cfg.image_size
    a_rng, d_rng, f_rng, c_rng = _streams(seed, 4)
    keys = match.palette_keys
    out = []
    next_id = 0
    for t in range(match.n_frames):
        P = projection_matrix(match.poses[t], cfg.image_size)
        uv, vis = project_players(match, t)
        frame = []
        for i in np.flatnonzero(vis):
            anchor = uv[i] + (a_rng.normal(0, noise.anchor_sigma, 2) if noise.anchor_sigma > 0 else 0.0)
            if noise.dropout > 0 and d_rng.random() < noise.dropout:
                continue
            box = _box(P, match.positions[t, i], cfg.player_height, anchor)
            key = keys[i]
            label = key if key in ("A", "B") else "O"
            frame.append(SynthDetection(Detection(t, *box, confidence=1.0, detection_id=next_id),
                                        _noisy_color(key, noise.color_sigma, c_rng), int(i), label))
            next_id += 1
        n_fp = f_rng.poisson(noise.false_positive_rate) if noise.false_positive_rate > 0 else 0
        H = orient(match.homographies[t], cfg.image_size)
        for _ in range(n_fp):
            for _try in range(50):
                xy = f_rng.uniform([1.0, 1.0], [cfg.length - 1, cfg.width - 1])
                p = H @ np.array([xy[0], xy[1], 1.0])
                if p[2] > 0 and 0 <= p[0] / p[2] < W and 0 <= p[1] / p[2] < Hh:
                    anchor = p[:2] / p[2]
                    box = _box(P, xy, cfg.player_height, anchor)
                    frame.append(SynthDetection(Detection(t, *box, confidence=0.5, detection_id=next_id),
                                                _noisy_color("FP", noise.color_sigma, c_rng), -1, "O"))
                    next_id += 1
                    break
        out.append(frame)
    return out


def corner_perturbation(field_corners, magnitude, rng):
    """Field-plane homography moving every corner by exactly ``magnitude`` meters."""
    ang = rng.uniform(0, 2 * np.pi, len(field_corners))
    moved = field_corners + magnitude * np.c_[np.cos(ang), np.sin(ang)]
    return fit_dlt(field_corners, moved)


def corrupt_homographies(match, noise=NoiseConfig(), seed=0):
    """Replace a random subset of frame homographies with grossly wrong ones.

    A corrupted ``H`` becomes ``H @ G^-1`` where ``G`` displaces each pitch corner
    by ``noise.h_corrupt_magnitude`` meters, so back-projected positions move by
    ``G``. Returns ``(homographies, corrupted_mask)``.
    """
    pick_rng, g_rng = _streams(seed, 2)
    Hs = match.homographies.copy()
    mask = np.zeros(match.n_frames, dtype=bool)
    if noise.h_corrupt_prob == 0:
        return Hs, mask
    corners = standard_field(match.config.length, match.config.width).corners
    for t in range(match.n_frames):
        if pick_rng.random() < noise.h_corrupt_prob:
            G = corner_perturbation(corners, noise.h_corrupt_magnitude, g_rng)
            Hs[t] = canonicalize(Hs[t] @ np.linalg.inv(G))
            mask[t] = True
    return Hs, mask


# -- shots --------------------------------------------------------------------

def main_camera_shot(n_frames, seed=0, start=0, image_size=(1280, 720)):
    """A smooth pan/zoom shot, as the main broadcast camera would produce."""
    rng = _streams(seed, 1)[0]
    pan0, pan1 = sorted(rng.uniform(-30, 30, 2))
    if rng.random() < 0.5:
        pan0, pan1 = pan1, pan0
    tilt0, tilt1 = rng.uniform(-14, -8, 2)
    f0, f1 = rng.uniform(2500, 3800, 2)
    s = 0.5 - 0.5 * np.cos(np.linspace(0, np.pi, n_frames))
    Hs = [pose_to_homography(CameraPose(52.0, -45.0, 17.0, f0 + (f1 - f0) * u,
                                        pan0 + (pan1 - pan0) * u, tilt0 + (tilt1 - tilt0) * u), image_size)
          for u in s]
    return ShotSegment(start, start + n_frames - 1, Hs)


def other_camera_shot(n_frames, seed=0, start=0, fail_prob=0.3, image_size=(1280, 720)):
    """A close-up style shot: each frame registers to an unrelated pose or fails.

    Poses come from the extended pose distribution, as a retrieval stage would
    return arbitrary database entries for frames that do not show the pitch.
    """
    fail_rng = _streams(seed, 1)[0]
    poses = sample_poses(preset("extended", count=n_frames, seed=seed))
    Hs = [None if fail_rng.random() < fail_prob else pose_to_homography(p, image_size) for p in poses]
    return ShotSegment(start, start + n_frames - 1, Hs)
