"""Pan-tilt-zoom pinhole camera model and pose sampling.

Conventions
-----------
Field frame: origin at the lower-left corner flag, x along the touchline
(0..length), y across the pitch (0..width), z up. A broadcast camera sits
behind the near touchline at negative y.

Camera frame: x right, y down, z along the optical axis. At pan = tilt = 0 the
camera looks along +y of the field. Positive pan turns toward +x, negative
tilt looks down. The world-to-camera rotation is
``R = R_x(tilt) @ R_base @ R_z(pan)`` where ``R_z`` rotates about the field's
vertical axis and ``R_base`` maps field axes (x, y, z) onto camera axes
(x, -z, y).

``focal_length`` is in pixels at the 1280x720 reference resolution and is
scaled with the image width for other sizes.
"""

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from .homography import canonicalize

REFERENCE_SIZE = (1280, 720)


@dataclass(frozen=True)
class CameraPose:
    x: float
    y: float
    z: float
    focal: float
    pan: float
    tilt: float

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError(f"camera height must be positive, got {self.z}")
        if not self.focal > 0:
            raise ValueError(f"focal length must be positive, got {self.focal}")

    @property
    def location(self):
        return np.array([self.x, self.y, self.z])

    def as_tuple(self):
        return (self.x, self.y, self.z, self.focal, self.pan, self.tilt)


def rotation(pan, tilt):
    p, t = np.radians(pan), np.radians(tilt)
    # pan: rotate the world about its vertical axis so the viewing direction
    # (sin p, cos p, 0) becomes +y
    Rz = np.array([[np.cos(p), -np.sin(p), 0.0],
                   [np.sin(p), np.cos(p), 0.0],
                   [0.0, 0.0, 1.0]])
    R_base = np.array([[1.0, 0.0, 0.0],
                       [0.0, 0.0, -1.0],
                       [0.0, 1.0, 0.0]])
    # negative tilt pitches the optical axis downward
    Rx = np.array([[1.0, 0.0, 0.0],
                   [0.0, np.cos(t), np.sin(t)],
                   [0.0, -np.sin(t), np.cos(t)]])
    return Rx @ R_base @ Rz


def intrinsics(focal, image_size):
    w, h = image_size
    f = focal * w / REFERENCE_SIZE[0]
    return np.array([[f, 0.0, w / 2.0], [0.0, f, h / 2.0], [0.0, 0.0, 1.0]])


def projection_matrix(pose, image_size=REFERENCE_SIZE):
    R = rotation(pose.pan, pose.tilt)
    K = intrinsics(pose.focal, image_size)
    return K @ np.c_[R, -R @ pose.location]


def pose_to_homography(pose, image_size=REFERENCE_SIZE, canonical=True):
    """Field-plane (meters) to image (pixels) homography for ``pose``.

    With ``canonical=False`` the raw ``K R [r1 r2 t]`` matrix is returned, whose
    third row gives the true depth of each field point.
    """
    if pose.z <= 1e-9:
        raise ValueError("degenerate pose: camera on the field plane")
    P = projection_matrix(pose, image_size)
    H = P[:, [0, 1, 3]]
    return canonicalize(H) if canonical else H


def optical_axis_ground_point(pose):
    """Where the optical axis meets z = 0, or None if it points at/above the horizon."""
    d = rotation(pose.pan, pose.tilt)[2]
    if d[2] >= -1e-12:
        return None
    s = -pose.z / d[2]
    return pose.location[:2] + s * d[:2]


# -- sampling ---------------------------------------------------------------

@dataclass(frozen=True)
class Normal:
    mu: float
    sigma: float

    def draw(self, rng, n):
        return rng.normal(self.mu, self.sigma, n)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError(f"empty uniform range ({self.lo}, {self.hi})")

    def draw(self, rng, n):
        return rng.uniform(self.lo, self.hi, n)


@dataclass(frozen=True)
class PoseDistributionConfig:
    location: tuple = (Normal(52.0, 2.0), Normal(-45.0, 9.0), Normal(17.0, 3.0))
    focal: object = Normal(3018.0, 716.0)
    pan_range: Uniform = Uniform(-35.0, 35.0)
    tilt_range: Uniform = Uniform(-15.0, -5.0)
    count: int = 50000
    seed: int = 0
    min_focal: float = 100.0
    min_height: float = 1.0

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("count must be positive")
        if len(self.location) != 3:
            raise ValueError("location needs one distribution per axis")


def _wc14_base(**kw):
    return PoseDistributionConfig(**kw)


def _extended(**kw):
    return PoseDistributionConfig(pan_range=Uniform(-40.0, 40.0),
                                  tilt_range=Uniform(-20.0, -5.0), **kw)


def _uniform_focal(**kw):
    return replace(_extended(**kw), focal=Uniform(1000.0, 6000.0))


def _uniform_focal_xyz(**kw):
    return replace(_uniform_focal(**kw),
                   location=(Uniform(45.0, 60.0), Uniform(-66.0, -17.0), Uniform(10.0, 23.0)))


PRESETS = {
    "wc14-base": _wc14_base,
    "extended": _extended,
    "uniform-focal": _uniform_focal,
    "uniform-focal-xyz": _uniform_focal_xyz,
}


def preset(name, count=50000, seed=0):
    try:
        return PRESETS[name](count=count, seed=seed)
    except KeyError:
        raise ValueError(f"unknown pose preset {name!r}; choose from {sorted(PRESETS)}") from None


def _draw_bounded(dist, rng, n, lower):
    vals = dist.draw(rng, n)
    bad = vals <= lower
    while bad.any():
        vals[bad] = dist.draw(rng, int(bad.sum()))
        bad = vals <= lower
    return vals


def sample_poses(cfg):
    """Draw ``cfg.count`` poses.

    Each parameter gets its own PCG64 stream spawned from
    ``SeedSequence(cfg.seed)`` in the fixed order x, y, z, focal, pan, tilt,
    so results are identical across platforms and changing one distribution
    leaves the other parameters' draws untouched. Heights and focal lengths
    at or below their minimum are redrawn from the same stream.
    """
    streams = [np.random.Generator(np.random.PCG64(s))
               for s in np.random.SeedSequence(cfg.seed).spawn(6)]
    n = cfg.count
    x = cfg.location[0].draw(streams[0], n)
    y = cfg.location[1].draw(streams[1], n)
    z = _draw_bounded(cfg.location[2], streams[2], n, cfg.min_height)
    f = _draw_bounded(cfg.focal, streams[3], n, cfg.min_focal)
    pan = cfg.pan_range.draw(streams[4], n)
    tilt = cfg.tilt_range.draw(streams[5], n)
    return [CameraPose(*map(float, row)) for row in zip(x, y, z, f, pan, tilt)]


POSE_FIELDS = ["x", "y", "z", "focal", "pan", "tilt"]


def poses_to_csv(poses):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(POSE_FIELDS)
    for p in poses:
        w.writerow([repr(float(v)) for v in p.as_tuple()])
    return buf.getvalue()


def poses_from_csv(text):
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != POSE_FIELDS:
        raise ValueError(f"pose CSV must start with header {','.join(POSE_FIELDS)}")
    out = []
    for i, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 6:
            raise ValueError(f"pose CSV line {i}: expected 6 values, got {len(row)}")
        out.append(CameraPose(*(float(v) for v in row)))
    return out
