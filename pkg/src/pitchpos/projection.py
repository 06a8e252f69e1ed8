"""Image detections to field positions, with self-verification."""

from dataclasses import dataclass, field

import numpy as np

from .homography import PointAtInfinityError, apply, invert


@dataclass(frozen=True)
class Detection:
    frame: int
    x1: float
    y1: float
    x2: float
    y2: float
    confidence: float = None
    detection_id: int = None

    def __post_init__(self):
        if not (self.x1 < self.x2 and self.y1 < self.y2):
            raise ValueError(f"degenerate box ({self.x1}, {self.y1}, {self.x2}, {self.y2})")

    @property
    def box(self):
        return (self.x1, self.y1, self.x2, self.y2)

    def intersects(self, image_size):
        w, h = image_size
        return self.x2 > 0 and self.y2 > 0 and self.x1 < w and self.y1 < h


@dataclass(frozen=True)
class SvConfig:
    rho: float = 3.0

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be non-negative")


@dataclass
class FrameEstimate:
    frame: int
    H: np.ndarray
    positions: np.ndarray  # (n, 2) meters, NaN rows for invalid projections
    detection_ids: list
    teams: list = field(default_factory=list)
    sv_keep: bool = True


def detection_anchor(box):
    """Bottom centre of the box, the player's ground contact pixel."""
    x1, y1, x2, y2 = box
    return np.array([(x1 + x2) / 2.0, float(y2)])


def project_position(H, p, H_inv=None):
    """Field position of image point ``p``; NaN when it maps to infinity."""
    Hinv = invert(H) if H_inv is None else H_inv
    try:
        return apply(Hinv, p)
    except PointAtInfinityError:
        return np.array([np.nan, np.nan])


def self_verify(positions, field_template, cfg=SvConfig()):
    """Keep the frame unless some position is more than rho outside the pitch."""
    pts = np.asarray(positions, dtype=np.float64).reshape(-1, 2)
    if len(pts) == 0:
        return True
    if not np.all(np.isfinite(pts)):
        return False
    rho = cfg.rho
    inside = ((pts[:, 0] >= -rho) & (pts[:, 0] <= field_template.length + rho)
              & (pts[:, 1] >= -rho) & (pts[:, 1] <= field_template.width + rho))
    return bool(inside.all())


def extract_frame_positions(detections, H, field_template, cfg=SvConfig(), frame=None):
    frames = {d.frame for d in detections}
    if len(frames) > 1:
        raise ValueError(f"detections span several frames: {sorted(frames)}")
    if frame is None:
        frame = frames.pop() if frames else -1
    H = np.asarray(H, dtype=np.float64)
    Hinv = invert(H)
    pos = np.array([project_position(H, detection_anchor(d.box), Hinv) for d in detections]).reshape(-1, 2)
    ids = [d.detection_id if d.detection_id is not None else i for i, d in enumerate(detections)]
    return FrameEstimate(frame, H, pos, ids, [None] * len(ids), self_verify(pos, field_template, cfg))
