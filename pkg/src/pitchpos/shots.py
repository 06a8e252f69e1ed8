"""Main-camera shot classification from per-frame homography changes."""

import enum
from dataclasses import dataclass

import numpy as np

from .homography import canonicalize

DEFAULT_TAU = 0.35
# a pair touching a failed frame scores as if all nine normalized entries flipped
FAILED_PAIR_CHANGE = 3.0


class ShotType(enum.Enum):
    MAIN_CAMERA = "main"
    OTHER = "other"


@dataclass
class ShotSegment:
    start: int
    end: int  # inclusive
    homographies: list  # one 3x3 array per frame, None where registration failed

    def __post_init__(self):
        if self.start > self.end:
            raise ValueError(f"shot start {self.start} after end {self.end}")
        if len(self.homographies) != self.end - self.start + 1:
            raise ValueError("need exactly one homography slot per frame")


@dataclass(frozen=True)
class ShotScore:
    mean_change: float
    tau: float = DEFAULT_TAU
    classifiable: bool = True


def normalized_entries(homographies):
    """Canonicalize and min-max normalize each of the nine entries over the shot.

    Rows of failed frames are NaN. Constant entries normalize to 0.
    """
    rows = np.full((len(homographies), 9), np.nan)
    for i, H in enumerate(homographies):
        if H is not None:
            rows[i] = canonicalize(H).ravel()
    ok = ~np.isnan(rows[:, 0])
    if not ok.any():
        return rows
    lo = rows[ok].min(axis=0)
    span = rows[ok].max(axis=0) - lo
    out = np.zeros_like(rows)
    nz = span > 0
    out[:, nz] = (rows[:, nz] - lo[nz]) / span[nz]
    out[~ok] = np.nan
    return out


def pair_changes(homographies):
    """Per consecutive pair: Frobenius norm of the normalized difference."""
    norm = normalized_entries(homographies)
    diff = np.linalg.norm(norm[1:] - norm[:-1], axis=1)
    return np.where(np.isnan(diff), FAILED_PAIR_CHANGE, diff)


def shot_change_score(shot, tau=DEFAULT_TAU):
    if len(shot.homographies) < 2:
        return ShotScore(float("inf"), tau, classifiable=False)
    return ShotScore(float(pair_changes(shot.homographies).mean()), tau)


def classify_shot(score):
    if score.classifiable and score.mean_change <= score.tau:
        return ShotType.MAIN_CAMERA
    return ShotType.OTHER


def classify_shots(shots, tau=DEFAULT_TAU):
    out = []
    for shot in shots:
        s = shot_change_score(shot, tau)
        out.append((shot, s, classify_shot(s)))
    return out
