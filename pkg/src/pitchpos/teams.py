"""Unsupervised team assignment from jersey colour.

Colour features embed the mean HSV of the torso crop as
``(s*cos(2*pi*h), s*sin(2*pi*h), v)`` so hue wraps around correctly.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .field import area_resize

NOISE = -1
TEAM_A, TEAM_B, OTHER = "A", "B", "O"


class NoFeasibleEpsilonError(RuntimeError):
    pass


@dataclass(frozen=True)
class TeamClusterConfig:
    n_cls: float = 0.2
    eps_grid: tuple = (0.01, 0.5, 0.01)
    sample_frames: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.n_cls <= 0.5:
            raise ValueError("n_cls must lie in [0, 0.5]")
        lo, hi, step = self.eps_grid
        if not (0 < lo <= hi and step > 0):
            raise ValueError(f"bad epsilon grid {self.eps_grid}")

    def grid(self):
        lo, hi, step = self.eps_grid
        n = int(np.floor((hi - lo) / step + 1e-9)) + 1
        return np.round(lo + step * np.arange(n), 12)


def embed_hsv(h, s, v):
    h, s, v = (np.asarray(a, dtype=np.float64) for a in (h, s, v))
    a = 2 * np.pi * h
    return np.stack([s * np.cos(a), s * np.sin(a), v], axis=-1)


def rgb_to_hsv(rgb):
    """Vectorized RGB -> HSV, all channels in [0, 1]."""
    rgb = np.asarray(rgb, dtype=np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    c = mx - mn
    safe = np.where(c == 0, 1.0, c)
    h = np.where(mx == r, ((g - b) / safe) % 6, np.where(mx == g, (b - r) / safe + 2, (r - g) / safe + 4))
    h = np.where(c == 0, 0.0, h / 6.0)
    s = np.where(mx == 0, 0.0, c / np.where(mx == 0, 1.0, mx))
    return np.stack([h, s, mx], axis=-1)


def color_feature(crop):
    """Colour feature of a detection crop (``(h, w, 3)`` RGB, uint8 or [0, 1] floats).

    Uses the upper half of the box, rescaled to 20x20, keeping the central 16x16.
    """
    crop = np.asarray(crop)
    if crop.ndim != 3 or crop.shape[2] != 3 or crop.shape[0] == 0 or crop.shape[1] == 0:
        raise ValueError("crop must be a non-empty (h, w, 3) array")
    rgb = crop.astype(np.float64)
    if crop.dtype == np.uint8:
        rgb /= 255.0
    upper = rgb[: max(1, crop.shape[0] // 2)]
    scaled = np.stack([area_resize(upper[..., c], 20, 20) for c in range(3)], axis=-1)
    hsv = rgb_to_hsv(scaled[2:18, 2:18]).reshape(-1, 3)
    ang = 2 * np.pi * hsv[:, 0]
    h_mean = (np.arctan2(np.sin(ang).mean(), np.cos(ang).mean()) / (2 * np.pi)) % 1.0
    return embed_hsv(h_mean, hsv[:, 1].mean(), hsv[:, 2].mean())


def dbscan(features, eps, min_pts):
    """Density-based clustering; returns int labels, ``NOISE`` (-1) for noise.

    A point is core when at least ``min_pts`` points (itself included) lie within
    L2 distance ``eps``. Clusters are numbered in order of their lowest-index
    core point; a border point reachable from several clusters joins the one
    with the lowest number.
    """
    X = np.asarray(features, dtype=np.float64).reshape(len(features), -1)
    if not eps > 0 or min_pts < 1:
        raise ValueError("need eps > 0 and min_pts >= 1")
    n = len(X)
    labels = np.full(n, NOISE)
    if n == 0:
        return labels
    pairs = cKDTree(X).query_pairs(eps, output_type="ndarray")
    i, j = (pairs[:, 0], pairs[:, 1]) if len(pairs) else (np.zeros(0, int), np.zeros(0, int))
    counts = 1 + np.bincount(i, minlength=n) + np.bincount(j, minlength=n)
    core = counts >= min_pts
    if not core.any():
        return labels

    cc = core[i] & core[j]
    adj = coo_matrix((np.ones(cc.sum()), (i[cc], j[cc])), shape=(n, n))
    _, comp = connected_components(adj, directed=False)
    core_idx = np.flatnonzero(core)
    # renumber components by their lowest core index
    uniq, first = np.unique(comp[core_idx], return_index=True)
    rank = np.argsort(np.argsort(core_idx[first]))
    labels[core_idx] = rank[np.searchsorted(uniq, comp[core_idx])]

    big = np.iinfo(np.int64).max
    best = np.full(n, big)
    for a, b in ((i, j), (j, i)):
        m = core[a] & ~core[b]
        np.minimum.at(best, b[m], labels[a[m]])
    border = ~core & (best < big)
    labels[border] = best[border]
    return labels


def cluster_sizes(labels):
    labels = np.asarray(labels)
    ids, counts = np.unique(labels[labels != NOISE], return_counts=True)
    return dict(zip(ids.tolist(), counts.tolist()))


def cluster_cost(labels):
    """``|Other| + ||A| - |B||`` for exactly two clusters, else infinity."""
    sizes = cluster_sizes(labels)
    if len(sizes) != 2:
        return float("inf")
    a, b = sizes.values()
    noise = int(np.sum(np.asarray(labels) == NOISE))
    return float(noise + abs(a - b))


def min_pts_for(n_cls, n):
    return max(2, int(round(n_cls * n)))


def epsilon_search(features, cfg=TeamClusterConfig()):
    """Grid search for the eps minimizing the cluster cost (ties: smallest eps).

    Returns ``(eps, min_pts, cost)``.
    """
    X = np.asarray(features, dtype=np.float64)
    min_pts = min_pts_for(cfg.n_cls, len(X))
    if len(X) < 2 * min_pts:
        raise NoFeasibleEpsilonError(f"need at least {2 * min_pts} features, got {len(X)}")
    best = None
    for eps in cfg.grid():
        c = cluster_cost(dbscan(X, eps, min_pts))
        if np.isfinite(c) and (best is None or c < best[2]):
            best = (float(eps), min_pts, c)
    if best is None:
        raise NoFeasibleEpsilonError("no epsilon in the grid yields exactly two clusters")
    return best


def sample_frame_ids(frame_ids, n, seed=0):
    ids = np.unique(np.asarray(list(frame_ids)))
    if len(ids) <= n:
        return ids
    rng = np.random.Generator(np.random.PCG64(seed))
    return np.sort(rng.choice(ids, size=n, replace=False))


def assign_labels(features, eps, min_pts):
    """Cluster and name the two largest clusters A (larger) and B; the rest Other."""
    labels = dbscan(features, eps, min_pts)
    sizes = cluster_sizes(labels)
    if len(sizes) < 2:
        raise NoFeasibleEpsilonError("fewer than two clusters at the selected eps")
    # larger first; equal sizes go by the lower mean member index
    idx = np.arange(len(labels))
    top = sorted(sizes, key=lambda k: (-sizes[k], idx[labels == k].mean()))[:2]
    out = np.full(len(labels), OTHER, dtype=object)
    out[labels == top[0]] = TEAM_A
    out[labels == top[1]] = TEAM_B
    return out


def assign_teams(frame_ids, features, cfg=TeamClusterConfig()):
    """Label every detection of a match A, B or Other.

    ``frame_ids[i]`` is the frame of ``features[i]``. The eps grid search runs on
    a seeded sample of frames; the final clustering covers all detections with
    ``min_pts`` rescaled to the full detection count.
    """
    frame_ids = np.asarray(frame_ids)
    X = np.asarray(features, dtype=np.float64).reshape(len(frame_ids), -1)
    chosen = sample_frame_ids(frame_ids, cfg.sample_frames, cfg.seed)
    mask = np.isin(frame_ids, chosen)
    eps, _, _ = epsilon_search(X[mask], cfg)
    return assign_labels(X, eps, min_pts_for(cfg.n_cls, len(X))), eps


def team_accuracy(pred, truth):
    """Macro accuracy over {A, B, Other} and micro accuracy over {A, B}.

    Team identities are arbitrary, so the A/B swap scoring best is used.
    """
    pred = np.asarray(pred, dtype=object)
    truth = np.asarray(truth, dtype=object)
    best = None
    for swap in (False, True):
        p = pred.copy()
        if swap:
            p = np.where(pred == TEAM_A, TEAM_B, np.where(pred == TEAM_B, TEAM_A, pred))
        recalls = [np.mean(p[truth == c] == c) for c in (TEAM_A, TEAM_B, OTHER) if np.any(truth == c)]
        macro = float(np.mean(recalls))
        team = (truth == TEAM_A) | (truth == TEAM_B)
        micro = float(np.mean(p[team] == truth[team])) if team.any() else float("nan")
        if best is None or (macro, micro) > best:
            best = (macro, micro)
    return best
