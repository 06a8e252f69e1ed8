"""Evaluation of estimated player positions against ground-truth positional data."""

import logging
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.optimize import linear_sum_assignment

from .homography import orient
from .teams import TEAM_A, TEAM_B

log = logging.getLogger(__name__)

DUMMY_COST = 1e6
THRESHOLDS = (2.0, 3.0)


@dataclass(frozen=True)
class PmConfig:
    zeta: float = 0.3
    border_tol: float = 0.05

    def __post_init__(self):
        if not 0 <= self.zeta < 1:
            raise ValueError("zeta must lie in [0, 1)")


@dataclass
class EvalFrame:
    """Everything needed to score one frame."""
    frame: int
    positions: np.ndarray  # (n, 2) predicted field positions
    gt_positions: np.ndarray  # (m, 2)
    H: np.ndarray = None  # estimated field->image homography, None if unregistered
    sv_keep: bool = True
    teams: list = None  # predicted labels A/B/O per position
    gt_teams: list = None  # A/B per ground-truth row


def hungarian_match(pred, gt):
    """Minimum total L2 assignment of ``min(m, n)`` pairs.

    The cost matrix is padded to square with ``DUMMY_COST``; dummy pairs are
    dropped. Returns ``(pairs, distances)``.
    """
    P = np.asarray(pred, dtype=np.float64).reshape(-1, 2)
    G = np.asarray(gt, dtype=np.float64).reshape(-1, 2)
    m, n = len(P), len(G)
    if m == 0 or n == 0:
        return [], np.zeros(0)
    cost = np.linalg.norm(P[:, None, :] - G[None, :, :], axis=2)
    k = max(m, n)
    padded = np.full((k, k), DUMMY_COST)
    padded[:m, :n] = cost
    rows, cols = linear_sum_assignment(padded)
    keep = (rows < m) & (cols < n)
    pairs = list(zip(rows[keep].tolist(), cols[keep].tolist()))
    return pairs, cost[rows[keep], cols[keep]]


def visible_gt(gt_positions, H, image_size, border_tol=0.05):
    """Mask of ground-truth players that project into the (expanded) image."""
    G = np.asarray(gt_positions, dtype=np.float64).reshape(-1, 2)
    if len(G) == 0:
        return np.zeros(0, dtype=bool)
    Ho = orient(np.asarray(H, dtype=np.float64), image_size)
    hom = G @ Ho[:, :2].T + Ho[:, 2]
    w = hom[:, 2]
    front = w > 1e-9
    uv = np.where(front[:, None], hom[:, :2] / np.where(front, w, 1.0)[:, None], np.nan)
    W, Hh = image_size
    mx, my = border_tol * W, border_tol * Hh
    with np.errstate(invalid="ignore"):
        inside = (uv[:, 0] >= -mx) & (uv[:, 0] <= W + mx) & (uv[:, 1] >= -my) & (uv[:, 1] <= Hh + my)
    return front & inside


def pm_filter(n_real, n_gt_visible, cfg=PmConfig()):
    """Player-mismatch filter: keep iff ``1 - zeta < n_real / n_gt < 1 + zeta``."""
    if n_gt_visible <= 0:
        return False
    ratio = n_real / n_gt_visible
    return (1 - cfg.zeta) < ratio < (1 + cfg.zeta)


def aggregate_frame(distances, mode="best_q", q=0.8):
    D = np.asarray(distances, dtype=np.float64)
    if D.size == 0:
        return None
    if mode == "mean":
        return float(D.mean())
    if mode == "median":
        return float(np.median(D))
    if mode == "best_q":
        k = max(1, int(np.floor(q * D.size + 1e-9)))
        return float(np.sort(D)[:k].mean())
    raise ValueError(f"unknown aggregation mode {mode!r}")


@dataclass
class MetricsReport:
    d_mean: float
    d_median: float
    acc: dict
    ratio: float
    n_frames: int
    n_kept: int
    n_scored: int
    sv: bool
    pm: bool
    team_constrained: bool = False
    mode: str = "best_q"
    q: float = 0.8
    empty: bool = False
    gt_visible_frames: int = 0
    gt_all_frames: int = 0
    per_frame: dict = field(default_factory=dict, repr=False)
    # frame -> "visible" (matched against visible GT) or "all" (no H, all GT)
    gt_mode: dict = field(default_factory=dict, repr=False)

    def acc_at(self, l):
        return self.acc[float(l)]


@dataclass(frozen=True)
class ReportConfig:
    mode: str = "best_q"
    q: float = 0.8
    thresholds: tuple = THRESHOLDS
    pm: PmConfig = PmConfig()
    image_size: tuple = (1280, 720)


def _gt_mask(f, cfg):
    if f.H is None:
        return np.ones(len(f.gt_positions), dtype=bool), False
    return visible_gt(f.gt_positions, f.H, cfg.image_size, cfg.pm.border_tol), True


def _kept(f, sv, pm, cfg):
    if sv and not f.sv_keep:
        return False
    if pm:
        mask, _ = _gt_mask(f, cfg)
        return pm_filter(len(f.positions), int(mask.sum()), cfg.pm)
    return True


def _summarize(values, n_frames, n_kept, sv, pm, cfg, team, modes):
    vals = np.array(list(values.values()), dtype=np.float64)
    modes = {k: modes[k] for k in values}
    visible_count = sum(m == "visible" for m in modes.values())
    all_count = len(modes) - visible_count
    ratio = n_kept / n_frames if n_frames else 0.0
    if len(vals) == 0:
        acc = {float(l): float("nan") for l in cfg.thresholds}
        return MetricsReport(float("nan"), float("nan"), acc, ratio, n_frames, n_kept, 0,
                             sv, pm, team, cfg.mode, cfg.q, True, visible_count, all_count, values, modes)
    acc = {float(l): float(np.mean(vals <= l)) for l in cfg.thresholds}
    return MetricsReport(float(vals.mean()), float(np.median(vals)), acc, ratio, n_frames,
                         n_kept, len(vals), sv, pm, team, cfg.mode, cfg.q, False,
                         visible_count, all_count, values, modes)


def match_report(frames, sv=False, pm=False, cfg=ReportConfig()):
    """Per-match metrics without the team constraint."""
    values, modes = {}, {}
    n_kept = 0
    for f in frames:
        if not _kept(f, sv, pm, cfg):
            continue
        n_kept += 1
        mask, used_visible = _gt_mask(f, cfg)
        _, D = hungarian_match(f.positions, np.asarray(f.gt_positions).reshape(-1, 2)[mask])
        a = aggregate_frame(D, cfg.mode, cfg.q)
        if a is not None:
            values[f.frame] = a
            modes[f.frame] = "visible" if used_visible else "all"
    report = _summarize(values, len(frames), n_kept, sv, pm, cfg, False, modes)
    if report.empty:
        log.warning("match report (sv=%s, pm=%s) has no scored frames", sv, pm)
    return report


def _team_frame_value(f, mask, swap, cfg):
    pred_t = np.asarray(f.teams, dtype=object)
    gt_t = np.asarray(f.gt_teams, dtype=object)
    P = np.asarray(f.positions).reshape(-1, 2)
    G = np.asarray(f.gt_positions).reshape(-1, 2)
    per_team = []
    for team in (TEAM_A, TEAM_B):
        target = {TEAM_A: TEAM_B, TEAM_B: TEAM_A}[team] if swap else team
        p = P[pred_t == team]
        g = G[(gt_t == target) & mask]
        if len(p) == 0 or len(g) == 0:
            continue
        _, D = hungarian_match(p, g)
        per_team.append(aggregate_frame(D, cfg.mode, cfg.q))
    return float(np.mean(per_team)) if per_team else None


def team_constrained_report(frames, sv=False, pm=False, cfg=ReportConfig()):
    """Metrics with predictions matched only within their assigned team.

    Both A/B label permutations are scored; the one with the lower match-level
    d_mean is reported. Other-labelled predictions are ignored.
    """
    best = None
    for swap in (False, True):
        values, modes = {}, {}
        n_kept = 0
        for f in frames:
            if not _kept(f, sv, pm, cfg):
                continue
            n_kept += 1
            mask, used_visible = _gt_mask(f, cfg)
            v = _team_frame_value(f, mask, swap, cfg)
            if v is not None:
                values[f.frame] = v
                modes[f.frame] = "visible" if used_visible else "all"
        rep = _summarize(values, len(frames), n_kept, sv, pm, cfg, True, modes)
        if best is None or (not rep.empty and (best.empty or rep.d_mean < best.d_mean)):
            best = rep
    return best


FILTER_COMBINATIONS = ((False, False), (True, False), (True, True))


def full_table(frames, cfg=ReportConfig(), with_teams=True):
    """Reports for every filter combination, with and without the team constraint."""
    rows = [match_report(frames, sv, pm, cfg) for sv, pm in FILTER_COMBINATIONS]
    if with_teams:
        rows += [team_constrained_report(frames, sv, pm, cfg) for sv, pm in FILTER_COMBINATIONS]
    return rows


def overall(reports):
    """Unweighted mean over per-match reports sharing one configuration."""
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to combine")
    ok = [r for r in reports if not r.empty]
    first = reports[0]

    def avg(get):
        vals = [get(r) for r in ok]
        return float(np.mean(vals)) if vals else float("nan")

    acc = {l: avg(lambda r, l=l: r.acc[l]) for l in first.acc}
    return replace(first, d_mean=avg(lambda r: r.d_mean), d_median=avg(lambda r: r.d_median),
                   acc=acc, ratio=float(np.mean([r.ratio for r in reports])),
                   n_frames=sum(r.n_frames for r in reports), n_kept=sum(r.n_kept for r in reports),
                   n_scored=sum(r.n_scored for r in reports), empty=not ok,
                   gt_visible_frames=sum(r.gt_visible_frames for r in reports),
                   gt_all_frames=sum(r.gt_all_frames for r in reports), per_frame={}, gt_mode={})


# -- shot boundary detection ----------------------------------------------------

def sbd_f1(pred_cuts, gt_cuts, delta=0):
    """Precision, recall and F1 of predicted cuts with +-delta frame tolerance.

    Ground-truth cuts are visited in ascending order; each takes the earliest
    unmatched prediction within tolerance. On a line this greedy matching is
    maximum, so it agrees with an optimal one-to-one assignment.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    pred = sorted(pred_cuts)
    gt = sorted(gt_cuts)
    used = [False] * len(pred)
    matched = 0
    start = 0
    for g in gt:
        while start < len(pred) and (used[start] or pred[start] < g - delta):
            start += 1
        for i in range(start, len(pred)):
            if pred[i] > g + delta:
                break
            if not used[i]:
                used[i] = True
                matched += 1
                break
    if not pred and not gt:
        return 1.0, 1.0, 1.0
    precision = matched / len(pred) if pred else 0.0
    recall = matched / len(gt) if gt else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1
