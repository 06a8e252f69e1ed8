"""Command-line entry point: ``python3 -m pitchpos <command> ...``.

Commands follow the pipeline order: builddb, register, shots, extract, teams,
eval. ``synth`` writes a synthetic dataset in the formats the other commands
read. Malformed input exits with status 2 and a one-line diagnostic.
"""

import argparse
import logging
import os
import re
import sys

import numpy as np

from . import formats
from .camera import preset, sample_poses
from .config import ConfigError, PipelineConfig, dump_config, load_config
from .evaluation import EvalFrame, PmConfig, ReportConfig, full_table
from .field import read_pgm, render_edge_image, standard_field, write_pgm
from .homography import SingularHomographyError
from .projection import SvConfig, extract_frame_positions
from .registration import (DescriptorConfig, FeatureDB, InvalidFeatureError, RefinementParams,
                           build_feature_db, register_frame)
from .shots import ShotSegment, ShotType, classify_shots
from .synth import MatchConfig, NoiseConfig, corrupt_detections, corrupt_homographies, generate_match
from .teams import NoFeasibleEpsilonError, TeamClusterConfig, assign_teams, embed_hsv

log = logging.getLogger("pitchpos")

FRAME_RE = re.compile(r"(\d+)\.pgm$")


class UsageError(ValueError):
    pass


def _config(args):
    cfg = load_config(args.config) if args.config else PipelineConfig()
    over = {k: getattr(args, k) for k in ("preset", "db_size", "seed", "k", "tau", "rho", "zeta",
                                          "n_cls", "q", "mode") if hasattr(args, k)}
    if getattr(args, "no_refine", False):
        over["refine"] = False
    return cfg.override(**over)


def _template(cfg):
    return standard_field(cfg.length, cfg.width)


def _descriptor_cfg(cfg):
    return DescriptorConfig(sigma=cfg.sigma, line_width=cfg.line_width)


def _refinement(cfg):
    return RefinementParams(max_iterations=cfg.max_iterations, truncation=cfg.truncation,
                            coarse_truncations=cfg.coarse_truncations,
                            convergence_threshold=cfg.convergence_threshold,
                            damping=cfg.damping, max_retries=cfg.max_retries,
                            polish_blur=cfg.polish_blur, optimal_residual=cfg.optimal_residual)


# -- commands -----------------------------------------------------------------

def cmd_builddb(args, cfg):
    poses = sample_poses(preset(cfg.preset, count=cfg.db_size, seed=cfg.seed))
    step = max(1, len(poses) // 20)

    def progress(i, n):
        if i % step == 0:
            log.info("rendered %d / %d poses", i, n)

    db = build_feature_db(poses, _template(cfg), _descriptor_cfg(cfg), progress)
    db.save(args.out)
    log.info("wrote %d descriptors to %s (%d poses excluded)", len(db), args.out, db.excluded)


def _edge_frames(directory):
    try:
        names = os.listdir(directory)
    except OSError as e:
        raise UsageError(f"{directory}: {e.strerror}") from e
    frames = {}
    for name in names:
        m = FRAME_RE.search(name)
        if m:
            frames[int(m.group(1))] = os.path.join(directory, name)
    if not frames:
        raise UsageError(f"{directory}: no <frame>.pgm edge images found")
    return dict(sorted(frames.items()))


def cmd_register(args, cfg):
    try:
        db = FeatureDB.load(args.db)
    except (OSError, ValueError) as e:
        raise UsageError(f"{args.db}: {e}") from e
    template = _template(cfg)
    params = _refinement(cfg)
    out = {}
    for frame, path in _edge_frames(args.frames).items():
        try:
            edges = read_pgm(path)
        except (OSError, ValueError, IndexError) as e:
            raise UsageError(f"{path}: not a binary PGM ({e})") from e
        try:
            res = register_frame(edges, db, template, params, k=cfg.k, refine=cfg.refine)
            out[frame] = res.H
        except (InvalidFeatureError, SingularHomographyError) as e:
            log.warning("frame %d not registered: %s", frame, e)
            out[frame] = None
    formats.write_homographies(args.out, out)
    log.info("registered %d frames", len(out))


def cmd_shots(args, cfg):
    Hs = formats.read_homographies(args.homographies)
    shots = formats.read_shots(args.shots)
    segments = [ShotSegment(a, b, [Hs.get(f) for f in range(a, b + 1)]) for a, b in shots]
    rows = []
    for seg, score, kind in classify_shots(segments, cfg.tau):
        rows.append((seg.start, seg.end, score.mean_change, kind.value))
    formats.write_classification(args.out, rows)
    n_main = sum(r[3] == ShotType.MAIN_CAMERA.value for r in rows)
    log.info("%d of %d shots classified as main camera", n_main, len(rows))


def _main_frames(path):
    keep = set()
    for a, b, _, label in formats.read_classification(path):
        if label == ShotType.MAIN_CAMERA.value:
            keep.update(range(a, b + 1))
    return keep


def cmd_extract(args, cfg):
    Hs = formats.read_homographies(args.homographies)
    dets, _ = formats.read_detections(args.detections)
    allowed = _main_frames(args.shot_classes) if args.shot_classes else None
    by_frame = {}
    for d in dets:
        by_frame.setdefault(d.frame, []).append(d)
    template = _template(cfg)
    sv = SvConfig(cfg.rho)
    estimates = []
    for frame, H in sorted(Hs.items()):
        if H is None or (allowed is not None and frame not in allowed):
            continue
        try:
            estimates.append(extract_frame_positions(by_frame.get(frame, []), H, template, sv, frame))
        except SingularHomographyError:
            log.warning("frame %d has a singular homography; skipped", frame)
    formats.write_positions(args.out, estimates)
    log.info("extracted positions for %d frames", len(estimates))


def cmd_teams(args, cfg):
    estimates = formats.read_positions(args.positions)
    _, colors = formats.read_detections(args.detections)
    if args.colors:
        colors.update(formats.read_colors(args.colors))
    ids, frames, feats = [], [], []
    for e in estimates:
        for did in e.detection_ids:
            if did not in colors:
                raise UsageError(f"no colour for detection {did}")
            ids.append(did)
            frames.append(e.frame)
            feats.append(embed_hsv(*colors[did]))
    tcfg = TeamClusterConfig(n_cls=cfg.n_cls, eps_grid=(cfg.eps_lo, cfg.eps_hi, cfg.eps_step),
                             sample_frames=cfg.sample_frames, seed=cfg.seed)
    labels, eps = assign_teams(frames, np.array(feats).reshape(-1, 3), tcfg)
    lookup = dict(zip(ids, labels.tolist()))
    for e in estimates:
        e.teams = [lookup[d] for d in e.detection_ids]
    formats.write_positions(args.out, estimates)
    log.info("team assignment with eps=%g over %d detections", eps, len(ids))


def cmd_eval(args, cfg):
    estimates = formats.read_positions(args.positions)
    gt = formats.read_gt(args.gt)
    frames = []
    for e in estimates:
        if e.frame not in gt:
            raise UsageError(f"{args.gt}: no ground truth for frame {e.frame}")
        G, gteams, _ = gt[e.frame]
        ok = np.all(np.isfinite(e.positions), axis=1)
        teams = [t for t, k in zip(e.teams, ok) if k] if any(t is not None for t in e.teams) else None
        frames.append(EvalFrame(e.frame, e.positions[ok], G, e.H, e.sv_keep, teams, gteams))
    rcfg = ReportConfig(mode=cfg.mode, q=cfg.q, pm=PmConfig(cfg.zeta))
    reports = full_table(frames, rcfg, with_teams=all(f.teams is not None for f in frames) and bool(frames))
    formats.write_report(args.out, reports)
    if args.histogram:
        formats.write_histogram_svg(args.histogram, reports[0].per_frame.values())
    for r in reports:
        print(f"{formats.filters_name(r.sv, r.pm):6s} team={str(r.team_constrained):5s} "
              f"d_mean={formats.fmt(r.d_mean)} acc2={formats.fmt(r.acc[2.0])} "
              f"acc3={formats.fmt(r.acc[3.0])} ratio={formats.fmt(r.ratio)}")


def cmd_synth(args, cfg):
    os.makedirs(args.out, exist_ok=True)
    mcfg = MatchConfig(n_frames=args.frames, length=cfg.length, width=cfg.width,
                       referee_in_gt=args.referee_in_gt)
    noise = NoiseConfig(anchor_sigma=args.anchor_sigma, dropout=args.dropout,
                        false_positive_rate=args.false_positives, color_sigma=args.color_sigma,
                        h_corrupt_prob=args.h_corrupt_prob, h_corrupt_magnitude=args.h_corrupt_magnitude)
    match = generate_match(mcfg, cfg.seed)
    dets = corrupt_detections(match, noise, cfg.seed + 1)
    Hs, _ = corrupt_homographies(match, noise, cfg.seed + 2)
    p = lambda name: os.path.join(args.out, name)

    gt_rows = []
    for t in range(match.n_frames):
        for i in match.gt_players:
            x, y = match.positions[t, i]
            gt_rows.append((t, f"p{i:02d}", match.teams[i], x, y))
    formats.write_gt(p("gt.csv"), gt_rows)
    formats.write_homographies(p("homographies.csv"), {t: Hs[t] for t in range(match.n_frames)})
    flat = [sd for frame in dets for sd in frame]
    formats.write_detections(p("detections.jsonl"), [sd.detection for sd in flat],
                             {sd.detection.detection_id: sd.hsv for sd in flat})
    formats.write_colors(p("colors.jsonl"), [(sd.detection.frame, sd.detection.detection_id, sd.hsv)
                                             for sd in flat])
    formats.write_shots(p("shots.csv"), [(0, match.n_frames - 1)])
    with open(p("poses.csv"), "w", encoding="ascii") as fh:
        fh.write("frame,x,y,z,focal,pan,tilt\n")
        for t, pose in enumerate(match.poses):
            fh.write(",".join([str(t)] + [formats.fmt(v) for v in pose.as_tuple()]) + "\n")
    if args.edges:
        os.makedirs(p("edges"), exist_ok=True)
        template = _template(cfg)
        for t in range(0, match.n_frames, args.edge_stride):
            write_pgm(p(f"edges/{t:06d}.pgm"), render_edge_image(template, match.homographies[t]))
    with open(p("config.txt"), "w", encoding="ascii") as fh:
        fh.write(dump_config(cfg))
    log.info("wrote synthetic match (%d frames, %d detections) to %s", match.n_frames, len(flat), args.out)


# -- parser ---------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("-v", "--verbose", action="store_true")
    ap = argparse.ArgumentParser(prog="pitchpos", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def command(name, fn, help):
        p = sub.add_parser(name, help=help, parents=[common])
        p.set_defaults(func=fn)
        return p

    p = command("builddb", cmd_builddb, "render a pose sample into a feature database")
    p.add_argument("--preset", choices=["wc14-base", "extended", "uniform-focal", "uniform-focal-xyz"])
    p.add_argument("--db-size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = command("register", cmd_register, "register edge images against a feature database")
    p.add_argument("--db", required=True)
    p.add_argument("--frames", required=True, help="directory of <frame>.pgm edge images")
    p.add_argument("--k", type=int, help="number of retrieved candidates to refine")
    p.add_argument("--no-refine", action="store_true")
    p.add_argument("--out", required=True)

    p = command("shots", cmd_shots, "classify shots as main camera or other")
    p.add_argument("--homographies", required=True)
    p.add_argument("--shots", required=True)
    p.add_argument("--tau", type=float)
    p.add_argument("--out", required=True)

    p = command("extract", cmd_extract, "project detections to field positions")
    p.add_argument("--detections", required=True)
    p.add_argument("--homographies", required=True)
    p.add_argument("--shot-classes", help="classification CSV; only main-camera frames are kept")
    p.add_argument("--rho", type=float)
    p.add_argument("--out", required=True)

    p = command("teams", cmd_teams, "assign team labels to extracted positions")
    p.add_argument("--positions", required=True)
    p.add_argument("--detections", required=True, help="detections JSONL, optionally carrying hsv colours")
    p.add_argument("--colors", help="colour JSONL {frame, detection_id, h, s, v}; overrides inline hsv")
    p.add_argument("--n-cls", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)

    p = command("eval", cmd_eval, "score positions against ground truth")
    p.add_argument("--positions", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--q", type=float)
    p.add_argument("--mode", choices=["mean", "median", "best_q"])
    p.add_argument("--zeta", type=float)
    p.add_argument("--histogram", help="write an SVG histogram of unfiltered per-frame errors")
    p.add_argument("--out", required=True)

    p = command("synth", cmd_synth, "write a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int, default=200)
    p.add_argument("--seed", type=int)
    p.add_argument("--anchor-sigma", type=float, default=0.0)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--false-positives", type=float, default=0.0)
    p.add_argument("--color-sigma", type=float, default=0.0)
    p.add_argument("--h-corrupt-prob", type=float, default=0.0)
    p.add_argument("--h-corrupt-magnitude", type=float, default=20.0)
    p.add_argument("--referee-in-gt", action="store_true")
    p.add_argument("--edges", action="store_true", help="also render edge images")
    p.add_argument("--edge-stride", type=int, default=1)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except (formats.FormatError, ConfigError, UsageError, NoFeasibleEpsilonError) as e:
        print(f"pitchpos {args.command}: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"pitchpos {args.command}: invalid input: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
