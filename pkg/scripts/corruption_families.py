"""Self-verification discard rate under different kinds of gross registration error.

Families, each displacing points by a fixed number of metres:
  corners      every pitch corner moves in an independent random direction
  translation  the whole field plane shifts in one random direction
  footprint    the corners of the camera's ground footprint move independently
"""

import argparse

import numpy as np

from pitchpos.field import standard_field
from pitchpos.homography import canonicalize, fit_dlt, orient
from pitchpos.projection import SvConfig, extract_frame_positions
from pitchpos.synth import MatchConfig, NoiseConfig, corner_perturbation, corrupt_detections, generate_match

SIZE = (1280, 720)


def footprint(H):
    Hi = np.linalg.inv(orient(H, SIZE))
    q = np.array([[0, 0, 1], [SIZE[0], 0, 1], [SIZE[0], SIZE[1], 1], [0, SIZE[1], 1.0]]) @ Hi.T
    return q[:, :2] / q[:, 2:]


def perturbation(family, H, corners, magnitude, rng):
    if family == "corners":
        return corner_perturbation(corners, magnitude, rng)
    if family == "translation":
        a = rng.uniform(0, 2 * np.pi)
        return np.array([[1, 0, magnitude * np.cos(a)], [0, 1, magnitude * np.sin(a)], [0, 0, 1.0]])
    F = footprint(H)
    a = rng.uniform(0, 2 * np.pi, 4)
    return fit_dlt(F, F + magnitude * np.c_[np.cos(a), np.sin(a)])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=500)
    ap.add_argument("--magnitude", type=float, default=20.0)
    ap.add_argument("--rho", type=float, default=3.0)
    ap.add_argument("--focal", type=float, nargs=2, default=(2600.0, 3600.0))
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    template = standard_field()
    match = generate_match(MatchConfig(n_frames=args.frames, focal_range=tuple(args.focal)), seed=args.seed)
    dets = corrupt_detections(match, NoiseConfig(anchor_sigma=2.0, dropout=0.1), seed=args.seed + 1)
    for family in ("corners", "translation", "footprint"):
        rng = np.random.default_rng(args.seed + 5)
        discarded = 0
        for t in range(match.n_frames):
            H = match.homographies[t]
            Hc = canonicalize(H @ np.linalg.inv(perturbation(family, H, template.corners, args.magnitude, rng)))
            est = extract_frame_positions([d.detection for d in dets[t]], Hc, template, SvConfig(args.rho), t)
            discarded += not est.sv_keep
        print(f"{family:12s} discarded {discarded / match.n_frames:.1%}")


if __name__ == "__main__":
    main()
