"""Self-verification sweep over the outside-field tolerance rho.

Injects gross homography errors into a synthetic match and prints, for each
rho, the share of corrupted and clean frames discarded and the resulting
d_mean and kept ratio.
"""

import argparse

import numpy as np

from pitchpos.evaluation import EvalFrame, match_report
from pitchpos.field import standard_field
from pitchpos.projection import SvConfig, extract_frame_positions
from pitchpos.synth import MatchConfig, NoiseConfig, corrupt_detections, corrupt_homographies, generate_match


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=1000)
    ap.add_argument("--corrupt-prob", type=float, default=0.1)
    ap.add_argument("--magnitude", type=float, default=20.0)
    ap.add_argument("--rho", type=float, nargs="+", default=[0, 1, 2, 3, 4, 5, 10, float("inf")])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    template = standard_field()
    match = generate_match(MatchConfig(n_frames=args.frames), seed=args.seed)
    noise = NoiseConfig(anchor_sigma=2.0, dropout=0.1, h_corrupt_prob=args.corrupt_prob,
                        h_corrupt_magnitude=args.magnitude)
    dets = corrupt_detections(match, noise, seed=args.seed + 1)
    Hs, bad = corrupt_homographies(match, noise, seed=args.seed + 2)
    print(f"{bad.sum()} of {match.n_frames} frames corrupted by {args.magnitude} m")
    print("rho     corrupted-discarded  clean-discarded  d_mean  ratio")
    for rho in args.rho:
        frames = []
        for t in range(match.n_frames):
            est = extract_frame_positions([d.detection for d in dets[t]], Hs[t], template, SvConfig(rho), t)
            frames.append(EvalFrame(t, est.positions, match.gt_frame(t)[0], Hs[t], est.sv_keep))
        keep = np.array([f.sv_keep for f in frames])
        rep = match_report(frames, sv=True)
        print(f"{rho:<7g} {np.mean(~keep[bad]):19.1%}  {np.mean(~keep[~bad]):15.1%}  "
              f"{rep.d_mean:6.2f}  {rep.ratio:5.2f}")


if __name__ == "__main__":
    main()
