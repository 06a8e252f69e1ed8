"""Register a noiseless synthetic match against a feature database.

Reports the fraction of frames above an IoU_part threshold and the median
back-projection error of visible players, for one or more values of k.

    python3 scripts/registration_experiment.py --db-size 10000 --frames 200 --k 1 3 5
"""

import argparse
import time

import numpy as np

from pitchpos.camera import preset, sample_poses
from pitchpos.field import render_edge_image, standard_field
from pitchpos.projection import project_position
from pitchpos.registration import FeatureDB, RefinementParams, build_feature_db, iou_part, register_frame
from pitchpos.synth import MatchConfig, generate_match, project_players


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--db", help="load a saved database instead of building one")
    ap.add_argument("--db-size", type=int, default=10_000)
    ap.add_argument("--preset", default="wc14-base")
    ap.add_argument("--frames", type=int, default=200)
    ap.add_argument("--stride", type=int, default=1)
    ap.add_argument("--k", type=int, nargs="+", default=[1, 3])
    ap.add_argument("--polish-blur", type=float, default=RefinementParams().polish_blur)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    template = standard_field()
    t0 = time.perf_counter()
    if args.db:
        db = FeatureDB.load(args.db)
    else:
        db = build_feature_db(sample_poses(preset(args.preset, count=args.db_size, seed=args.seed)), template)
    print(f"database: {len(db)} descriptors ({time.perf_counter() - t0:.0f} s)")

    match = generate_match(MatchConfig(n_frames=args.frames), seed=args.seed)
    params = RefinementParams(polish_blur=args.polish_blur)
    frames = range(0, match.n_frames, args.stride)
    observed = {t: render_edge_image(template, match.homographies[t]) for t in frames}
    for k in args.k:
        t0 = time.perf_counter()
        ious, errs = [], []
        for t in frames:
            H = register_frame(observed[t], db, template, params, k=k).H
            ious.append(iou_part(H, match.homographies[t], (1280, 720), template))
            uv, vis = project_players(match, t)
            errs += [np.linalg.norm(project_position(H, uv[i]) - match.positions[t, i]) for i in np.flatnonzero(vis)]
        ious = np.array(ious)
        print(f"k={k}: IoU>=0.95 {np.mean(ious >= 0.95):.1%}  mean IoU {ious.mean():.3f}  "
              f"median error {np.median(errs):.3f} m  ({time.perf_counter() - t0:.0f} s)")


if __name__ == "__main__":
    main()
