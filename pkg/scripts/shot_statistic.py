"""Distribution of the shot change statistic for main-camera and other shots.

Prints score percentiles for both classes and precision, recall and F1 of the
main-camera class over a range of thresholds.
"""

import argparse

import numpy as np

from pitchpos.shots import shot_change_score
from pitchpos.synth import main_camera_shot, other_camera_shot


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--shots", type=int, default=100)
    ap.add_argument("--min-len", type=int, default=25)
    ap.add_argument("--max-len", type=int, default=250)
    ap.add_argument("--fail", type=float, nargs=2, default=(0.1, 0.5), help="failed-frame probability range")
    ap.add_argument("--tau", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.35, 0.4, 0.5, 0.75, 1.0])
    ap.add_argument("--seed", type=int, default=10)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    main_s, other_s = [], []
    for i in range(args.shots):
        n = int(rng.integers(args.min_len, args.max_len + 1))
        main_s.append(shot_change_score(main_camera_shot(n, seed=i)).mean_change)
        other = other_camera_shot(n, seed=1000 + i, fail_prob=float(rng.uniform(*args.fail)))
        other_s.append(shot_change_score(other).mean_change)
    main_s, other_s = np.array(main_s), np.array(other_s)
    for name, s in (("main", main_s), ("other", other_s)):
        p = np.percentile(s, [0, 10, 50, 90, 100])
        print(f"{name:6s} min {p[0]:.3f}  p10 {p[1]:.3f}  median {p[2]:.3f}  p90 {p[3]:.3f}  max {p[4]:.3f}")
    print("tau    precision  recall  F1")
    for tau in args.tau:
        tp, fp = np.sum(main_s <= tau), np.sum(other_s <= tau)
        fn = len(main_s) - tp
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / len(main_s)
        f1 = 2 * tp / (2 * tp + fp + fn)
        print(f"{tau:<6g} {prec:9.3f}  {rec:6.3f}  {f1:.3f}")


if __name__ == "__main__":
    main()
