"""Planar homography utilities.

Homographies are plain ``(3, 3)`` float64 numpy arrays. The canonical form has
``h33 == 1`` when ``h33`` is non-zero, and otherwise unit Frobenius norm with
the largest-magnitude entry positive.
"""

import numpy as np

DEPTH_EPS = 1e-9


class SingularHomographyError(ValueError):
    pass


class PointAtInfinityError(ValueError):
    pass


def canonicalize(H):
    H = np.asarray(H, dtype=np.float64)
    if H.shape != (3, 3):
        raise ValueError(f"homography must be 3x3, got {H.shape}")
    h33 = H[2, 2]
    scale = np.abs(H).max()
    if scale == 0 or not np.all(np.isfinite(H)):
        raise SingularHomographyError("homography has no finite non-zero entries")
    if abs(h33) > 1e-12 * scale:
        return H / h33
    # unit Frobenius norm, sign fixed by the first largest-magnitude entry
    H = H / scale
    H = H / np.linalg.norm(H)
    return H if H.flat[np.argmax(np.abs(H))] > 0 else -H


def is_singular(H, tol=1e-12):
    H = np.asarray(H, dtype=np.float64)
    scale = np.abs(H).max()
    if scale == 0 or not np.all(np.isfinite(H)):
        return True
    # determinant of the max-normalized matrix
    return abs(np.linalg.det(H / scale)) < tol


def invert(H):
    """Inverse homography in canonical form."""
    if is_singular(H):
        raise SingularHomographyError("cannot invert a singular homography")
    return canonicalize(np.linalg.inv(np.asarray(H, dtype=np.float64)))


def apply(H, p):
    """Map a single 2D point through ``H``.

    Raises :class:`PointAtInfinityError` when the projective depth is within
    ``DEPTH_EPS`` of zero.
    """
    x, y, w = np.asarray(H, dtype=np.float64) @ np.array([p[0], p[1], 1.0])
    if abs(w) <= DEPTH_EPS:
        raise PointAtInfinityError(f"point {tuple(p)} maps to infinity")
    return np.array([x / w, y / w])


def apply_many(H, pts):
    """Vectorized mapping; returns ``(xy, w)`` with ``xy`` NaN where ``|w|`` is tiny."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    hom = pts @ H[:, :2].T + H[:, 2]
    w = hom[:, 2]
    ok = np.abs(w) > DEPTH_EPS
    out = np.full((len(pts), 2), np.nan)
    out[ok] = hom[ok, :2] / w[ok, None]
    return out, w


def orient(H, image_size):
    """Fix the overall sign of a field->image homography.

    Canonicalization can flip the sign of ``H``, which also flips what counts as
    positive projective depth. The sign is chosen so the ray through the bottom
    centre of the image meets the field plane in front of the camera; for any
    camera that sees the ground without roll, the ground occupies the lower part
    of the frame.
    """
    H = np.asarray(H, dtype=np.float64)
    w_img, h_img = image_size
    Hinv = np.linalg.inv(H)
    depth = Hinv[2] @ np.array([w_img / 2.0, float(h_img), 1.0])
    return -H if depth < 0 else H


def fit_dlt(src, dst):
    """Direct linear transform fit of ``dst ~ H src`` with Hartley normalization."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if len(src) < 4 or len(src) != len(dst):
        raise ValueError("need at least 4 point correspondences")

    def normalizer(pts):
        c = pts.mean(axis=0)
        d = np.sqrt(((pts - c) ** 2).sum(axis=1)).mean()
        s = np.sqrt(2) / d if d > 0 else 1.0
        return np.array([[s, 0, -s * c[0]], [0, s, -s * c[1]], [0, 0, 1.0]])

    Ts, Td = normalizer(src), normalizer(dst)
    s = (np.c_[src, np.ones(len(src))] @ Ts.T)[:, :2]
    d = (np.c_[dst, np.ones(len(dst))] @ Td.T)[:, :2]
    rows = []
    for (x, y), (u, v) in zip(s, d):
        rows.append([-x, -y, -1, 0, 0, 0, u * x, u * y, u])
        rows.append([0, 0, 0, -x, -y, -1, v * x, v * y, v])
    _, _, vt = np.linalg.svd(np.asarray(rows))
    Hn = vt[-1].reshape(3, 3)
    return canonicalize(np.linalg.inv(Td) @ Hn @ Ts)


def corner_error(H_a, H_b, pts):
    """Mean image-space distance between two homographies over field points."""
    a, _ = apply_many(H_a, pts)
    b, _ = apply_many(H_b, pts)
    return float(np.mean(np.linalg.norm(a - b, axis=1)))
