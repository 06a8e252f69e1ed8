"""Convex polygon clipping (Sutherland-Hodgman) and areas."""

import numpy as np


def signed_area(poly):
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def area(poly):
    return abs(signed_area(poly))


def clip_halfplane(poly, a, b, c):
    """Keep the part of ``poly`` where ``a*x + b*y + c >= 0``."""
    if len(poly) == 0:
        return poly
    out = []
    n = len(poly)
    vals = poly @ np.array([a, b]) + c
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        vp, vq = vals[i], vals[(i + 1) % n]
        if vp >= 0:
            out.append(p)
        if (vp >= 0) != (vq >= 0):
            t = vp / (vp - vq)
            out.append(p + t * (q - p))
    return np.array(out).reshape(-1, 2)


def clip_convex(subject, clipper):
    """Intersection of ``subject`` with the convex polygon ``clipper``."""
    if len(clipper) < 3 or len(subject) < 3:
        return np.zeros((0, 2))
    if signed_area(clipper) < 0:
        clipper = clipper[::-1]
    out = subject
    n = len(clipper)
    for i in range(n):
        p, q = clipper[i], clipper[(i + 1) % n]
        # interior of a CCW polygon lies to the left of each edge
        a, b = -(q[1] - p[1]), q[0] - p[0]
        c = -(a * p[0] + b * p[1])
        out = clip_halfplane(out, a, b, c)
        if len(out) == 0:
            break
    return out


def rectangle(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=float)
