"""Soccer field template, edge-image rendering and distance images.

Edge images are ``uint8`` arrays of shape ``(height, width)`` holding 0/1.
Pixel ``(row, col)`` has its centre at image coordinates ``(x=col, y=row)``.
"""

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy import ndimage

from .homography import SingularHomographyError, is_singular, orient

CENTER_CIRCLE_RADIUS = 9.15
PENALTY_MARK_DIST = 11.0
PENALTY_AREA_DEPTH = 16.5
PENALTY_AREA_WIDTH = 40.32
GOAL_AREA_DEPTH = 5.5
GOAL_AREA_WIDTH = 18.32
DEPTH_CLIP = 1e-6


@dataclass(frozen=True)
class Primitive:
    kind: str
    points: np.ndarray  # (n, 2) polyline in field meters; n == 1 for marks

    @property
    def segments(self):
        p = self.points
        if len(p) == 1:
            return p, p
        return p[:-1], p[1:]


def _arc(cx, cy, r, a0, a1):
    n = max(2, int(np.ceil(abs(a1 - a0))) + 1)  # at most 1 degree per step
    a = np.radians(np.linspace(a0, a1, n))
    return np.c_[cx + r * np.cos(a), cy + r * np.sin(a)]


def _rect(x0, y0, x1, y1):
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]], dtype=float)


def _mirror_x(points, length):
    return np.c_[length - points[:, 0], points[:, 1]][::-1]


@dataclass(frozen=True, eq=False)
class FieldTemplate:
    length: float
    width: float
    primitives: tuple

    @cached_property
    def segments(self):
        """All primitive segments as two ``(m, 2)`` endpoint arrays."""
        a, b = zip(*(p.segments for p in self.primitives))
        return np.concatenate(a), np.concatenate(b)

    def sample_points(self, step=0.25):
        """Points every ``step`` meters along all primitives (marks included once)."""
        a, b = self.segments
        seg_len = np.linalg.norm(b - a, axis=1)
        n = np.maximum(1, np.ceil(seg_len / step).astype(int))
        idx = np.repeat(np.arange(len(a)), n)
        start = np.cumsum(n) - n
        t = (np.arange(n.sum()) - np.repeat(start, n)) / np.repeat(n, n)
        pts = a[idx] + t[:, None] * (b - a)[idx]
        # close open polylines with their final vertex
        ends = [p.points[-1:] for p in self.primitives if len(p.points) > 1]
        return np.unique(np.round(np.concatenate([pts, *ends]), 9), axis=0)

    @property
    def corners(self):
        L, W = self.length, self.width
        return np.array([[0.0, 0.0], [L, 0.0], [L, W], [0.0, W]])


def standard_field(length=105.0, width=68.0):
    """Standard pitch markings for a field of the given size.

    Marking sizes are the regulation ones; only their placement depends on the
    pitch dimensions.
    """
    if not (90.0 <= length <= 120.0 and 45.0 <= width <= 90.0):
        raise ValueError(f"pitch {length} x {width} m outside lawful range "
                         "[90, 120] x [45, 90]")
    L, W = float(length), float(width)
    cy = W / 2
    prims = [
        Primitive("touchline", np.array([[0.0, 0.0], [L, 0.0]])),
        Primitive("touchline", np.array([[0.0, W], [L, W]])),
        Primitive("goal_line", np.array([[0.0, 0.0], [0.0, W]])),
        Primitive("goal_line", np.array([[L, 0.0], [L, W]])),
        Primitive("halfway_line", np.array([[L / 2, 0.0], [L / 2, W]])),
        Primitive("center_circle", _arc(L / 2, cy, CENTER_CIRCLE_RADIUS, 0.0, 360.0)),
        Primitive("center_mark", np.array([[L / 2, cy]])),
    ]
    half_pa, half_ga = PENALTY_AREA_WIDTH / 2, GOAL_AREA_WIDTH / 2
    arc_half = np.degrees(np.arccos((PENALTY_AREA_DEPTH - PENALTY_MARK_DIST) / CENTER_CIRCLE_RADIUS))
    left = [
        Primitive("penalty_area", _rect(0.0, cy - half_pa, PENALTY_AREA_DEPTH, cy + half_pa)[:4]),
        Primitive("goal_area", _rect(0.0, cy - half_ga, GOAL_AREA_DEPTH, cy + half_ga)[:4]),
        Primitive("penalty_mark", np.array([[PENALTY_MARK_DIST, cy]])),
        Primitive("penalty_arc", _arc(PENALTY_MARK_DIST, cy, CENTER_CIRCLE_RADIUS, -arc_half, arc_half)),
    ]
    for p in left:
        prims.append(p)
        prims.append(Primitive(p.kind, _mirror_x(p.points, L)))
    return FieldTemplate(L, W, tuple(prims))


# -- rasterization ------------------------------------------------------------

def _clip_depth(A, B, H):
    """Clip field segments to the half-plane of positive projective depth."""
    wa = A @ H[2, :2] + H[2, 2]
    wb = B @ H[2, :2] + H[2, 2]
    keep = (wa > DEPTH_CLIP) | (wb > DEPTH_CLIP)
    A, B, wa, wb = A[keep], B[keep], wa[keep], wb[keep]
    cut_a, cut_b = wa <= DEPTH_CLIP, wb <= DEPTH_CLIP
    denom = np.where(cut_a | cut_b, wb - wa, 1.0)
    t = np.where(cut_a | cut_b, (DEPTH_CLIP - wa) / denom, 0.0)
    P = A + t[:, None] * (B - A)
    return np.where(cut_a[:, None], P, A), np.where(cut_b[:, None], P, B)


def _project(H, P):
    hom = P @ H[:, :2].T + H[:, 2]
    return hom[:, :2] / hom[:, 2:3]


def clip_segments_to_rect(P0, P1, xmin, ymin, xmax, ymax):
    """Vectorized Liang-Barsky clipping. Returns clipped endpoints of surviving segments."""
    d = P1 - P0
    t0 = np.zeros(len(P0))
    t1 = np.ones(len(P0))
    alive = np.ones(len(P0), dtype=bool)
    for p, q in ((-d[:, 0], P0[:, 0] - xmin), (d[:, 0], xmax - P0[:, 0]),
                 (-d[:, 1], P0[:, 1] - ymin), (d[:, 1], ymax - P0[:, 1])):
        zero = p == 0
        alive &= ~(zero & (q < 0))
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(zero, 0.0, q / np.where(zero, 1.0, p))
        t0 = np.where(~zero & (p < 0), np.maximum(t0, t), t0)
        t1 = np.where(~zero & (p > 0), np.minimum(t1, t), t1)
    alive &= t0 <= t1
    return P0[alive] + t0[alive, None] * d[alive], P0[alive] + t1[alive, None] * d[alive]


def stroke_radius(line_width):
    return max(line_width / 2.0, 1.0)


def rasterize_segments(P0, P1, size, line_width):
    """Light every pixel whose centre lies within the stroke radius of a segment.

    Candidate pixels come from samples spaced <= 1 px along each segment; the
    test itself is the exact point-to-segment distance. The stroke radius is at
    least one pixel so the pixel nearest to any point on a segment is lit.
    """
    w, h = size
    img = np.zeros((h, w), dtype=np.uint8)
    r = stroke_radius(line_width)
    P0, P1 = clip_segments_to_rect(P0, P1, -r - 1, -r - 1, w + r, h + r)
    if len(P0) == 0:
        return img
    d = P1 - P0
    seg_len2 = (d ** 2).sum(axis=1)
    n = np.ceil(np.sqrt(seg_len2)).astype(int) + 1
    idx = np.repeat(np.arange(len(P0)), n)
    start = np.cumsum(n) - n
    t = (np.arange(n.sum()) - np.repeat(start, n)) / np.maximum(np.repeat(n - 1, n), 1)
    pts = P0[idx] + t[:, None] * d[idx]

    # samples are <= 1 px apart, so every pixel within r of the segment lies
    # within r + 0.5 of some sample
    k = int(np.ceil(r + 0.5))
    off = np.arange(1 - k, k + 1)
    ox, oy = np.meshgrid(off, off)
    base = np.floor(pts).astype(np.int64)
    cx = base[:, 0:1] + ox.ravel()[None, :]
    cy = base[:, 1:2] + oy.ravel()[None, :]
    # exact distance from each candidate pixel centre to its segment
    a, dd, l2 = P0[idx], d[idx], seg_len2[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = ((cx - a[:, 0:1]) * dd[:, 0:1] + (cy - a[:, 1:2]) * dd[:, 1:2]) / l2[:, None]
    s = np.clip(np.nan_to_num(s, nan=0.0), 0.0, 1.0)
    ex = cx - (a[:, 0:1] + s * dd[:, 0:1])
    ey = cy - (a[:, 1:2] + s * dd[:, 1:2])
    m = (ex * ex + ey * ey <= r * r + 1e-9) & (cx >= 0) & (cx < w) & (cy >= 0) & (cy < h)
    img[cy[m], cx[m]] = 1
    return img


def render_edge_image(template, H, size=(1280, 720), line_width=2.0):
    """Binary edge image of the field markings seen through field->image ``H``.

    Portions of the markings behind the camera are clipped before projection.
    """
    H = np.asarray(H, dtype=np.float64)
    if size[0] <= 0 or size[1] <= 0:
        raise ValueError("image size must be positive")
    if is_singular(H):
        raise SingularHomographyError("cannot render through a singular homography")
    H = orient(H / np.abs(H).max(), size)
    A, B = template.segments
    A, B = _clip_depth(A, B, H)
    if len(A) == 0:
        return np.zeros((size[1], size[0]), dtype=np.uint8)
    return rasterize_segments(_project(H, A), _project(H, B), size, line_width)


@lru_cache(maxsize=32)
def _area_weights(n_in, n_out):
    edges = np.linspace(0, n_in, n_out + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    j = np.arange(n_in)[None, :]
    overlap = np.clip(np.minimum(hi, j + 1) - np.maximum(lo, j), 0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def area_resize(img, out_w, out_h):
    """Exact area-averaging resize of a 2D array to ``(out_h, out_w)``."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    if h % out_h == 0 and w % out_w == 0:
        return img.reshape(out_h, h // out_h, out_w, w // out_w).mean(axis=(1, 3))
    return _area_weights(h, out_h) @ img @ _area_weights(w, out_w).T


def resize_edges(edges, size):
    """Downsample a binary edge image; a target pixel is lit if any covered source pixel is."""
    edges = np.asarray(edges)
    h, w = edges.shape
    out_w, out_h = size
    if h % out_h == 0 and w % out_w == 0:
        fy, fx = h // out_h, w // out_w
        rows = edges.astype(np.uint8).reshape(out_h, fy, w)
        r = rows[:, 0].copy()
        for k in range(1, fy):
            r |= rows[:, k]
        cols = r.reshape(out_h, out_w, fx)
        out = cols[..., 0].copy()
        for k in range(1, fx):
            out |= cols[..., k]
        return (out > 0).astype(np.uint8)
    return (area_resize(edges, out_w, out_h) > 1e-12).astype(np.uint8)


def distance_transform(edges, truncation):
    """Exact Euclidean distance to the nearest lit pixel, clamped at ``truncation``."""
    if not truncation > 0:
        raise ValueError("truncation must be positive")
    edges = np.asarray(edges)
    if not edges.any():
        return np.full(edges.shape, float(truncation))
    d = ndimage.distance_transform_edt(edges == 0)
    return np.minimum(d, truncation)


# -- PGM export ---------------------------------------------------------------

def write_pgm(path, edges):
    edges = np.asarray(edges, dtype=np.uint8)
    h, w = edges.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write((edges * 255).astype(np.uint8).tobytes())


def read_pgm(path):
    """Read a binary PGM written by :func:`write_pgm`; non-zero pixels become 1."""
    with open(path, "rb") as f:
        data = f.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = map(int, tokens[1:])
    if maxval > 255:
        raise ValueError(f"{path}: 16-bit PGM not supported")
    pixels = np.frombuffer(data[pos + 1:pos + 1 + w * h], dtype=np.uint8)
    if pixels.size != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return (pixels.reshape(h, w) > 0).astype(np.uint8)
