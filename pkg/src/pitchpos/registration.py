"""Field registration: synthetic feature database, retrieval, refinement, IoU_part."""

import io
import logging
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import polygon
from .camera import REFERENCE_SIZE, pose_to_homography, poses_from_csv, poses_to_csv
from .field import area_resize, distance_transform, render_edge_image, resize_edges
from .homography import SingularHomographyError, canonicalize, is_singular, orient

log = logging.getLogger(__name__)

DB_MAGIC = b"PPFEATDB"
DB_VERSION = 1
_HEADER = struct.Struct("<8sIIIfIIIIIIf")


class InvalidFeatureError(ValueError):
    pass


@dataclass(frozen=True)
class DescriptorConfig:
    sigma: float = 4.0
    grid: tuple = (40, 23)
    input_size: tuple = (320, 180)
    render_size: tuple = REFERENCE_SIZE
    line_width: float = 2.0

    @property
    def dim(self):
        return self.grid[0] * self.grid[1]


def descriptor(edges, cfg=DescriptorConfig()):
    """Blurred, area-downsampled, L2-normalized edge raster.

    Images larger than ``cfg.input_size`` are first reduced to it. An empty
    image yields the zero vector, which :func:`retrieve_nearest` rejects.
    """
    edges = np.asarray(edges)
    if edges.ndim != 2 or edges.size == 0:
        raise ValueError("edge image must be a non-empty 2D array")
    if (edges.shape[1], edges.shape[0]) != tuple(cfg.input_size):
        edges = resize_edges(edges, cfg.input_size)
    img = ndimage.gaussian_filter(edges.astype(np.float64), cfg.sigma, mode="constant")
    v = area_resize(img, *cfg.grid).ravel()
    norm = np.linalg.norm(v)
    if norm == 0 or not edges.any():
        return np.zeros(cfg.dim)
    return v / norm


def is_valid_feature(v):
    return bool(np.any(v)) and bool(np.all(np.isfinite(v)))


@dataclass
class FeatureDB:
    descriptors: np.ndarray  # (n, d) float32, unit rows
    poses: list
    config: DescriptorConfig = field(default_factory=DescriptorConfig)
    excluded: int = 0

    def __post_init__(self):
        self.descriptors = np.asarray(self.descriptors, dtype=np.float32)
        if self.descriptors.ndim != 2 or len(self.descriptors) != len(self.poses):
            raise ValueError("descriptor rows and poses must align")

    def __len__(self):
        return len(self.poses)

    def to_bytes(self):
        c = self.config
        head = _HEADER.pack(DB_MAGIC, DB_VERSION, len(self), self.descriptors.shape[1],
                            c.sigma, c.grid[0], c.grid[1], c.input_size[0], c.input_size[1],
                            c.render_size[0], c.render_size[1], c.line_width)
        block = np.ascontiguousarray(self.descriptors, dtype="<f4").tobytes()
        return head + block + poses_to_csv(self.poses).encode("ascii")

    @classmethod
    def from_bytes(cls, data):
        if len(data) < _HEADER.size:
            raise ValueError("feature DB file truncated")
        magic, ver, n, d, sigma, gw, gh, iw, ih, rw, rh, lw = _HEADER.unpack_from(data)
        if magic != DB_MAGIC:
            raise ValueError("not a feature DB file (bad magic)")
        if ver != DB_VERSION:
            raise ValueError(f"unsupported feature DB version {ver}")
        if gw * gh != d:
            raise ValueError("descriptor grid does not match dimension")
        off = _HEADER.size
        nbytes = 4 * n * d
        if len(data) < off + nbytes:
            raise ValueError("feature DB descriptor block truncated")
        desc = np.frombuffer(data, dtype="<f4", count=n * d, offset=off).reshape(n, d)
        poses = poses_from_csv(data[off + nbytes:].decode("ascii"))
        if len(poses) != n:
            raise ValueError(f"feature DB lists {len(poses)} poses, header says {n}")
        cfg = DescriptorConfig(sigma, (gw, gh), (iw, ih), (rw, rh), lw)
        return cls(desc.astype(np.float32), poses, cfg)

    def save(self, path):
        with open(path, "wb") as f:
            f.write(self.to_bytes())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as f:
            return cls.from_bytes(f.read())


def pose_descriptor(pose, template, cfg=DescriptorConfig()):
    H = pose_to_homography(pose, cfg.render_size)
    edges = render_edge_image(template, H, cfg.render_size, cfg.line_width)
    return descriptor(edges, cfg)


def build_feature_db(poses, template, cfg=DescriptorConfig(), progress=None):
    """Render every pose and store its descriptor; poses with empty renders are skipped."""
    if len(poses) == 0:
        raise ValueError("pose list is empty")
    desc, kept, excluded = [], [], 0
    for i, pose in enumerate(poses):
        try:
            v = pose_descriptor(pose, template, cfg)
        except (SingularHomographyError, ValueError) as exc:
            log.debug("pose %d skipped: %s", i, exc)
            v = None
        if v is None or not is_valid_feature(v):
            excluded += 1
            continue
        desc.append(v.astype(np.float32))
        kept.append(pose)
        if progress is not None:
            progress(i + 1, len(poses))
    if excluded:
        log.info("feature DB: %d of %d poses excluded (empty render)", excluded, len(poses))
    d = cfg.dim
    return FeatureDB(np.array(desc, dtype=np.float32).reshape(-1, d), kept, cfg, excluded)


def retrieve_nearest(db, query, k=1):
    """Exact k-nearest neighbours by L2 distance; ties go to the lower index."""
    if len(db) == 0:
        raise ValueError("feature DB is empty")
    if not 1 <= k <= len(db):
        raise ValueError(f"k must be in [1, {len(db)}], got {k}")
    query = np.asarray(query, dtype=np.float64)
    if not is_valid_feature(query):
        raise InvalidFeatureError("query feature is empty or non-finite")
    diff = db.descriptors.astype(np.float64) - query[None, :]
    dist = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    order = np.argsort(dist, kind="stable")[:k]
    return [(db.poses[i], float(dist[i]), int(i)) for i in order]


# -- refinement ---------------------------------------------------------------

@dataclass(frozen=True)
class RefinementParams:
    max_iterations: int = 50
    convergence_threshold: float = 1e-4
    truncation: float = 30.0
    coarse_truncations: tuple = (150.0, 80.0)
    damping: float = 0.5
    max_retries: int = 5
    sample_step: float = 0.25
    min_points: int = 20
    polish_blur: float = 1.0
    # mean squared residual (px^2) at or below which H_init is already optimal;
    # a stroke rendered exactly through H leaves ~1e-4 from pixel sampling
    optimal_residual: float = 1e-3

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (self.convergence_threshold > 0 and self.truncation > 0):
            raise ValueError("thresholds must be positive")
        if any(t <= 0 for t in self.coarse_truncations):
            raise ValueError("coarse truncations must be positive")
        if not 0 < self.damping < 1:
            raise ValueError("damping must lie in (0, 1)")
        if self.polish_blur < 0 or self.optimal_residual < 0:
            raise ValueError("polish_blur and optimal_residual must be non-negative")


@dataclass
class RefinementResult:
    H: np.ndarray
    residual: float
    initial_residual: float
    iterations: int  # applied updates over all stages
    refined: bool  # False when the update diverged or could not be computed


def _bilinear(img, u, v):
    h, w = img.shape
    u = np.clip(u, 0, w - 1)
    v = np.clip(v, 0, h - 1)
    x0 = np.minimum(np.floor(u).astype(int), w - 2)
    y0 = np.minimum(np.floor(v).astype(int), h - 2)
    fx, fy = u - x0, v - y0
    return ((img[y0, x0] * (1 - fx) + img[y0, x0 + 1] * fx) * (1 - fy)
            + (img[y0 + 1, x0] * (1 - fx) + img[y0 + 1, x0 + 1] * fx) * fy)


class _DistanceImages:
    """Truncated distance images of one observed edge image and their gradients.

    The exact transform is computed once; each truncation only clamps it.
    """

    def __init__(self, observed):
        self.shape = observed.shape
        self.raw = distance_transform(observed, np.inf)
        self._cache = {}

    def get(self, truncation, blur=0.0):
        key = (truncation, blur)
        if key not in self._cache:
            d = np.minimum(self.raw, truncation)
            if blur > 0:
                d = ndimage.gaussian_filter(d, blur, mode="nearest")
            gy, gx = np.gradient(d)
            self._cache[key] = (d, gx, gy)
        return self._cache[key]


class _Objective:
    """Truncated distance of projected template points to the observed edges.

    The point set is fixed to the template points visible under the initial
    homography; points leaving the image score the truncation value.
    """

    def __init__(self, images, points, truncation, blur=0.0):
        self.dist, self.gx, self.gy = images.get(truncation, blur)
        self.h, self.w = images.shape
        self.points = points
        self.trunc = truncation

    def project(self, H):
        hom = self.points @ H[:, :2].T + H[:, 2]
        w = hom[:, 2]
        ok = w > 1e-9
        uv = np.full((len(w), 2), -1.0)
        uv[ok] = hom[ok, :2] / w[ok, None]
        inside = ok & (uv[:, 0] >= 0) & (uv[:, 0] <= self.w - 1) & (uv[:, 1] >= 0) & (uv[:, 1] <= self.h - 1)
        return uv, inside

    def residuals(self, H):
        uv, inside = self.project(H)
        r = np.full(len(uv), self.trunc)
        r[inside] = _bilinear(self.dist, uv[inside, 0], uv[inside, 1])
        return r, uv, inside

    def cost(self, H):
        r, _, _ = self.residuals(H)
        return float(np.mean(r ** 2))


def _normalizer(size):
    w, h = size
    s = w / 2.0
    return np.array([[1 / s, 0, -w / (2 * s)], [0, 1 / s, -h / (2 * s)], [0, 0, 1.0]])


def _increment(delta):
    d = delta
    return np.array([[1 + d[0], d[1], d[2]], [d[3], 1 + d[4], d[5]], [d[6], d[7], 1.0]])


def _refine_stage(H0, images, points, truncation, params, blur=0.0):
    """One Gauss-Newton run at a fixed truncation.

    Returns ``(H, cost, accepted, converged)``: ``accepted`` counts applied
    updates, ``converged`` is set when the last proposed update was below
    ``params.convergence_threshold`` or the cost reached zero.
    """
    size = (images.shape[1], images.shape[0])
    H = orient(H0, size)
    obj = _Objective(images, points, truncation, blur)
    _, visible = obj.project(H)
    if visible.sum() < params.min_points:
        return H0, None, 0, False
    obj.points = obj.points[visible]

    N = _normalizer(size)
    Ninv = np.linalg.inv(N)
    s = size[0] / 2.0
    r, uv, inside = obj.residuals(H)
    cost = float(np.mean(r ** 2))
    accepted = 0
    converged = cost == 0.0
    for _ in range(params.max_iterations):
        if converged:
            break
        u, v = uv[inside, 0], uv[inside, 1]
        gx = _bilinear(obj.gx, u, v)
        gy = _bilinear(obj.gy, u, v)
        x, y = (u - size[0] / 2) / s, (v - size[1] / 2) / s
        zero = np.zeros_like(x)
        one = np.ones_like(x)
        du = s * np.stack([x, y, one, zero, zero, zero, -x * x, -x * y], axis=1)
        dv = s * np.stack([zero, zero, zero, x, y, one, -x * y, -y * y], axis=1)
        J = gx[:, None] * du + gy[:, None] * dv
        JTJ = J.T @ J
        g = J.T @ r[inside]
        if np.linalg.matrix_rank(JTJ, tol=1e-10 * max(np.abs(JTJ).max(), 1e-300)) < 8:
            break
        delta = -np.linalg.solve(JTJ, g)
        if np.linalg.norm(delta) < params.convergence_threshold:
            converged = True
            break
        scale = 1.0
        improved = False
        for _ in range(params.max_retries + 1):
            H_try = Ninv @ _increment(scale * delta) @ N @ H
            r_try, uv_try, in_try = obj.residuals(H_try)
            c_try = float(np.mean(r_try ** 2))
            if c_try < cost:
                improved = True
                break
            scale *= params.damping
        if not improved:
            break
        H, r, uv, inside, cost = H_try / np.abs(H_try).max(), r_try, uv_try, in_try, c_try
        accepted += 1
        converged = cost == 0.0 or np.linalg.norm(scale * delta) < params.convergence_threshold
    return canonicalize(H), cost, accepted, converged


def _stage_cost(H, images, points, truncation, min_points):
    size = (images.shape[1], images.shape[0])
    obj = _Objective(images, points, truncation)
    _, visible = obj.project(orient(H, size))
    if visible.sum() < min_points:
        return None
    obj.points = obj.points[visible]
    return obj.cost(orient(H, size))


def refine_homography(H_init, observed, template, params=RefinementParams(), _images=None):
    """Gauss-Newton alignment of the template to an observed edge image.

    Minimizes the mean squared truncated distance-image value at the projected
    template sample points. The 8-parameter update is composed on the image
    side in normalized pixel coordinates, ``H <- N^-1 (I + M(delta)) N H``,
    which keeps the normal equations well conditioned. A step that does not
    lower the cost is shrunk by ``params.damping`` up to ``params.max_retries``
    times.

    The optimization runs once per truncation in ``params.coarse_truncations``
    and then at ``params.truncation``: large truncations give a smooth cost with
    a wide basin, the final one a sharp optimum. Residuals are reported at the
    final truncation, and the result never costs more there than ``H_init``.

    Around a thin stroke the truncated distance is exactly zero over a band
    about one pixel wide, so the final stage stops anywhere inside it. With
    ``params.polish_blur > 0`` one more run on a Gaussian-smoothed distance
    image pulls the points to the stroke centres; it is kept only if the
    unsmoothed residual does not rise.

    A start whose residual is at most ``params.optimal_residual`` is returned
    unchanged. Otherwise the result is flagged unrefined, with ``H_init``, when
    no stage could run or the final residual is not lower and the last stage
    did not converge.
    """
    observed = np.asarray(observed)
    H0 = canonicalize(H_init)
    if is_singular(H0):
        raise SingularHomographyError("initial homography is singular")
    worst = float(params.truncation ** 2)
    unrefined = RefinementResult(H0, worst, worst, 0, False)
    if not observed.any():
        return unrefined
    images = _images if _images is not None else _DistanceImages(observed)
    points = template.sample_points(params.sample_step)
    initial = _stage_cost(H0, images, points, params.truncation, params.min_points)
    if initial is None:
        return unrefined
    if initial <= params.optimal_residual:
        return RefinementResult(H0, initial, initial, 0, True)

    H = H0
    accepted = 0
    converged = False
    for trunc in tuple(params.coarse_truncations) + (params.truncation,):
        H, cost, acc, converged = _refine_stage(H, images, points, trunc, params)
        accepted += acc
        if cost is None:
            return RefinementResult(H0, initial, initial, accepted, False)
    final = _stage_cost(H, images, points, params.truncation, params.min_points)
    if params.polish_blur > 0 and final is not None:
        Hp, c, acc, _ = _refine_stage(H, images, points, params.truncation, params, params.polish_blur)
        fp = _stage_cost(Hp, images, points, params.truncation, params.min_points) if acc else None
        if fp is not None and fp <= final:
            H, final = Hp, fp
            accepted += acc
    if final is None or final > initial or (final == initial and not converged):
        return RefinementResult(H0, initial, initial, accepted, False)
    if accepted == 0 or final == initial:
        # nothing improved but the start is a stationary point: already optimal
        return RefinementResult(H0, initial, initial, 0, True)
    return RefinementResult(H, final, initial, accepted, True)


# -- IoU_part -----------------------------------------------------------------

def view_polygon(H, image_size, field_rect):
    """Field-plane footprint of the image rectangle, clipped to the convex ``field_rect``.

    For points in front of the camera each edge of ``field_rect`` is a
    half-plane in image coordinates, so all clipping happens in the image and
    only the final vertices are mapped to the field. Mapping the image corners
    first would create vertices near the horizon, arbitrarily far away, and
    clipping against them loses precision.
    """
    w, h = image_size
    Hinv = np.linalg.inv(orient(canonicalize(H), image_size))
    Hinv = Hinv / np.abs(Hinv).max()
    a, b, c = Hinv[2]
    eps = 1e-9 * (abs(a) * w + abs(b) * h + abs(c))
    poly = polygon.clip_halfplane(polygon.rectangle(0, 0, w, h), a, b, c - eps)
    if polygon.signed_area(field_rect) < 0:
        field_rect = field_rect[::-1]
    n = len(field_rect)
    for i in range(n):
        if len(poly) < 3:
            break
        p, q = field_rect[i], field_rect[(i + 1) % n]
        # inside is left of the edge: na*x + nb*y + nc >= 0, times the positive depth
        na, nb = -(q[1] - p[1]), q[0] - p[0]
        nc = -(na * p[0] + nb * p[1])
        poly = polygon.clip_halfplane(poly, *(na * Hinv[0] + nb * Hinv[1] + nc * Hinv[2]))
    if len(poly) < 3:
        return np.zeros((0, 2))
    hom = np.c_[poly, np.ones(len(poly))] @ Hinv.T
    return hom[:, :2] / hom[:, 2:3]


def iou_part(H_pred, H_gt, image_size, template):
    """IoU of the field regions seen through two field->image homographies."""
    for H in (H_pred, H_gt):
        if is_singular(H):
            raise SingularHomographyError("iou_part needs invertible homographies")
    field_rect = polygon.rectangle(0, 0, template.length, template.width)
    A = view_polygon(H_pred, image_size, field_rect)
    B = view_polygon(H_gt, image_size, field_rect)
    area_a, area_b = polygon.area(A), polygon.area(B)
    if area_a == 0 and area_b == 0:
        warnings.warn("iou_part: both view polygons are degenerate", RuntimeWarning)
        return 0.0
    if area_a > 0 and A.shape == B.shape and np.array_equal(A, B):
        return 1.0  # clipping a polygon against itself can lose the last ulp
    inter = polygon.area(polygon.clip_convex(A, B)) if area_a > 0 and area_b > 0 else 0.0
    union = area_a + area_b - inter
    return float(np.clip(inter / union, 0.0, 1.0)) if union > 0 else 0.0


# -- full per-frame registration -------------------------------------------------

@dataclass
class RegistrationResult:
    H: np.ndarray
    pose: object
    retrieval_distance: float
    residual: float
    refined: bool


def register_frame(observed, db, template, params=RefinementParams(), k=1, refine=True):
    """Retrieve the ``k`` nearest poses, refine each and keep the lowest residual."""
    observed = np.asarray(observed)
    query = descriptor(observed, db.config)
    hits = retrieve_nearest(db, query, k)
    size = (observed.shape[1], observed.shape[0])
    images = _DistanceImages(observed) if refine else None
    best = None
    for pose, dist, _ in hits:
        H0 = pose_to_homography(pose, size)
        if refine:
            res = refine_homography(H0, observed, template, params, _images=images)
            cand = RegistrationResult(res.H, pose, dist, res.residual, res.refined)
        else:
            cand = RegistrationResult(H0, pose, dist, float("nan"), False)
        if best is None or (refine and cand.residual < best.residual):
            best = cand
    return best
