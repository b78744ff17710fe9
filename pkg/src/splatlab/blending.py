"""Per-pixel blending kernels.

Four modes share this module:

  scalar-center      alpha sampled at the pixel center (the classic scheme)
  scalar-integrated  alpha integrated over the unit pixel (erf closed form)
  gaussian-blending  transmittance tracked as a moment-matched uniform window
  supersample(K)     K x K scalar-center sub-blends averaged; the oracle

The window model: each pixel carries a transmittance distribution approximated
by an axis-aligned uniform box (center x, sides l, value t). Blending a splat
computes the zeroth/first/second moments of t * (1 - alpha(x)) over the box in
the splat's principal-axis frame via closed-form Gaussian integrals, then
moment-matches a new box. The integrated weight of the splat is

    w = t * o * I0_{sigma1}(u1, u2) * I0_{sigma2}(v1, v2)

and the new box mass equals the old mass minus w by construction.

Scalar one-splat-at-a-time operations (init_window, to_splat_frame,
integrated_weight, compute_moments, update_window, scalar_alpha_*) are the
readable reference; blend_points_* are the vectorized equivalents the
rasterizer runs. blend_pixel wraps them for a single pixel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from splatlab.scene import ProjectedCloud, ProjectedSplat
from splatlab.splatmath import Eigen2, eigen2x2, eigen2x2_batch, gaussian_moments_012

EPSILON_DEFAULT = 1e-4  # classic termination threshold on remaining transmittance
ALPHA_MAX = 0.99  # scalar-mode clamp
ALPHA_SKIP = 1.0 / 255.0  # scalar-mode skip threshold
MIN_SIDE = 1e-6  # pixels; window sides never collapse below this
GUARD_LO = 0.1  # window side / sigma below this -> scalar fallback
GUARD_HI = 1e6  # window side / sigma above this -> scalar fallback
SUPPORT_SIGMA = 3.0  # rasterizer truncation: points beyond this many sigmas ignore the splat

MODE_ALIASES = {
    "center": "center",
    "scalar-center": "center",
    "integrated": "integrated",
    "scalar-integrated": "integrated",
    "gb": "gb",
    "gaussian-blending": "gb",
    "ss": "ss",
    "supersample": "ss",
}


def canonical_mode(mode: str) -> str:
    try:
        return MODE_ALIASES[mode]
    except KeyError:
        raise ValueError(f"unknown blend mode {mode!r}; use one of {sorted(set(MODE_ALIASES))}")


@dataclass
class TransmittanceWindow:
    """Uniform-box model of a pixel's remaining transmittance."""

    center: np.ndarray  # (2,) pixels
    sides: np.ndarray  # (2,) positive, pixels
    value: float  # [0, 1]

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(2)
        self.sides = np.asarray(self.sides, dtype=float).reshape(2)
        if np.any(self.sides <= 0.0):
            raise ValueError("window sides must be > 0")
        if not (0.0 <= self.value <= 1.0):
            raise ValueError("window value must be in [0, 1]")

    @property
    def mass(self) -> float:
        """Integrated transmittance over the plane."""
        return self.value * (self.sides[0] * self.sides[1])


def init_window(pixel_center) -> TransmittanceWindow:
    """Fresh full-transmittance window over one pixel's unit square."""
    return TransmittanceWindow(
        center=np.asarray(pixel_center, dtype=float),
        sides=np.array([1.0, 1.0]),
        value=1.0,
    )


@dataclass(frozen=True)
class SplatFrame:
    """Window geometry re-expressed in a splat's principal-axis coordinates."""

    u: float
    v: float
    u1: float
    u2: float
    v1: float
    v2: float
    sigma1: float
    sigma2: float


def paired_axes(eig: Eigen2):
    """Axis pairing that keeps the implied window rotation within 45 degrees.

    Returns (a1, s1, a2, s2) where a1 is the eigenvector closest to the screen
    x axis (paired with the window's first side) and s1 its sigma. Ties keep
    the major axis on a1.
    """
    if abs(eig.e1[0]) >= abs(eig.e1[1]):
        return eig.e1, eig.sigma1, eig.e2, eig.sigma2
    return eig.e2, eig.sigma2, eig.e1, eig.sigma1


def to_splat_frame(win: TransmittanceWindow, splat: ProjectedSplat, eig: Eigen2) -> SplatFrame:
    a1, s1, a2, s2 = paired_axes(eig)
    d = win.center - splat.mu2d
    # elementwise (not @) to match the vectorized kernels bit for bit
    u = float(d[0] * a1[0] + d[1] * a1[1])
    v = float(d[0] * a2[0] + d[1] * a2[1])
    hu = 0.5 * win.sides[0]
    hv = 0.5 * win.sides[1]
    return SplatFrame(
        u=u, v=v, u1=u - hu, u2=u + hu, v1=v - hv, v2=v + hv, sigma1=s1, sigma2=s2
    )


def integrated_weight(frame: SplatFrame, t: float, o: float) -> float:
    """Integral of t * alpha over the window box (separable erf closed form)."""
    i0u, _, _ = gaussian_moments_012(frame.sigma1, frame.u1, frame.u2)
    i0v, _, _ = gaussian_moments_012(frame.sigma2, frame.v1, frame.v2)
    return t * o * float(i0u) * float(i0v)


@dataclass(frozen=True)
class GaussianMoments:
    """Moments of t * (1 - alpha) over the window, in the splat frame."""

    m0: float  # remaining mass
    m1: np.ndarray  # (2,) first moment per axis
    m2: np.ndarray  # (2,) second moment per axis


def compute_moments(frame: SplatFrame, t: float, o: float) -> GaussianMoments:
    i0u, i1u, i2u = gaussian_moments_012(frame.sigma1, frame.u1, frame.u2)
    i0v, i1v, i2v = gaussian_moments_012(frame.sigma2, frame.v1, frame.v2)
    lu = frame.u2 - frame.u1
    lv = frame.v2 - frame.v1
    area = lu * lv
    to = t * o
    w = to * i0u * i0v
    m0 = max(t * area - w, 0.0)
    m1 = np.array([t * area * frame.u - to * i1u * i0v, t * area * frame.v - to * i0u * i1v])
    m2 = np.array(
        [
            t * area * (frame.u * frame.u + lu * lu / 12.0) - to * i2u * i0v,
            t * area * (frame.v * frame.v + lv * lv / 12.0) - to * i0u * i2v,
        ]
    )
    return GaussianMoments(m0=float(m0), m1=m1, m2=m2)


def scalar_alpha_center(pixel_center, splat: ProjectedSplat) -> float:
    """Alpha sampled at a point: o * exp(-d^2/2), Mahalanobis d, clamped at 0.99."""
    cov = splat.cov2d
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[0, 1]
    if det <= 0.0:
        raise ValueError("cov2d must be positive definite")
    d = np.asarray(pixel_center, dtype=float) - splat.mu2d
    q = (cov[1, 1] * d[0] * d[0] - 2.0 * cov[0, 1] * d[0] * d[1] + cov[0, 0] * d[1] * d[1]) / det
    return min(splat.opacity * float(np.exp(-0.5 * q)), ALPHA_MAX)


def scalar_alpha_integrated(pixel_center, splat: ProjectedSplat, eig: Eigen2) -> float:
    """Alpha integrated over the unit pixel square centered at pixel_center.

    Evaluated in the splat frame with the same box reinterpretation the window
    model uses; equals the Gaussian-blending weight on a fresh window.
    """
    frame = to_splat_frame(init_window(pixel_center), splat, eig)
    return integrated_weight(frame, 1.0, splat.opacity)


def _fallback_blend(win: TransmittanceWindow, frame: SplatFrame, o: float):
    # Stability guard tripped: freeze geometry, scalar-blend at the window
    # center with the raw (unclamped) alpha.
    alpha = o * float(
        np.exp(-0.5 * ((frame.u / frame.sigma1) ** 2 + (frame.v / frame.sigma2) ** 2))
    )
    area = win.sides[0] * win.sides[1]
    weight = (win.value * alpha) * area
    nxt = TransmittanceWindow(
        center=win.center.copy(), sides=win.sides.copy(), value=win.value * (1.0 - alpha)
    )
    return weight, nxt


def update_window(win: TransmittanceWindow, splat: ProjectedSplat, eig: Eigen2):
    """Blend one splat into the window; returns (weight, next window).

    Mass is conserved: next.mass == win.mass - weight up to roundoff. When a
    window side falls outside [0.1, 1e6] times the paired sigma, geometry is
    frozen and a scalar blend at the window center is applied instead.
    """
    frame = to_splat_frame(win, splat, eig)
    r1 = win.sides[0] / frame.sigma1
    r2 = win.sides[1] / frame.sigma2
    if not (GUARD_LO <= r1 <= GUARD_HI and GUARD_LO <= r2 <= GUARD_HI):
        return _fallback_blend(win, frame, splat.opacity)

    mom = compute_moments(frame, win.value, splat.opacity)
    weight = integrated_weight(frame, win.value, splat.opacity)
    if weight == 0.0:
        # No measurable overlap; moment-matching would only round-trip the box.
        return 0.0, win

    if mom.m0 <= 0.0:
        # Splat consumed the entire window mass.
        nxt = TransmittanceWindow(center=win.center.copy(), sides=win.sides.copy(), value=0.0)
        return win.mass, nxt

    mean = mom.m1 / mom.m0
    var = np.maximum(mom.m2 / mom.m0 - mean * mean, 0.0)
    sides = np.maximum(np.sqrt(12.0 * var), MIN_SIDE)
    value = mom.m0 / (sides[0] * sides[1])
    if value > 1.0:
        # Box taller than full transmittance cannot be represented; flatten to
        # value 1 and widen mass-neutrally.
        sides = sides * np.sqrt(value)
        value = 1.0

    a1, _, a2, _ = paired_axes(eig)
    center = splat.mu2d + a1 * mean[0] + a2 * mean[1]
    return weight, TransmittanceWindow(center=center, sides=sides, value=float(value))


# ---------------------------------------------------------------------------
# Vectorized kernels (shared by blend_pixel and the tile rasterizer)


@dataclass
class PreparedSplats:
    """Depth-sorted splats with precomputed eigen frames and support boxes.

    a1/a2 are the paired axes from paired_axes (a1 within 45 degrees of screen
    x), s1/s2 their sigmas. aabb rows are (x1, y1, x2, y2) at 3 sigma. inv_*
    entries are the inverse-covariance coefficients for center-alpha evaluation.
    """

    mu: np.ndarray  # (m, 2)
    color: np.ndarray  # (m, 3)
    opacity: np.ndarray  # (m,)
    depth: np.ndarray  # (m,)
    a1: np.ndarray  # (m, 2)
    a2: np.ndarray  # (m, 2)
    s1: np.ndarray  # (m,)
    s2: np.ndarray  # (m,)
    aabb: np.ndarray  # (m, 4)
    inv_xx: np.ndarray  # (m,)
    inv_xy: np.ndarray
    inv_yy: np.ndarray
    n_culled_degenerate: int = 0

    def __len__(self) -> int:
        return self.mu.shape[0]

    def in_support(self, points: np.ndarray, j: int) -> np.ndarray:
        x1, y1, x2, y2 = self.aabb[j]
        return (
            (points[:, 0] >= x1)
            & (points[:, 0] <= x2)
            & (points[:, 1] >= y1)
            & (points[:, 1] <= y2)
        )

    def take(self, idx) -> "PreparedSplats":
        """Subset by index, keeping order (callers pass sorted indices)."""
        idx = np.asarray(idx, dtype=np.intp)
        return PreparedSplats(
            mu=self.mu[idx], color=self.color[idx], opacity=self.opacity[idx],
            depth=self.depth[idx], a1=self.a1[idx], a2=self.a2[idx],
            s1=self.s1[idx], s2=self.s2[idx], aabb=self.aabb[idx],
            inv_xx=self.inv_xx[idx], inv_xy=self.inv_xy[idx],
            inv_yy=self.inv_yy[idx],
            n_culled_degenerate=self.n_culled_degenerate,
        )


def prepare_splats(projected, support_sigma: float | None = None) -> PreparedSplats:
    """Eigen-decompose, cull degenerates, and depth-sort (stable) for blending.

    Accepts a ProjectedCloud or a sequence of ProjectedSplat. support_sigma
    sets the per-splat support boxes the kernels test evaluation points
    against; None (the default for direct pixel blending) leaves the Gaussians
    untruncated, while the rasterizer prepares at SUPPORT_SIGMA.
    """
    if isinstance(projected, ProjectedCloud):
        mu2d, cxx, cxy, cyy = projected.mu2d, projected.cxx, projected.cxy, projected.cyy
        depth, opacity, color = projected.depth, projected.opacity, projected.color
    else:
        splats = list(projected)
        if splats:
            mu2d = np.stack([s.mu2d for s in splats])
            cov = np.stack([s.cov2d for s in splats])
            cxx, cxy, cyy = cov[:, 0, 0], cov[:, 0, 1], cov[:, 1, 1]
            depth = np.array([s.depth for s in splats])
            opacity = np.array([s.opacity for s in splats])
            color = np.stack([s.color for s in splats])
        else:
            mu2d = np.zeros((0, 2))
            cxx = cxy = cyy = depth = opacity = np.zeros(0)
            color = np.zeros((0, 3))

    lam1, lam2, e1x, e1y = eigen2x2_batch(cxx, cxy, cyy)
    ok = lam2 > 0.0
    n_bad = int(lam2.size - np.count_nonzero(ok))
    if n_bad:
        keep = np.flatnonzero(ok)
        mu2d, depth, opacity, color = mu2d[keep], depth[keep], opacity[keep], color[keep]
        lam1, lam2, e1x, e1y = lam1[keep], lam2[keep], e1x[keep], e1y[keep]
        cxx, cxy, cyy = cxx[keep], cxy[keep], cyy[keep]

    # Stable sort keeps input order on depth ties.
    order = np.argsort(depth, kind="stable")
    mu2d, depth, opacity, color = mu2d[order], depth[order], opacity[order], color[order]
    lam1, lam2, e1x, e1y = lam1[order], lam2[order], e1x[order], e1y[order]
    cxx, cxy, cyy = cxx[order], cxy[order], cyy[order]

    sig1, sig2 = np.sqrt(lam1), np.sqrt(lam2)
    e1 = np.stack([e1x, e1y], axis=1)
    e2 = np.stack([-e1y, e1x], axis=1)
    # Canonical perpendicular sign, matching eigen2x2.
    lead = np.where(np.abs(e2[:, 0]) >= np.abs(e2[:, 1]), e2[:, 0], e2[:, 1])
    e2 = np.where((lead < 0.0)[:, None], -e2, e2)

    # 45-degree pairing per splat (window-independent).
    swap = np.abs(e1[:, 0]) < np.abs(e1[:, 1])
    a1 = np.where(swap[:, None], e2, e1)
    a2 = np.where(swap[:, None], e1, e2)
    s1 = np.where(swap, sig2, sig1)
    s2 = np.where(swap, sig1, sig2)

    if support_sigma is None:
        # Untruncated: pixel-level blending sees the full Gaussians. Finite
        # cutoffs are the rasterizer's concern.
        aabb = np.tile([-np.inf, -np.inf, np.inf, np.inf], (mu2d.shape[0], 1))
    else:
        ext = support_sigma * (sig1[:, None] * np.abs(e1) + sig2[:, None] * np.abs(e2))
        aabb = np.concatenate([mu2d - ext, mu2d + ext], axis=1)  # x1, y1, x2, y2

    det = cxx * cyy - cxy * cxy
    return PreparedSplats(
        mu=mu2d,
        color=color,
        opacity=opacity,
        depth=depth,
        a1=a1,
        a2=a2,
        s1=s1,
        s2=s2,
        aabb=aabb,
        inv_xx=cyy / det,
        inv_xy=cxy / det,
        inv_yy=cxx / det,
        n_culled_degenerate=n_bad,
    )


def _batch_miss(prep: PreparedSplats, points: np.ndarray) -> np.ndarray:
    """Per-splat flag: support box misses every point in the batch.

    Skipping such splats is an exact no-op for all kernels, so the output is
    unchanged for any batch split.
    """
    if points.shape[0] == 0 or len(prep) == 0:
        return np.ones(len(prep), dtype=bool)
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    ab = prep.aabb
    return (ab[:, 0] > hi[0]) | (ab[:, 1] > hi[1]) | (ab[:, 2] < lo[0]) | (ab[:, 3] < lo[1])


def blend_points_center(prep: PreparedSplats, points, background, epsilon):
    """Scalar-center blending at each point. Returns (rgb (p,3), residual (p,))."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    p = points.shape[0]
    bg = np.asarray(background, dtype=float).reshape(3)
    rgb = np.zeros((p, 3))
    t = np.ones(p)
    done = np.zeros(p, dtype=bool)
    skip = _batch_miss(prep, points)

    for j in range(len(prep)):
        if done.all():
            break
        if skip[j]:
            continue
        act = np.flatnonzero(prep.in_support(points, j) & ~done)
        if act.size == 0:
            continue
        d = points[act] - prep.mu[j]
        q = (
            prep.inv_xx[j] * d[:, 0] * d[:, 0]
            - 2.0 * prep.inv_xy[j] * d[:, 0] * d[:, 1]
            + prep.inv_yy[j] * d[:, 1] * d[:, 1]
        )
        alpha = np.minimum(prep.opacity[j] * np.exp(-0.5 * q), ALPHA_MAX)
        use = alpha >= ALPHA_SKIP
        if not use.any():
            continue
        tn = t[act] * (1.0 - alpha)
        # Classic convention: a splat that would push T below epsilon is not
        # composited; the point terminates at its previous T.
        kill = use & (tn < epsilon)
        comp = use & ~kill
        ci = act[comp]
        rgb[ci] += (alpha[comp] * t[ci])[:, None] * prep.color[j]
        t[ci] = tn[comp]
        done[act[kill]] = True

    rgb += t[:, None] * bg
    return rgb, t


def blend_points_integrated(prep: PreparedSplats, points, background, epsilon):
    """Scalar blending with pixel-integrated alpha (same clamps as center mode)."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    p = points.shape[0]
    bg = np.asarray(background, dtype=float).reshape(3)
    rgb = np.zeros((p, 3))
    t = np.ones(p)
    done = np.zeros(p, dtype=bool)
    skip = _batch_miss(prep, points)

    for j in range(len(prep)):
        if done.all():
            break
        if skip[j]:
            continue
        act = np.flatnonzero(prep.in_support(points, j) & ~done)
        if act.size == 0:
            continue
        d = points[act] - prep.mu[j]
        # elementwise (not @) so results do not depend on the batch size
        u = d[:, 0] * prep.a1[j, 0] + d[:, 1] * prep.a1[j, 1]
        v = d[:, 0] * prep.a2[j, 0] + d[:, 1] * prep.a2[j, 1]
        i0u, _, _ = gaussian_moments_012(prep.s1[j], u - 0.5, u + 0.5)
        i0v, _, _ = gaussian_moments_012(prep.s2[j], v - 0.5, v + 0.5)
        alpha = np.minimum(prep.opacity[j] * i0u * i0v, ALPHA_MAX)
        use = alpha >= ALPHA_SKIP
        if not use.any():
            continue
        tn = t[act] * (1.0 - alpha)
        kill = use & (tn < epsilon)
        comp = use & ~kill
        ci = act[comp]
        rgb[ci] += (alpha[comp] * t[ci])[:, None] * prep.color[j]
        t[ci] = tn[comp]
        done[act[kill]] = True

    rgb += t[:, None] * bg
    return rgb, t


def blend_points_gb(prep: PreparedSplats, points, background, epsilon):
    """Gaussian blending: per-point transmittance windows, moment-matched updates.

    Returns (rgb (p,3), residual mass (p,)).
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    p = points.shape[0]
    bg = np.asarray(background, dtype=float).reshape(3)
    rgb = np.zeros((p, 3))
    wc = points.copy()  # window centers
    ws = np.ones((p, 2))  # window sides
    wv = np.ones(p)  # window values
    done = np.zeros(p, dtype=bool)
    skip = _batch_miss(prep, points)

    for j in range(len(prep)):
        if done.all():
            break
        if skip[j]:
            continue
        # Support is tested at the fixed pixel grid point, not the drifting
        # window center, so results are independent of tiling.
        act = np.flatnonzero(prep.in_support(points, j) & ~done)
        if act.size == 0:
            continue
        o = prep.opacity[j]
        s1, s2 = prep.s1[j], prep.s2[j]
        a1, a2 = prep.a1[j], prep.a2[j]
        d = wc[act] - prep.mu[j]
        # elementwise (not @) so results do not depend on the batch size
        u = d[:, 0] * a1[0] + d[:, 1] * a1[1]
        v = d[:, 0] * a2[0] + d[:, 1] * a2[1]
        l1 = ws[act, 0]
        l2 = ws[act, 1]
        t = wv[act]
        area = l1 * l2
        mass = t * area

        r1 = l1 / s1
        r2 = l2 / s2
        ok = (r1 >= GUARD_LO) & (r1 <= GUARD_HI) & (r2 >= GUARD_LO) & (r2 <= GUARD_HI)

        hu = 0.5 * l1
        hv = 0.5 * l2
        i0u, i1u, i2u = gaussian_moments_012(s1, u - hu, u + hu)
        i0v, i1v, i2v = gaussian_moments_012(s2, v - hv, v + hv)
        to = t * o
        w_int = to * i0u * i0v
        m0 = np.maximum(t * area - w_int, 0.0)

        # Fallback (guard tripped): raw scalar alpha at the window center.
        alpha_fb = o * np.exp(-0.5 * ((u / s1) ** 2 + (v / s2) ** 2))
        w_fb = (t * alpha_fb) * area
        mass_fb = (t * (1.0 - alpha_fb)) * area

        weight = np.where(ok, w_int, w_fb)
        mass_next = np.where(ok, m0, mass_fb)

        # Splats with zero integrated weight leave the window untouched. Every
        # other splat is composited; the one that drops the mass below epsilon
        # still contributes, and the point terminates after it.
        noop = ok & (w_int == 0.0)
        upd = ~noop

        ui = act[upd]
        if ui.size:
            oku = ok[upd]
            m0u = m0[upd]
            with np.errstate(divide="ignore", invalid="ignore"):
                mean_u = np.where(m0u > 0.0, (t * area * u - to * i1u * i0v)[upd] / m0u, 0.0)
                mean_v = np.where(m0u > 0.0, (t * area * v - to * i0u * i1v)[upd] / m0u, 0.0)
                m2u = (t * area * (u * u + l1 * l1 / 12.0) - to * i2u * i0v)[upd]
                m2v = (t * area * (v * v + l2 * l2 / 12.0) - to * i0u * i2v)[upd]
                var_u = np.where(m0u > 0.0, np.maximum(m2u / m0u - mean_u * mean_u, 0.0), 0.0)
                var_v = np.where(m0u > 0.0, np.maximum(m2v / m0u - mean_v * mean_v, 0.0), 0.0)
            l1n = np.maximum(np.sqrt(12.0 * var_u), MIN_SIDE)
            l2n = np.maximum(np.sqrt(12.0 * var_v), MIN_SIDE)
            with np.errstate(divide="ignore", invalid="ignore"):
                vn = np.where(m0u > 0.0, m0u / (l1n * l2n), 0.0)
            over = vn > 1.0
            if over.any():
                grow = np.sqrt(np.where(over, vn, 1.0))
                l1n = np.where(over, l1n * grow, l1n)
                l2n = np.where(over, l2n * grow, l2n)
                vn = np.where(over, 1.0, vn)
            cn = prep.mu[j] + mean_u[:, None] * a1 + mean_v[:, None] * a2

            # Guard-tripped points keep geometry and scale value only.
            wc[ui] = np.where(oku[:, None], cn, wc[ui])
            ws[ui, 0] = np.where(oku, l1n, ws[ui, 0])
            ws[ui, 1] = np.where(oku, l2n, ws[ui, 1])
            wv[ui] = np.where(oku, vn, (t * (1.0 - alpha_fb))[upd])

            rgb[ui] += weight[upd][:, None] * prep.color[j]
            done[ui[mass_next[upd] < epsilon]] = True

    residual = wv * ws[:, 0] * ws[:, 1]
    rgb += residual[:, None] * bg
    return rgb, residual


def subsample_grid(points, k: int) -> np.ndarray:
    """K x K half-texel-offset sub-points per pixel; (p, k, k, 2), y-outer."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    off = (np.arange(k) + 0.5) / k - 0.5
    sub = np.empty((points.shape[0], k, k, 2))
    sub[..., 0] = points[:, None, None, 0] + off[None, None, :]
    sub[..., 1] = points[:, None, None, 1] + off[None, :, None]
    return sub


def blend_points_ss(prep: PreparedSplats, points, background, epsilon, k: int):
    """Supersampled oracle: average of k x k scalar-center sub-blends per pixel."""
    if k < 1:
        raise ValueError("supersample factor must be >= 1")
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    p = points.shape[0]
    sub = subsample_grid(points, k).reshape(-1, 2)
    rgb_s, t_s = blend_points_center(prep, sub, background, epsilon)
    rgb = rgb_s.reshape(p, k, k, 3).mean(axis=(1, 2))
    t = t_s.reshape(p, k, k).mean(axis=(1, 2))
    return rgb, t


def blend_pixel(
    splats,
    pixel,
    mode: str,
    background=(0.0, 0.0, 0.0),
    epsilon: float = EPSILON_DEFAULT,
    ss_k: int = 16,
):
    """Blend a depth-sorted splat list at one pixel; returns (rgb, residual).

    pixel gives the pixel's center coordinates; integrated and GB modes treat
    the unit square around it as the pixel footprint. splats may be a sequence
    of ProjectedSplat or a PreparedSplats.
    """
    prep = splats if isinstance(splats, PreparedSplats) else prepare_splats(splats)
    center = np.asarray(pixel, dtype=float).reshape(1, 2)
    m = canonical_mode(mode)
    if m == "center":
        rgb, res = blend_points_center(prep, center, background, epsilon)
    elif m == "integrated":
        rgb, res = blend_points_integrated(prep, center, background, epsilon)
    elif m == "gb":
        rgb, res = blend_points_gb(prep, center, background, epsilon)
    else:
        rgb, res = blend_points_ss(prep, center, background, epsilon, ss_k)
    return rgb[0], float(res[0])
