"""Deterministic synthetic scenes for demos and image-level tests."""

import numpy as np

from .scene import SH_C0, Camera, Splat3D, SplatCloud

# Layer layout for the two-plane scene, in base-camera pixel units.
FRONT_EDGE_PX = 27.0  # screen x where the front plane starts


def sh_dc(rgb) -> np.ndarray:
    """DC-only SH row producing the given linear color."""
    return ((np.asarray(rgb, dtype=float) - 0.5) / SH_C0).reshape(1, 3)


def default_camera(width: int = 64, height: int = 48, fx: float = 48.0) -> Camera:
    w2c = np.concatenate([np.eye(3), np.zeros((3, 1))], axis=1)
    return Camera(world_to_cam=w2c, fx=fx, fy=fx, cx=width / 2.0, cy=height / 2.0,
                  width=width, height=height)


def _plane(cam, rng, *, z, x_range, y_range, spacing, sigma, opacity, color_fn,
           jitter=0.2):
    """Grid of thin splats on the plane at depth z, laid out in screen pixels.

    x_range/y_range/spacing/sigma are base-camera pixel units; color_fn maps
    (px, py, rng) to a linear rgb triple.
    """
    upx = z / cam.fx  # world units per pixel at this depth
    xs = np.arange(x_range[0] + spacing / 2.0, x_range[1], spacing)
    ys = np.arange(y_range[0] + spacing / 2.0, y_range[1], spacing)
    sw = sigma * upx
    splats = []
    for py in ys:
        for px in xs:
            jx, jy = rng.uniform(-jitter, jitter, 2) * spacing
            splats.append(Splat3D(
                mu=[(px + jx - cam.cx) * upx, (py + jy - cam.cy) * upx, z],
                scale=[sw, sw, max(sw * 0.05, 1e-5)],
                rot=[1.0, 0.0, 0.0, 0.0],
                opacity=opacity,
                sh=sh_dc(color_fn(px + jx, py + jy, rng)),
            ))
    return splats


def _tint(rng, base, amount=0.03):
    return np.clip(np.asarray(base) + rng.uniform(-amount, amount, 3), 0.0, 1.0)


def _clusters(cam, rng, *, z, x_range, y_range, spacing, sigma, opacity, color,
              per_cluster=3, offset=0.12):
    """Sparse groups of overlapping sub-pixel splats.

    Each group sits well inside one pixel at coarse scales and becomes a few
    overlapping near-pixel splats when zoomed in, which is where scalar
    compositing misses the intra-pixel covariance.
    """
    upx = z / cam.fx
    sw = sigma * upx
    xs = np.arange(x_range[0] + spacing / 2.0, x_range[1], spacing)
    ys = np.arange(y_range[0] + spacing / 2.0, y_range[1], spacing)
    splats = []
    for py in ys:
        for px in xs:
            cx = px + rng.uniform(-0.3, 0.3) * spacing
            cy = py + rng.uniform(-0.3, 0.3) * spacing
            tint = _tint(rng, color, 0.05)
            for i in range(per_cluster):
                ox, oy = rng.uniform(-offset, offset, 2)
                splats.append(Splat3D(
                    mu=[(cx + ox - cam.cx) * upx, (cy + oy - cam.cy) * upx,
                        z + i * 1e-3],
                    scale=[sw, sw, max(sw * 0.05, 1e-6)],
                    rot=[1.0, 0.0, 0.0, 0.0],
                    opacity=opacity,
                    sh=sh_dc(tint),
                ))
    return splats


def two_plane_scene(seed: int = 0):
    """Occlusion fixture: opaque striped front plane over a contrasting back wall.

    The front plane covers the right part of the frame. Its stripes alias when
    zoomed out; the sub-pixel cluster layer riding on it carries intra-pixel
    overlap structure that shows up when zoomed in. Those two regimes are what
    the multi-scale comparisons exercise.
    """
    cam = default_camera()
    rng = np.random.default_rng(seed)
    w, h = cam.width, cam.height

    def back_color(px, py, rng):
        base = (0.10, 0.52, 0.48) if int(np.floor(py / 8.0)) % 2 == 0 else (0.22, 0.76, 0.26)
        return _tint(rng, base)

    def front_color(px, py, rng):
        base = (0.82, 0.16, 0.12) if int(np.floor(px / 6.0)) % 2 == 0 else (0.96, 0.66, 0.14)
        return _tint(rng, base)

    # Each plane is a solid one-color backdrop plus a texture layer. The
    # texture splats carry the color detail and alias when zoomed out; the
    # backdrops saturate opacity so far splat tails never carry visible mass.
    splats = _plane(cam, rng, z=4.0, x_range=(-8, w + 8), y_range=(-8, h + 8),
                    spacing=12.0, sigma=12.0, opacity=1.0,
                    color_fn=lambda px, py, rng: (0.14, 0.58, 0.40), jitter=0.0)
    splats += _plane(cam, rng, z=3.95, x_range=(-8, w + 8), y_range=(-8, h + 8),
                     spacing=5.6, sigma=4.0, opacity=0.95, color_fn=back_color)
    splats += _plane(cam, rng, z=2.05, x_range=(FRONT_EDGE_PX, w + 8), y_range=(-8, h + 8),
                     spacing=12.0, sigma=12.0, opacity=1.0,
                     color_fn=lambda px, py, rng: (0.85, 0.38, 0.12), jitter=0.0)
    splats += _plane(cam, rng, z=2.0, x_range=(FRONT_EDGE_PX, w + 8), y_range=(-8, h + 8),
                     spacing=4.9, sigma=3.5, opacity=0.95, color_fn=front_color)
    splats += _clusters(cam, rng, z=1.9, x_range=(FRONT_EDGE_PX, w + 8), y_range=(-8, h + 8),
                        spacing=7.0, sigma=0.07, opacity=0.92, color=(0.95, 0.90, 0.75))
    splats += _clusters(cam, rng, z=3.9, x_range=(-8, FRONT_EDGE_PX), y_range=(-8, h + 8),
                        spacing=8.0, sigma=0.07, opacity=0.92, color=(0.90, 0.86, 0.70))
    return SplatCloud.from_splats(splats), cam


def two_plane_zoom_scene(seed: int = 0):
    """Zoom-in variant of the occlusion fixture.

    All texture detail is sub-pixel at the base scale, the way trained splats
    are sub-pixel relative to their training resolution. Rendering this scene
    above x1 is where intra-pixel overlap structure dominates the error.
    """
    cam = default_camera(width=24, height=18, fx=18.0)
    rng = np.random.default_rng(seed)
    w, h, edge = cam.width, cam.height, 10.0

    def back_color(px, py, rng):
        base = (0.10, 0.52, 0.48) if int(np.floor(py / 2.0)) % 2 == 0 else (0.22, 0.76, 0.26)
        return _tint(rng, base)

    def front_color(px, py, rng):
        base = (0.82, 0.16, 0.12) if int(np.floor(px / 2.0)) % 2 == 0 else (0.96, 0.66, 0.14)
        return _tint(rng, base)

    splats = _plane(cam, rng, z=4.0, x_range=(-8, w + 8), y_range=(-8, h + 8),
                    spacing=10.0, sigma=10.0, opacity=1.0,
                    color_fn=lambda px, py, rng: (0.14, 0.58, 0.40), jitter=0.0)
    splats += _plane(cam, rng, z=3.95, x_range=(-8, w + 8), y_range=(-8, h + 8),
                     spacing=0.55, sigma=0.25, opacity=0.9, color_fn=back_color)
    splats += _plane(cam, rng, z=2.05, x_range=(edge, w + 8), y_range=(-8, h + 8),
                     spacing=10.0, sigma=10.0, opacity=1.0,
                     color_fn=lambda px, py, rng: (0.85, 0.38, 0.12), jitter=0.0)
    splats += _plane(cam, rng, z=2.0, x_range=(edge, w + 8), y_range=(-8, h + 8),
                     spacing=0.55, sigma=0.25, opacity=0.9, color_fn=front_color)
    splats += _clusters(cam, rng, z=1.9, x_range=(edge, w + 8), y_range=(-8, h + 8),
                        spacing=3.0, sigma=0.07, opacity=0.92, color=(0.95, 0.90, 0.75))
    splats += _clusters(cam, rng, z=3.9, x_range=(-8, edge), y_range=(-8, h + 8),
                        spacing=3.5, sigma=0.07, opacity=0.92, color=(0.90, 0.86, 0.70))
    return SplatCloud.from_splats(splats), cam


def checker_wall(seed: int = 0):
    """Single checkerboard wall; a pure minification-aliasing target."""
    cam = default_camera()
    rng = np.random.default_rng(seed)
    w, h = cam.width, cam.height

    def color(px, py, rng):
        on = (int(np.floor(px / 8.0)) + int(np.floor(py / 8.0))) % 2 == 0
        return _tint(rng, (0.92, 0.90, 0.84) if on else (0.12, 0.10, 0.16), 0.02)

    splats = _plane(cam, rng, z=3.0, x_range=(-8, w + 8), y_range=(-8, h + 8),
                    spacing=4.0, sigma=2.5, opacity=1.0, color_fn=color)
    return SplatCloud.from_splats(splats), cam


def random_cloud(seed: int = 0, n: int = 400):
    """Unstructured anisotropic splats filling the view frustum."""
    cam = default_camera()
    if n == 0:
        return SplatCloud.empty(), cam
    rng = np.random.default_rng(seed)
    z = rng.uniform(2.5, 6.0, n)
    half_x = 0.9 * z * (cam.width / 2.0) / cam.fx
    half_y = 0.9 * z * (cam.height / 2.0) / cam.fy
    mu = np.stack([rng.uniform(-1, 1, n) * half_x, rng.uniform(-1, 1, n) * half_y, z], axis=1)
    sigma = 10.0 ** rng.uniform(np.log10(0.02), np.log10(0.12), n)
    scale = sigma[:, None] * 10.0 ** rng.uniform(-0.3, 0.3, (n, 3))
    rot = rng.normal(size=(n, 4))
    rot /= np.linalg.norm(rot, axis=1, keepdims=True)
    opacity = rng.uniform(0.25, 0.95, n)
    sh = ((rng.uniform(0.1, 0.9, (n, 3)) - 0.5) / SH_C0)[:, None, :]
    return SplatCloud(mu=mu, scale=scale, rot=rot, opacity=opacity, sh=sh), cam


SCENES = {"two-plane": two_plane_scene, "checker": checker_wall, "cloud": random_cloud}
