"""Scene representation: 3D splats, cameras, projection to screen, SH color, PLY I/O.

Conventions used throughout:
  - pixel (i, j) covers [i, i+1] x [j, j+1]; its center is (i + 0.5, j + 0.5)
  - quaternions are stored (w, x, y, z) and normalized on ingest
  - in-memory splats are always post-activation (opacity in [0,1], scale > 0)
  - camera-space z points into the scene; splats with z <= near are culled
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.special

from splatlab.splatmath import eigen2x2

VALID_SH_BANDS = (1, 4, 9, 16)

# Real spherical harmonic constants, degree 0..3, in the ordering trained
# splat files use (band-major, with the usual sign conventions).
SH_C0 = 0.28209479177387814
SH_C1 = 0.4886025119029199
SH_C2 = (
    1.0925484305920792,
    -1.0925484305920792,
    0.31539156525252005,
    -1.0925484305920792,
    0.5462742152960396,
)
SH_C3 = (
    -0.5900435899266435,
    2.890611442640554,
    -0.4570457994644658,
    0.3731763325901154,
    -0.4570457994644658,
    1.445305721320277,
    -0.5900435899266435,
)


class PlyParseError(ValueError):
    """Malformed splat PLY; message carries the byte offset where parsing stopped."""


def normalize_quat(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n == 0.0):
        raise ValueError("zero quaternion")
    return q / n


def quat_to_rotmat(q) -> np.ndarray:
    """Rotation matrix from a unit quaternion (w, x, y, z)."""
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


@dataclass(frozen=True)
class Splat3D:
    """One anisotropic Gaussian primitive, post-activation."""

    mu: np.ndarray  # (3,) world position
    scale: np.ndarray  # (3,) positive, world units
    rot: np.ndarray  # (4,) unit quaternion (w, x, y, z)
    opacity: float  # [0, 1]
    sh: np.ndarray  # (bands, 3), bands in {1, 4, 9, 16}

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(3)
        scale = np.asarray(self.scale, dtype=float).reshape(3)
        rot = np.asarray(self.rot, dtype=float).reshape(4)
        sh = np.asarray(self.sh, dtype=float)
        if sh.ndim == 1:
            sh = sh.reshape(1, 3)
        if sh.shape[0] not in VALID_SH_BANDS or sh.shape[1] != 3:
            raise ValueError(f"sh must be (bands, 3) with bands in {VALID_SH_BANDS}, got {sh.shape}")
        if np.any(scale <= 0.0):
            raise ValueError("scale components must be > 0")
        if not (0.0 <= self.opacity <= 1.0):
            raise ValueError("opacity must be in [0, 1]")
        if abs(np.linalg.norm(rot) - 1.0) > 1e-6:
            rot = normalize_quat(rot)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "rot", rot)
        object.__setattr__(self, "sh", sh)


@dataclass(frozen=True)
class Camera:
    """Pinhole camera with a rigid world-to-camera transform."""

    world_to_cam: np.ndarray  # (3, 4), rows [R | t]
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    near: float = 0.01

    def __post_init__(self):
        w2c = np.asarray(self.world_to_cam, dtype=float)
        if w2c.shape == (4, 4):
            w2c = w2c[:3, :]
        if w2c.shape != (3, 4):
            raise ValueError(f"world_to_cam must be 3x4, got {w2c.shape}")
        r = w2c[:, :3]
        if not np.allclose(r @ r.T, np.eye(3), atol=1e-6):
            raise ValueError("rotation block of world_to_cam is not orthonormal")
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be > 0")
        if not (0 < self.cx < self.width and 0 < self.cy < self.height):
            raise ValueError("principal point must lie inside the image")
        if not self.near > 0:
            raise ValueError("near must be > 0")
        object.__setattr__(self, "world_to_cam", w2c)

    @property
    def rotation(self) -> np.ndarray:
        return self.world_to_cam[:, :3]

    @property
    def translation(self) -> np.ndarray:
        return self.world_to_cam[:, 3]

    @property
    def center(self) -> np.ndarray:
        """Camera origin in world coordinates."""
        return -self.rotation.T @ self.translation

    def scaled(self, k: float) -> "Camera":
        """Zoom protocol: multiply intrinsics and resolution by k, pose unchanged."""
        if k <= 0:
            raise ValueError("scale factor must be > 0")
        return Camera(
            world_to_cam=self.world_to_cam,
            fx=self.fx * k,
            fy=self.fy * k,
            cx=self.cx * k,
            cy=self.cy * k,
            width=max(1, int(round(self.width * k))),
            height=max(1, int(round(self.height * k))),
            near=self.near,
        )


def save_camera(path, cam: Camera) -> None:
    doc = {
        "fx": cam.fx,
        "fy": cam.fy,
        "cx": cam.cx,
        "cy": cam.cy,
        "width": cam.width,
        "height": cam.height,
        "world_to_cam": [float(v) for v in cam.world_to_cam.reshape(-1)],
        "near": cam.near,
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=2)
        f.write("\n")


def load_camera(path) -> Camera:
    """Camera JSON: {fx, fy, cx, cy, width, height, world_to_cam: 12 row-major, near}.

    An optional "scale" field multiplies fx, fy, cx, cy, width, height, which is
    how the zoom-in / zoom-out experiments are expressed on disk.
    """
    with open(path) as f:
        doc = json.load(f)
    required = ("fx", "fy", "cx", "cy", "width", "height", "world_to_cam", "near")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ValueError(f"camera file {path} missing keys: {missing}")
    w2c = np.asarray(doc["world_to_cam"], dtype=float)
    if w2c.size != 12:
        raise ValueError("world_to_cam must hold 12 numbers (3x4 row-major)")
    cam = Camera(
        world_to_cam=w2c.reshape(3, 4),
        fx=float(doc["fx"]),
        fy=float(doc["fy"]),
        cx=float(doc["cx"]),
        cy=float(doc["cy"]),
        width=int(doc["width"]),
        height=int(doc["height"]),
        near=float(doc["near"]),
    )
    if "scale" in doc:
        cam = cam.scaled(float(doc["scale"]))
    return cam


@dataclass(frozen=True)
class ProjectedSplat:
    """Screen-space splat: 2D Gaussian plus depth, opacity, and per-view color."""

    mu2d: np.ndarray  # (2,) pixels
    cov2d: np.ndarray  # (2, 2) symmetric, pixels^2
    depth: float  # camera-space z
    opacity: float
    color: np.ndarray  # (3,) linear rgb

    def __post_init__(self):
        mu2d = np.asarray(self.mu2d, dtype=float).reshape(2)
        cov = np.asarray(self.cov2d, dtype=float).reshape(2, 2)
        # Keep exact symmetry: a single shared off-diagonal value.
        cxy = 0.5 * (cov[0, 1] + cov[1, 0])
        cov = np.array([[cov[0, 0], cxy], [cxy, cov[1, 1]]])
        object.__setattr__(self, "mu2d", mu2d)
        object.__setattr__(self, "cov2d", cov)
        object.__setattr__(self, "color", np.asarray(self.color, dtype=float).reshape(3))

    def eigen(self):
        return eigen2x2(self.cov2d)


def build_covariance(scale, rot) -> np.ndarray:
    """World-space covariance of a splat: R diag(s^2) R^T."""
    scale = np.asarray(scale, dtype=float)
    if np.any(scale <= 0.0):
        raise ValueError("scale components must be > 0")
    r = quat_to_rotmat(normalize_quat(rot))
    m = r * scale[None, :]  # R @ diag(s)
    return m @ m.T


def eval_sh(sh, direction) -> np.ndarray:
    """Evaluate real SH color (degree <= 3) toward a unit direction.

    Returns linear rgb with the trained-file DC convention (+0.5) applied,
    clamped at 0.
    """
    sh = np.asarray(sh, dtype=float)
    if sh.ndim == 1:
        sh = sh.reshape(1, 3)
    bands = sh.shape[0]
    if bands not in VALID_SH_BANDS:
        raise ValueError(f"unsupported SH band count {bands}")
    d = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(d) - 1.0) > 1e-6:
        raise ValueError("direction must be a unit vector")
    x, y, z = d

    rgb = SH_C0 * sh[0]
    if bands > 1:
        rgb = rgb - SH_C1 * y * sh[1] + SH_C1 * z * sh[2] - SH_C1 * x * sh[3]
    if bands > 4:
        xx, yy, zz = x * x, y * y, z * z
        xy, yz, xz = x * y, y * z, x * z
        rgb = (
            rgb
            + SH_C2[0] * xy * sh[4]
            + SH_C2[1] * yz * sh[5]
            + SH_C2[2] * (2.0 * zz - xx - yy) * sh[6]
            + SH_C2[3] * xz * sh[7]
            + SH_C2[4] * (xx - yy) * sh[8]
        )
    if bands > 9:
        xx, yy, zz = x * x, y * y, z * z
        rgb = (
            rgb
            + SH_C3[0] * y * (3.0 * xx - yy) * sh[9]
            + SH_C3[1] * x * y * z * sh[10]
            + SH_C3[2] * y * (4.0 * zz - xx - yy) * sh[11]
            + SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * sh[12]
            + SH_C3[4] * x * (4.0 * zz - xx - yy) * sh[13]
            + SH_C3[5] * z * (xx - yy) * sh[14]
            + SH_C3[6] * x * (xx - yy) * sh[15]
        )
    return np.maximum(rgb + 0.5, 0.0)


def project_splat(splat: Splat3D, cam: Camera, lowpass: float = 0.0):
    """Project one splat to screen space; returns None when culled.

    lowpass is added to the diagonal of cov2d after projection (0.3 px^2 is
    the legacy center-mode floor; area-integrating modes pass 0).
    """
    r, t = cam.rotation, cam.translation
    p = r @ splat.mu + t
    z = p[2]
    if z <= cam.near:
        return None
    x, y = p[0], p[1]
    mu2d = np.array([cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy])

    jac = np.array(
        [
            [cam.fx / z, 0.0, -cam.fx * x / (z * z)],
            [0.0, cam.fy / z, -cam.fy * y / (z * z)],
        ]
    )
    cov3d = build_covariance(splat.scale, splat.rot)
    jw = jac @ r
    cov2d = jw @ cov3d @ jw.T
    cov2d = 0.5 * (cov2d + cov2d.T)
    cov2d[0, 0] += lowpass
    cov2d[1, 1] += lowpass

    if not (np.all(np.isfinite(mu2d)) and np.all(np.isfinite(cov2d))):
        return None

    view_dir = splat.mu - cam.center
    n = np.linalg.norm(view_dir)
    view_dir = view_dir / n if n > 0 else np.array([0.0, 0.0, 1.0])
    color = eval_sh(splat.sh, view_dir)

    return ProjectedSplat(
        mu2d=mu2d, cov2d=cov2d, depth=float(z), opacity=float(splat.opacity), color=color
    )


# ---------------------------------------------------------------------------
# Structure-of-arrays scene container


@dataclass
class SplatCloud:
    """A scene's splats in structure-of-arrays form.

    Behaves as a sequence of Splat3D (len / indexing / iteration) while keeping
    contiguous arrays for the vectorized projection path.
    """

    mu: np.ndarray  # (n, 3)
    scale: np.ndarray  # (n, 3)
    rot: np.ndarray  # (n, 4) unit
    opacity: np.ndarray  # (n,)
    sh: np.ndarray  # (n, bands, 3)

    def __post_init__(self):
        self.mu = np.ascontiguousarray(self.mu, dtype=float)
        self.scale = np.ascontiguousarray(self.scale, dtype=float)
        self.rot = normalize_quat(np.ascontiguousarray(self.rot, dtype=float))
        self.opacity = np.ascontiguousarray(self.opacity, dtype=float)
        self.sh = np.ascontiguousarray(self.sh, dtype=float)
        n = self.mu.shape[0]
        if self.sh.ndim != 3 or self.sh.shape[0] != n or self.sh.shape[2] != 3:
            raise ValueError("sh must be (n, bands, 3)")
        if self.sh.shape[1] not in VALID_SH_BANDS:
            raise ValueError(f"unsupported SH band count {self.sh.shape[1]}")
        if np.any(self.scale <= 0.0):
            raise ValueError("scale components must be > 0")
        if np.any(self.opacity < 0.0) or np.any(self.opacity > 1.0):
            raise ValueError("opacity must be in [0, 1]")

    def __len__(self) -> int:
        return self.mu.shape[0]

    def __getitem__(self, i: int) -> Splat3D:
        return Splat3D(
            mu=self.mu[i],
            scale=self.scale[i],
            rot=self.rot[i],
            opacity=float(self.opacity[i]),
            sh=self.sh[i],
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def from_splats(cls, splats) -> "SplatCloud":
        splats = list(splats)
        if not splats:
            return cls.empty()
        bands = max(s.sh.shape[0] for s in splats)
        if bands not in VALID_SH_BANDS:
            raise ValueError(f"unsupported SH band count {bands}")
        sh = np.zeros((len(splats), bands, 3))
        for i, s in enumerate(splats):
            sh[i, : s.sh.shape[0]] = s.sh
        return cls(
            mu=np.stack([s.mu for s in splats]),
            scale=np.stack([s.scale for s in splats]),
            rot=np.stack([s.rot for s in splats]),
            opacity=np.array([s.opacity for s in splats]),
            sh=sh,
        )

    @classmethod
    def empty(cls) -> "SplatCloud":
        return cls(
            mu=np.zeros((0, 3)),
            scale=np.ones((0, 3)),
            rot=np.tile(np.array([1.0, 0.0, 0.0, 0.0]), (0, 1)),
            opacity=np.zeros(0),
            sh=np.zeros((0, 1, 3)),
        )


def eval_sh_batch(sh, dirs) -> np.ndarray:
    """Vectorized eval_sh: sh (n, bands, 3), dirs (n, 3) unit -> rgb (n, 3)."""
    sh = np.asarray(sh, dtype=float)
    dirs = np.asarray(dirs, dtype=float)
    bands = sh.shape[1]
    if bands not in VALID_SH_BANDS:
        raise ValueError(f"unsupported SH band count {bands}")
    x, y, z = dirs[:, 0:1], dirs[:, 1:2], dirs[:, 2:3]

    rgb = SH_C0 * sh[:, 0]
    if bands > 1:
        rgb = rgb - SH_C1 * y * sh[:, 1] + SH_C1 * z * sh[:, 2] - SH_C1 * x * sh[:, 3]
    if bands > 4:
        xx, yy, zz = x * x, y * y, z * z
        rgb = (
            rgb
            + SH_C2[0] * (x * y) * sh[:, 4]
            + SH_C2[1] * (y * z) * sh[:, 5]
            + SH_C2[2] * (2.0 * zz - xx - yy) * sh[:, 6]
            + SH_C2[3] * (x * z) * sh[:, 7]
            + SH_C2[4] * (xx - yy) * sh[:, 8]
        )
    if bands > 9:
        xx, yy, zz = x * x, y * y, z * z
        rgb = (
            rgb
            + SH_C3[0] * y * (3.0 * xx - yy) * sh[:, 9]
            + SH_C3[1] * (x * y * z) * sh[:, 10]
            + SH_C3[2] * y * (4.0 * zz - xx - yy) * sh[:, 11]
            + SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy) * sh[:, 12]
            + SH_C3[4] * x * (4.0 * zz - xx - yy) * sh[:, 13]
            + SH_C3[5] * z * (xx - yy) * sh[:, 14]
            + SH_C3[6] * x * (xx - yy) * sh[:, 15]
        )
    return np.maximum(rgb + 0.5, 0.0)


@dataclass
class ProjectedCloud:
    """Vectorized projection output, original splat order preserved.

    Only splats that survive near-plane and finiteness culls appear; counters
    record what was dropped.
    """

    mu2d: np.ndarray  # (m, 2)
    cxx: np.ndarray  # (m,) cov2d unique entries
    cxy: np.ndarray
    cyy: np.ndarray
    depth: np.ndarray  # (m,)
    opacity: np.ndarray  # (m,)
    color: np.ndarray  # (m, 3)
    n_culled_near: int = 0
    n_culled_nonfinite: int = 0
    source_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def __len__(self) -> int:
        return self.mu2d.shape[0]

    def splat(self, i: int) -> ProjectedSplat:
        return ProjectedSplat(
            mu2d=self.mu2d[i],
            cov2d=np.array(
                [[self.cxx[i], self.cxy[i]], [self.cxy[i], self.cyy[i]]]
            ),
            depth=float(self.depth[i]),
            opacity=float(self.opacity[i]),
            color=self.color[i],
        )


def rotmats_from_quats(q) -> np.ndarray:
    """(n, 4) unit quaternions -> (n, 3, 3) rotation matrices."""
    w, x, y, z = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    m = np.empty((q.shape[0], 3, 3))
    m[:, 0, 0] = 1 - 2 * (y * y + z * z)
    m[:, 0, 1] = 2 * (x * y - w * z)
    m[:, 0, 2] = 2 * (x * z + w * y)
    m[:, 1, 0] = 2 * (x * y + w * z)
    m[:, 1, 1] = 1 - 2 * (x * x + z * z)
    m[:, 1, 2] = 2 * (y * z - w * x)
    m[:, 2, 0] = 2 * (x * z - w * y)
    m[:, 2, 1] = 2 * (y * z + w * x)
    m[:, 2, 2] = 1 - 2 * (x * x + y * y)
    return m


def project_cloud(cloud: SplatCloud, cam: Camera, lowpass: float = 0.0) -> ProjectedCloud:
    """Project every splat in one vectorized pass; order of survivors is stable."""
    n = len(cloud)
    if n == 0:
        return ProjectedCloud(
            mu2d=np.zeros((0, 2)),
            cxx=np.zeros(0),
            cxy=np.zeros(0),
            cyy=np.zeros(0),
            depth=np.zeros(0),
            opacity=np.zeros(0),
            color=np.zeros((0, 3)),
        )
    r, t = cam.rotation, cam.translation
    p = cloud.mu @ r.T + t  # (n, 3) camera space
    z = p[:, 2]
    front = z > cam.near
    n_culled_near = int(n - np.count_nonzero(front))

    idx = np.flatnonzero(front)
    p = p[idx]
    z = z[idx]
    x, y = p[:, 0], p[:, 1]
    mu2d = np.stack([cam.fx * x / z + cam.cx, cam.fy * y / z + cam.cy], axis=1)

    # cov2d = (J R) Sigma (J R)^T with J the perspective Jacobian at the mean.
    rot = rotmats_from_quats(cloud.rot[idx])
    m = rot * cloud.scale[idx][:, None, :]  # (n, 3, 3) = R diag(s)
    zz = z * z
    jac = np.zeros((idx.size, 2, 3))
    jac[:, 0, 0] = cam.fx / z
    jac[:, 0, 2] = -cam.fx * x / zz
    jac[:, 1, 1] = cam.fy / z
    jac[:, 1, 2] = -cam.fy * y / zz
    a = np.einsum("nij,jk,nkl->nil", jac, r, m)  # (n, 2, 3)
    cxx = np.einsum("nk,nk->n", a[:, 0], a[:, 0]) + lowpass
    cyy = np.einsum("nk,nk->n", a[:, 1], a[:, 1]) + lowpass
    cxy = np.einsum("nk,nk->n", a[:, 0], a[:, 1])

    finite = (
        np.isfinite(mu2d).all(axis=1)
        & np.isfinite(cxx)
        & np.isfinite(cxy)
        & np.isfinite(cyy)
    )
    n_culled_nonfinite = int(idx.size - np.count_nonzero(finite))
    if n_culled_nonfinite:
        keep = np.flatnonzero(finite)
        idx, mu2d, z = idx[keep], mu2d[keep], z[keep]
        cxx, cxy, cyy = cxx[keep], cxy[keep], cyy[keep]

    view = cloud.mu[idx] - cam.center
    norm = np.linalg.norm(view, axis=1, keepdims=True)
    dirs = np.divide(view, norm, out=np.tile(np.array([0.0, 0.0, 1.0]), (idx.size, 1)), where=norm > 0)
    color = eval_sh_batch(cloud.sh[idx], dirs)

    return ProjectedCloud(
        mu2d=mu2d,
        cxx=cxx,
        cxy=cxy,
        cyy=cyy,
        depth=z,
        opacity=cloud.opacity[idx].copy(),
        color=color,
        n_culled_near=n_culled_near,
        n_culled_nonfinite=n_culled_nonfinite,
        source_index=idx,
    )


# ---------------------------------------------------------------------------
# PLY ingestion (binary little-endian, de-facto trained-splat layout)

_REST_TO_BANDS = {0: 1, 9: 4, 24: 9, 45: 16}


def load_ply(path) -> SplatCloud:
    """Read a trained-splat PLY.

    Expects binary little-endian with float32 vertex properties x, y, z,
    f_dc_0..2, opacity (logit), scale_0..2 (log), rot_0..3 (unnormalized), and
    optionally nx, ny, nz (ignored) and f_rest_0..N (N in {9, 24, 45},
    channel-major). Activations are applied here so in-memory splats are
    always post-activation.
    """
    with open(path, "rb") as f:
        raw = f.read()

    end_marker = b"end_header\n"
    header_end = raw.find(end_marker)
    if not raw.startswith(b"ply\n") or header_end < 0:
        raise PlyParseError(f"{path}: not a PLY file (no header found, offset 0)")
    body_at = header_end + len(end_marker)
    header = raw[:header_end].decode("ascii", errors="replace")

    n_vertex = None
    props = []
    fmt_seen = False
    for line in header.splitlines():
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            fmt_seen = True
            if tok[1] != "binary_little_endian":
                raise PlyParseError(f"{path}: encoding {tok[1]!r} unsupported, need binary_little_endian")
        elif tok[0] == "element":
            if tok[1] == "vertex":
                n_vertex = int(tok[2])
            elif n_vertex is not None:
                break  # only leading vertex element is read
        elif tok[0] == "property" and n_vertex is not None:
            if tok[1] not in ("float", "float32"):
                raise PlyParseError(f"{path}: property {tok[2]!r} has type {tok[1]!r}, need float")
            props.append(tok[2])
    if not fmt_seen:
        raise PlyParseError(f"{path}: missing format line")
    if n_vertex is None:
        raise PlyParseError(f"{path}: missing vertex element")

    required = (
        ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity"]
        + [f"scale_{i}" for i in range(3)]
        + [f"rot_{i}" for i in range(4)]
    )
    missing = [p for p in required if p not in props]
    if missing:
        raise PlyParseError(f"{path}: missing vertex properties {missing}")

    n_rest = sum(1 for p in props if p.startswith("f_rest_"))
    if n_rest not in _REST_TO_BANDS:
        raise PlyParseError(f"{path}: f_rest count {n_rest} not in {sorted(_REST_TO_BANDS)}")
    bands = _REST_TO_BANDS[n_rest]

    stride = 4 * len(props)
    need = n_vertex * stride
    if len(raw) - body_at < need:
        raise PlyParseError(
            f"{path}: truncated payload, need {need} bytes at offset {body_at}, "
            f"have {len(raw) - body_at}"
        )
    data = np.frombuffer(raw, dtype="<f4", count=n_vertex * len(props), offset=body_at)
    data = data.reshape(n_vertex, len(props)).astype(float)
    col = {name: i for i, name in enumerate(props)}

    mu = data[:, [col["x"], col["y"], col["z"]]]
    opacity = scipy.special.expit(data[:, col["opacity"]])
    scale = np.exp(data[:, [col[f"scale_{i}"] for i in range(3)]])
    rot = data[:, [col[f"rot_{i}"] for i in range(4)]]

    sh = np.zeros((n_vertex, bands, 3))
    sh[:, 0, :] = data[:, [col[f"f_dc_{c}"] for c in range(3)]]
    if n_rest:
        per_channel = n_rest // 3
        rest = data[:, [col[f"f_rest_{j}"] for j in range(n_rest)]]
        # File layout is channel-major; memory layout is band-major.
        sh[:, 1:, :] = rest.reshape(n_vertex, 3, per_channel).transpose(0, 2, 1)

    return SplatCloud(mu=mu, scale=scale, rot=rot, opacity=opacity, sh=sh)


def save_ply(path, cloud) -> None:
    """Write splats in the same trained-splat layout load_ply reads."""
    if not isinstance(cloud, SplatCloud):
        cloud = SplatCloud.from_splats(cloud)
    n = len(cloud)
    bands = cloud.sh.shape[1]
    n_rest = {1: 0, 4: 9, 9: 24, 16: 45}[bands]

    names = ["x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"]
    names += [f"f_rest_{j}" for j in range(n_rest)]
    names += ["opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]

    out = np.zeros((n, len(names)), dtype="<f4")
    col = {name: i for i, name in enumerate(names)}
    out[:, [col["x"], col["y"], col["z"]]] = cloud.mu
    out[:, [col["f_dc_0"], col["f_dc_1"], col["f_dc_2"]]] = cloud.sh[:, 0, :]
    if n_rest:
        rest = cloud.sh[:, 1:, :].transpose(0, 2, 1).reshape(n, n_rest)
        out[:, col["f_rest_0"] : col["f_rest_0"] + n_rest] = rest
    # Inverse activations; opacity clamped clear of 0/1 so the logit is finite.
    p = np.clip(cloud.opacity, 1e-10, 1.0 - 1e-10)
    out[:, col["opacity"]] = scipy.special.logit(p)
    out[:, col["scale_0"] : col["scale_0"] + 3] = np.log(cloud.scale)
    out[:, col["rot_0"] : col["rot_0"] + 4] = cloud.rot

    header_lines = ["ply", "format binary_little_endian 1.0", f"element vertex {n}"]
    header_lines += [f"property float {name}" for name in names]
    header_lines.append("end_header")
    with open(path, "wb") as f:
        f.write(("\n".join(header_lines) + "\n").encode("ascii"))
        f.write(out.tobytes())
