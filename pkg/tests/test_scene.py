"""Scene model tests: covariance build, projection, SH color, PLY and camera I/O."""

import json

import numpy as np
import pytest

from splatlab.scene import (
    Camera,
    PlyParseError,
    Splat3D,
    SplatCloud,
    build_covariance,
    eval_sh,
    eval_sh_batch,
    load_camera,
    load_ply,
    project_cloud,
    project_splat,
    save_camera,
    save_ply,
)

IDENTITY_Q = np.array([1.0, 0.0, 0.0, 0.0])


def make_camera(**kw):
    base = dict(
        world_to_cam=np.hstack([np.eye(3), np.zeros((3, 1))]),
        fx=100.0,
        fy=100.0,
        cx=32.0,
        cy=24.0,
        width=64,
        height=48,
        near=0.01,
    )
    base.update(kw)
    return Camera(**base)


def random_splat(rng, bands=1):
    q = rng.normal(size=4)
    return Splat3D(
        mu=rng.uniform(-2.0, 2.0, 3),
        scale=np.exp(rng.uniform(-2.0, 0.5, 3)),
        rot=q / np.linalg.norm(q),
        opacity=float(rng.uniform(0.1, 1.0)),
        sh=rng.uniform(-0.5, 0.5, (bands, 3)),
    )


def random_pose(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    r = np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )
    t = rng.uniform(-1.0, 1.0, 3)
    return np.hstack([r, t[:, None]])


def test_build_covariance_identity():
    assert np.allclose(build_covariance([1, 1, 1], IDENTITY_Q), np.eye(3))
    assert np.allclose(build_covariance([2, 1, 1], IDENTITY_Q), np.diag([4.0, 1.0, 1.0]))


def test_build_covariance_eigenvalues_randomized():
    rng = np.random.default_rng(11)
    for _ in range(300):
        scale = np.exp(rng.uniform(-3.0, 3.0, 3))
        q = rng.normal(size=4)
        cov = build_covariance(scale, q)
        assert np.allclose(cov, cov.T, atol=0.0)
        got = np.sort(np.linalg.eigvalsh(cov))
        want = np.sort(scale**2)
        assert np.allclose(got, want, rtol=1e-9, atol=1e-12 * want.max())


def test_on_axis_projection():
    cam = make_camera()
    s = Splat3D(
        mu=[0.0, 0.0, 2.0], scale=[0.1, 0.1, 0.1], rot=IDENTITY_Q, opacity=0.8,
        sh=np.zeros((1, 3)),
    )
    p = project_splat(s, cam)
    assert p is not None
    assert np.allclose(p.mu2d, [cam.cx, cam.cy], atol=1e-12)
    want = (cam.fx / 2.0) ** 2 * 0.1**2
    assert np.allclose(p.cov2d, want * np.eye(2), rtol=1e-12)
    assert p.depth == pytest.approx(2.0)
    # Doubling depth quarters the screen covariance for on-axis isotropic splats.
    s4 = Splat3D(mu=[0.0, 0.0, 4.0], scale=[0.1, 0.1, 0.1], rot=IDENTITY_Q,
                 opacity=0.8, sh=np.zeros((1, 3)))
    p4 = project_splat(s4, cam)
    assert np.allclose(p4.cov2d * 4.0, p.cov2d, rtol=1e-12)


def test_behind_camera_culled():
    cam = make_camera()
    s = Splat3D(mu=[0.0, 0.0, -1.0], scale=[0.1] * 3, rot=IDENTITY_Q, opacity=1.0,
                sh=np.zeros((1, 3)))
    assert project_splat(s, cam) is None
    s2 = Splat3D(mu=[0.0, 0.0, 0.005], scale=[0.1] * 3, rot=IDENTITY_Q, opacity=1.0,
                 sh=np.zeros((1, 3)))
    assert project_splat(s2, cam) is None  # in front but inside near plane


def _project_point(mu, cam):
    p = cam.rotation @ mu + cam.translation
    return np.array(
        [cam.fx * p[0] / p[2] + cam.cx, cam.fy * p[1] / p[2] + cam.cy]
    )


def test_projection_matches_finite_difference_jacobian():
    # cov2d should equal J_fd Sigma J_fd^T where J_fd is the numerical Jacobian
    # of the full world->pixel map (extrinsics included).
    rng = np.random.default_rng(5)
    cam = make_camera(world_to_cam=random_pose(rng))
    for _ in range(50):
        mu = rng.uniform(-1.5, 1.5, 3)
        if (cam.rotation @ mu + cam.translation)[2] < 0.5:
            continue
        s = Splat3D(mu=mu, scale=np.exp(rng.uniform(-3.0, -1.0, 3)),
                    rot=rng.normal(size=4), opacity=1.0, sh=np.zeros((1, 3)))
        p = project_splat(s, cam)
        assert p is not None

        eps = 1e-5
        jfd = np.zeros((2, 3))
        for k in range(3):
            d = np.zeros(3)
            d[k] = eps
            jfd[:, k] = (_project_point(mu + d, cam) - _project_point(mu - d, cam)) / (2 * eps)
        ref = jfd @ build_covariance(s.scale, s.rot) @ jfd.T
        assert np.allclose(p.cov2d, ref, rtol=1e-5, atol=1e-8)
        assert np.allclose(p.mu2d, _project_point(mu, cam), atol=1e-12)


def test_projection_scale_consistency():
    # Scaling intrinsics and resolution by k scales mu2d by k and cov2d by k^2.
    rng = np.random.default_rng(17)
    cam = make_camera(world_to_cam=random_pose(rng))
    for k in (0.5, 2.0, 8.0):
        cam_k = cam.scaled(k)
        for _ in range(20):
            s = random_splat(rng)
            a, b = project_splat(s, cam), project_splat(s, cam_k)
            if a is None:
                assert b is None
                continue
            assert np.allclose(b.mu2d, a.mu2d * k, rtol=1e-12, atol=1e-9)
            assert np.allclose(b.cov2d, a.cov2d * k * k, rtol=1e-12, atol=1e-12)


def test_lowpass_floor_added_to_diagonal():
    cam = make_camera()
    s = Splat3D(mu=[0.1, -0.2, 3.0], scale=[0.05] * 3, rot=IDENTITY_Q, opacity=1.0,
                sh=np.zeros((1, 3)))
    bare = project_splat(s, cam, lowpass=0.0)
    floored = project_splat(s, cam, lowpass=0.3)
    assert np.allclose(floored.cov2d - bare.cov2d, 0.3 * np.eye(2), atol=1e-12)


def test_project_cloud_matches_scalar_path():
    rng = np.random.default_rng(23)
    cam = make_camera(world_to_cam=random_pose(rng))
    splats = [random_splat(rng, bands=4) for _ in range(200)]
    # Push a few behind the camera to exercise culling.
    splats[7] = Splat3D(mu=cam.center - 3.0 * cam.rotation[2], scale=[0.1] * 3,
                        rot=IDENTITY_Q, opacity=0.5, sh=np.zeros((4, 3)))
    cloud = SplatCloud.from_splats(splats)
    pc = project_cloud(cloud, cam, lowpass=0.3)

    kept = 0
    for i, s in enumerate(splats):
        ref = project_splat(s, cam, lowpass=0.3)
        if ref is None:
            assert i not in pc.source_index
            continue
        j = int(np.flatnonzero(pc.source_index == i)[0])
        assert np.allclose(pc.mu2d[j], ref.mu2d, rtol=1e-12, atol=1e-12)
        cov = np.array([[pc.cxx[j], pc.cxy[j]], [pc.cxy[j], pc.cyy[j]]])
        assert np.allclose(cov, ref.cov2d, rtol=1e-9, atol=1e-12)
        assert pc.depth[j] == pytest.approx(ref.depth, rel=1e-12)
        assert np.allclose(pc.color[j], ref.color, rtol=1e-12, atol=1e-12)
        kept += 1
    assert len(pc) == kept
    assert pc.n_culled_near >= 1
    # Survivor order is the input order (stable for depth ties downstream).
    assert np.all(np.diff(pc.source_index) > 0)


def test_eval_sh_dc_only():
    rgb = eval_sh(np.zeros((1, 3)), [0.0, 0.0, 1.0])
    assert np.allclose(rgb, 0.5)
    # Degree-0 color ignores direction.
    sh = np.array([[0.3, -0.1, 0.9]])
    a = eval_sh(sh, [0.0, 0.0, 1.0])
    b = eval_sh(sh, [1.0, 0.0, 0.0])
    assert np.allclose(a, b)
    # Clamp keeps rgb non-negative.
    dark = eval_sh(np.array([[-10.0, -10.0, -10.0]]), [0.0, 0.0, 1.0])
    assert np.all(dark == 0.0)


def test_eval_sh_degree1_polynomial_oracle():
    # Degree-1 output must be 0.5 + C0*dc + C1*(-y*sh1 + z*sh2 - x*sh3).
    rng = np.random.default_rng(3)
    c0, c1 = 0.28209479177387814, 0.4886025119029199
    for _ in range(100):
        sh = rng.uniform(-0.3, 0.3, (4, 3))
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        want = 0.5 + c0 * sh[0] + c1 * (-d[1] * sh[1] + d[2] * sh[2] - d[0] * sh[3])
        got = eval_sh(sh, d)
        assert np.allclose(got, np.maximum(want, 0.0), rtol=1e-12, atol=1e-12)


def test_eval_sh_batch_matches_scalar():
    rng = np.random.default_rng(31)
    for bands in (1, 4, 9, 16):
        sh = rng.uniform(-0.4, 0.4, (50, bands, 3))
        dirs = rng.normal(size=(50, 3))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        got = eval_sh_batch(sh, dirs)
        for i in range(50):
            assert np.allclose(got[i], eval_sh(sh[i], dirs[i]), rtol=1e-12, atol=1e-14)


def test_eval_sh_rejects_bad_input():
    with pytest.raises(ValueError):
        eval_sh(np.zeros((5, 3)), [0.0, 0.0, 1.0])
    with pytest.raises(ValueError):
        eval_sh(np.zeros((1, 3)), [0.0, 0.0, 2.0])


def test_camera_validation():
    with pytest.raises(ValueError):
        make_camera(fx=-1.0)
    with pytest.raises(ValueError):
        make_camera(cx=100.0)  # outside image
    with pytest.raises(ValueError):
        make_camera(world_to_cam=np.hstack([2.0 * np.eye(3), np.zeros((3, 1))]))
    with pytest.raises(ValueError):
        make_camera(near=0.0)


def test_camera_json_roundtrip(tmp_path):
    rng = np.random.default_rng(19)
    cam = make_camera(world_to_cam=random_pose(rng))
    path = tmp_path / "cam.json"
    save_camera(path, cam)
    back = load_camera(path)
    assert np.allclose(back.world_to_cam, cam.world_to_cam)
    assert (back.fx, back.fy, back.cx, back.cy) == (cam.fx, cam.fy, cam.cx, cam.cy)
    assert (back.width, back.height, back.near) == (cam.width, cam.height, cam.near)


def test_camera_json_scale_field(tmp_path):
    cam = make_camera()
    path = tmp_path / "cam.json"
    save_camera(path, cam)
    doc = json.loads(path.read_text())
    doc["scale"] = 0.125
    path.write_text(json.dumps(doc))
    small = load_camera(path)
    assert small.fx == pytest.approx(cam.fx * 0.125)
    assert small.width == 8 and small.height == 6
    assert small.cx == pytest.approx(cam.cx * 0.125)


def test_camera_json_missing_key(tmp_path):
    path = tmp_path / "cam.json"
    path.write_text(json.dumps({"fx": 1.0}))
    with pytest.raises(ValueError, match="missing"):
        load_camera(path)


def make_cloud(rng, n=50, bands=16):
    q = rng.normal(size=(n, 4))
    return SplatCloud(
        mu=rng.uniform(-2, 2, (n, 3)),
        scale=np.exp(rng.uniform(-2, 1, (n, 3))),
        rot=q,
        opacity=rng.uniform(0.02, 0.98, n),
        sh=rng.uniform(-0.5, 0.5, (n, bands, 3)),
    )


@pytest.mark.parametrize("bands", [1, 4, 9, 16])
def test_ply_roundtrip(tmp_path, bands):
    rng = np.random.default_rng(bands)
    cloud = make_cloud(rng, n=64, bands=bands)
    path = tmp_path / "cloud.ply"
    save_ply(path, cloud)
    back = load_ply(path)
    assert len(back) == 64
    # float32 storage plus activation round trip; 1e-6 relative is the contract.
    assert np.allclose(back.mu, cloud.mu, rtol=1e-6, atol=1e-6)
    assert np.allclose(back.scale, cloud.scale, rtol=1e-5, atol=1e-7)
    assert np.allclose(back.opacity, cloud.opacity, rtol=1e-5, atol=1e-6)
    assert np.allclose(back.sh, cloud.sh, rtol=1e-5, atol=1e-6)
    # Quaternions may flip sign only as a unit; loader normalizes.
    for i in range(64):
        assert (
            np.allclose(back.rot[i], cloud.rot[i], atol=1e-6)
            or np.allclose(back.rot[i], -cloud.rot[i], atol=1e-6)
        )


def test_ply_activation_fixtures(tmp_path):
    # opacity_raw = 0 -> 0.5 and scale_raw = 0 -> 1 by construction of the format.
    path = tmp_path / "one.ply"
    names = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity",
             "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"]
    header = ["ply", "format binary_little_endian 1.0", "element vertex 1"]
    header += [f"property float {n}" for n in names]
    header.append("end_header")
    row = np.zeros(len(names), dtype="<f4")
    row[names.index("z")] = 5.0
    row[names.index("rot_0")] = 1.0
    path.write_bytes(("\n".join(header) + "\n").encode() + row.tobytes())

    cloud = load_ply(path)
    assert len(cloud) == 1
    assert cloud.opacity[0] == pytest.approx(0.5)
    assert np.allclose(cloud.scale[0], 1.0)
    assert np.allclose(cloud.rot[0], [1.0, 0.0, 0.0, 0.0])
    assert cloud.sh.shape == (1, 1, 3)


def test_ply_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.ply"

    p.write_bytes(b"not a ply at all")
    with pytest.raises(PlyParseError, match="not a PLY"):
        load_ply(p)

    p.write_bytes(b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n")
    with pytest.raises(PlyParseError, match="binary_little_endian"):
        load_ply(p)

    header = (
        "ply\nformat binary_little_endian 1.0\nelement vertex 1\n"
        "property float x\nproperty float y\nproperty float z\nend_header\n"
    )
    p.write_bytes(header.encode() + b"\x00" * 12)
    with pytest.raises(PlyParseError, match="missing vertex properties"):
        load_ply(p)


def test_ply_truncation_reports_offset(tmp_path):
    rng = np.random.default_rng(2)
    cloud = make_cloud(rng, n=8, bands=1)
    path = tmp_path / "cloud.ply"
    save_ply(path, cloud)
    raw = path.read_bytes()
    path.write_bytes(raw[:-20])
    with pytest.raises(PlyParseError, match="truncated"):
        load_ply(path)


def test_splat_cloud_sequence_protocol():
    rng = np.random.default_rng(8)
    cloud = make_cloud(rng, n=5, bands=4)
    assert len(cloud) == 5
    s = cloud[2]
    assert isinstance(s, Splat3D)
    assert np.allclose(s.mu, cloud.mu[2])
    assert len(list(cloud)) == 5
    again = SplatCloud.from_splats(list(cloud))
    assert np.allclose(again.sh, cloud.sh)
    assert np.allclose(again.rot, cloud.rot)


def test_splat_validation():
    with pytest.raises(ValueError):
        Splat3D(mu=[0, 0, 0], scale=[0.0, 1, 1], rot=IDENTITY_Q, opacity=0.5,
                sh=np.zeros((1, 3)))
    with pytest.raises(ValueError):
        Splat3D(mu=[0, 0, 0], scale=[1, 1, 1], rot=IDENTITY_Q, opacity=1.5,
                sh=np.zeros((1, 3)))
    with pytest.raises(ValueError):
        Splat3D(mu=[0, 0, 0], scale=[1, 1, 1], rot=IDENTITY_Q, opacity=0.5,
                sh=np.zeros((2, 3)))
    # Unnormalized quaternions are normalized on ingest.
    s = Splat3D(mu=[0, 0, 0], scale=[1, 1, 1], rot=[2.0, 0, 0, 0], opacity=0.5,
                sh=np.zeros((1, 3)))
    assert np.linalg.norm(s.rot) == pytest.approx(1.0)
