"""Pinhole camera: projection, extrinsics regression, occlusion pruning.

The camera maps world points p to pixels via x_cam = R p + t,
pixel = (fx*x/z + cx, fy*y/z + cy). Extrinsics are recovered from 3D-2D
correspondences by damped least squares over an axis-angle + translation
pose vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .validation import check_shape_match


class CalibrationError(RuntimeError):
    """Extrinsics regression failed; carries the best pose found."""

    def __init__(self, message, camera=None, rmse=None):
        super().__init__(message)
        self.camera = camera
        self.rmse = rmse


@dataclass(frozen=True, eq=False)  # identity hash: instances key rasterizer caches
class CameraModel:
    fx: float
    fy: float
    cx: float
    cy: float
    rotation: np.ndarray  # 3x3 world -> camera
    translation: np.ndarray  # 3-vector, world -> camera
    image_width: int
    image_height: int

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.image_width and 0 <= self.cy < self.image_height):
            raise ValueError("principal point outside image bounds")
        if np.abs(r.T @ r - np.eye(3)).max() >= 1e-9:
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) >= 1e-9:
            raise ValueError("rotation determinant must be +1")

    @property
    def center(self) -> np.ndarray:
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation


@dataclass(frozen=True)
class Correspondence:
    point_world: np.ndarray  # 3-vector, meters
    point_pixel: np.ndarray  # 2-vector, pixels

    def __post_init__(self):
        object.__setattr__(self, "point_world", np.asarray(self.point_world, dtype=np.float64).reshape(3))
        object.__setattr__(self, "point_pixel", np.asarray(self.point_pixel, dtype=np.float64).reshape(2))


def project(cam: CameraModel, p) -> tuple[np.ndarray, float]:
    """Project one world point; returns (pixel, camera-frame depth)."""
    p = np.asarray(p, dtype=np.float64).reshape(3)
    pc = cam.rotation @ p + cam.translation
    if pc[2] <= 1e-6:
        raise ValueError(f"point {p} is behind the camera (z={pc[2]:.3g})")
    pix = np.array([cam.fx * pc[0] / pc[2] + cam.cx, cam.fy * pc[1] / pc[2] + cam.cy])
    return pix, float(pc[2])


def project_many(cam: CameraModel, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of (N, 3) points; raises if any lie behind the camera."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
    pc = pts @ cam.rotation.T + cam.translation
    if np.any(pc[:, 2] <= 1e-6):
        raise ValueError("points behind the camera")
    pix = np.stack(
        [cam.fx * pc[:, 0] / pc[:, 2] + cam.cx, cam.fy * pc[:, 1] / pc[:, 2] + cam.cy], axis=1
    )
    return pix, pc[:, 2]


def unproject(cam: CameraModel, pixel, depth: float) -> np.ndarray:
    """Inverse of project at a known camera-frame depth."""
    u, v = pixel
    pc = np.array([(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth])
    return cam.rotation.T @ (pc - cam.translation)


def rodrigues(rvec) -> np.ndarray:
    """Axis-angle vector to rotation matrix."""
    rvec = np.asarray(rvec, dtype=np.float64).reshape(3)
    theta = np.linalg.norm(rvec)
    if theta < 1e-12:
        return np.eye(3)
    k = rvec / theta
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(theta) * kx + (1.0 - np.cos(theta)) * (kx @ kx)


def rotation_to_rvec(r: np.ndarray) -> np.ndarray:
    """Rotation matrix to axis-angle vector (inverse of rodrigues)."""
    r = np.asarray(r, dtype=np.float64)
    cos_t = np.clip((np.trace(r) - 1.0) / 2.0, -1.0, 1.0)
    theta = np.arccos(cos_t)
    if theta < 1e-12:
        return np.zeros(3)
    if abs(np.pi - theta) < 1e-6:
        # near pi the off-diagonal formula degenerates; use the symmetric part
        m = (r + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(m), 0.0))
        # fix signs from off-diagonals
        if m[0, 1] < 0:
            axis[1] = -axis[1]
        if m[0, 2] < 0:
            axis[2] = -axis[2]
        axis /= max(np.linalg.norm(axis), 1e-12)
        return theta * axis
    axis = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]) / (2.0 * np.sin(theta))
    return theta * axis


def look_at(position, target, fx, fy, cx, cy, width, height) -> CameraModel:
    """Camera at `position` whose optical axis points at `target` (world z-up)."""
    position = np.asarray(position, dtype=np.float64)
    forward = np.asarray(target, dtype=np.float64) - position
    forward /= np.linalg.norm(forward)
    up = np.array([0.0, 0.0, 1.0])
    right = np.cross(forward, up)
    nr = np.linalg.norm(right)
    if nr < 1e-9:
        raise ValueError("camera looking straight along world z; pick an oblique pose")
    right /= nr
    down = np.cross(forward, right)
    rot = np.stack([right, down, forward])
    # re-orthonormalize so the CameraModel invariant holds to 1e-9
    u, _, vt = np.linalg.svd(rot)
    rot = u @ vt
    trans = -rot @ position
    return CameraModel(fx, fy, cx, cy, rot, trans, width, height)


def pose_from_camera(cam: CameraModel) -> np.ndarray:
    return np.concatenate([rotation_to_rvec(cam.rotation), cam.translation])


def camera_from_pose(cam: CameraModel, pose) -> CameraModel:
    pose = np.asarray(pose, dtype=np.float64).reshape(6)
    return CameraModel(
        cam.fx, cam.fy, cam.cx, cam.cy, rodrigues(pose[:3]), pose[3:],
        cam.image_width, cam.image_height,
    )


def _residuals(cam: CameraModel, pose, world, pixels):
    rot = rodrigues(pose[:3])
    pc = world @ rot.T + pose[3:]
    z = pc[:, 2]
    if np.any(z <= 1e-6):
        return None
    u = cam.fx * pc[:, 0] / z + cam.cx
    v = cam.fy * pc[:, 1] / z + cam.cy
    return np.concatenate([u - pixels[:, 0], v - pixels[:, 1]])


@dataclass(frozen=True)
class ExtrinsicsFit:
    camera: CameraModel
    rmse: float
    iterations: int
    rmse_history: tuple


def regress_extrinsics(cam: CameraModel, pairs, init_pose) -> ExtrinsicsFit:
    """Fit extrinsics to 3D-2D pairs by Levenberg-Marquardt from init_pose.

    Damping starts at 1e-3, x10 on a rejected step, x0.1 on an accepted one;
    stops after 100 iterations or when the relative error change drops below
    1e-10. The returned history of accepted RMSE values is non-increasing.
    """
    if len(pairs) < 6:
        raise ValueError(f"need at least 6 correspondences, got {len(pairs)}")
    world = np.stack([c.point_world for c in pairs])
    pixels = np.stack([c.point_pixel for c in pairs])
    pose = np.asarray(init_pose, dtype=np.float64).reshape(6).copy()

    def cost(p):
        r = _residuals(cam, p, world, pixels)
        return (np.inf, None) if r is None else (float(r @ r), r)

    n = 2 * len(pairs)
    err, resid = cost(pose)
    if not np.isfinite(err):
        raise CalibrationError("initial pose puts points behind the camera")
    init_rmse = np.sqrt(err / n)
    history = [init_rmse]
    lam = 1e-3
    h = 1e-7
    iterations = 0
    converged = False
    while iterations < 100 and not converged:
        iterations += 1
        jac = np.empty((n, 6))
        for k in range(6):
            dp = pose.copy()
            dp[k] += h
            rp = _residuals(cam, dp, world, pixels)
            dp[k] -= 2 * h
            rm = _residuals(cam, dp, world, pixels)
            if rp is None or rm is None:
                raise CalibrationError(
                    "pose perturbation moved points behind the camera",
                    camera=camera_from_pose(cam, pose), rmse=history[-1],
                )
            jac[:, k] = (rp - rm) / (2 * h)
        jtj = jac.T @ jac
        jtr = jac.T @ resid
        accepted = False
        while lam < 1e12:
            damped = jtj + lam * np.diag(np.maximum(np.diag(jtj), 1e-12))
            try:
                step = np.linalg.solve(damped, -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            new_err, new_resid = cost(pose + step)
            if new_err < err:
                rel_change = (err - new_err) / max(err, 1e-300)
                pose = pose + step
                err, resid = new_err, new_resid
                history.append(np.sqrt(err / n))
                lam = max(lam * 0.1, 1e-12)
                accepted = True
                converged = rel_change < 1e-10
                break
            lam *= 10.0
        if not accepted:
            break
    final_rmse = history[-1]
    if not np.isfinite(final_rmse) or final_rmse > init_rmse + 1e-12:
        raise CalibrationError(
            f"failed to reduce reprojection error below init ({init_rmse:.4g} px)",
            camera=camera_from_pose(cam, pose), rmse=final_rmse,
        )
    return ExtrinsicsFit(camera_from_pose(cam, pose), float(final_rmse), iterations, tuple(history))


def prune_occluded(mask: np.ndarray, robot_depth: np.ndarray, observed_depth: np.ndarray,
                   tolerance: float = 0.005) -> np.ndarray:
    """Zero mask pixels whose observed depth is closer than the robot by > tolerance."""
    mask = np.asarray(mask)
    check_shape_match(mask, robot_depth, "mask/robot_depth")
    check_shape_match(mask, observed_depth, "mask/observed_depth")
    if np.any(~np.isfinite(robot_depth) & (mask == 1)):
        raise ValueError("robot_depth must be finite wherever mask=1")
    occluded = observed_depth < (robot_depth - tolerance)
    out = mask.copy()
    out[occluded] = 0
    return out


# Per-pixel ray geometry shared by the mask and scene rasterizers.


def pixel_ray_dirs(cam: CameraModel) -> np.ndarray:
    """(H, W, 3) camera-frame ray directions through pixel centers, z=1."""
    xs = (np.arange(cam.image_width) + 0.5 - cam.cx) / cam.fx
    ys = (np.arange(cam.image_height) + 0.5 - cam.cy) / cam.fy
    d = np.empty((cam.image_height, cam.image_width, 3))
    d[:, :, 0] = xs[None, :]
    d[:, :, 1] = ys[:, None]
    d[:, :, 2] = 1.0
    return d


def plane_hits(cam: CameraModel, z_plane: float):
    """World xy and camera depth where each pixel ray meets the plane z=z_plane.

    Returns (xy (H, W, 2), depth (H, W)); depth is +inf for rays that never
    reach the plane in front of the camera.
    """
    d_cam = pixel_ray_dirs(cam)
    d_world = d_cam @ cam.rotation  # R^T d for each pixel
    c = cam.center
    dz = d_world[:, :, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (z_plane - c[2]) / dz
    valid = (dz != 0) & (s > 1e-6)
    s = np.where(valid, s, np.inf)
    xy = c[None, None, :2] + s[:, :, None] * d_world[:, :, :2]
    return xy, s


def save_camera(cam: CameraModel, path) -> None:
    rot = " ".join(repr(float(v)) for v in cam.rotation.reshape(-1))
    trans = " ".join(repr(float(v)) for v in cam.translation)
    lines = [
        f"fx={cam.fx!r}",
        f"fy={cam.fy!r}",
        f"cx={cam.cx!r}",
        f"cy={cam.cy!r}",
        f"width={cam.image_width}",
        f"height={cam.image_height}",
        f"rotation={rot}",
        f"translation={trans}",
    ]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_camera(path) -> CameraModel:
    kv = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            kv[k.strip()] = v.strip()
    rot = np.array([float(t) for t in kv["rotation"].split()]).reshape(3, 3)
    trans = np.array([float(t) for t in kv["translation"].split()])
    return CameraModel(
        float(kv["fx"]), float(kv["fy"]), float(kv["cx"]), float(kv["cy"]),
        rot, trans, int(kv["width"]), int(kv["height"]),
    )


def load_correspondences(path) -> list[Correspondence]:
    """Text lines "x y z u v" -> correspondences."""
    out = []
    with open(path, encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            vals = [float(t) for t in line.split()]
            if len(vals) != 5:
                raise ValueError(f"{path}:{ln}: expected 5 values 'x y z u v'")
            out.append(Correspondence(vals[:3], vals[3:]))
    return out


def save_correspondences(pairs, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for c in pairs:
            vals = [float(v) for v in (*c.point_world, *c.point_pixel)]
            f.write(" ".join(repr(v) for v in vals) + "\n")
