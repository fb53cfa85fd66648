"""Planar capsule-link arm: kinematics, analytic dynamics, mask projection.

The arm rotates in a horizontal plane at the base height and is viewed by
an oblique 3D camera. Inverse kinematics uses a canonical posture: joints
beyond the second are held at zero, reducing the chain to an analytic
two-segment problem with a fixed elbow-up branch.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass

import numpy as np

from .camera import CameraModel, pixel_ray_dirs
from .validation import check_mask, check_shape_match


class ReachError(ValueError):
    """Inverse kinematics target unreachable; .reason is 'annulus' or 'joint_limit'."""

    def __init__(self, message, reason):
        super().__init__(message)
        self.reason = reason


@dataclass(frozen=True)
class RobotSpec:
    base_pose: tuple  # (x, y, z, yaw)
    links: tuple  # ((length, radius), ...)
    joint_limits: tuple  # ((min, max), ...) radians
    color: tuple  # RGB bytes
    workspace_bounds: tuple  # (xmin, xmax, ymin, ymax, zmin, zmax)

    def __post_init__(self):
        object.__setattr__(self, "base_pose", tuple(float(v) for v in self.base_pose))
        object.__setattr__(self, "links", tuple((float(l), float(r)) for l, r in self.links))
        object.__setattr__(self, "joint_limits", tuple((float(a), float(b)) for a, b in self.joint_limits))
        object.__setattr__(self, "color", tuple(int(c) for c in self.color))
        object.__setattr__(self, "workspace_bounds", tuple(float(v) for v in self.workspace_bounds))
        if len(self.links) < 2:
            raise ValueError("arm needs at least 2 links")
        if any(l <= 0 or r <= 0 for l, r in self.links):
            raise ValueError("link lengths and radii must be positive")
        if len(self.joint_limits) != len(self.links):
            raise ValueError("one joint limit pair per link")
        if any(lo >= hi for lo, hi in self.joint_limits):
            raise ValueError("joint limit min must be < max")
        xmin, xmax, ymin, ymax, zmin, zmax = self.workspace_bounds
        if not (xmin < xmax and ymin < ymax and zmin < zmax):
            raise ValueError("workspace box is degenerate")

    @property
    def n_joints(self) -> int:
        return len(self.links)


@dataclass(frozen=True)
class RobotState:
    ee_pose: np.ndarray  # (x, y, z, yaw)
    joints: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "ee_pose", np.asarray(self.ee_pose, dtype=np.float64).reshape(4))
        object.__setattr__(self, "joints", np.asarray(self.joints, dtype=np.float64).reshape(-1))


def fk(spec: RobotSpec, q) -> tuple[np.ndarray, np.ndarray]:
    """Forward kinematics: (n+1, 3) world link endpoints and ee pose (x, y, z, yaw)."""
    q = np.asarray(q, dtype=np.float64).reshape(-1)
    if q.shape[0] != spec.n_joints:
        raise ValueError(f"expected {spec.n_joints} joint angles, got {q.shape[0]}")
    for qi, (lo, hi) in zip(q, spec.joint_limits):
        if qi < lo - 1e-12 or qi > hi + 1e-12:
            raise ReachError(f"joint angle {qi:.4f} outside [{lo}, {hi}]", "joint_limit")
    bx, by, bz, byaw = spec.base_pose
    pts = np.empty((spec.n_joints + 1, 3))
    pts[0] = (bx, by, bz)
    theta = byaw
    x, y = bx, by
    for i, (length, _radius) in enumerate(spec.links):
        theta += q[i]
        x += length * np.cos(theta)
        y += length * np.sin(theta)
        pts[i + 1] = (x, y, bz)
    ee = np.array([x, y, bz, theta])
    return pts, ee


def _segment_lengths(spec: RobotSpec) -> tuple[float, float]:
    l1 = spec.links[0][0]
    l2 = sum(l for l, _ in spec.links[1:])
    return l1, l2


def ik(spec: RobotSpec, target) -> np.ndarray:
    """Joint angles reaching target (x, y); elbow-up branch, distal joints at zero."""
    target = np.asarray(target, dtype=np.float64).reshape(-1)[:2]
    bx, by, _, byaw = spec.base_pose
    dx, dy = target[0] - bx, target[1] - by
    dist = np.hypot(dx, dy)
    l1, l2 = _segment_lengths(spec)
    lo, hi = abs(l1 - l2), l1 + l2
    if dist > hi + 1e-12 or dist < lo - 1e-12:
        raise ReachError(
            f"target {target} at distance {dist:.4f} outside reachable annulus [{lo:.4f}, {hi:.4f}]",
            "annulus",
        )
    cos_alpha = (dist * dist - l1 * l1 - l2 * l2) / (2.0 * l1 * l2)
    alpha = np.arccos(np.clip(cos_alpha, -1.0, 1.0))
    bearing = np.arctan2(dy, dx) - byaw
    # elbow-up: elbow sits on the counterclockwise side of the chord
    q2 = -alpha
    q1 = bearing + np.arctan2(l2 * np.sin(alpha), l1 + l2 * np.cos(alpha))
    q1 = np.arctan2(np.sin(q1), np.cos(q1))  # wrap to (-pi, pi]
    q = np.zeros(spec.n_joints)
    q[0], q[1] = q1, q2
    for qi, (qlo, qhi) in zip(q, spec.joint_limits):
        if qi < qlo - 1e-12 or qi > qhi + 1e-12:
            raise ReachError(f"solution joint {qi:.4f} violates limits", "joint_limit")
    return q


def state_from_ee(spec: RobotSpec, x: float, y: float) -> RobotState:
    """Build a kinematically consistent state with the end effector at (x, y)."""
    q = ik(spec, (x, y))
    _, ee = fk(spec, q)
    return RobotState(np.array([x, y, spec.base_pose[2], ee[3]]), q)


def robot_dynamics(state: RobotState, action, spec: RobotSpec) -> RobotState:
    """Additive end-effector displacement clipped to the workspace box.

    Only the first two action components (dx, dy) move the planar arm; any
    further components (dz, dyaw, grip) are accepted but have no effect.
    """
    action = np.asarray(action, dtype=np.float64).reshape(-1)
    xmin, xmax, ymin, ymax, _, _ = spec.workspace_bounds
    nx = min(max(state.ee_pose[0] + action[0], xmin), xmax)
    ny = min(max(state.ee_pose[1] + (action[1] if action.size > 1 else 0.0), ymin), ymax)
    try:
        q = ik(spec, (nx, ny))
    except ReachError as e:
        raise ReachError(f"clipped target ({nx:.4f}, {ny:.4f}) unreachable: {e}", e.reason) from None
    _, ee = fk(spec, q)
    return RobotState(np.array([nx, ny, spec.base_pose[2], ee[3]]), q)


def normalize_state(state: RobotState, spec: RobotSpec) -> np.ndarray:
    """Map the end-effector position to the unit box via the workspace bounds."""
    xmin, xmax, ymin, ymax, zmin, zmax = spec.workspace_bounds
    spans = np.array([xmax - xmin, ymax - ymin, zmax - zmin])
    if np.any(spans <= 0):
        raise ValueError("degenerate workspace bounds")
    mins = np.array([xmin, ymin, zmin])
    return (state.ee_pose[:3] - mins) / spans


def denormalize_state(vec, spec: RobotSpec) -> np.ndarray:
    xmin, xmax, ymin, ymax, zmin, zmax = spec.workspace_bounds
    spans = np.array([xmax - xmin, ymax - ymin, zmax - zmin])
    mins = np.array([xmin, ymin, zmin])
    return mins + np.asarray(vec, dtype=np.float64).reshape(3) * spans


_ray_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


class _CamRays:
    __slots__ = ("ux", "uy", "uz")

    def __init__(self, cam: CameraModel):
        d = pixel_ray_dirs(cam)
        norm = np.sqrt(d[:, :, 0] * d[:, :, 0] + d[:, :, 1] * d[:, :, 1] + d[:, :, 2] * d[:, :, 2])
        self.ux = d[:, :, 0] / norm
        self.uy = d[:, :, 1] / norm
        self.uz = d[:, :, 2] / norm


def _unit_rays(cam: CameraModel) -> _CamRays:
    rays = _ray_cache.get(cam)
    if rays is None:
        rays = _CamRays(cam)
        _ray_cache[cam] = rays
    return rays


def _capsule_coverage(rays: _CamRays, p1, p2):
    """Min squared ray-segment distance per pixel plus the axis parameter t.

    Candidates: interior stationary point, the t=0 / t=1 segment ends, and
    the s=0 ray origin; the constrained minimum of the convex objective is
    always one of these. Expressions mirror the scalar oracle exactly.
    """
    ux, uy, uz = rays.ux, rays.uy, rays.uz
    wx, wy, wz = p2[0] - p1[0], p2[1] - p1[1], p2[2] - p1[2]
    c = wx * wx + wy * wy + wz * wz
    e = wx * p1[0] + wy * p1[1] + wz * p1[2]
    b = ux * wx + uy * wy + uz * wz
    d1 = ux * p1[0] + uy * p1[1] + uz * p1[2]
    d2 = ux * p2[0] + uy * p2[1] + uz * p2[2]

    def ray_point_dist2(dd, px, py, pz):
        s = np.maximum(dd, 0.0)
        fx = s * ux - px
        fy = s * uy - py
        fz = s * uz - pz
        return fx * fx + fy * fy + fz * fz

    # candidate 1: segment end t=0
    best = ray_point_dist2(d1, p1[0], p1[1], p1[2])
    best_t = np.zeros_like(best)
    # candidate 2: segment end t=1
    cand = ray_point_dist2(d2, p2[0], p2[1], p2[2])
    closer = cand < best
    best = np.where(closer, cand, best)
    best_t = np.where(closer, 1.0, best_t)
    # candidate 3: ray origin s=0 (closest segment point to the camera)
    t0 = min(max(-e / c, 0.0), 1.0)
    gx = p1[0] + t0 * wx
    gy = p1[1] + t0 * wy
    gz = p1[2] + t0 * wz
    cand = np.full_like(best, gx * gx + gy * gy + gz * gz)
    closer = cand < best
    best = np.where(closer, cand, best)
    best_t = np.where(closer, t0, best_t)
    # candidate 4: interior stationary point, when feasible
    denom = c - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s_int = (d1 * c - b * e) / denom
        t_int = (s_int * b - e) / c
    feasible = (denom > 0) & (t_int >= 0.0) & (t_int <= 1.0) & (s_int >= 0.0)
    fx = s_int * ux - (p1[0] + t_int * wx)
    fy = s_int * uy - (p1[1] + t_int * wy)
    fz = s_int * uz - (p1[2] + t_int * wz)
    cand = fx * fx + fy * fy + fz * fz
    closer = feasible & (cand < best)
    best = np.where(closer, cand, best)
    best_t = np.where(closer, t_int, best_t)
    return best, best_t


def render_mask(spec: RobotSpec, q, cam: CameraModel) -> tuple[np.ndarray, np.ndarray]:
    """Rasterize the arm: binary mask plus per-pixel camera-depth of the link axis.

    A pixel is covered iff its viewing ray passes within the link radius of
    the capsule axis; depth is +inf outside the mask.
    """
    pts, _ = fk(spec, q)
    pts_cam = pts @ cam.rotation.T + cam.translation
    if np.any(pts_cam[:, 2] <= 1e-6):
        raise ValueError("link endpoint behind the camera")
    rays = _unit_rays(cam)
    h, w = cam.image_height, cam.image_width
    mask = np.zeros((h, w), dtype=np.uint8)
    depth = np.full((h, w), np.inf)
    for i, (_length, radius) in enumerate(spec.links):
        p1, p2 = pts_cam[i], pts_cam[i + 1]
        dist2, t_axis = _capsule_coverage(rays, p1, p2)
        covered = dist2 < radius * radius
        axis_z = p1[2] + t_axis * (p2[2] - p1[2])
        depth = np.where(covered & (axis_z < depth), axis_z, depth)
        mask[covered] = 1
    return mask, depth


def proxy_robot(obs: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Replace robot pixels with the black proxy; world pixels untouched."""
    obs = np.asarray(obs)
    mask = check_mask(mask)
    check_shape_match(obs[..., 0] if obs.ndim == 3 else obs, mask, "observation/mask")
    out = obs.copy()
    out[mask == 1] = 0
    return out


GRAY_ARM = (90, 90, 95)
RED_ARM = (200, 60, 50)


def standard_arm(color=GRAY_ARM, forearm_scale: float = 1.0) -> RobotSpec:
    """The benchmark arm; variants recolor it and/or lengthen the forearm."""
    return RobotSpec(
        base_pose=(0.0, -0.30, 0.02, np.pi / 2),
        links=((0.28, 0.016), (0.22 * forearm_scale, 0.013)),
        joint_limits=((-3.0, 3.0), (-3.0, 3.0)),
        color=color,
        workspace_bounds=(-0.18, 0.18, -0.16, 0.12, 0.0, 0.10),
    )


def save_robot_spec(spec: RobotSpec, path) -> None:
    links = ";".join(f"{l!r},{r!r}" for l, r in spec.links)
    limits = ";".join(f"{a!r},{b!r}" for a, b in spec.joint_limits)
    lines = [
        "base=" + ",".join(repr(v) for v in spec.base_pose),
        f"links={links}",
        f"joint_limits={limits}",
        "color=" + ",".join(str(c) for c in spec.color),
        "bounds=" + ",".join(repr(v) for v in spec.workspace_bounds),
    ]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_robot_spec(path) -> RobotSpec:
    kv = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k, _, v = line.partition("=")
            kv[k.strip()] = v.strip()
    links = tuple(tuple(float(t) for t in part.split(",")) for part in kv["links"].split(";"))
    limits = tuple(tuple(float(t) for t in part.split(",")) for part in kv["joint_limits"].split(";"))
    return RobotSpec(
        base_pose=tuple(float(t) for t in kv["base"].split(",")),
        links=links,
        joint_limits=limits,
        color=tuple(int(t) for t in kv["color"].split(",")),
        workspace_bounds=tuple(float(t) for t in kv["bounds"].split(",")),
    )
