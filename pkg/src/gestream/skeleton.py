"""Skeleton geometry shared by every module.

A pose frame is a flat real vector laid out as

    [joint_0 expmap(3), ..., joint_{J-1} expmap(3), root_pos(3), root_vel(3)]

so ``frame_width = J*3 + 6``.  The fixed ordering keeps overlap clamping and
checkpoint files byte-stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

ROT_DIMS_PER_JOINT = 3  # exponential map
ROOT_DIMS = 6  # 3 position + 3 linear velocity


@dataclass(frozen=True)
class SkeletonSpec:
    """Joint layout and frame rate for one skeleton."""

    joint_count: int
    fps: float
    joint_names: tuple[str, ...] = field(default=())
    rot_dims_per_joint: int = ROT_DIMS_PER_JOINT
    root_dims: int = ROOT_DIMS

    def __post_init__(self):
        if self.joint_count < 1:
            raise ValueError(f"joint_count must be >= 1, got {self.joint_count}")
        if self.fps <= 0:
            raise ValueError(f"fps must be > 0, got {self.fps}")
        if self.joint_names and len(self.joint_names) != self.joint_count:
            raise ValueError("joint_names length must match joint_count")

    @property
    def frame_width(self) -> int:
        return self.joint_count * self.rot_dims_per_joint + self.root_dims

    @property
    def rot_width(self) -> int:
        return self.joint_count * self.rot_dims_per_joint


def _named(count: int, prefix: str = "joint") -> tuple[str, ...]:
    return tuple(f"{prefix}_{i}" for i in range(count))


# Desk-scale default plus the two wider presets used by full-size skeletons.
PRESETS: dict[str, SkeletonSpec] = {
    "toy": SkeletonSpec(joint_count=5, fps=30.0, joint_names=_named(5)),
    "humanoid23": SkeletonSpec(joint_count=23, fps=30.0, joint_names=_named(23)),
    "capture57": SkeletonSpec(joint_count=57, fps=30.0, joint_names=_named(57)),
}


def preset(name: str) -> SkeletonSpec:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown skeleton preset {name!r}; choices: {sorted(PRESETS)}") from None


def canonicalize_expmap(values: np.ndarray, rot_width: int) -> np.ndarray:
    """Wrap every exponential-map 3-block of ``values`` to angle <= pi.

    ``values`` may be one frame (width,) or a stack (n, width).  Root columns
    are passed through unchanged.
    """
    arr = np.array(values, dtype=np.float64, copy=True)
    flat = arr.reshape(-1, arr.shape[-1])
    rots = flat[:, :rot_width].reshape(flat.shape[0], -1, 3)
    angles = np.linalg.norm(rots, axis=-1)
    nonzero = angles > 0.0
    wrapped = np.mod(angles, 2.0 * np.pi)
    # angle in (pi, 2pi) is the same rotation as angle-2pi about the same axis
    target = np.where(wrapped > np.pi, wrapped - 2.0 * np.pi, wrapped)
    scale = np.ones_like(angles)
    scale[nonzero] = target[nonzero] / angles[nonzero]
    flat[:, :rot_width] = (rots * scale[..., None]).reshape(flat.shape[0], -1)
    return flat.reshape(arr.shape)
