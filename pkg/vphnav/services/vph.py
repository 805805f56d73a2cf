"""
Polar histogram direction planner.

Pipeline per control cycle: shadow the raw scan into reachable distances,
cluster near beams into obstacle blocks, merge blocks separated by gaps the
vehicle cannot pass, mask concave blocks and unsafe beams, weight the rest
by a time-oriented cost and pick the best beam.
All functions are pure; angles inside this module are scan-frame degrees.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from vphnav.exceptions import NoFeasibleDirection
from vphnav.models import ConcavityRule, VphParams
from vphnav.services.world import Scan
from vphnav.utils import wrap_angle

logger = logging.getLogger(__name__)

Block = Tuple[int, int]

# A scan disc that just touches a beam still shadows it.
SHADOW_TOLERANCE = 1e-9


@dataclass(frozen=True)
class PolarField:
    """Reachable distance D_i per beam."""
    D: np.ndarray
    angular_resolution_deg: float = 1.0
    fov_start_deg: float = 0.0

    def __len__(self) -> int:
        return int(self.D.shape[0])

    def angles_deg(self) -> np.ndarray:
        return self.fov_start_deg + np.arange(len(self)) * self.angular_resolution_deg

    @property
    def heading_angle_deg(self) -> float:
        return self.fov_start_deg + 0.5 * (len(self) - 1) * self.angular_resolution_deg


@dataclass(frozen=True)
class BlockSet:
    """Inclusive, disjoint, ascending beam-index intervals."""
    blocks: Tuple[Block, ...] = ()

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def __getitem__(self, index: int) -> Block:
        return self.blocks[index]


@dataclass
class Histogram:
    """Everything one planning cycle produced, kept for diagnostics."""
    d: np.ndarray
    D: np.ndarray
    B: np.ndarray
    H: np.ndarray
    S: np.ndarray
    C: np.ndarray
    m: Optional[int]
    goal_bearing: float
    d_safe: float
    blocks: BlockSet = field(default_factory=BlockSet)

    def rows(self) -> List[dict]:
        """One row per beam: i, d_i, D_i, B_i, H_i, S_i, C_i."""
        return [
            {
                "i": i,
                "d_i": float(self.d[i]),
                "D_i": float(self.D[i]),
                "B_i": int(self.B[i]),
                "H_i": int(self.H[i]),
                "S_i": float(self.S[i]),
                "C_i": float(self.C[i]),
            }
            for i in range(len(self.D))
        ]


def modify_scan(scan: Scan, params: VphParams) -> PolarField:
    """
    Turn raw ranges into the distance the vehicle center can travel per beam.

    Each scan point O_j is inflated to a disc of radius R; beam i is cut
    short to the projection of O_j onto it when that disc crosses the beam
    before d_i. Only beams less than 90 degrees apart interact.

    Args:
        scan: Raw range scan
        params: Planner parameters (R, R')

    Returns:
        PolarField with D_i = max(0, min_j d'_ij - R')
    """
    d = np.asarray(scan.ranges, dtype=float)
    if d.ndim != 1 or d.shape[0] < 2:
        raise ValueError(f"scan must be a 1-D array of at least 2 ranges, got shape {d.shape}")

    index = np.arange(d.shape[0])
    separation_deg = np.abs(index[:, None] - index[None, :]) * scan.angular_resolution_deg
    gamma = np.deg2rad(separation_deg)

    lateral = d[None, :] * np.sin(gamma)
    projection = d[None, :] * np.cos(gamma)
    shadows = (
        (separation_deg < 90.0)
        & (lateral <= params.radius + SHADOW_TOLERANCE)
        & (projection <= d[:, None] + SHADOW_TOLERANCE)
    )

    d_prime = np.where(shadows, projection, d[:, None])
    D = np.maximum(d_prime.min(axis=1) - params.r_prime, 0.0)
    return PolarField(D=D, angular_resolution_deg=scan.angular_resolution_deg, fov_start_deg=scan.fov_start_deg)


def _chord(r1: float, r2: float, angle_deg: float) -> float:
    """Distance between two polar points by the law of cosines."""
    squared = r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * math.cos(math.radians(angle_deg))
    return math.sqrt(max(squared, 0.0))


def cluster_blocks(polar: PolarField, params: VphParams) -> BlockSet:
    """
    Group beams closer than the window radius into blocks.

    Neighbouring beams i, i+1 share a block when both are inside the window
    and their points are at most R_thr = R + 2*delta_d apart.

    Args:
        polar: Reachable distances
        params: Planner parameters (L_w, R, delta_d)

    Returns:
        BlockSet in ascending beam order
    """
    D = polar.D
    participating = D < params.window_radius
    cos_gamma = math.cos(math.radians(polar.angular_resolution_deg))
    gaps = np.sqrt(np.maximum(D[:-1] ** 2 + D[1:] ** 2 - 2.0 * D[:-1] * D[1:] * cos_gamma, 0.0))
    linked = participating[:-1] & participating[1:] & (gaps <= params.r_threshold)

    blocks: List[Block] = []
    start: Optional[int] = None
    for i in range(len(D)):
        if not participating[i]:
            continue
        if start is None:
            start = i
        if i == len(D) - 1 or not linked[i]:
            blocks.append((start, i))
            start = None
    return BlockSet(tuple(blocks))


def block_gap(polar: PolarField, left: Block, right: Block) -> float:
    """Cartesian distance between the facing ends of two blocks (left before right)."""
    end, start = left[1], right[0]
    return _chord(
        float(polar.D[end]),
        float(polar.D[start]),
        (start - end) * polar.angular_resolution_deg,
    )


def merge_blocks(blocks: BlockSet, polar: PolarField, params: VphParams) -> BlockSet:
    """
    Merge blocks whose facing ends are closer than R_thr.

    Blocks are swept in angular order. A new block is merged with the
    earliest kept block it is too close to, absorbing everything between
    them, so a near pair that straddles an independent block still becomes
    one obstacle. The result is a fixpoint: no two kept blocks are closer
    than R_thr.

    Args:
        blocks: Output of cluster_blocks
        polar: Reachable distances
        params: Planner parameters

    Returns:
        Merged BlockSet
    """
    merged: List[Block] = []
    for block in blocks:
        start, end = block
        for k, kept in enumerate(merged):
            if block_gap(polar, kept, (start, end)) < params.r_threshold:
                start = kept[0]
                del merged[k:]
                break
        merged.append((start, end))

    if len(merged) != len(blocks):
        logger.debug(f"[VPH] Merged {len(blocks)} blocks into {len(merged)}")
    return BlockSet(tuple(merged))


def symbol_function(blocks: BlockSet, polar: PolarField, params: VphParams) -> np.ndarray:
    """
    Mask beams of concave blocks.

    A block with a neighbour on each side is concave when both of its end
    distances compare the same way against the facing ends of its
    neighbours: shorter under the literal rule, longer under recessed.

    Returns:
        B array, 0 inside concave blocks and 1 elsewhere
    """
    D = polar.D
    B = np.ones(len(D), dtype=int)
    for k in range(1, len(blocks) - 1):
        start, end = blocks[k]
        prev_end = blocks[k - 1][1]
        next_start = blocks[k + 1][0]
        if params.concavity_rule == ConcavityRule.LITERAL:
            concave = D[start] < D[prev_end] and D[end] < D[next_start]
        else:
            concave = D[start] > D[prev_end] and D[end] > D[next_start]
        if concave:
            B[start:end + 1] = 0
    return B


def safe_distance(speed: float, params: VphParams) -> float:
    """Braking distance plus footprint and margin."""
    return speed ** 2 / (2.0 * params.deceleration) + params.radius + params.puffed_distance + params.safety_margin


def threshold_function(polar: PolarField, speed: float, params: VphParams) -> np.ndarray:
    """
    H_i = 1 where the reachable distance strictly exceeds D_safe.

    Raises:
        ValueError: If speed is negative
    """
    if speed < 0:
        raise ValueError(f"speed must be non-negative, got {speed}")
    return (polar.D > safe_distance(speed, params)).astype(int)


def cost_weights(polar: PolarField, goal_bearing: float, params: VphParams) -> np.ndarray:
    """S_i = k1*hg + k2*ho + k3, hg and ho in degrees."""
    angles = polar.angles_deg()
    hg = np.abs(angles - goal_bearing)
    ho = np.abs(angles - polar.heading_angle_deg)
    return params.k1 * hg + params.k2 * ho + params.k3


def cost_function(
    polar: PolarField,
    B: np.ndarray,
    H: np.ndarray,
    goal_bearing: float,
    params: VphParams,
) -> np.ndarray:
    """
    Time-oriented cost C_i = B_i * H_i * D_i / S_i.

    Args:
        polar: Reachable distances
        B: Symbol function
        H: Threshold function
        goal_bearing: Goal direction in scan-frame degrees, clamped to the field of view
        params: Planner parameters (k1, k2, k3)

    Returns:
        Non-negative cost per beam
    """
    angles = polar.angles_deg()
    goal_bearing = float(np.clip(goal_bearing, angles[0], angles[-1]))
    return B * H * polar.D / cost_weights(polar, goal_bearing, params)


def select_direction(
    C: np.ndarray,
    goal_bearing: float = 90.0,
    angles_deg: Optional[np.ndarray] = None,
) -> int:
    """
    Index of the maximum cost.
    Ties go to the beam closest to the goal bearing, then the smaller index.

    Args:
        C: Cost per beam
        goal_bearing: Goal direction in scan-frame degrees
        angles_deg: Beam angles; defaults to one degree per index

    Returns:
        Selected beam index m

    Raises:
        NoFeasibleDirection: If no beam has positive cost
    """
    C = np.asarray(C, dtype=float)
    best = float(C.max()) if C.size else 0.0
    if best <= 0.0:
        raise NoFeasibleDirection()

    angles = np.arange(C.size, dtype=float) if angles_deg is None else np.asarray(angles_deg, dtype=float)
    candidates = np.flatnonzero(np.isclose(C, best, rtol=1e-12, atol=0.0))
    hg = np.abs(angles[candidates] - goal_bearing)
    # lexsort sorts by the last key first
    order = np.lexsort((candidates, hg))
    return int(candidates[order[0]])


def goal_bearing(
    pose: Sequence[float],
    goal: Sequence[float],
    heading_angle_deg: float = 90.0,
    fov: Tuple[float, float] = (0.0, 180.0),
) -> float:
    """
    Scan-frame bearing of the goal, clamped to the field of view.

    Args:
        pose: (x, y, heading) in the world frame
        goal: (x, y) in the world frame
        heading_angle_deg: Scan-frame angle of the vehicle's forward axis
        fov: Field-of-view limits in scan-frame degrees

    Returns:
        Bearing in degrees
    """
    relative = math.atan2(goal[1] - pose[1], goal[0] - pose[0]) - pose[2]
    bearing = heading_angle_deg + math.degrees(wrap_angle(relative))
    return float(min(max(bearing, fov[0]), fov[1]))


def compute_histogram(
    scan: Scan,
    pose: Sequence[float],
    goal: Sequence[float],
    speed: float,
    params: VphParams,
) -> Histogram:
    """
    Run the whole planning pipeline and keep every intermediate array.
    Does not raise on a blocked field; ``m`` is None instead.
    """
    polar = modify_scan(scan, params)
    blocks = merge_blocks(cluster_blocks(polar, params), polar, params)
    B = symbol_function(blocks, polar, params)
    H = threshold_function(polar, speed, params)

    angles = polar.angles_deg()
    bearing = goal_bearing(pose, goal, polar.heading_angle_deg, (float(angles[0]), float(angles[-1])))
    S = cost_weights(polar, bearing, params)
    C = cost_function(polar, B, H, bearing, params)

    try:
        m: Optional[int] = select_direction(C, bearing, angles)
    except NoFeasibleDirection:
        m = None

    return Histogram(
        d=np.asarray(scan.ranges, dtype=float),
        D=polar.D,
        B=B,
        H=H,
        S=S,
        C=C,
        m=m,
        goal_bearing=bearing,
        d_safe=safe_distance(speed, params),
        blocks=blocks,
    )


def beam_to_heading(histogram_angle_deg: float, vehicle_heading: float, heading_angle_deg: float = 90.0) -> float:
    """World-frame heading of a scan-frame beam angle."""
    return vehicle_heading + math.radians(histogram_angle_deg - heading_angle_deg)


def plan_direction(
    scan: Scan,
    vehicle_heading: float,
    vehicle_pos: Sequence[float],
    goal: Sequence[float],
    speed: float,
    params: VphParams,
) -> float:
    """
    Desired world-frame heading for this cycle.

    Args:
        scan: Current range scan
        vehicle_heading: Vehicle heading (rad)
        vehicle_pos: Vehicle (x, y)
        goal: Goal (x, y)
        speed: Current speed (m/s)
        params: Planner parameters

    Returns:
        Heading in radians

    Raises:
        NoFeasibleDirection: If every beam is masked
    """
    pose = (vehicle_pos[0], vehicle_pos[1], vehicle_heading)
    histogram = compute_histogram(scan, pose, goal, speed, params)
    if histogram.m is None:
        raise NoFeasibleDirection()
    angle = scan.fov_start_deg + histogram.m * scan.angular_resolution_deg
    return beam_to_heading(angle, vehicle_heading, scan.heading_angle_deg)
