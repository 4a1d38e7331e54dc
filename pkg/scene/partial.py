"""
Module: partial
Partial-scan simulation: contiguous half-space crop, farthest-point
downsampling and Gaussian jitter.
"""
import numpy as np

from logs.project_log import main_logger
from scene.errors import TooFewPoints
from scene.schemas import LabeledCloud, PartialScan, ScanProvenance

__all__ = ('farthest_point_sample', 'crop_mask', 'make_partial', 'add_noise', 'DEFAULT_TARGET_COUNT')

DEFAULT_TARGET_COUNT = 2048


def farthest_point_sample(points: np.ndarray, count: int, seed: int) -> np.ndarray:
    """
    Greedy farthest-point sampling.

    Args:
        points (np.ndarray): N x 3 points.
        count (int): Number of indices to pick, 1 <= count <= N.
        seed (int): Chooses the starting point.

    Returns:
        np.ndarray: ``count`` distinct indices in pick order.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if not 1 <= count <= len(pts):
        raise ValueError(f"cannot pick {count} of {len(pts)} points")
    rng = np.random.default_rng(seed)
    picked = np.empty(count, dtype=np.int64)
    picked[0] = rng.integers(len(pts))
    nearest = np.sum((pts - pts[picked[0]]) ** 2, axis=1)
    for i in range(1, count):
        # argmax returns the lowest index on ties
        picked[i] = int(np.argmax(nearest))
        nearest = np.minimum(nearest, np.sum((pts - pts[picked[i]]) ** 2, axis=1))
    return picked


def crop_mask(points: np.ndarray, ratio: float, direction: np.ndarray) -> np.ndarray:
    """Boolean mask of the round(ratio·N) points farthest along ``direction``."""
    projection = np.asarray(points) @ direction
    removed = int(round(ratio * len(projection)))
    order = np.argsort(-projection, kind="stable")
    mask = np.zeros(len(projection), dtype=bool)
    mask[order[:removed]] = True
    return mask


def make_partial(cloud: LabeledCloud, ratio: float, seed: int,
                 target_count: int = DEFAULT_TARGET_COUNT, shape_id: str = "") -> PartialScan:
    """
    Removes a contiguous cap of the shape seen from a random direction, then
    downsamples what is left.

    Args:
        cloud (LabeledCloud): Complete shape.
        ratio (float): Fraction of points removed, 0 < ratio < 1.
        seed (int): Drives the crop direction and the downsampling start.
        target_count (int): Output size.
        shape_id (str): Provenance label.

    Returns:
        PartialScan: Exactly ``target_count`` points, a subset of ``cloud.points``.

    Raises:
        TooFewPoints: The crop keeps fewer than ``target_count`` points.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    removed = crop_mask(cloud.points, ratio, direction)
    kept = cloud.points[~removed]
    if len(kept) < target_count:
        raise TooFewPoints(f"{len(kept)} points remain after the crop, {target_count} requested")
    picked = farthest_point_sample(kept, target_count, int(rng.integers(2 ** 31)))
    main_logger.debug("partial scan %s: ratio=%.2f kept=%d out=%d", shape_id, ratio, len(kept), target_count)
    return PartialScan(points=kept[np.sort(picked)],
                       source=ScanProvenance(shape_id=shape_id, ratio=ratio, crop_seed=seed))


def add_noise(scan: PartialScan, sigma: float, seed: int) -> PartialScan:
    """
    Jitters every coordinate with N(0, sigma²); the 3-D RMS offset is sigma·√3,
    i.e. sigma as a fraction of the unit-cube diagonal.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    rng = np.random.default_rng(seed)
    points = scan.points + sigma * rng.normal(size=scan.points.shape)
    return PartialScan(points=points, source=scan.source.model_copy(update={"noise_sigma": sigma}))
