"""Projection of candidate frames onto the quantization-interval constraint set.

Any real-valued candidate reconstruction of a coded frame implies residual
DCT coefficients relative to the frame's prediction.  Each coefficient of
the original frame is known to lie in a half-step interval around the
dequantized value, so clamping the candidate's coefficients into those
intervals can only move the candidate closer to the truth (the DCT is
orthonormal).  The clamp delta is applied back in the pixel domain, which
keeps candidates that already satisfy every bound bit-for-bit unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import SideInfo, transform_tiles
from .frames import Frame
from .transform import (
    CoeffBounds,
    QuantTable,
    coeff_bounds,
    dct2d,
    dequantize,
    idct2d,
    round_half_away,
)


@dataclass(frozen=True)
class ProjectionReport:
    """What one projection pass did, and the MSE effect if truth is known."""

    coefficients_clamped: int
    max_clamp_magnitude: float
    mse_before: float | None = None
    mse_after: float | None = None


def _as_candidate(candidate: Frame | np.ndarray, side: SideInfo) -> np.ndarray:
    arr = candidate.as_float() if isinstance(candidate, Frame) else np.asarray(
        candidate, dtype=np.float64
    )
    if arr.shape != side.prediction.pixels.shape:
        raise ValueError(
            f"candidate shape {arr.shape} does not match coded frame "
            f"{side.prediction.pixels.shape}"
        )
    return arr


def candidate_residual_coeffs(
    candidate: Frame | np.ndarray, side: SideInfo
) -> list[np.ndarray]:
    """Residual DCT coefficients of a candidate, one leaf-sized array per leaf.

    Transform tiles within a leaf are transformed independently, matching the
    layout of ``SideInfo.levels``.
    """
    arr = _as_candidate(candidate, side)
    pred = side.prediction.as_float()
    out = []
    for leaf in side.partition.leaves:
        resid = (
            arr[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size]
            - pred[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size]
        )
        coeffs = np.empty_like(resid)
        for oy, ox, tile in transform_tiles(leaf.size):
            coeffs[oy : oy + tile, ox : ox + tile] = dct2d(
                resid[oy : oy + tile, ox : ox + tile]
            )
        out.append(coeffs)
    return out


def clamp_to_bounds(coeffs: np.ndarray, bounds: CoeffBounds) -> np.ndarray:
    """Elementwise clamp of coefficients into [lower, upper]."""
    if np.any(bounds.lower > bounds.upper):
        raise ValueError("bounds must satisfy lower <= upper")
    return np.clip(coeffs, bounds.lower, bounds.upper)


def leaf_bounds(side: SideInfo) -> list[CoeffBounds]:
    """Quantization-interval bounds for every leaf of a coded frame."""
    qt = QuantTable(side.qp)
    return [coeff_bounds(dequantize(levels, qt), qt) for levels in side.levels]


def back_project(candidate: Frame | np.ndarray, side: SideInfo) -> np.ndarray:
    """One projection pass; returns the corrected frame as unrounded reals."""
    arr = _as_candidate(candidate, side).copy()
    coeffs_per_leaf = candidate_residual_coeffs(arr, side)
    bounds_per_leaf = leaf_bounds(side)
    for leaf, coeffs, bounds in zip(
        side.partition.leaves, coeffs_per_leaf, bounds_per_leaf
    ):
        delta = clamp_to_bounds(coeffs, bounds) - coeffs
        if not np.any(delta):
            continue
        block = arr[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size]
        for oy, ox, tile in transform_tiles(leaf.size):
            block[oy : oy + tile, ox : ox + tile] += idct2d(
                delta[oy : oy + tile, ox : ox + tile]
            )
    return arr


def back_project_frame(candidate: Frame | np.ndarray, side: SideInfo) -> Frame:
    """Projection followed by the final rounding and clip to [0, 255]."""
    arr = back_project(candidate, side)
    return Frame(np.clip(round_half_away(arr), 0, 255).astype(np.uint8))


def projection_report(
    candidate: Frame | np.ndarray,
    side: SideInfo,
    truth: Frame | None = None,
) -> ProjectionReport:
    """Run one projection and summarize the clamping it performed."""
    arr = _as_candidate(candidate, side)
    coeffs_per_leaf = candidate_residual_coeffs(arr, side)
    bounds_per_leaf = leaf_bounds(side)
    clamped = 0
    max_mag = 0.0
    for coeffs, bounds in zip(coeffs_per_leaf, bounds_per_leaf):
        delta = clamp_to_bounds(coeffs, bounds) - coeffs
        nz = delta != 0.0
        clamped += int(nz.sum())
        if nz.any():
            max_mag = max(max_mag, float(np.abs(delta).max()))
    mse_before = mse_after = None
    if truth is not None:
        ref = truth.as_float()
        projected = back_project(arr, side)
        mse_before = float(np.mean((arr - ref) ** 2))
        mse_after = float(np.mean((projected - ref) ** 2))
    return ProjectionReport(clamped, max_mag, mse_before, mse_after)
