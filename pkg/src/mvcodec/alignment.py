"""Motion-guided warping and offset-augmented bilinear gathering.

Feature maps are (channels, height, width) float64 arrays.  An offset field
for a k x k sampling grid has 2*k*k channels: channel 2t is the horizontal
and channel 2t+1 the vertical displacement of tap t, taps in row-major grid
order.  All sampling clamps coordinates to the map; the coordinate gradient
is zero wherever the clamp saturates.

The warp follows the codec's motion convention: a leaf with vector (dx, dy)
reads its content from (x - dx, y - dy) in the map being warped.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .codec import MotionField, PartitionMap
from .nn import ConvLayer, conv_backward, conv_forward


def _check_map(fmap: np.ndarray) -> np.ndarray:
    fmap = np.asarray(fmap, dtype=np.float64)
    if fmap.ndim != 3:
        raise ValueError(f"feature map must be (channels, h, w), got {fmap.shape}")
    return fmap


# ---------------------------------------------------------------------------
# Bilinear sampling
# ---------------------------------------------------------------------------

def bilinear_sample(fmap: np.ndarray, x: float, y: float, channel: int = 0) -> float:
    """Bilinear interpolation at a single (x, y), clamped to the map."""
    fmap = _check_map(fmap)
    _, h, w = fmap.shape
    cx = min(max(float(x), 0.0), w - 1.0)
    cy = min(max(float(y), 0.0), h - 1.0)
    x0 = min(int(np.floor(cx)), max(w - 2, 0))
    y0 = min(int(np.floor(cy)), max(h - 2, 0))
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    fx = cx - x0
    fy = cy - y0
    plane = fmap[channel]
    top = (1.0 - fx) * plane[y0, x0] + fx * plane[y0, x1]
    bottom = (1.0 - fx) * plane[y1, x0] + fx * plane[y1, x1]
    return float((1.0 - fy) * top + fy * bottom)


def _prep_coords(px: np.ndarray, py: np.ndarray, h: int, w: int):
    """Clamped corner indices, fractions, and saturation masks."""
    cx = np.clip(px, 0.0, w - 1.0)
    cy = np.clip(py, 0.0, h - 1.0)
    x0 = np.minimum(np.floor(cx).astype(np.intp), max(w - 2, 0))
    y0 = np.minimum(np.floor(cy).astype(np.intp), max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = cx - x0
    fy = cy - y0
    sat_x = (px < 0.0) | (px > w - 1.0)
    sat_y = (py < 0.0) | (py > h - 1.0)
    return x0, x1, fx, sat_x, y0, y1, fy, sat_y


def _gather_corners(fmap: np.ndarray, x0, x1, y0, y1):
    c, h, w = fmap.shape
    flat = fmap.reshape(c, h * w)
    shape = (c,) + x0.shape
    v00 = flat[:, (y0 * w + x0).ravel()].reshape(shape)
    v01 = flat[:, (y0 * w + x1).ravel()].reshape(shape)
    v10 = flat[:, (y1 * w + x0).ravel()].reshape(shape)
    v11 = flat[:, (y1 * w + x1).ravel()].reshape(shape)
    return v00, v01, v10, v11


# ---------------------------------------------------------------------------
# Motion rasterization and MV-guided warping
# ---------------------------------------------------------------------------

def rasterize_motion(partition: PartitionMap, motion: MotionField) -> np.ndarray:
    """Dense (2, H, W) planes of per-pixel (dx, dy) from the covering leaf."""
    planes = np.zeros((2, partition.height, partition.width), dtype=np.float64)
    for leaf, vec in zip(partition.leaves, motion.vectors):
        if not vec.intra:
            planes[0, leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size] = vec.dx
            planes[1, leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size] = vec.dy
    return planes


def _warp_index(partition: PartitionMap, motion: MotionField) -> np.ndarray:
    h, w = partition.height, partition.width
    src_y = np.empty((h, w), dtype=np.intp)
    src_x = np.empty((h, w), dtype=np.intp)
    for leaf, vec in zip(partition.leaves, motion.vectors):
        dx, dy = (0, 0) if vec.intra else (vec.dx, vec.dy)
        ys = np.clip(np.arange(leaf.y - dy, leaf.y - dy + leaf.size), 0, h - 1)
        xs = np.clip(np.arange(leaf.x - dx, leaf.x - dx + leaf.size), 0, w - 1)
        src_y[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size] = ys[:, None]
        src_x[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size] = xs[None, :]
    return src_y * w + src_x


def warp_mv(fmap: np.ndarray, motion: MotionField, partition: PartitionMap) -> np.ndarray:
    """Copy each leaf's area from the map displaced by the leaf's vector."""
    fmap = _check_map(fmap)
    c, h, w = fmap.shape
    if (h, w) != (partition.height, partition.width):
        raise ValueError(
            f"map {w}x{h} does not match partition {partition.width}x{partition.height}"
        )
    idx = _warp_index(partition, motion)
    return fmap.reshape(c, h * w)[:, idx.ravel()].reshape(c, h, w)


def warp_mv_backward(
    upstream: np.ndarray, motion: MotionField, partition: PartitionMap
) -> np.ndarray:
    """Adjoint of :func:`warp_mv` (scatter-add along the same index map)."""
    upstream = _check_map(upstream)
    c, h, w = upstream.shape
    idx = _warp_index(partition, motion).ravel()
    grad = np.empty_like(upstream)
    for ch in range(c):
        grad[ch] = np.bincount(
            idx, weights=upstream[ch].ravel(), minlength=h * w
        ).reshape(h, w)
    return grad


# ---------------------------------------------------------------------------
# Deformable gathering
# ---------------------------------------------------------------------------

def kernel_grid(kernel_size: int) -> tuple[np.ndarray, np.ndarray]:
    """Nominal (gx, gy) tap displacements of a k x k grid, row-major."""
    if kernel_size % 2 == 0 or kernel_size < 1:
        raise ValueError("kernel size must be odd and positive")
    half = kernel_size // 2
    ky, kx = np.divmod(np.arange(kernel_size * kernel_size), kernel_size)
    return (kx - half).astype(np.float64), (ky - half).astype(np.float64)


def _tap_coords(kernel_size: int, offsets: np.ndarray, h: int, w: int):
    taps = kernel_size * kernel_size
    if offsets.shape != (2 * taps, h, w):
        raise ValueError(
            f"offsets must be ({2 * taps}, {h}, {w}) for kernel {kernel_size}, "
            f"got {offsets.shape}"
        )
    gx, gy = kernel_grid(kernel_size)
    xs = np.arange(w, dtype=np.float64)[None, None, :]
    ys = np.arange(h, dtype=np.float64)[None, :, None]
    px = xs + gx[:, None, None] + offsets[0::2]
    py = ys + gy[:, None, None] + offsets[1::2]
    return px, py


def _sample_taps(fmap: np.ndarray, px: np.ndarray, py: np.ndarray):
    _, h, w = fmap.shape
    x0, x1, fx, sat_x, y0, y1, fy, sat_y = _prep_coords(px, py, h, w)
    v00, v01, v10, v11 = _gather_corners(fmap, x0, x1, y0, y1)
    top = (1.0 - fx) * v00 + fx * v01
    bottom = (1.0 - fx) * v10 + fx * v11
    sampled = (1.0 - fy) * top + fy * bottom
    return sampled, (x0, x1, fx, sat_x, y0, y1, fy, sat_y, v00, v01, v10, v11)


def deformable_gather_cached(
    fmap: np.ndarray,
    kernel_size: int,
    offsets: np.ndarray,
    weights: np.ndarray,
) -> tuple[np.ndarray, tuple]:
    """:func:`deformable_gather` that also returns the sampling cache."""
    fmap = _check_map(fmap)
    offsets = np.asarray(offsets, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    c, h, w = fmap.shape
    taps = kernel_size * kernel_size
    if weights.ndim != 4 or weights.shape[1:] != (c, kernel_size, kernel_size):
        raise ValueError(
            f"weights must be (out, {c}, {kernel_size}, {kernel_size}), got {weights.shape}"
        )
    px, py = _tap_coords(kernel_size, offsets, h, w)
    sampled, ctx = _sample_taps(fmap, px, py)
    wr = weights.reshape(weights.shape[0], c, taps)
    out = np.einsum("oct,cthw->ohw", wr, sampled, optimize=True)
    return out, (sampled, ctx)


def deformable_gather(
    fmap: np.ndarray,
    kernel_size: int,
    offsets: np.ndarray,
    weights: np.ndarray,
) -> np.ndarray:
    """Convolution whose taps are displaced by per-position offsets.

    With all-zero offsets this is an ordinary cross-correlation with
    clamp-to-edge padding.  ``weights`` is (out_ch, in_ch, k, k); there is
    no bias term.
    """
    return deformable_gather_cached(fmap, kernel_size, offsets, weights)[0]


def deformable_gather_backward(
    upstream: np.ndarray,
    fmap: np.ndarray,
    kernel_size: int,
    offsets: np.ndarray,
    weights: np.ndarray,
    cache: tuple | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gradients (d_map, d_offsets, d_weights) of :func:`deformable_gather`."""
    fmap = _check_map(fmap)
    upstream = np.asarray(upstream, dtype=np.float64)
    offsets = np.asarray(offsets, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    c, h, w = fmap.shape
    taps = kernel_size * kernel_size
    out_ch = weights.shape[0]
    if upstream.shape != (out_ch, h, w):
        raise ValueError(f"upstream must be ({out_ch}, {h}, {w}), got {upstream.shape}")

    if cache is None:
        px, py = _tap_coords(kernel_size, offsets, h, w)
        sampled, ctx = _sample_taps(fmap, px, py)
    else:
        sampled, ctx = cache
    x0, x1, fx, sat_x, y0, y1, fy, sat_y, v00, v01, v10, v11 = ctx

    wr = weights.reshape(out_ch, c, taps)
    d_weights = np.einsum("ohw,cthw->oct", upstream, sampled, optimize=True).reshape(
        weights.shape
    )
    d_sampled = np.einsum("ohw,oct->cthw", upstream, wr, optimize=True)

    # input gradient: scatter the four corner weights of every tap
    w00 = (1.0 - fx) * (1.0 - fy)
    w01 = fx * (1.0 - fy)
    w10 = (1.0 - fx) * fy
    w11 = fx * fy
    idx = np.concatenate(
        [
            (y0 * w + x0).ravel(),
            (y0 * w + x1).ravel(),
            (y1 * w + x0).ravel(),
            (y1 * w + x1).ravel(),
        ]
    )
    d_map = np.empty_like(fmap)
    for ch in range(c):
        vals = np.concatenate(
            [
                (d_sampled[ch] * w00).ravel(),
                (d_sampled[ch] * w01).ravel(),
                (d_sampled[ch] * w10).ravel(),
                (d_sampled[ch] * w11).ravel(),
            ]
        )
        d_map[ch] = np.bincount(idx, weights=vals, minlength=h * w).reshape(h, w)

    # coordinate gradients, zero where the clamp saturates
    ds_dx = (1.0 - fy) * (v01 - v00) + fy * (v11 - v10)
    ds_dy = (1.0 - fx) * (v10 - v00) + fx * (v11 - v01)
    d_px = np.einsum("cthw,cthw->thw", d_sampled, ds_dx, optimize=True)
    d_py = np.einsum("cthw,cthw->thw", d_sampled, ds_dy, optimize=True)
    d_px[sat_x] = 0.0
    d_py[sat_y] = 0.0
    d_offsets = np.empty_like(offsets)
    d_offsets[0::2] = d_px
    d_offsets[1::2] = d_py
    return d_map, d_offsets, d_weights


# ---------------------------------------------------------------------------
# Offset prediction
# ---------------------------------------------------------------------------

@dataclass
class OffsetPredictor:
    """Two-layer 3x3 conv stack producing a 2*k*k-channel offset field."""

    hidden: ConvLayer
    out: ConvLayer

    def __post_init__(self):
        if self.out.weights.shape[0] % 2:
            raise ValueError("offset output channels must be even (x/y pairs)")
        if self.out.activation != "none":
            raise ValueError("offset output layer must be linear")


def predict_offsets(
    feat_t: np.ndarray,
    feat_prev: np.ndarray,
    motion_planes: np.ndarray,
    predictor: OffsetPredictor,
) -> np.ndarray:
    """Offset field from concatenated current/neighbor features and motion."""
    x = np.concatenate(
        [_check_map(feat_t), _check_map(feat_prev), _check_map(motion_planes)], axis=0
    )
    return conv_forward(predictor.out, conv_forward(predictor.hidden, x))


def predict_offsets_backward(
    upstream: np.ndarray,
    feat_t: np.ndarray,
    feat_prev: np.ndarray,
    motion_planes: np.ndarray,
    predictor: OffsetPredictor,
):
    """Gradients for inputs and both conv layers of the offset predictor.

    Returns ((d_feat_t, d_feat_prev, d_motion), (dw_hidden, db_hidden,
    dw_out, db_out)).
    """
    feat_t = _check_map(feat_t)
    feat_prev = _check_map(feat_prev)
    motion_planes = _check_map(motion_planes)
    x = np.concatenate([feat_t, feat_prev, motion_planes], axis=0)
    h1 = conv_forward(predictor.hidden, x)
    d_h1, dw_out, db_out = conv_backward(predictor.out, h1, upstream)
    d_x, dw_hidden, db_hidden = conv_backward(predictor.hidden, x, d_h1)
    c1 = feat_t.shape[0]
    c2 = c1 + feat_prev.shape[0]
    return (
        (d_x[:c1], d_x[c1:c2], d_x[c2:]),
        (dw_hidden, db_hidden, dw_out, db_out),
    )
