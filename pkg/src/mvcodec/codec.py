"""Deterministic hybrid mini video codec (IPPP, quadtree, integer-pel MC).

The encoder runs a closed loop: every prediction is formed from frames the
decoder will reconstruct identically, so encoder state and decoder output
match bit for bit.  Each frame is coded as a raster scan of 16x16
macroblocks, recursively quadtree-split down to 4x4 while the mean absolute
prediction residual of a block exceeds the split threshold.  Inter leaves
carry one integer motion vector found by exhaustive SAD search; intra leaves
use DC prediction from already-decoded neighbors.  Residuals go through the
block DCT and flat quantizer of :mod:`mvcodec.transform` and an exp-Golomb
bitstream.

Motion convention: a vector (dx, dy) means the block content moved right by
dx and down by dy since the reference, so prediction samples the reference
at (x - dx, y - dy) with clamp-to-edge.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .bitio import BitReader, BitstreamError, BitWriter, signed_to_unsigned, unsigned_to_signed
from .frames import MACROBLOCK, Frame
from .transform import (
    LEVEL_LIMIT,
    QuantTable,
    dct2d,
    dequantize,
    idct2d,
    inverse_zigzag,
    quantize,
    round_half_away,
    zigzag,
)

MAGIC = b"MVC1"
STREAM_VERSION = 1
_HEADER_FMT = "<4sHHHIBBH"
HEADER_SIZE = struct.calcsize(_HEADER_FMT)

MAX_TRANSFORM = 8
LEAF_SIZES = (16, 8, 4)


# ---------------------------------------------------------------------------
# Data model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Leaf:
    """One partition leaf: origin in pixels plus side length."""

    x: int
    y: int
    size: int


@dataclass(frozen=True)
class LeafMotion:
    """Motion of one leaf; intra leaves have no vector."""

    intra: bool
    dx: int = 0
    dy: int = 0


@dataclass(frozen=True)
class PartitionMap:
    """Quadtree tiling of the macroblock grid, leaves in coding order.

    Coding order is macroblock raster order with quadrants visited
    top-left, top-right, bottom-left, bottom-right; that order guarantees a
    leaf's top row and left column are decoded before the leaf itself.
    """

    width: int
    height: int
    leaves: tuple[Leaf, ...]

    def __post_init__(self):
        if self.width % MACROBLOCK or self.height % MACROBLOCK:
            raise ValueError("partition dimensions must be multiples of 16")
        cover = np.zeros((self.height, self.width), dtype=bool)
        for leaf in self.leaves:
            if leaf.size not in LEAF_SIZES:
                raise ValueError(f"illegal leaf size {leaf.size}")
            if leaf.x % leaf.size or leaf.y % leaf.size:
                raise ValueError(f"leaf origin ({leaf.x},{leaf.y}) not aligned to {leaf.size}")
            if leaf.x + leaf.size > self.width or leaf.y + leaf.size > self.height:
                raise ValueError("leaf extends outside the frame")
            patch = cover[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size]
            if patch.any():
                raise ValueError(f"leaf at ({leaf.x},{leaf.y}) overlaps another leaf")
            patch[:] = True
        if not cover.all():
            raise ValueError("leaves do not tile the frame")


@dataclass(frozen=True)
class MotionField:
    """Per-leaf motion, parallel to ``PartitionMap.leaves``."""

    vectors: tuple[LeafMotion, ...]


@dataclass(frozen=True)
class SideInfo:
    """Decoder-visible priors of one coded frame.

    ``levels`` holds one int32 array per leaf (leaf-sized, transform tiles
    in place); dequantizing, inverse transforming, adding ``prediction``
    and rounding/clipping to [0, 255] reproduces the decoded frame exactly.
    """

    frame_index: int
    qp: int
    partition: PartitionMap
    motion: MotionField
    prediction: Frame
    levels: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.levels) != len(self.partition.leaves):
            raise ValueError("need exactly one level block per partition leaf")
        if len(self.motion.vectors) != len(self.partition.leaves):
            raise ValueError("need exactly one motion entry per partition leaf")


@dataclass(frozen=True)
class CodecConfig:
    """Encoder settings; qp is required, the rest have sane defaults.

    intra_period 0 means only the first frame is intra.
    """

    qp: int
    search_radius: int = 8
    split_threshold: float = 6.0
    intra_period: int = 0

    def __post_init__(self):
        QuantTable(self.qp)  # range check
        if not 0 <= self.search_radius <= 127:
            raise ValueError(f"search radius {self.search_radius} outside [0, 127]")
        if self.split_threshold < 0:
            raise ValueError("split threshold must be non-negative")
        if not 0 <= round(self.split_threshold * 10) <= 0xFFFF:
            raise ValueError("split threshold too large for the stream header")
        if self.intra_period < 0:
            raise ValueError("intra period must be non-negative")


@dataclass(frozen=True)
class StreamHeader:
    width: int
    height: int
    frame_count: int
    qp: int
    search_radius: int
    split_threshold: float


def transform_tiles(size: int) -> list[tuple[int, int, int]]:
    """Transform blocks tiling a leaf, as (offset_y, offset_x, tile_size).

    Leaves larger than the 8x8 transform are covered by a raster of 8x8
    tiles; smaller leaves are a single tile.
    """
    tile = min(size, MAX_TRANSFORM)
    return [(oy, ox, tile) for oy in range(0, size, tile) for ox in range(0, size, tile)]


# ---------------------------------------------------------------------------
# Prediction primitives
# ---------------------------------------------------------------------------

def _mc_block(ref: np.ndarray, x: int, y: int, size: int, dx: int, dy: int) -> np.ndarray:
    """Motion-compensated block copy with clamp-to-edge."""
    h, w = ref.shape
    ys = np.clip(np.arange(y - dy, y - dy + size), 0, h - 1)
    xs = np.clip(np.arange(x - dx, x - dx + size), 0, w - 1)
    return ref[np.ix_(ys, xs)]


def _dc_predict(recon: np.ndarray, x: int, y: int, size: int) -> int:
    """DC intra prediction: mean of decoded left-column / top-row neighbors."""
    total = 0
    count = 0
    if x > 0:
        col = recon[y : y + size, x - 1]
        total += int(col.sum())
        count += size
    if y > 0:
        row = recon[y - 1, x : x + size]
        total += int(row.sum())
        count += size
    if count == 0:
        return 128
    return int(round_half_away(total / count))


def motion_search(
    current: Frame | np.ndarray,
    reference: Frame | np.ndarray,
    leaf: Leaf,
    radius: int,
) -> tuple[int, int]:
    """Exhaustive integer-pel SAD search over [-radius, radius]^2.

    Ties resolve to the smallest |dx|+|dy|, then smaller dy, then smaller dx.
    """
    cur = current.pixels if isinstance(current, Frame) else current
    ref = reference.pixels if isinstance(reference, Frame) else reference
    h, w = ref.shape
    block = cur[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size].astype(np.int32)
    ys = np.clip(np.arange(leaf.y - radius, leaf.y + leaf.size + radius), 0, h - 1)
    xs = np.clip(np.arange(leaf.x - radius, leaf.x + leaf.size + radius), 0, w - 1)
    window = ref[np.ix_(ys, xs)].astype(np.int32)
    candidates = sliding_window_view(window, (leaf.size, leaf.size))
    sad = np.abs(candidates - block).sum(axis=(2, 3))
    # candidate at window offset (i, j) corresponds to (dy, dx) = (r - i, r - j)
    disp = radius - np.arange(2 * radius + 1)
    dys = np.broadcast_to(disp[:, None], sad.shape)
    dxs = np.broadcast_to(disp[None, :], sad.shape)
    order = np.lexsort(
        (dxs.ravel(), dys.ravel(), (np.abs(dxs) + np.abs(dys)).ravel(), sad.ravel())
    )
    best = order[0]
    return int(dxs.ravel()[best]), int(dys.ravel()[best])


def choose_partition(current: Frame, prediction: Frame, threshold: float) -> PartitionMap:
    """Quadtree split of each macroblock against a fixed prediction frame.

    A block splits while its mean absolute residual exceeds the threshold;
    4x4 blocks never split.
    """
    if current.width != prediction.width or current.height != prediction.height:
        raise ValueError("current and prediction dimensions differ")
    resid = np.abs(current.as_float() - prediction.as_float())
    leaves: list[Leaf] = []

    def split(x: int, y: int, size: int) -> None:
        block = resid[y : y + size, x : x + size]
        if size > 4 and float(block.mean()) > threshold:
            half = size // 2
            split(x, y, half)
            split(x + half, y, half)
            split(x, y + half, half)
            split(x + half, y + half, half)
        else:
            leaves.append(Leaf(x, y, size))

    for my in range(0, current.height, MACROBLOCK):
        for mx in range(0, current.width, MACROBLOCK):
            split(mx, my, MACROBLOCK)
    return PartitionMap(current.width, current.height, tuple(leaves))


def predict_frame(
    intra_frame: bool,
    reference: Frame | None,
    motion: MotionField,
    partition: PartitionMap,
    decoded: Frame,
) -> Frame:
    """Assemble the prediction frame for a coded frame, leaf by leaf.

    ``decoded`` supplies the neighbor samples for DC intra leaves; since
    leaves never change once reconstructed, the finished decoded frame gives
    the same neighbor values the in-progress decoder state did.
    """
    if intra_frame and not all(v.intra for v in motion.vectors):
        raise ValueError("intra frames must have every leaf flagged intra")
    ref = reference.pixels.astype(np.int32) if reference is not None else None
    dec = decoded.pixels.astype(np.int32)
    pred = np.zeros_like(dec)
    for leaf, vec in zip(partition.leaves, motion.vectors):
        if vec.intra:
            pred[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size] = _dc_predict(
                dec, leaf.x, leaf.y, leaf.size
            )
        else:
            if ref is None:
                raise ValueError("inter leaf needs a reference frame")
            pred[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size] = _mc_block(
                ref, leaf.x, leaf.y, leaf.size, vec.dx, vec.dy
            )
    return Frame(pred.astype(np.uint8))


def _reconstruct_block(pred: np.ndarray, levels: np.ndarray, qt: QuantTable) -> np.ndarray:
    """Dequantize + inverse transform + prediction, rounded and clipped."""
    size = pred.shape[0]
    resid = np.empty((size, size), dtype=np.float64)
    for oy, ox, tile in transform_tiles(size):
        resid[oy : oy + tile, ox : ox + tile] = idct2d(
            dequantize(levels[oy : oy + tile, ox : ox + tile], qt)
        )
    recon = round_half_away(pred.astype(np.float64) + resid)
    return np.clip(recon, 0, 255).astype(np.int32)


def reconstruct_from_side_info(side: SideInfo) -> Frame:
    """Rebuild the decoded frame from side information alone."""
    qt = QuantTable(side.qp)
    pred = side.prediction.pixels.astype(np.int32)
    out = np.zeros_like(pred)
    for leaf, levels in zip(side.partition.leaves, side.levels):
        block = pred[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size]
        out[leaf.y : leaf.y + leaf.size, leaf.x : leaf.x + leaf.size] = _reconstruct_block(
            block, levels, qt
        )
    return Frame(out.astype(np.uint8))


# ---------------------------------------------------------------------------
# Level (coefficient) coding
# ---------------------------------------------------------------------------
#
# Levels are scanned in zigzag order.  Each value maps to an unsigned code
# (0, -1, 1, ... -> 0, 1, 2, ...) shifted up by one and written as ue(v);
# the spare ue(0) codeword "1" is the end-of-block marker, emitted only when
# nonzero coefficients end before the scan does.

def _write_levels(writer: BitWriter, levels: np.ndarray) -> None:
    zz = zigzag(levels)
    nz = np.nonzero(zz)[0]
    last = int(nz[-1]) if nz.size else -1
    for v in zz[: last + 1]:
        writer.write_ue(signed_to_unsigned(int(v)) + 1)
    if last + 1 < zz.size:
        writer.write_ue(0)


def _read_levels(reader: BitReader, size: int) -> np.ndarray:
    count = size * size
    zz = np.zeros(count, dtype=np.int32)
    for i in range(count):
        code = reader.read_ue()
        if code == 0:
            break
        value = unsigned_to_signed(code - 1)
        if abs(value) > LEVEL_LIMIT:
            raise BitstreamError(f"coefficient level {value} overflows signed 16 bits")
        zz[i] = value
    return inverse_zigzag(zz, size)


# ---------------------------------------------------------------------------
# Stream header
# ---------------------------------------------------------------------------

def _pack_header(width, height, frame_count, config: CodecConfig) -> bytes:
    return struct.pack(
        _HEADER_FMT,
        MAGIC,
        STREAM_VERSION,
        width,
        height,
        frame_count,
        config.qp,
        config.search_radius,
        round(config.split_threshold * 10),
    )


def parse_header(data: bytes) -> StreamHeader:
    if len(data) < HEADER_SIZE:
        raise BitstreamError("stream shorter than its header")
    magic, version, width, height, frame_count, qp, radius, tau10 = struct.unpack_from(
        _HEADER_FMT, data
    )
    if magic != MAGIC:
        raise BitstreamError(f"bad magic {magic!r}")
    if version != STREAM_VERSION:
        raise BitstreamError(f"unsupported stream version {version}")
    if width == 0 or height == 0 or width % MACROBLOCK or height % MACROBLOCK:
        raise BitstreamError(f"illegal dimensions {width}x{height}")
    if qp > 51:
        raise BitstreamError(f"qp {qp} outside [0, 51]")
    if frame_count == 0:
        raise BitstreamError("stream carries no frames")
    return StreamHeader(width, height, frame_count, qp, radius, tau10 / 10.0)


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------

def encode_with_reconstruction(
    frames: list[Frame], config: CodecConfig
) -> tuple[bytes, list[Frame]]:
    """Encode and also return the encoder's closed-loop reconstructions."""
    if not frames:
        raise ValueError("need at least one frame")
    width, height = frames[0].width, frames[0].height
    for f in frames[1:]:
        if f.width != width or f.height != height:
            raise ValueError("all frames must share dimensions")
    qt = QuantTable(config.qp)
    writer = BitWriter()
    recons: list[Frame] = []

    for t, frame in enumerate(frames):
        intra = t == 0 or (config.intra_period > 0 and t % config.intra_period == 0)
        writer.write_bit(1 if intra else 0)
        cur = frame.pixels.astype(np.int32)
        ref = None if intra else recons[-1].pixels.astype(np.int32)
        recon = np.zeros((height, width), dtype=np.int32)

        def code_block(x: int, y: int, size: int) -> None:
            if intra:
                pred = np.full((size, size), _dc_predict(recon, x, y, size), dtype=np.int32)
            else:
                dx, dy = motion_search(cur, ref, Leaf(x, y, size), config.search_radius)
                pred = _mc_block(ref, x, y, size, dx, dy)
            resid = cur[y : y + size, x : x + size] - pred
            if size > 4:
                do_split = float(np.abs(resid).mean()) > config.split_threshold
                writer.write_bit(1 if do_split else 0)
                if do_split:
                    half = size // 2
                    code_block(x, y, half)
                    code_block(x + half, y, half)
                    code_block(x, y + half, half)
                    code_block(x + half, y + half, half)
                    return
            writer.write_bit(1 if intra else 0)
            if not intra:
                writer.write_se(dx)
                writer.write_se(dy)
            levels = np.zeros((size, size), dtype=np.int32)
            residf = resid.astype(np.float64)
            for oy, ox, tile in transform_tiles(size):
                coeffs = dct2d(residf[oy : oy + tile, ox : ox + tile])
                lv = quantize(coeffs, qt)
                levels[oy : oy + tile, ox : ox + tile] = lv
                _write_levels(writer, lv)
            recon[y : y + size, x : x + size] = _reconstruct_block(pred, levels, qt)

        for my in range(0, height, MACROBLOCK):
            for mx in range(0, width, MACROBLOCK):
                code_block(mx, my, MACROBLOCK)
        recons.append(Frame(recon.astype(np.uint8)))

    header = _pack_header(width, height, len(frames), config)
    return header + writer.getvalue(), recons


def encode_sequence(frames: list[Frame], config: CodecConfig) -> bytes:
    """Encode a sequence to a self-contained bitstream."""
    return encode_with_reconstruction(frames, config)[0]


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------

def decode_sequence(data: bytes) -> tuple[list[Frame], list[SideInfo]]:
    """Decode a bitstream into frames plus per-frame side information."""
    header = parse_header(data)
    qt = QuantTable(header.qp)
    reader = BitReader(data, HEADER_SIZE)
    width, height = header.width, header.height
    frames: list[Frame] = []
    sides: list[SideInfo] = []
    prev: np.ndarray | None = None

    for t in range(header.frame_count):
        intra_frame = reader.read_bit() == 1
        ref = None if intra_frame else prev
        if ref is None and not intra_frame:
            raise BitstreamError(f"frame {t} is inter but has no reference")
        recon = np.zeros((height, width), dtype=np.int32)
        pred_frame = np.zeros((height, width), dtype=np.int32)
        leaves: list[Leaf] = []
        vectors: list[LeafMotion] = []
        level_blocks: list[np.ndarray] = []

        def decode_block(x: int, y: int, size: int) -> None:
            if size > 4 and reader.read_bit():
                half = size // 2
                decode_block(x, y, half)
                decode_block(x + half, y, half)
                decode_block(x, y + half, half)
                decode_block(x + half, y + half, half)
                return
            intra_leaf = reader.read_bit() == 1
            if intra_leaf:
                vec = LeafMotion(intra=True)
                pred = np.full((size, size), _dc_predict(recon, x, y, size), dtype=np.int32)
            else:
                if ref is None:
                    raise BitstreamError("inter leaf in an intra frame")
                dx = reader.read_se()
                dy = reader.read_se()
                if abs(dx) > header.search_radius or abs(dy) > header.search_radius:
                    raise BitstreamError(
                        f"motion vector ({dx},{dy}) exceeds search radius"
                    )
                vec = LeafMotion(intra=False, dx=dx, dy=dy)
                pred = _mc_block(ref, x, y, size, dx, dy)
            levels = np.zeros((size, size), dtype=np.int32)
            for oy, ox, tile in transform_tiles(size):
                levels[oy : oy + tile, ox : ox + tile] = _read_levels(reader, tile)
            pred_frame[y : y + size, x : x + size] = pred
            recon[y : y + size, x : x + size] = _reconstruct_block(pred, levels, qt)
            leaves.append(Leaf(x, y, size))
            vectors.append(vec)
            level_blocks.append(levels)

        for my in range(0, height, MACROBLOCK):
            for mx in range(0, width, MACROBLOCK):
                decode_block(mx, my, MACROBLOCK)

        frames.append(Frame(recon.astype(np.uint8)))
        sides.append(
            SideInfo(
                frame_index=t,
                qp=header.qp,
                partition=PartitionMap(width, height, tuple(leaves)),
                motion=MotionField(tuple(vectors)),
                prediction=Frame(pred_frame.astype(np.uint8)),
                levels=tuple(level_blocks),
            )
        )
        prev = recon

    # only zero padding bits of the final byte may remain
    if not reader.padding_is_clean():
        raise BitstreamError("nonzero padding at end of payload")
    tail = len(data) - reader.bytes_consumed()
    if tail > 0:
        raise BitstreamError(f"{tail} trailing bytes after payload")
    return frames, sides


def extract_side_info(data: bytes) -> list[SideInfo]:
    """Side information only; identical to the second decode output."""
    return decode_sequence(data)[1]


def side_info_to_json(sides: list[SideInfo]) -> dict:
    """JSON-ready dump: frames -> {qp, leaves:[{x,y,size,intra,mv,levels}]}.

    Levels are listed transform tile by transform tile, each in zigzag order.
    """
    out = []
    for side in sides:
        leaves = []
        for leaf, vec, levels in zip(side.partition.leaves, side.motion.vectors, side.levels):
            flat: list[int] = []
            for oy, ox, tile in transform_tiles(leaf.size):
                flat.extend(int(v) for v in zigzag(levels[oy : oy + tile, ox : ox + tile]))
            leaves.append(
                {
                    "x": leaf.x,
                    "y": leaf.y,
                    "size": leaf.size,
                    "intra": vec.intra,
                    "mv": None if vec.intra else [vec.dx, vec.dy],
                    "levels": flat,
                }
            )
        out.append({"qp": side.qp, "leaves": leaves})
    return {"frames": out}
