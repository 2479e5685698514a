"""Toy differentiable restorer driven by decoded frames and codec priors.

The network aligns a window of decoded frames to its center frame (motion
warp plus learned deformable sampling), extracts features from two groups of
codec-prior planes, gates those with sigmoid spatial attention maps, fuses
everything, and predicts a residual added to the center decoded frame.  With
all-zero parameters it is exactly the identity on the decoded frame.

All layers are plain numpy; gradients are hand-written and checked against
finite differences in the test suite.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .alignment import (
    OffsetPredictor,
    deformable_gather_backward,
    deformable_gather_cached,
    rasterize_motion,
    warp_mv,
    warp_mv_backward,
)
from .codec import Leaf, MotionField, PartitionMap, SideInfo, transform_tiles
from .frames import Frame
from .nn import (
    ConvLayer,
    TrainConfig,
    adam_init,
    adam_step,
    conv_backward,
    conv_forward,
    conv_forward_cached,
    l1_loss,
    l1_loss_grad,
)
from .transform import QuantTable, dequantize, idct2d

MODEL_MAGIC = b"MVDR"
MODEL_VERSION = 1

# prior-plane normalization constants
MV_NORM = 16.0
SIZE_NORM = 16.0
QP_NORM = 51.0
PIXEL_NORM = 255.0

AUX_CODEC_CHANNELS = 3  # prediction, residual, qp
AUX_STRUCT_CHANNELS = 2  # |mv|, leaf size


class TrainingDiverged(RuntimeError):
    """Loss became non-finite during training."""


# ---------------------------------------------------------------------------
# Codec prior planes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AuxPriorPlanes:
    """Dense prior planes derived from one frame's side information."""

    mv_magnitude: np.ndarray
    leaf_size: np.ndarray
    prediction: np.ndarray
    residual: np.ndarray
    qp_plane: np.ndarray

    def codec_planes(self) -> np.ndarray:
        """Pixel-domain codec priors: prediction, residual, qp."""
        return np.stack([self.prediction, self.residual, self.qp_plane])

    def structure_planes(self) -> np.ndarray:
        """Geometry priors: motion magnitude and partition leaf size."""
        return np.stack([self.mv_magnitude, self.leaf_size])


def build_aux_planes(side: SideInfo) -> AuxPriorPlanes:
    """Rasterize a frame's side information into normalized planes."""
    h = side.prediction.height
    w = side.prediction.width
    qt = QuantTable(side.qp)
    mv_mag = np.zeros((h, w), dtype=np.float64)
    leaf_size = np.zeros((h, w), dtype=np.float64)
    residual = np.zeros((h, w), dtype=np.float64)
    for leaf, vec, levels in zip(side.partition.leaves, side.motion.vectors, side.levels):
        sl = (slice(leaf.y, leaf.y + leaf.size), slice(leaf.x, leaf.x + leaf.size))
        if not vec.intra:
            mv_mag[sl] = np.hypot(vec.dx, vec.dy) / MV_NORM
        leaf_size[sl] = leaf.size / SIZE_NORM
        block = np.empty((leaf.size, leaf.size), dtype=np.float64)
        for oy, ox, tile in transform_tiles(leaf.size):
            block[oy : oy + tile, ox : ox + tile] = idct2d(
                dequantize(levels[oy : oy + tile, ox : ox + tile], qt)
            )
        residual[sl] = block / PIXEL_NORM
    return AuxPriorPlanes(
        mv_magnitude=mv_mag,
        leaf_size=leaf_size,
        prediction=side.prediction.as_float() / PIXEL_NORM,
        residual=residual,
        qp_plane=np.full((h, w), side.qp / QP_NORM),
    )


# ---------------------------------------------------------------------------
# Attention fusion
# ---------------------------------------------------------------------------

def attention_map(fv: np.ndarray, faux: np.ndarray, layer: ConvLayer) -> np.ndarray:
    """Sigmoid-gated single-channel attention over concatenated features."""
    if layer.activation != "sigmoid" or layer.weights.shape[0] != 1:
        raise ValueError("attention layer must be a 1-channel sigmoid conv")
    if fv.shape[1:] != faux.shape[1:]:
        raise ValueError("feature maps must share spatial dimensions")
    return conv_forward(layer, np.concatenate([fv, faux], axis=0))


def fuse(
    fv: np.ndarray,
    fa: np.ndarray,
    fl: np.ndarray,
    ma: np.ndarray,
    ml: np.ndarray,
    agg_layers: list[ConvLayer],
) -> np.ndarray:
    """Gate the two auxiliary feature groups and aggregate with the video path."""
    if ma.shape != (1,) + fa.shape[1:] or ml.shape != (1,) + fl.shape[1:]:
        raise ValueError("attention maps must be (1, h, w) matching the features")
    x = np.concatenate([fv, fa * ma, fl * ml], axis=0)
    for layer in agg_layers:
        x = conv_forward(layer, x)
    return x


def fuse_backward(
    upstream: np.ndarray,
    fv: np.ndarray,
    fa: np.ndarray,
    fl: np.ndarray,
    ma: np.ndarray,
    ml: np.ndarray,
    agg_layers: list[ConvLayer],
):
    """Gradients of :func:`fuse` for every input and aggregation layer.

    Returns ((d_fv, d_fa, d_fl, d_ma, d_ml), [(d_w, d_b) per layer]).
    """
    x0 = np.concatenate([fv, fa * ma, fl * ml], axis=0)
    inputs = [x0]
    for layer in agg_layers[:-1]:
        inputs.append(conv_forward(layer, inputs[-1]))
    layer_grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(agg_layers)
    d = upstream
    for i in range(len(agg_layers) - 1, -1, -1):
        d, dw, db = conv_backward(agg_layers[i], inputs[i], d)
        layer_grads[i] = (dw, db)
    cv, ca = fv.shape[0], fa.shape[0]
    d_fv = d[:cv]
    d_fa = d[cv : cv + ca] * ma
    d_fl = d[cv + ca :] * ml
    d_ma = (d[cv : cv + ca] * fa).sum(axis=0, keepdims=True)
    d_ml = (d[cv + ca :] * fl).sum(axis=0, keepdims=True)
    return (d_fv, d_fa, d_fl, d_ma, d_ml), layer_grads


# ---------------------------------------------------------------------------
# Model definition
# ---------------------------------------------------------------------------

@dataclass
class RestorerModel:
    """Parameter store plus the shape schedule it was built from."""

    half_window: int
    channels: int
    kernel_size: int
    offset_hidden: int
    attn_kernel: int
    params: dict[str, np.ndarray]

    @property
    def window(self) -> int:
        return 2 * self.half_window + 1

    def layer(self, name: str, activation: str) -> ConvLayer:
        return ConvLayer(self.params[f"{name}.w"], self.params[f"{name}.b"], activation)

    def offset_predictor(self) -> OffsetPredictor:
        return OffsetPredictor(
            hidden=self.layer("off_hidden", "relu"),
            out=self.layer("off_out", "none"),
        )


def model_schedule(
    half_window: int,
    channels: int,
    kernel_size: int,
    offset_hidden: int,
    attn_kernel: int,
) -> list[tuple[str, tuple[int, ...]]]:
    """Ordered (name, shape) schedule for every parameter tensor."""
    c = channels
    k = kernel_size
    win = 2 * half_window + 1
    taps2 = 2 * k * k
    sched: list[tuple[str, tuple[int, ...]]] = []

    def conv(name: str, out_ch: int, in_ch: int, ksize: int = 3) -> None:
        sched.append((f"{name}.w", (out_ch, in_ch, ksize, ksize)))
        sched.append((f"{name}.b", (out_ch,)))

    conv("feat", c, 1)
    conv("off_hidden", offset_hidden, 2 * c + 2)
    conv("off_out", taps2, offset_hidden)
    sched.append(("gather.w", (c, c, k, k)))
    conv("vmix", c, win * c)
    conv("vres", c, c)
    conv("auxa1", c, AUX_CODEC_CHANNELS)
    conv("auxa2", c, c)
    conv("auxl1", c, AUX_STRUCT_CHANNELS)
    conv("auxl2", c, c)
    conv("attn_a", 1, 2 * c, attn_kernel)
    conv("attn_l", 1, 2 * c, attn_kernel)
    conv("agg1", c, 3 * c)
    conv("agg2", c, c)
    conv("rec1", c, c)
    conv("rec2", 1, c)
    return sched


def init_restorer(
    half_window: int = 2,
    channels: int = 8,
    kernel_size: int = 3,
    offset_hidden: int = 8,
    attn_kernel: int = 7,
    seed: int = 1,
) -> RestorerModel:
    """Seeded initialization: weights uniform(-a, a) with a = 1/sqrt(fan_in)."""
    rng = np.random.default_rng(seed)
    params: dict[str, np.ndarray] = {}
    for name, shape in model_schedule(
        half_window, channels, kernel_size, offset_hidden, attn_kernel
    ):
        if name.endswith(".w"):
            fan_in = int(np.prod(shape[1:]))
            a = 1.0 / np.sqrt(fan_in)
            params[name] = rng.uniform(-a, a, shape)
        else:
            params[name] = np.zeros(shape)
    return RestorerModel(half_window, channels, kernel_size, offset_hidden, attn_kernel, params)


def zero_restorer(**kwargs) -> RestorerModel:
    """All-zero parameters: the identity restorer."""
    model = init_restorer(**kwargs)
    for p in model.params.values():
        p[:] = 0.0
    return model


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def _check_window(window: list[Frame], side: SideInfo, model: RestorerModel) -> None:
    if len(window) != model.window:
        raise ValueError(f"window must hold {model.window} frames, got {len(window)}")
    h, w = side.prediction.height, side.prediction.width
    for f in window:
        if f.height != h or f.width != w:
            raise ValueError("window frames must match the coded frame dimensions")


def restorer_forward_cached(
    window: list[Frame],
    side: SideInfo,
    aux: AuxPriorPlanes,
    model: RestorerModel,
) -> tuple[np.ndarray, dict]:
    """Forward pass returning the raw real-valued frame and the cache.

    The cache keeps every layer's input, im2col columns and pre-activation,
    so :func:`restorer_backward` never recomputes forward work.
    """
    _check_window(window, side, model)
    n = model.half_window
    feat_layer = model.layer("feat", "relu")
    gather_w = model.params["gather.w"]
    off_hidden = model.layer("off_hidden", "relu")
    off_out = model.layer("off_out", "none")

    cache: dict = {"side": side, "convs": {}}

    def conv(key: str, layer: ConvLayer, x: np.ndarray) -> np.ndarray:
        y, cc = conv_forward_cached(layer, x)
        cache["convs"][key] = (x, cc)
        return y

    frames_norm = [f.as_float() / PIXEL_NORM for f in window]
    feats = [conv(f"feat{j}", feat_layer, fr[None]) for j, fr in enumerate(frames_norm)]
    mv_planes = rasterize_motion(side.partition, side.motion)

    neighbors = [j for j in range(model.window) if j != n]
    warped: dict[int, np.ndarray] = {}
    offsets: dict[int, np.ndarray] = {}
    aligned: dict[int, np.ndarray] = {}
    gather_caches: dict[int, tuple] = {}
    for j in neighbors:
        warped[j] = warp_mv(feats[j], side.motion, side.partition)
        off_in = np.concatenate([feats[n], warped[j], mv_planes], axis=0)
        hidden = conv(f"off_hidden{j}", off_hidden, off_in)
        offsets[j] = conv(f"off_out{j}", off_out, hidden)
        aligned[j], gather_caches[j] = deformable_gather_cached(
            warped[j], model.kernel_size, offsets[j], gather_w
        )

    slots = [aligned[j] if j != n else feats[n] for j in range(model.window)]
    stacked = np.concatenate(slots, axis=0)
    fv1 = conv("vmix", model.layer("vmix", "relu"), stacked)
    fv = conv("vres", model.layer("vres", "relu"), fv1)

    fa = conv("auxa2", model.layer("auxa2", "relu"),
              conv("auxa1", model.layer("auxa1", "relu"), aux.codec_planes()))
    fl = conv("auxl2", model.layer("auxl2", "relu"),
              conv("auxl1", model.layer("auxl1", "relu"), aux.structure_planes()))

    ma = conv("attn_a", model.layer("attn_a", "sigmoid"), np.concatenate([fv, fa], axis=0))
    ml = conv("attn_l", model.layer("attn_l", "sigmoid"), np.concatenate([fv, fl], axis=0))
    fused = conv("agg2", model.layer("agg2", "relu"),
                 conv("agg1", model.layer("agg1", "relu"),
                      np.concatenate([fv, fa * ma, fl * ml], axis=0)))

    r1 = conv("rec1", model.layer("rec1", "relu"), fused)
    resid = conv("rec2", model.layer("rec2", "none"), r1)
    out = window[n].as_float() + PIXEL_NORM * resid[0]

    cache.update(
        frames_norm=frames_norm,
        feats=feats,
        mv_planes=mv_planes,
        neighbors=neighbors,
        warped=warped,
        offsets=offsets,
        gather_caches=gather_caches,
        fa=fa,
        fl=fl,
        ma=ma,
        ml=ml,
    )
    return out, cache


def restorer_forward(
    window: list[Frame],
    side: SideInfo,
    aux: AuxPriorPlanes,
    model: RestorerModel,
) -> np.ndarray:
    """Restored frame as unrounded reals (candidate for back projection)."""
    return restorer_forward_cached(window, side, aux, model)[0]


def restorer_backward(
    d_out: np.ndarray, cache: dict, model: RestorerModel
) -> dict[str, np.ndarray]:
    """Parameter gradients for a cached forward pass."""
    n = model.half_window
    c = model.channels
    side = cache["side"]
    grads = {name: np.zeros_like(p) for name, p in model.params.items()}

    def conv_back(key: str, name: str, activation: str, up: np.ndarray) -> np.ndarray:
        x, cc = cache["convs"][key]
        dx, dw, db = conv_backward(model.layer(name, activation), x, up, cache=cc)
        grads[f"{name}.w"] += dw
        grads[f"{name}.b"] += db
        return dx

    d_resid = PIXEL_NORM * np.asarray(d_out, dtype=np.float64)[None]
    d_r1 = conv_back("rec2", "rec2", "none", d_resid)
    d_fused = conv_back("rec1", "rec1", "relu", d_r1)

    fa, fl, ma, ml = cache["fa"], cache["fl"], cache["ma"], cache["ml"]
    d_g1 = conv_back("agg2", "agg2", "relu", d_fused)
    d_cat = conv_back("agg1", "agg1", "relu", d_g1)
    d_fv = d_cat[:c].copy()
    d_fa = d_cat[c : 2 * c] * ma
    d_fl = d_cat[2 * c :] * ml
    d_ma = (d_cat[c : 2 * c] * fa).sum(axis=0, keepdims=True)
    d_ml = (d_cat[2 * c :] * fl).sum(axis=0, keepdims=True)

    d_cat_a = conv_back("attn_a", "attn_a", "sigmoid", d_ma)
    d_fv += d_cat_a[:c]
    d_fa = d_fa + d_cat_a[c:]
    d_cat_l = conv_back("attn_l", "attn_l", "sigmoid", d_ml)
    d_fv += d_cat_l[:c]
    d_fl = d_fl + d_cat_l[c:]

    conv_back("auxa1", "auxa1", "relu", conv_back("auxa2", "auxa2", "relu", d_fa))
    conv_back("auxl1", "auxl1", "relu", conv_back("auxl2", "auxl2", "relu", d_fl))

    d_fv1 = conv_back("vres", "vres", "relu", d_fv)
    d_stacked = conv_back("vmix", "vmix", "relu", d_fv1)

    gather_w = model.params["gather.w"]
    d_feats = [np.zeros_like(f) for f in cache["feats"]]
    d_feats[n] += d_stacked[n * c : (n + 1) * c]
    for j in cache["neighbors"]:
        d_ali = d_stacked[j * c : (j + 1) * c]
        d_warped, d_offsets, dw_gather = deformable_gather_backward(
            d_ali,
            cache["warped"][j],
            model.kernel_size,
            cache["offsets"][j],
            gather_w,
            cache=cache["gather_caches"][j],
        )
        grads["gather.w"] += dw_gather
        d_hidden = conv_back(f"off_out{j}", "off_out", "none", d_offsets)
        d_off_in = conv_back(f"off_hidden{j}", "off_hidden", "relu", d_hidden)
        d_feats[n] += d_off_in[:c]
        d_warped_p = d_off_in[c : 2 * c]
        d_feats[j] += warp_mv_backward(d_warped + d_warped_p, side.motion, side.partition)

    for j, d_feat in enumerate(d_feats):
        conv_back(f"feat{j}", "feat", "relu", d_feat)
    return grads


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

class TrainSample(NamedTuple):
    window: list[Frame]
    side: SideInfo
    aux: AuxPriorPlanes
    target: Frame


def padded_window(frames: list[Frame], center: int, half: int) -> list[Frame]:
    """Sliding window with edge frames repeated at the sequence boundary."""
    count = len(frames)
    return [frames[min(max(center + d, 0), count - 1)] for d in range(-half, half + 1)]


def crop_side_info(side: SideInfo, x0: int, y0: int, size: int) -> SideInfo:
    """Side information restricted to a macroblock-aligned square crop.

    Partition leaves never straddle macroblock boundaries, so a 16-aligned
    crop keeps every covered leaf intact and all invariants hold.
    """
    if x0 % 16 or y0 % 16 or size % 16:
        raise ValueError("crops must be 16-aligned")
    leaves = []
    vectors = []
    levels = []
    for leaf, vec, lv in zip(side.partition.leaves, side.motion.vectors, side.levels):
        if x0 <= leaf.x < x0 + size and y0 <= leaf.y < y0 + size:
            leaves.append(Leaf(leaf.x - x0, leaf.y - y0, leaf.size))
            vectors.append(vec)
            levels.append(lv)
    pred = side.prediction.pixels[y0 : y0 + size, x0 : x0 + size]
    return SideInfo(
        frame_index=side.frame_index,
        qp=side.qp,
        partition=PartitionMap(size, size, tuple(leaves)),
        motion=MotionField(tuple(vectors)),
        prediction=Frame(pred),
        levels=tuple(levels),
    )


def build_training_samples(
    originals: list[Frame],
    decoded: list[Frame],
    sides: list[SideInfo],
    half_window: int,
    crop: int | None = None,
) -> list[TrainSample]:
    """Training tuples for a coded sequence, one per frame or per crop tile.

    With ``crop`` set, each frame contributes one sample per 16-aligned
    ``crop`` x ``crop`` tile; smaller tiles keep the training loop fast
    without changing any of the restorer semantics.
    """
    if not (len(originals) == len(decoded) == len(sides)):
        raise ValueError("originals, decoded and side info must have equal lengths")
    samples = []
    for t in range(len(decoded)):
        window = padded_window(decoded, t, half_window)
        if crop is None:
            samples.append(
                TrainSample(window, sides[t], build_aux_planes(sides[t]), originals[t])
            )
            continue
        width, height = decoded[t].width, decoded[t].height
        if crop % 16 or crop > width or crop > height:
            raise ValueError("crop must be 16-aligned and fit inside the frame")
        for y0 in range(0, height - crop + 1, crop):
            for x0 in range(0, width - crop + 1, crop):
                side_c = crop_side_info(sides[t], x0, y0, crop)
                window_c = [
                    Frame(f.pixels[y0 : y0 + crop, x0 : x0 + crop]) for f in window
                ]
                target_c = Frame(originals[t].pixels[y0 : y0 + crop, x0 : x0 + crop])
                samples.append(
                    TrainSample(window_c, side_c, build_aux_planes(side_c), target_c)
                )
    return samples


def train_restorer(
    dataset: list[TrainSample],
    config: TrainConfig,
    model: RestorerModel | None = None,
) -> tuple[RestorerModel, list[float]]:
    """Mini-batch Adam on L1 loss; fully deterministic for a given seed."""
    if not dataset:
        raise ValueError("training dataset is empty")
    if model is None:
        model = init_restorer(seed=config.seed)
    # epoch permutations, concatenated and chunked into batches: a fixed
    # seed-derived order whose windows mix samples evenly (smooth loss trace)
    rng = np.random.default_rng(config.seed)
    need = config.iterations * config.batch_size
    order: list[np.ndarray] = []
    have = 0
    while have < need:
        perm = rng.permutation(len(dataset))
        order.append(perm)
        have += perm.size
    batch_schedule = np.concatenate(order)[:need].reshape(
        config.iterations, config.batch_size
    )
    state = adam_init(model.params)
    losses: list[float] = []
    for it in range(config.iterations):
        grads = {name: np.zeros_like(p) for name, p in model.params.items()}
        loss_sum = 0.0
        for idx in batch_schedule[it]:
            sample = dataset[int(idx)]
            out, cache = restorer_forward_cached(
                sample.window, sample.side, sample.aux, model
            )
            target = sample.target.as_float()
            loss_sum += l1_loss(out, target)
            sample_grads = restorer_backward(l1_loss_grad(out, target), cache, model)
            for name in grads:
                grads[name] += sample_grads[name]
        loss = loss_sum / config.batch_size
        if not np.isfinite(loss):
            raise TrainingDiverged(f"loss became non-finite at iteration {it}")
        losses.append(loss)
        for name in grads:
            grads[name] /= config.batch_size
        adam_step(model.params, grads, state, config)
    return model, losses


# ---------------------------------------------------------------------------
# Inference pipeline
# ---------------------------------------------------------------------------

def restore_sequence(
    decoded: list[Frame],
    sides: list[SideInfo],
    model: RestorerModel,
    back_projection: bool = True,
) -> list[Frame]:
    """Restore every frame of a decoded sequence (sliding padded window)."""
    from .backproject import back_project_frame
    from .transform import round_half_away

    if len(decoded) != len(sides):
        raise ValueError("decoded frames and side info must have equal lengths")
    restored = []
    for t, side in enumerate(sides):
        window = padded_window(decoded, t, model.half_window)
        aux = build_aux_planes(side)
        candidate = restorer_forward(window, side, aux, model)
        if back_projection:
            restored.append(back_project_frame(candidate, side))
        else:
            restored.append(
                Frame(np.clip(round_half_away(candidate), 0, 255).astype(np.uint8))
            )
    return restored


# ---------------------------------------------------------------------------
# Model file I/O
# ---------------------------------------------------------------------------

def save_model(model: RestorerModel, path) -> None:
    """Write magic, schedule header, then parameters as little-endian f64."""
    sched = model_schedule(
        model.half_window,
        model.channels,
        model.kernel_size,
        model.offset_hidden,
        model.attn_kernel,
    )
    header = {
        "half_window": model.half_window,
        "channels": model.channels,
        "kernel_size": model.kernel_size,
        "offset_hidden": model.offset_hidden,
        "attn_kernel": model.attn_kernel,
        "schedule": [[name, list(shape)] for name, shape in sched],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<HI", MODEL_VERSION, len(blob)))
        fh.write(blob)
        for name, shape in sched:
            arr = model.params[name]
            if tuple(arr.shape) != tuple(shape):
                raise ValueError(f"parameter {name!r} has drifted from its schedule")
            fh.write(arr.astype("<f8").tobytes())


def load_model(path) -> RestorerModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MODEL_MAGIC:
            raise ValueError(f"not a restorer model file (magic {magic!r})")
        version, hlen = struct.unpack("<HI", fh.read(6))
        if version != MODEL_VERSION:
            raise ValueError(f"unsupported model version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        expected = model_schedule(
            header["half_window"],
            header["channels"],
            header["kernel_size"],
            header["offset_hidden"],
            header["attn_kernel"],
        )
        if [[n, list(s)] for n, s in expected] != header["schedule"]:
            raise ValueError("model schedule does not match its architecture fields")
        params: dict[str, np.ndarray] = {}
        for name, shape in expected:
            count = int(np.prod(shape))
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise ValueError(f"model file truncated in parameter {name!r}")
            params[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
        if fh.read(1):
            raise ValueError("trailing bytes after model parameters")
    return RestorerModel(
        header["half_window"],
        header["channels"],
        header["kernel_size"],
        header["offset_hidden"],
        header["attn_kernel"],
        params,
    )
