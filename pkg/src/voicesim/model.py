"""Similarity scorer: layer fusion, co-attention, distance head, gradients.

The scorer consumes a pair of layer-wise representations and produces a
similarity score. Pipeline per input:

  1. fuse the L layers into one (T, D) sequence, either by a learned
     convex combination (softmax over per-layer logits) or by taking the
     last layer only;
  2. optionally apply a shared linear adapter (T, D) -> (T, H_a);
  3. align each sequence to the other with bidirectional scaled
     dot-product attention (no learned projections, single head);
  4. mean-pool over time and take the per-dimension absolute difference
     of the pooled embeddings, once per direction;
  5. feed each distance vector through a shared two-layer ReLU head that
     emits either a scalar score (regression) or a 4-class distribution
     (classification), and average the two branch outputs.

Everything is computed in float64. Gradients with respect to every
trainable parameter are derived analytically in `loss_and_grad`; the
training module cross-checks them against central finite differences.

Checkpoints use the "SVS1" container:

    bytes 0..3   magic "SVS1"
    u32          version (currently 1)
    u32          mode (0 regression, 1 classification)
    u32          repr source (0 weighted sum, 1 last layer)
    u32          adapter flag (0/1)
    u32 x 5      L, D, H_a, H_1, K
    f64 ...      parameter tensors in declaration order: layer logits,
                 adapter weight + bias (if the flag is set), head
                 weight 1, bias 1, weight 2, bias 2

All values little-endian; matrices are stored row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, FormatError
from .repr_store import LayerwiseRepr

MODE_REGRESSION = "regression"
MODE_CLASSIFICATION = "classification"
SOURCE_WEIGHTED_SUM = "weighted_sum"
SOURCE_LAST_LAYER = "last_layer"

NUM_CLASSES = 4

SVS_MAGIC = b"SVS1"
SVS_VERSION = 1

_U32 = struct.Struct("<I")


@dataclass(frozen=True)
class ModelConfig:
    """Static architecture description.

    `adapter_dim` is carried even when `use_adapter` is false so that a
    config round-trips through checkpoints unchanged.
    """

    mode: str
    repr_source: str
    use_adapter: bool
    num_layers: int
    repr_dim: int
    adapter_dim: int = 256
    head_hidden: int = 128

    def __post_init__(self):
        if self.mode not in (MODE_REGRESSION, MODE_CLASSIFICATION):
            raise DimensionError(f"unknown mode '{self.mode}'")
        if self.repr_source not in (SOURCE_WEIGHTED_SUM, SOURCE_LAST_LAYER):
            raise DimensionError(f"unknown repr_source '{self.repr_source}'")
        for name in ("num_layers", "repr_dim", "adapter_dim", "head_hidden"):
            if getattr(self, name) < 1:
                raise DimensionError(f"{name} must be >= 1")

    @property
    def num_classes(self) -> int:
        return NUM_CLASSES if self.mode == MODE_CLASSIFICATION else 1

    @property
    def head_input_dim(self) -> int:
        return self.adapter_dim if self.use_adapter else self.repr_dim


PARAM_FIELDS = (
    "layer_logits",
    "adapter_w",
    "adapter_b",
    "head_w1",
    "head_b1",
    "head_w2",
    "head_b2",
)


@dataclass
class ModelParams:
    """All trainable parameters. Adapter entries are None when unused."""

    layer_logits: np.ndarray
    adapter_w: np.ndarray | None
    adapter_b: np.ndarray | None
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray
    head_b2: np.ndarray

    def items(self):
        """(name, array) pairs in declaration order, skipping absent ones."""
        return [
            (name, getattr(self, name))
            for name in PARAM_FIELDS
            if getattr(self, name) is not None
        ]

    def copy(self) -> "ModelParams":
        return ModelParams(
            **{
                name: None if getattr(self, name) is None else getattr(self, name).copy()
                for name in PARAM_FIELDS
            }
        )

    def validate(self, cfg: ModelConfig) -> None:
        expected = _expected_shapes(cfg)
        for name, shape in expected.items():
            arr = getattr(self, name)
            if shape is None:
                if arr is not None:
                    raise DimensionError(f"{name} present but config has no adapter")
                continue
            if arr is None:
                raise DimensionError(f"{name} missing")
            if arr.shape != shape:
                raise DimensionError(f"{name}: expected shape {shape}, got {arr.shape}")
            if not np.isfinite(arr).all():
                raise FormatError(f"{name} contains non-finite values")


@dataclass
class Gradients:
    """Mirror of ModelParams holding one gradient per parameter."""

    layer_logits: np.ndarray
    adapter_w: np.ndarray | None
    adapter_b: np.ndarray | None
    head_w1: np.ndarray
    head_b1: np.ndarray
    head_w2: np.ndarray
    head_b2: np.ndarray

    def items(self):
        return [
            (name, getattr(self, name))
            for name in PARAM_FIELDS
            if getattr(self, name) is not None
        ]

    @classmethod
    def zeros_like(cls, params: ModelParams) -> "Gradients":
        return cls(
            **{
                name: None
                if getattr(params, name) is None
                else np.zeros_like(getattr(params, name))
                for name in PARAM_FIELDS
            }
        )


def _expected_shapes(cfg: ModelConfig) -> dict:
    d_in = cfg.head_input_dim
    return {
        "layer_logits": (cfg.num_layers,),
        "adapter_w": (cfg.repr_dim, cfg.adapter_dim) if cfg.use_adapter else None,
        "adapter_b": (cfg.adapter_dim,) if cfg.use_adapter else None,
        "head_w1": (d_in, cfg.head_hidden),
        "head_b1": (cfg.head_hidden,),
        "head_w2": (cfg.head_hidden, cfg.num_classes),
        "head_b2": (cfg.num_classes,),
    }


def init_params(cfg: ModelConfig, seed) -> ModelParams:
    """Fresh parameters: weights uniform over +-1/sqrt(fan_in), biases and
    layer logits zero (so initial layer weights are uniform).

    `seed` may be an int or a numpy Generator.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    def uniform(fan_in, shape):
        bound = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    if cfg.use_adapter:
        adapter_w = uniform(cfg.repr_dim, (cfg.repr_dim, cfg.adapter_dim))
        adapter_b = np.zeros(cfg.adapter_dim)
    else:
        adapter_w = adapter_b = None
    d_in = cfg.head_input_dim
    return ModelParams(
        layer_logits=np.zeros(cfg.num_layers),
        adapter_w=adapter_w,
        adapter_b=adapter_b,
        head_w1=uniform(d_in, (d_in, cfg.head_hidden)),
        head_b1=np.zeros(cfg.head_hidden),
        head_w2=uniform(cfg.head_hidden, (cfg.head_hidden, cfg.num_classes)),
        head_b2=np.zeros(cfg.num_classes),
    )


def _softmax(v: np.ndarray) -> np.ndarray:
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


def _softmax_rows(m: np.ndarray) -> np.ndarray:
    shifted = m - m.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def layer_weights(layer_logits: np.ndarray) -> np.ndarray:
    """Normalized-exponential image of the logits: w >= 0, sum(w) = 1."""
    return _softmax(np.asarray(layer_logits, dtype=np.float64))


def weighted_sum(layer_logits: np.ndarray, repr: LayerwiseRepr) -> np.ndarray:
    """Convex combination of the L layers, (L, T, D) -> (T, D)."""
    logits = np.asarray(layer_logits, dtype=np.float64)
    if logits.shape != (repr.num_layers,):
        raise DimensionError(
            f"layer count mismatch: {logits.shape[0]} logits for "
            f"{repr.num_layers} layers"
        )
    w = _softmax(logits)
    out = np.tensordot(w, repr.data64, axes=1)
    if not np.isfinite(out).all():
        raise FormatError("weighted sum produced non-finite values")
    return out


def select_last_layer(repr: LayerwiseRepr) -> np.ndarray:
    """The final layer's (T, D) representation, unchanged."""
    return repr.data64[-1]


def apply_adapter(x: np.ndarray, weight: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Per-frame affine map (T, D) -> (T, H_a); no activation."""
    if x.ndim != 2 or x.shape[1] != weight.shape[0]:
        raise DimensionError(
            f"adapter expects (T, {weight.shape[0]}) input, got {x.shape}"
        )
    return x @ weight + bias


def co_attention(r_t: np.ndarray, r_r: np.ndarray):
    """Align each sequence to the other with scaled dot-product attention.

    Queries, keys, and values are the raw sequences (no projections).
    Returns (r_r_hat, r_t_hat): r_r aligned to r_t's frames and vice versa.
    """
    (r_r_hat, r_t_hat), _ = _co_attention_cached(r_t, r_r)
    return r_r_hat, r_t_hat


def _co_attention_cached(r_t: np.ndarray, r_r: np.ndarray):
    if r_t.ndim != 2 or r_r.ndim != 2 or r_t.shape[1] != r_r.shape[1]:
        raise DimensionError(
            f"co-attention requires equal feature dims, got {r_t.shape} and {r_r.shape}"
        )
    if r_t.shape[0] == 0 or r_r.shape[0] == 0:
        raise DimensionError("co-attention requires non-empty sequences")
    scale = 1.0 / np.sqrt(r_t.shape[1])
    # The two directions are computed by the same expression with the
    # argument roles swapped, which keeps forward(test, ref) and
    # forward(ref, test) bit-identical.
    attn_tr = _softmax_rows(r_t @ r_r.T * scale)
    attn_rt = _softmax_rows(r_r @ r_t.T * scale)
    r_r_hat = attn_tr @ r_r
    r_t_hat = attn_rt @ r_t
    return (r_r_hat, r_t_hat), (attn_tr, attn_rt, scale)


def mean_pool(x: np.ndarray) -> np.ndarray:
    """Arithmetic mean over the time axis, (T, D') -> (D',)."""
    if x.ndim != 2 or x.shape[0] < 1:
        raise DimensionError(f"mean_pool expects a non-empty (T, D') matrix, got {x.shape}")
    return x.mean(axis=0)


def per_dim_l1(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Element-wise |a - b|; symmetric in its arguments."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return np.abs(a - b)


def predict_head(d: np.ndarray, params: ModelParams, mode: str):
    """Two-layer ReLU head on a distance vector.

    Regression: identity output, returns a scalar. Classification:
    normalized exponentials over 4 logits, returns a probability vector.
    """
    pre1 = d @ params.head_w1 + params.head_b1
    hidden = np.maximum(pre1, 0.0)
    out = hidden @ params.head_w2 + params.head_b2
    if not np.isfinite(out).all():
        raise FormatError("prediction head produced non-finite values")
    if mode == MODE_REGRESSION:
        return float(out[0])
    return _softmax(out)


@dataclass
class ScoreOutput:
    """Per-branch outputs plus the averaged final score.

    In regression mode s_t, s_r, s_final are floats and `score` equals
    s_final. In classification mode they are probability vectors and
    `score` is the argmax class index plus one (the 1..4 scale).
    """

    mode: str
    s_t: object
    s_r: object
    s_final: object
    score: float

    def expected_score(self) -> float:
        """Probability-weighted mean of the 1..4 classes (classification
        only); an alternative scalar not used for checkpoint selection."""
        if self.mode != MODE_CLASSIFICATION:
            raise DimensionError("expected_score is defined for classification only")
        return float(np.dot(self.s_final, np.arange(1, NUM_CLASSES + 1)))


def _fused_sequence(repr: LayerwiseRepr, params: ModelParams, cfg: ModelConfig):
    if repr.dim != cfg.repr_dim or repr.num_layers != cfg.num_layers:
        raise DimensionError(
            f"repr '{repr.utterance_id}' has (L, D) = "
            f"({repr.num_layers}, {repr.dim}), model expects "
            f"({cfg.num_layers}, {cfg.repr_dim})"
        )
    if cfg.repr_source == SOURCE_WEIGHTED_SUM:
        x = weighted_sum(params.layer_logits, repr)
    else:
        x = select_last_layer(repr)
    if cfg.use_adapter:
        r = apply_adapter(x, params.adapter_w, params.adapter_b)
    else:
        r = x
    return x, r


def _forward_cached(repr_t, repr_r, params, cfg):
    x_t, r_t = _fused_sequence(repr_t, params, cfg)
    x_r, r_r = _fused_sequence(repr_r, params, cfg)

    (r_r_hat, r_t_hat), (attn_tr, attn_rt, scale) = _co_attention_cached(r_t, r_r)

    pooled_t = mean_pool(r_t)
    pooled_r_hat = mean_pool(r_r_hat)
    pooled_r = mean_pool(r_r)
    pooled_t_hat = mean_pool(r_t_hat)

    diff_t = pooled_t - pooled_r_hat
    diff_r = pooled_r - pooled_t_hat
    dist_t = np.abs(diff_t)
    dist_r = np.abs(diff_r)

    pre1_t = dist_t @ params.head_w1 + params.head_b1
    hidden_t = np.maximum(pre1_t, 0.0)
    out_t = hidden_t @ params.head_w2 + params.head_b2
    pre1_r = dist_r @ params.head_w1 + params.head_b1
    hidden_r = np.maximum(pre1_r, 0.0)
    out_r = hidden_r @ params.head_w2 + params.head_b2

    if cfg.mode == MODE_REGRESSION:
        s_t = float(out_t[0])
        s_r = float(out_r[0])
        s_final = (s_t + s_r) / 2.0
        output = ScoreOutput(cfg.mode, s_t, s_r, s_final, s_final)
    else:
        p_t = _softmax(out_t)
        p_r = _softmax(out_r)
        p_final = (p_t + p_r) / 2.0
        score = float(np.argmax(p_final) + 1)
        output = ScoreOutput(cfg.mode, p_t, p_r, p_final, score)

    cache = {
        "x_t": x_t,
        "x_r": x_r,
        "r_t": r_t,
        "r_r": r_r,
        "attn_tr": attn_tr,
        "attn_rt": attn_rt,
        "scale": scale,
        "r_r_hat": r_r_hat,
        "r_t_hat": r_t_hat,
        "diff_t": diff_t,
        "diff_r": diff_r,
        "dist_t": dist_t,
        "dist_r": dist_r,
        "pre1_t": pre1_t,
        "hidden_t": hidden_t,
        "pre1_r": pre1_r,
        "hidden_r": hidden_r,
        "out_t": out_t,
        "out_r": out_r,
    }
    return output, cache


def forward(
    repr_t: LayerwiseRepr, repr_r: LayerwiseRepr, params: ModelParams, cfg: ModelConfig
) -> ScoreOutput:
    """Score a (test, reference) pair. Symmetric under swapping the pair."""
    output, _ = _forward_cached(repr_t, repr_r, params, cfg)
    return output


def _softmax_row_backward(attn: np.ndarray, g_attn: np.ndarray) -> np.ndarray:
    inner = (g_attn * attn).sum(axis=1, keepdims=True)
    return attn * (g_attn - inner)


def loss_and_grad(
    repr_t: LayerwiseRepr,
    repr_r: LayerwiseRepr,
    label: float,
    params: ModelParams,
    cfg: ModelConfig,
):
    """Loss for one labeled pair and its exact analytic gradients.

    Regression: squared error of the averaged score against the label.
    Classification: mean of the two branch cross-entropies against the
    (integer) label's class. ReLU and |.| use subgradient 0 at the kink.
    """
    output, cache = _forward_cached(repr_t, repr_r, params, cfg)
    grads = Gradients.zeros_like(params)

    if cfg.mode == MODE_REGRESSION:
        err = output.s_final - float(label)
        loss = err * err
        # d loss / d out = 2 * err * (1/2) through the branch average
        g_out_t = np.array([err])
        g_out_r = np.array([err])
    else:
        if float(label) not in (1.0, 2.0, 3.0, 4.0):
            raise DimensionError(
                f"classification labels must be integers in 1..4, got {label}"
            )
        cls = int(label) - 1
        p_t, p_r = output.s_t, output.s_r
        loss = -0.5 * (np.log(p_t[cls]) + np.log(p_r[cls]))
        onehot = np.zeros(NUM_CLASSES)
        onehot[cls] = 1.0
        g_out_t = 0.5 * (p_t - onehot)
        g_out_r = 0.5 * (p_r - onehot)

    def head_backward(g_out, dist, pre1, hidden):
        grads.head_w2 += np.outer(hidden, g_out)
        grads.head_b2 += g_out
        g_hidden = params.head_w2 @ g_out
        g_pre1 = np.where(pre1 > 0.0, g_hidden, 0.0)
        grads.head_w1 += np.outer(dist, g_pre1)
        grads.head_b1 += g_pre1
        return params.head_w1 @ g_pre1

    g_dist_t = head_backward(g_out_t, cache["dist_t"], cache["pre1_t"], cache["hidden_t"])
    g_dist_r = head_backward(g_out_r, cache["dist_r"], cache["pre1_r"], cache["hidden_r"])

    g_diff_t = g_dist_t * np.sign(cache["diff_t"])
    g_diff_r = g_dist_r * np.sign(cache["diff_r"])

    r_t, r_r = cache["r_t"], cache["r_r"]
    n_t, n_r = r_t.shape[0], r_r.shape[0]

    # Pooled embeddings: d pooled / d sequence spreads evenly over frames.
    g_r_t = np.tile(g_diff_t / n_t, (n_t, 1))
    g_r_r = np.tile(g_diff_r / n_r, (n_r, 1))
    g_r_r_hat = np.tile(-g_diff_t / n_t, (n_t, 1))
    g_r_t_hat = np.tile(-g_diff_r / n_r, (n_r, 1))

    scale = cache["scale"]
    attn_tr, attn_rt = cache["attn_tr"], cache["attn_rt"]

    # Direction 1: r_r_hat = attn_tr @ r_r, attn_tr rows softmaxed over r_r frames.
    g_attn_tr = g_r_r_hat @ r_r.T
    g_r_r += attn_tr.T @ g_r_r_hat
    g_scores_tr = _softmax_row_backward(attn_tr, g_attn_tr)
    g_r_t += g_scores_tr @ r_r * scale
    g_r_r += g_scores_tr.T @ r_t * scale

    # Direction 2: r_t_hat = attn_rt @ r_t.
    g_attn_rt = g_r_t_hat @ r_t.T
    g_r_t += attn_rt.T @ g_r_t_hat
    g_scores_rt = _softmax_row_backward(attn_rt, g_attn_rt)
    g_r_r += g_scores_rt @ r_t * scale
    g_r_t += g_scores_rt.T @ r_r * scale

    if cfg.use_adapter:
        x_t, x_r = cache["x_t"], cache["x_r"]
        grads.adapter_w += x_t.T @ g_r_t + x_r.T @ g_r_r
        grads.adapter_b += g_r_t.sum(axis=0) + g_r_r.sum(axis=0)
        g_x_t = g_r_t @ params.adapter_w.T
        g_x_r = g_r_r @ params.adapter_w.T
    else:
        g_x_t, g_x_r = g_r_t, g_r_r

    if cfg.repr_source == SOURCE_WEIGHTED_SUM:
        w = _softmax(params.layer_logits)
        g_w = np.tensordot(repr_t.data64, g_x_t, axes=([1, 2], [0, 1]))
        g_w += np.tensordot(repr_r.data64, g_x_r, axes=([1, 2], [0, 1]))
        grads.layer_logits += w * (g_w - np.dot(g_w, w))
    # Last-layer mode: the logits do not influence the output; zero gradient.

    return float(loss), grads


def save_checkpoint(path, params: ModelParams, cfg: ModelConfig) -> None:
    """Serialize params + config to an SVS1 container."""
    params.validate(cfg)
    mode_code = 0 if cfg.mode == MODE_REGRESSION else 1
    source_code = 0 if cfg.repr_source == SOURCE_WEIGHTED_SUM else 1
    header = b"".join(
        (
            SVS_MAGIC,
            _U32.pack(SVS_VERSION),
            _U32.pack(mode_code),
            _U32.pack(source_code),
            _U32.pack(1 if cfg.use_adapter else 0),
            _U32.pack(cfg.num_layers),
            _U32.pack(cfg.repr_dim),
            _U32.pack(cfg.adapter_dim),
            _U32.pack(cfg.head_hidden),
            _U32.pack(cfg.num_classes),
        )
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for _, arr in params.items():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path):
    """Read an SVS1 container back into (params, config)."""
    from .repr_store import _read_exact, _read_u32  # same primitives

    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != SVS_MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {SVS_MAGIC!r}")
        version = _read_u32(fh, "version")
        if version != SVS_VERSION:
            raise FormatError(f"unsupported version {version}")
        mode_code = _read_u32(fh, "mode")
        source_code = _read_u32(fh, "repr source")
        adapter_flag = _read_u32(fh, "adapter flag")
        if mode_code not in (0, 1) or source_code not in (0, 1) or adapter_flag not in (0, 1):
            raise FormatError("invalid config block")
        dims = [_read_u32(fh, name) for name in ("L", "D", "H_a", "H_1", "K")]
        num_layers, repr_dim, adapter_dim, head_hidden, num_classes = dims
        cfg = ModelConfig(
            mode=MODE_REGRESSION if mode_code == 0 else MODE_CLASSIFICATION,
            repr_source=SOURCE_WEIGHTED_SUM if source_code == 0 else SOURCE_LAST_LAYER,
            use_adapter=bool(adapter_flag),
            num_layers=num_layers,
            repr_dim=repr_dim,
            adapter_dim=adapter_dim,
            head_hidden=head_hidden,
        )
        if num_classes != cfg.num_classes:
            raise FormatError(
                f"output size {num_classes} inconsistent with mode '{cfg.mode}'"
            )
        arrays = {}
        for name, shape in _expected_shapes(cfg).items():
            if shape is None:
                arrays[name] = None
                continue
            count = int(np.prod(shape))
            buf = _read_exact(fh, 8 * count, name)
            arrays[name] = np.frombuffer(buf, dtype="<f8", count=count).reshape(shape).copy()
        if fh.read(1):
            raise FormatError("trailing data after parameter tensors")
    params = ModelParams(**arrays)
    params.validate(cfg)
    return params, cfg
