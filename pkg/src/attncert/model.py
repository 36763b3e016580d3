"""Single-block attention classifier over image patches.

Architecture: non-overlapping patches -> affine embedding -> one multi-head
softmax attention block (optional residual) -> flatten tokens -> linear or
one-hidden-layer ReLU head.  Weights live in a strict JSON format with
explicit shapes so files are portable and mistakes fail loudly.

Layout conventions, pinned here and relied on everywhere else:
  * flat image index   = channel*(height*width) + row*width + col
  * patch order        = row-major over the patch grid
  * within-patch order = channel-major, then patch row, then patch col
  * pooled vector      = tokens concatenated in token order
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True, eq=False)
class LinearSuffix:
    w: np.ndarray  # (classes, tokens * d_model)
    b: np.ndarray  # (classes,)


@dataclass(frozen=True, eq=False)
class MlpSuffix:
    w1: np.ndarray  # (hidden, tokens * d_model)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (classes, hidden)
    b2: np.ndarray  # (classes,)


Suffix = Union[LinearSuffix, MlpSuffix]


@dataclass(frozen=True, eq=False)
class AttentionModelSpec:
    height: int
    width: int
    channels: int
    patch: int
    d_model: int
    d_head: int
    heads: int
    n_classes: int
    residual: bool
    w_embed: np.ndarray  # (d_model, channels * patch * patch)
    b_embed: np.ndarray  # (d_model,)
    wq: np.ndarray  # (heads, d_head, d_model)
    bq: np.ndarray  # (heads, d_head)
    wk: np.ndarray
    bk: np.ndarray
    wv: np.ndarray
    bv: np.ndarray
    wo: np.ndarray  # (heads, d_model, d_head)
    bo: np.ndarray  # (d_model,)
    mask: np.ndarray  # (heads, tokens, tokens), added to scaled scores
    suffix: Suffix

    def __post_init__(self) -> None:
        for name in ("height", "width", "channels", "patch", "d_model", "d_head", "heads", "n_classes"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ValidationError(f"{name} must be a positive integer, got {v!r}")
        if self.height % self.patch or self.width % self.patch:
            raise ValidationError(
                f"patch {self.patch} must divide height {self.height} and width {self.width}"
            )
        if self.n_classes < 2:
            raise ValidationError("model needs at least two classes")
        arrays = {
            "w_embed": (self.d_model, self.patch_dim),
            "b_embed": (self.d_model,),
            "wq": (self.heads, self.d_head, self.d_model),
            "bq": (self.heads, self.d_head),
            "wk": (self.heads, self.d_head, self.d_model),
            "bk": (self.heads, self.d_head),
            "wv": (self.heads, self.d_head, self.d_model),
            "bv": (self.heads, self.d_head),
            "wo": (self.heads, self.d_model, self.d_head),
            "bo": (self.d_model,),
            "mask": (self.heads, self.tokens, self.tokens),
        }
        for name, shape in arrays.items():
            a = np.asarray(getattr(self, name), dtype=np.float64)
            if a.shape != shape:
                raise ValidationError(f"{name}: expected shape {shape}, got {a.shape}")
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{name}: entries must be finite")
            object.__setattr__(self, name, a)
        pooled = self.tokens * self.d_model
        sfx = self.suffix
        if isinstance(sfx, LinearSuffix):
            _check_suffix_arrays(sfx, {"w": (self.n_classes, pooled), "b": (self.n_classes,)})
        elif isinstance(sfx, MlpSuffix):
            hidden = np.asarray(sfx.w1).shape[0] if np.asarray(sfx.w1).ndim == 2 else 0
            if hidden < 1:
                raise ValidationError("suffix.w1 must be a (hidden, pooled) matrix")
            _check_suffix_arrays(
                sfx,
                {
                    "w1": (hidden, pooled),
                    "b1": (hidden,),
                    "w2": (self.n_classes, hidden),
                    "b2": (self.n_classes,),
                },
            )
        else:
            raise ValidationError(f"unsupported suffix type {type(sfx).__name__}")

    @property
    def tokens(self) -> int:
        return (self.height // self.patch) * (self.width // self.patch)

    @property
    def patch_dim(self) -> int:
        return self.channels * self.patch * self.patch

    @property
    def image_size(self) -> int:
        return self.channels * self.height * self.width

    @property
    def scale(self) -> float:
        return 1.0 / math.sqrt(self.d_head)

    @property
    def suffix_kind(self) -> str:
        return "linear" if isinstance(self.suffix, LinearSuffix) else "mlp1"

    @property
    def hidden(self) -> int:
        return 0 if isinstance(self.suffix, LinearSuffix) else int(self.suffix.w1.shape[0])


def _check_suffix_arrays(sfx: Suffix, shapes: dict[str, tuple[int, ...]]) -> None:
    for name, shape in shapes.items():
        a = np.asarray(getattr(sfx, name), dtype=np.float64)
        if a.shape != shape:
            raise ValidationError(f"suffix.{name}: expected shape {shape}, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValidationError(f"suffix.{name}: entries must be finite")
        object.__setattr__(sfx, name, a)


def patch_pixel_indices(model: AttentionModelSpec) -> np.ndarray:
    """(tokens, patch_dim) int matrix: flat image index of every patch entry."""
    p = model.patch
    rows = model.height // p
    cols = model.width // p
    out = np.empty((model.tokens, model.patch_dim), dtype=np.int64)
    for gr in range(rows):
        for gc in range(cols):
            tok = gr * cols + gc
            pos = 0
            for ch in range(model.channels):
                for pr in range(p):
                    for pc in range(p):
                        r = gr * p + pr
                        c = gc * p + pc
                        out[tok, pos] = ch * (model.height * model.width) + r * model.width + c
                        pos += 1
    return out


def _check_image(model: AttentionModelSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.image_size,):
        raise ValidationError(f"image must be a flat vector of length {model.image_size}, got {x.shape}")
    return x


def patch_tokenize(model: AttentionModelSpec, x) -> np.ndarray:
    """Embedded tokens, shape (tokens, d_model)."""
    x = _check_image(model, x)
    patches = x[patch_pixel_indices(model)]
    return patches @ model.w_embed.T + model.b_embed


@dataclass(frozen=True, eq=False)
class ForwardTrace:
    tokens: np.ndarray  # (R, d_model)
    scores: np.ndarray  # (heads, R, R)
    attn: np.ndarray  # (heads, R, R)
    head_out: np.ndarray  # (heads, R, d_head)
    hplus: np.ndarray  # (R, d_model)
    hidden_pre: np.ndarray | None  # (hidden,) for the mlp1 head
    logits: np.ndarray  # (classes,)


def forward_trace(model: AttentionModelSpec, x) -> ForwardTrace:
    toks = patch_tokenize(model, x)
    q = np.einsum("hdm,rm->hrd", model.wq, toks) + model.bq[:, None, :]
    k = np.einsum("hdm,rm->hrd", model.wk, toks) + model.bk[:, None, :]
    v = np.einsum("hdm,rm->hrd", model.wv, toks) + model.bv[:, None, :]
    scores = model.scale * np.einsum("hid,hjd->hij", q, k) + model.mask
    shifted = scores - scores.max(axis=2, keepdims=True)
    e = np.exp(shifted)
    attn = e / e.sum(axis=2, keepdims=True)
    head_out = np.einsum("hij,hjd->hid", attn, v)
    mixed = np.einsum("hmd,hid->im", model.wo, head_out)
    hplus = mixed + model.bo
    if model.residual:
        hplus = hplus + toks
    pooled = hplus.reshape(-1)
    sfx = model.suffix
    if isinstance(sfx, LinearSuffix):
        hidden_pre = None
        logits = sfx.w @ pooled + sfx.b
    else:
        hidden_pre = sfx.w1 @ pooled + sfx.b1
        logits = sfx.w2 @ np.maximum(hidden_pre, 0.0) + sfx.b2
    return ForwardTrace(
        tokens=toks,
        scores=scores,
        attn=attn,
        head_out=head_out,
        hplus=hplus,
        hidden_pre=hidden_pre,
        logits=logits,
    )


def forward(model: AttentionModelSpec, x) -> np.ndarray:
    """Clean logits for one flat image vector."""
    return forward_trace(model, x).logits


def forward_batch(model: AttentionModelSpec, xs) -> np.ndarray:
    """Logits for a (N, image_size) batch; row r agrees with forward on xs[r]
    up to summation-order roundoff."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != model.image_size:
        raise ValidationError(f"batch must have shape (N, {model.image_size}), got {xs.shape}")
    idx = patch_pixel_indices(model)
    toks = xs[:, idx] @ model.w_embed.T + model.b_embed  # (N, R, d_model)
    q = np.einsum("hdm,nrm->nhrd", model.wq, toks) + model.bq[None, :, None, :]
    k = np.einsum("hdm,nrm->nhrd", model.wk, toks) + model.bk[None, :, None, :]
    v = np.einsum("hdm,nrm->nhrd", model.wv, toks) + model.bv[None, :, None, :]
    scores = model.scale * np.einsum("nhid,nhjd->nhij", q, k) + model.mask[None]
    e = np.exp(scores - scores.max(axis=3, keepdims=True))
    attn = e / e.sum(axis=3, keepdims=True)
    head_out = np.einsum("nhij,nhjd->nhid", attn, v)
    hplus = np.einsum("hmd,nhid->nim", model.wo, head_out) + model.bo
    if model.residual:
        hplus = hplus + toks
    pooled = hplus.reshape(xs.shape[0], -1)
    sfx = model.suffix
    if isinstance(sfx, LinearSuffix):
        return pooled @ sfx.w.T + sfx.b
    hidden = np.maximum(pooled @ sfx.w1.T + sfx.b1, 0.0)
    return hidden @ sfx.w2.T + sfx.b2


# ---------------------------------------------------------------------------
# JSON weight files

_ARCHES = {"patch-attn": False, "patch-attn-residual": True}
_DIM_KEYS = ("height", "width", "channels", "d_model", "d_head", "classes")
_WEIGHT_KEYS = {"embed", "wq", "wk", "wv", "wo", "mask", "suffix"}


def _encode_array(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": [float(v) for v in a.reshape(-1)]}


def _decode_array(node, shape: tuple[int, ...], path: str) -> np.ndarray:
    if not isinstance(node, dict):
        raise ValidationError(f"{path}: expected an object with 'shape' and 'data'")
    extra = set(node) - {"shape", "data"}
    if extra:
        raise ValidationError(f"{path}: unknown fields {sorted(extra)}")
    if "shape" not in node or "data" not in node:
        raise ValidationError(f"{path}: missing 'shape' or 'data'")
    got = tuple(node["shape"])
    if got != shape:
        raise ValidationError(f"{path}: expected shape {list(shape)}, got {list(got)}")
    data = node["data"]
    if not isinstance(data, list) or len(data) != int(np.prod(shape, dtype=np.int64)):
        raise ValidationError(f"{path}: data length does not match shape {list(shape)}")
    try:
        a = np.asarray(data, dtype=np.float64).reshape(shape)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: non-numeric data ({exc})") from exc
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{path}: entries must be finite")
    return a


def _require_keys(node: dict, required: set[str], optional: set[str], path: str) -> None:
    extra = set(node) - required - optional
    if extra:
        raise ValidationError(f"{path}: unknown fields {sorted(extra)}")
    missing = required - set(node)
    if missing:
        raise ValidationError(f"{path}: missing fields {sorted(missing)}")


def save_model(model: AttentionModelSpec, path: str) -> None:
    heads = model.heads
    doc = {
        "arch": "patch-attn-residual" if model.residual else "patch-attn",
        "dims": {
            "height": model.height,
            "width": model.width,
            "channels": model.channels,
            "d_model": model.d_model,
            "d_head": model.d_head,
            "classes": model.n_classes,
        },
        "patch": model.patch,
        "heads": heads,
        "suffix_kind": model.suffix_kind,
        "weights": {
            "embed": {"w": _encode_array(model.w_embed), "b": _encode_array(model.b_embed)},
            "wq": [{"w": _encode_array(model.wq[h]), "b": _encode_array(model.bq[h])} for h in range(heads)],
            "wk": [{"w": _encode_array(model.wk[h]), "b": _encode_array(model.bk[h])} for h in range(heads)],
            "wv": [{"w": _encode_array(model.wv[h]), "b": _encode_array(model.bv[h])} for h in range(heads)],
            "wo": {
                "w": [_encode_array(model.wo[h]) for h in range(heads)],
                "b": _encode_array(model.bo),
            },
            "mask": _encode_array(model.mask),
            "suffix": _encode_suffix(model.suffix),
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def _encode_suffix(sfx: Suffix) -> dict:
    if isinstance(sfx, LinearSuffix):
        return {"w": _encode_array(sfx.w), "b": _encode_array(sfx.b)}
    return {
        "w1": _encode_array(sfx.w1),
        "b1": _encode_array(sfx.b1),
        "w2": _encode_array(sfx.w2),
        "b2": _encode_array(sfx.b2),
    }


def load_model(path: str) -> AttentionModelSpec:
    """Parse and validate a weight file.  Unknown fields anywhere are
    rejected; shape errors name the offending field path."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValidationError("top level: expected an object")
    _require_keys(doc, {"arch", "dims", "patch", "heads", "suffix_kind", "weights"}, set(), "top level")
    arch = doc["arch"]
    if arch not in _ARCHES:
        raise ValidationError(f"arch: expected one of {sorted(_ARCHES)}, got {arch!r}")
    dims = doc["dims"]
    if not isinstance(dims, dict):
        raise ValidationError("dims: expected an object")
    _require_keys(dims, set(_DIM_KEYS), set(), "dims")
    vals = {}
    for key in _DIM_KEYS:
        v = dims[key]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ValidationError(f"dims.{key}: expected a positive integer, got {v!r}")
        vals[key] = v
    patch = doc["patch"]
    heads = doc["heads"]
    for key, v in (("patch", patch), ("heads", heads)):
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ValidationError(f"{key}: expected a positive integer, got {v!r}")
    if vals["height"] % patch or vals["width"] % patch:
        raise ValidationError(f"patch: {patch} must divide height {vals['height']} and width {vals['width']}")
    suffix_kind = doc["suffix_kind"]
    if suffix_kind not in ("linear", "mlp1"):
        raise ValidationError(f"suffix_kind: expected 'linear' or 'mlp1', got {suffix_kind!r}")

    tokens = (vals["height"] // patch) * (vals["width"] // patch)
    patch_dim = vals["channels"] * patch * patch
    d_model, d_head = vals["d_model"], vals["d_head"]
    pooled = tokens * d_model

    weights = doc["weights"]
    if not isinstance(weights, dict):
        raise ValidationError("weights: expected an object")
    _require_keys(weights, _WEIGHT_KEYS - {"mask"}, {"mask"}, "weights")

    embed = weights["embed"]
    if not isinstance(embed, dict):
        raise ValidationError("weights.embed: expected an object")
    _require_keys(embed, {"w", "b"}, set(), "weights.embed")
    w_embed = _decode_array(embed["w"], (d_model, patch_dim), "weights.embed.w")
    b_embed = _decode_array(embed["b"], (d_model,), "weights.embed.b")

    def head_stack(key: str) -> tuple[np.ndarray, np.ndarray]:
        node = weights[key]
        if not isinstance(node, list) or len(node) != heads:
            raise ValidationError(f"weights.{key}: expected a list of {heads} head entries")
        ws, bs = [], []
        for h, entry in enumerate(node):
            p = f"weights.{key}[{h}]"
            if not isinstance(entry, dict):
                raise ValidationError(f"{p}: expected an object")
            _require_keys(entry, {"w", "b"}, set(), p)
            ws.append(_decode_array(entry["w"], (d_head, d_model), f"{p}.w"))
            bs.append(_decode_array(entry["b"], (d_head,), f"{p}.b"))
        return np.stack(ws), np.stack(bs)

    wq, bq = head_stack("wq")
    wk, bk = head_stack("wk")
    wv, bv = head_stack("wv")

    out = weights["wo"]
    if not isinstance(out, dict):
        raise ValidationError("weights.wo: expected an object")
    _require_keys(out, {"w", "b"}, set(), "weights.wo")
    if not isinstance(out["w"], list) or len(out["w"]) != heads:
        raise ValidationError(f"weights.wo.w: expected a list of {heads} head matrices")
    wo = np.stack(
        [_decode_array(out["w"][h], (d_model, d_head), f"weights.wo.w[{h}]") for h in range(heads)]
    )
    bo = _decode_array(out["b"], (d_model,), "weights.wo.b")

    if "mask" in weights:
        mask = _decode_array(weights["mask"], (heads, tokens, tokens), "weights.mask")
    else:
        mask = np.zeros((heads, tokens, tokens))

    sfx_node = weights["suffix"]
    if not isinstance(sfx_node, dict):
        raise ValidationError("weights.suffix: expected an object")
    if suffix_kind == "linear":
        _require_keys(sfx_node, {"w", "b"}, set(), "weights.suffix")
        suffix: Suffix = LinearSuffix(
            w=_decode_array(sfx_node["w"], (vals["classes"], pooled), "weights.suffix.w"),
            b=_decode_array(sfx_node["b"], (vals["classes"],), "weights.suffix.b"),
        )
    else:
        _require_keys(sfx_node, {"w1", "b1", "w2", "b2"}, set(), "weights.suffix")
        w1_node = sfx_node["w1"]
        if not isinstance(w1_node, dict) or "shape" not in w1_node or not w1_node["shape"]:
            raise ValidationError("weights.suffix.w1: expected an object with a 'shape'")
        hidden = w1_node["shape"][0]
        if not isinstance(hidden, int) or hidden < 1:
            raise ValidationError(f"weights.suffix.w1: bad hidden size {hidden!r}")
        suffix = MlpSuffix(
            w1=_decode_array(sfx_node["w1"], (hidden, pooled), "weights.suffix.w1"),
            b1=_decode_array(sfx_node["b1"], (hidden,), "weights.suffix.b1"),
            w2=_decode_array(sfx_node["w2"], (vals["classes"], hidden), "weights.suffix.w2"),
            b2=_decode_array(sfx_node["b2"], (vals["classes"],), "weights.suffix.b2"),
        )

    return AttentionModelSpec(
        height=vals["height"],
        width=vals["width"],
        channels=vals["channels"],
        patch=patch,
        d_model=d_model,
        d_head=d_head,
        heads=heads,
        n_classes=vals["classes"],
        residual=_ARCHES[arch],
        w_embed=w_embed,
        b_embed=b_embed,
        wq=wq,
        bq=bq,
        wk=wk,
        bk=bk,
        wv=wv,
        bv=bv,
        wo=wo,
        bo=bo,
        mask=mask,
        suffix=suffix,
    )


def random_model(
    seed: int,
    tokens: int = 4,
    heads: int = 1,
    d_model: int = 4,
    d_head: int | None = None,
    patch: int = 2,
    channels: int = 1,
    n_classes: int = 2,
    suffix_kind: str = "linear",
    hidden: int = 8,
    residual: bool = True,
    weight_scale: float = 1.0,
) -> AttentionModelSpec:
    """Deterministic random model for tests and demos.

    Stream: PCG64 seeded with SeedSequence(seed); draws happen in a fixed
    order (embed w/b, then q, k, v w/b per the stacked head axes, then the
    output projection, then the suffix), each scaled by
    weight_scale / sqrt(fan_in).  The grid is one patch-row of `tokens`
    patches.  The mask is zero.
    """
    if d_head is None:
        d_head = max(1, d_model // heads)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    height = patch
    width = patch * tokens
    patch_dim = channels * patch * patch
    pooled = tokens * d_model

    def draw(*shape: int, fan_in: int) -> np.ndarray:
        return rng.standard_normal(shape) * (weight_scale / math.sqrt(fan_in))

    w_embed = draw(d_model, patch_dim, fan_in=patch_dim)
    b_embed = draw(d_model, fan_in=patch_dim)
    wq = draw(heads, d_head, d_model, fan_in=d_model)
    bq = draw(heads, d_head, fan_in=d_model)
    wk = draw(heads, d_head, d_model, fan_in=d_model)
    bk = draw(heads, d_head, fan_in=d_model)
    wv = draw(heads, d_head, d_model, fan_in=d_model)
    bv = draw(heads, d_head, fan_in=d_model)
    wo = draw(heads, d_model, d_head, fan_in=heads * d_head)
    bo = draw(d_model, fan_in=heads * d_head)
    if suffix_kind == "linear":
        suffix: Suffix = LinearSuffix(w=draw(n_classes, pooled, fan_in=pooled), b=draw(n_classes, fan_in=pooled))
    elif suffix_kind == "mlp1":
        suffix = MlpSuffix(
            w1=draw(hidden, pooled, fan_in=pooled),
            b1=draw(hidden, fan_in=pooled),
            w2=draw(n_classes, hidden, fan_in=hidden),
            b2=draw(n_classes, fan_in=hidden),
        )
    else:
        raise ValidationError(f"suffix_kind must be 'linear' or 'mlp1', got {suffix_kind!r}")
    return AttentionModelSpec(
        height=height,
        width=width,
        channels=channels,
        patch=patch,
        d_model=d_model,
        d_head=d_head,
        heads=heads,
        n_classes=n_classes,
        residual=residual,
        w_embed=w_embed,
        b_embed=b_embed,
        wq=wq,
        bq=bq,
        wk=wk,
        bk=bk,
        wv=wv,
        bv=bv,
        wo=wo,
        bo=bo,
        mask=np.zeros((heads, tokens, tokens)),
        suffix=suffix,
    )
