"""Collaborative gating fusion network: forward pass, analytic gradients,
and checkpoint I/O.

Each modality's pooled embedding is L2-normalized, projected into a shared
space, and gated elementwise by a sigmoid of pairwise cross-modal gate
outputs. The gated states are summed and classified by a two-layer head.
All gradients are derived by hand; there is no autodiff.
"""

from __future__ import annotations

import json
import math
import struct
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .numerics import l2_normalize, relu, sigmoid, softmax

CANONICAL_MODALITIES = ("t", "a", "v")

CHECKPOINT_MAGIC = b"GFMODEL1"
CHECKPOINT_VERSION = 1


def canonical_order(modalities) -> tuple[str, ...]:
    """Validate a modality subset and return it in canonical t, a, v order."""
    mods = list(modalities)
    for m in mods:
        if m not in CANONICAL_MODALITIES:
            raise ValueError(f"unknown modality {m!r}; expected one of t, a, v")
    if len(set(mods)) != len(mods):
        raise ValueError(f"duplicate modalities in {mods}")
    if not mods:
        raise ValueError("at least one modality is required")
    return tuple(m for m in CANONICAL_MODALITIES if m in mods)


@dataclass
class FusionParams:
    """All learnable parameters of one fusion model.

    ``proj_W[m]`` maps modality m's raw embedding (after L2 normalization)
    into the shared space. The gating network (gate_W1/b1, gate_W2/b2) is a
    single parameter set shared across every ordered modality pair. The
    classifier head maps shared_dim -> proj_dim -> 2.
    """

    modalities: tuple[str, ...]
    raw_dims: dict[str, int]
    shared_dim: int
    proj_dim: int
    proj_W: dict[str, np.ndarray] = field(default_factory=dict)
    proj_b: dict[str, np.ndarray] = field(default_factory=dict)
    gate_W1: np.ndarray = None
    gate_b1: np.ndarray = None
    gate_W2: np.ndarray = None
    gate_b2: np.ndarray = None
    cls_W1: np.ndarray = None
    cls_b1: np.ndarray = None
    cls_W2: np.ndarray = None
    cls_b2: np.ndarray = None

    def param_items(self) -> Iterator[tuple[str, np.ndarray]]:
        """(name, array) pairs in the canonical block order used everywhere:
        per-modality projections first, then gating, then classifier."""
        for m in self.modalities:
            yield f"proj_W_{m}", self.proj_W[m]
            yield f"proj_b_{m}", self.proj_b[m]
        yield "gate_W1", self.gate_W1
        yield "gate_b1", self.gate_b1
        yield "gate_W2", self.gate_W2
        yield "gate_b2", self.gate_b2
        yield "cls_W1", self.cls_W1
        yield "cls_b1", self.cls_b1
        yield "cls_W2", self.cls_W2
        yield "cls_b2", self.cls_b2

    def copy(self) -> "FusionParams":
        out = FusionParams(
            modalities=self.modalities,
            raw_dims=dict(self.raw_dims),
            shared_dim=self.shared_dim,
            proj_dim=self.proj_dim,
        )
        for m in self.modalities:
            out.proj_W[m] = self.proj_W[m].copy()
            out.proj_b[m] = self.proj_b[m].copy()
        for name in ("gate_W1", "gate_b1", "gate_W2", "gate_b2",
                     "cls_W1", "cls_b1", "cls_W2", "cls_b2"):
            setattr(out, name, getattr(self, name).copy())
        return out

    def n_params(self) -> int:
        return sum(arr.size for _, arr in self.param_items())

    def to_flat(self) -> np.ndarray:
        return np.concatenate([arr.ravel() for _, arr in self.param_items()])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params():
            raise ValueError(f"expected {self.n_params()} values, got {flat.size}")
        offset = 0
        for _, arr in self.param_items():
            arr[...] = flat[offset:offset + arr.size].reshape(arr.shape)
            offset += arr.size


def init_params(
    modalities,
    raw_dims: Mapping[str, int],
    shared_dim: int,
    proj_dim: int,
    rng: np.random.Generator,
) -> FusionParams:
    """Seeded initialization: weights uniform in +-sqrt(6/(fan_in+fan_out)),
    biases zero. Blocks are drawn in canonical order so a given seed always
    yields the same model."""
    mods = canonical_order(modalities)
    for m in mods:
        if m not in raw_dims or raw_dims[m] <= 0:
            raise ValueError(f"missing or invalid raw dim for modality {m!r}")
    if shared_dim <= 0 or proj_dim <= 0:
        raise ValueError("shared_dim and proj_dim must be positive")

    def draw(rows: int, cols: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-bound, bound, size=(rows, cols))

    p = FusionParams(modalities=mods, raw_dims={m: int(raw_dims[m]) for m in mods},
                     shared_dim=int(shared_dim), proj_dim=int(proj_dim))
    for m in mods:
        p.proj_W[m] = draw(shared_dim, raw_dims[m])
        p.proj_b[m] = np.zeros(shared_dim)
    p.gate_W1 = draw(shared_dim, 2 * shared_dim)
    p.gate_b1 = np.zeros(shared_dim)
    p.gate_W2 = draw(shared_dim, shared_dim)
    p.gate_b2 = np.zeros(shared_dim)
    p.cls_W1 = draw(proj_dim, shared_dim)
    p.cls_b1 = np.zeros(proj_dim)
    p.cls_W2 = draw(2, proj_dim)
    p.cls_b2 = np.zeros(2)
    return p


@dataclass
class ForwardCache:
    """Every intermediate of one forward pass, kept for the backward pass.

    Dropout masks are ``None`` whenever dropout was inactive (eval mode or
    zero rate); a ``None`` mask means identity.
    """

    inputs: dict[str, np.ndarray]          # raw per-modality vectors
    normalized: dict[str, np.ndarray]      # unit-norm inputs
    projected: dict[str, np.ndarray]       # W_m @ normalized + b_m (pre-dropout)
    proj_mask: dict[str, np.ndarray | None]  # dropout masks on projected vectors
    h: dict[str, np.ndarray]               # post-dropout projected vectors
    pair_pre: dict[tuple[str, str], np.ndarray]     # gate layer-1 pre-activation
    pair_hidden: dict[tuple[str, str], np.ndarray]  # rectified layer-1 output
    pair_out: dict[tuple[str, str], np.ndarray]     # gate network output
    gate_sum: dict[str, np.ndarray]        # summed pair outputs (empty if unimodal)
    alpha: dict[str, np.ndarray]           # sigmoid gates (ones if unimodal)
    gated: dict[str, np.ndarray]           # alpha * h
    fused: np.ndarray
    cls_pre: np.ndarray                    # classifier layer-1 pre-activation
    cls_hidden: np.ndarray                 # rectified
    cls_mask: np.ndarray | None            # classifier dropout mask
    cls_dropped: np.ndarray
    logits: np.ndarray
    probs: np.ndarray


def project(x, m: str, p: FusionParams) -> np.ndarray:
    """L2-normalize a raw embedding and map it into the shared space."""
    x = np.asarray(x, dtype=np.float64)
    expected = p.raw_dims.get(m)
    if expected is None:
        raise ValueError(f"modality {m!r} is not active in this model")
    if x.shape != (expected,):
        raise ValueError(
            f"modality {m!r}: expected dim {expected}, got {x.shape}"
        )
    return p.proj_W[m] @ l2_normalize(x) + p.proj_b[m]


def pair_gate(h_m, h_n, p: FusionParams) -> np.ndarray:
    """Gate network applied to the ordered pair (query h_m, partner h_n)."""
    h_m = np.asarray(h_m, dtype=np.float64)
    h_n = np.asarray(h_n, dtype=np.float64)
    if h_m.shape != (p.shared_dim,) or h_n.shape != (p.shared_dim,):
        raise ValueError(
            f"pair_gate inputs must have dim {p.shared_dim}, "
            f"got {h_m.shape} and {h_n.shape}"
        )
    pre = p.gate_W1 @ np.concatenate([h_m, h_n]) + p.gate_b1
    return p.gate_W2 @ relu(pre) + p.gate_b2


def gate_modality(
    m: str, projected: Mapping[str, np.ndarray], p: FusionParams
) -> tuple[np.ndarray, np.ndarray]:
    """Sigmoid gate for modality m from its cross-modal partners.

    Partners are visited in canonical order. With no partners (unimodal)
    the gate is the all-ones vector and the input passes through.
    """
    if m not in projected:
        raise ValueError(f"query modality {m!r} missing from projected map")
    h_m = projected[m]
    partners = [n for n in CANONICAL_MODALITIES if n in projected and n != m]
    if not partners:
        alpha = np.ones(p.shared_dim)
        return alpha, h_m.copy()
    total = np.zeros(p.shared_dim)
    for n in partners:
        total += pair_gate(h_m, projected[n], p)
    alpha = sigmoid(total)
    return alpha, alpha * h_m


def fuse(gated: Mapping[str, np.ndarray]) -> np.ndarray:
    """Coordinatewise sum of gated states in canonical modality order."""
    if not gated:
        raise ValueError("empty map")
    keys = [m for m in CANONICAL_MODALITIES if m in gated]
    out = np.zeros_like(gated[keys[0]])
    for m in keys:
        out += gated[m]
    return out


def classify(
    h_fusion,
    p: FusionParams,
    dropout_active: bool = False,
    rng: np.random.Generator | None = None,
    dropout_rate: float = 0.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-layer head: logits and softmax probabilities for (non-sarcastic,
    sarcastic). Dropout only applies when ``dropout_active``."""
    h_fusion = np.asarray(h_fusion, dtype=np.float64)
    if h_fusion.shape != (p.shared_dim,):
        raise ValueError(f"expected fused dim {p.shared_dim}, got {h_fusion.shape}")
    hidden = relu(p.cls_W1 @ h_fusion + p.cls_b1)
    mask = _dropout_mask(hidden.shape[0], dropout_active, dropout_rate, rng)
    dropped = hidden if mask is None else mask * hidden
    logits = p.cls_W2 @ dropped + p.cls_b2
    return logits, softmax(logits)


def _dropout_mask(
    n: int, active: bool, rate: float, rng: np.random.Generator | None
) -> np.ndarray | None:
    """Inverted-scaling dropout mask, or None when dropout is a no-op."""
    if not active or rate == 0.0:
        return None
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rng is None:
        raise ValueError("dropout is active but no generator was given")
    keep = 1.0 - rate
    return (rng.random(n) < keep) / keep


def loss(probs, label: int) -> float:
    """Cross-entropy of the true class; batch loss is the mean over samples."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")
    if len(probs) != 2:
        raise ValueError(f"expected 2 class probabilities, got {len(probs)}")
    total = float(probs[0]) + float(probs[1])
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total}, not 1")
    p_true = float(probs[label])
    if p_true <= 0.0:
        warnings.warn(
            f"probability of true class {label} is {p_true}; clamping to 1e-12",
            RuntimeWarning,
            stacklevel=2,
        )
        p_true = 1e-12
    return -math.log(p_true)


def forward(
    record,
    p: FusionParams,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    dropout_rate: float = 0.0,
) -> ForwardCache:
    """Run the full fusion pipeline on one sample.

    ``record`` is anything with ``id``, ``label`` and an ``embeddings`` map
    of modality -> object carrying ``values`` (or a plain modality->vector
    mapping). Modalities are always processed in canonical order, so the
    caller's ordering never affects the result. ``mode`` is "train" or
    "eval"; eval disables dropout.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    dropout_active = mode == "train" and dropout_rate > 0.0

    embeddings = getattr(record, "embeddings", record)
    sample_id = getattr(record, "id", "<anonymous>")

    inputs: dict[str, np.ndarray] = {}
    for m in p.modalities:
        if m not in embeddings:
            raise ValueError(f"sample {sample_id!r}: missing modality {m!r}")
        entry = embeddings[m]
        inputs[m] = np.asarray(getattr(entry, "values", entry), dtype=np.float64)

    normalized: dict[str, np.ndarray] = {}
    projected: dict[str, np.ndarray] = {}
    proj_mask: dict[str, np.ndarray | None] = {}
    h: dict[str, np.ndarray] = {}
    for m in p.modalities:
        if inputs[m].shape != (p.raw_dims[m],):
            raise ValueError(
                f"sample {sample_id!r}, modality {m!r}: expected dim "
                f"{p.raw_dims[m]}, got {inputs[m].shape}"
            )
        normalized[m] = l2_normalize(inputs[m])
        proj = p.proj_W[m] @ normalized[m]
        proj += p.proj_b[m]
        projected[m] = proj
        mask = _dropout_mask(p.shared_dim, dropout_active, dropout_rate, rng)
        proj_mask[m] = mask
        h[m] = proj if mask is None else mask * proj

    sd = p.shared_dim
    pair_pre: dict[tuple[str, str], np.ndarray] = {}
    pair_hidden: dict[tuple[str, str], np.ndarray] = {}
    pair_out: dict[tuple[str, str], np.ndarray] = {}
    gate_sum: dict[str, np.ndarray] = {}
    alpha: dict[str, np.ndarray] = {}
    gated: dict[str, np.ndarray] = {}
    cat = np.empty(2 * sd) if len(p.modalities) > 1 else None
    for m in p.modalities:
        partners = [n for n in p.modalities if n != m]
        if not partners:
            alpha[m] = np.ones(sd)
            gated[m] = h[m].copy()
            continue
        total = np.zeros(sd)
        cat[:sd] = h[m]
        for n in partners:
            cat[sd:] = h[n]
            pre = p.gate_W1 @ cat
            pre += p.gate_b1
            hid = relu(pre)
            out = p.gate_W2 @ hid
            out += p.gate_b2
            pair_pre[(m, n)] = pre
            pair_hidden[(m, n)] = hid
            pair_out[(m, n)] = out
            total += out
        gate_sum[m] = total
        alpha[m] = sigmoid(total)
        gated[m] = alpha[m] * h[m]

    fused = np.zeros(sd)
    for m in p.modalities:
        fused += gated[m]

    cls_pre = p.cls_W1 @ fused
    cls_pre += p.cls_b1
    cls_hidden = relu(cls_pre)
    cls_mask = _dropout_mask(p.proj_dim, dropout_active, dropout_rate, rng)
    cls_dropped = cls_hidden if cls_mask is None else cls_mask * cls_hidden
    logits = p.cls_W2 @ cls_dropped
    logits += p.cls_b2
    probs = softmax(logits)

    return ForwardCache(
        inputs=inputs, normalized=normalized, projected=projected,
        proj_mask=proj_mask, h=h, pair_pre=pair_pre, pair_hidden=pair_hidden,
        pair_out=pair_out, gate_sum=gate_sum, alpha=alpha, gated=gated,
        fused=fused, cls_pre=cls_pre, cls_hidden=cls_hidden, cls_mask=cls_mask,
        cls_dropped=cls_dropped, logits=logits, probs=probs,
    )


def zero_grads(p: FusionParams) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in p.param_items()}


def backward_into(
    grads: dict[str, np.ndarray],
    cache: ForwardCache,
    label: int,
    p: FusionParams,
) -> None:
    """Accumulate the exact loss gradients for one sample into ``grads``.

    Covers every dependency path: the classifier, the direct gated path,
    and both arguments of every pair-gate application (each gate depends
    on all modalities through its query and partner inputs).
    """
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label}")

    # softmax + cross-entropy
    d_logits = cache.probs.copy()
    d_logits[label] -= 1.0

    grads["cls_W2"] += np.outer(d_logits, cache.cls_dropped)
    grads["cls_b2"] += d_logits
    d_dropped = p.cls_W2.T @ d_logits
    d_hidden = d_dropped if cache.cls_mask is None else cache.cls_mask * d_dropped
    d_cls_pre = d_hidden * (cache.cls_pre > 0.0)
    grads["cls_W1"] += np.outer(d_cls_pre, cache.fused)
    grads["cls_b1"] += d_cls_pre
    d_fused = p.cls_W1.T @ d_cls_pre

    sd = p.shared_dim
    d_h = {m: np.zeros(sd) for m in p.modalities}
    for m in p.modalities:
        # fused = sum of gated states, so each gated state sees d_fused
        d_gated = d_fused
        partners = [n for n in p.modalities if n != m]
        if not partners:
            d_h[m] += d_gated
            continue
        d_alpha = d_gated * cache.h[m]
        d_h[m] += d_gated * cache.alpha[m]
        d_sum = d_alpha * cache.alpha[m] * (1.0 - cache.alpha[m])
        for n in partners:
            d_out = d_sum
            hid = cache.pair_hidden[(m, n)]
            grads["gate_W2"] += np.outer(d_out, hid)
            grads["gate_b2"] += d_out
            d_hid = p.gate_W2.T @ d_out
            d_pre = d_hid * (cache.pair_pre[(m, n)] > 0.0)
            grads["gate_W1"] += np.outer(
                d_pre, np.concatenate([cache.h[m], cache.h[n]])
            )
            grads["gate_b1"] += d_pre
            d_cat = p.gate_W1.T @ d_pre
            d_h[m] += d_cat[:sd]
            d_h[n] += d_cat[sd:]

    for m in p.modalities:
        mask = cache.proj_mask[m]
        d_proj = d_h[m] if mask is None else mask * d_h[m]
        grads[f"proj_W_{m}"] += np.outer(d_proj, cache.normalized[m])
        grads[f"proj_b_{m}"] += d_proj


def backward(cache: ForwardCache, label: int, p: FusionParams) -> dict[str, np.ndarray]:
    """Exact gradients of ``loss(forward(...), label)`` w.r.t. every
    parameter block. Blocks of inactive modalities are exactly zero."""
    grads = zero_grads(p)
    backward_into(grads, cache, label, p)
    return grads


def save_checkpoint(p: FusionParams, path) -> None:
    """Single self-describing record: magic, version, JSON header, then all
    parameter blocks as little-endian float32 in row-major canonical order."""
    header = {
        "shared_dim": p.shared_dim,
        "proj_dim": p.proj_dim,
        "modalities": [{"tag": m, "raw_dim": p.raw_dims[m]} for m in p.modalities],
    }
    header_bytes = json.dumps(header, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for _, arr in p.param_items():
            fh.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())


def load_checkpoint(path) -> FusionParams:
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode("utf-8"))
        mods = tuple(entry["tag"] for entry in header["modalities"])
        raw_dims = {entry["tag"]: int(entry["raw_dim"]) for entry in header["modalities"]}
        p = FusionParams(
            modalities=canonical_order(mods),
            raw_dims=raw_dims,
            shared_dim=int(header["shared_dim"]),
            proj_dim=int(header["proj_dim"]),
        )
        sd, pd = p.shared_dim, p.proj_dim
        shapes: list[tuple[str, tuple[int, ...]]] = []
        for m in p.modalities:
            shapes.append((f"proj_W_{m}", (sd, raw_dims[m])))
            shapes.append((f"proj_b_{m}", (sd,)))
        shapes += [
            ("gate_W1", (sd, 2 * sd)), ("gate_b1", (sd,)),
            ("gate_W2", (sd, sd)), ("gate_b2", (sd,)),
            ("cls_W1", (pd, sd)), ("cls_b1", (pd,)),
            ("cls_W2", (2, pd)), ("cls_b2", (2,)),
        ]
        for name, shape in shapes:
            count = int(np.prod(shape))
            buf = fh.read(count * 4)
            if len(buf) != count * 4:
                raise ValueError(f"{path}: truncated checkpoint at block {name}")
            arr = np.frombuffer(buf, dtype="<f4").astype(np.float64).reshape(shape)
            if name.startswith("proj_W_"):
                p.proj_W[name.removeprefix("proj_W_")] = arr
            elif name.startswith("proj_b_"):
                p.proj_b[name.removeprefix("proj_b_")] = arr
            else:
                setattr(p, name, arr)
        if fh.read(1):
            raise ValueError(f"{path}: trailing bytes after parameter blocks")
    return p
