"""Optimization loop (Adam), early stopping, model selection, and the
hyperparameter grid search.

A run is fully determined by (dataset, modalities, config): initialization
draws, per-epoch shuffles and dropout masks all come from one PCG64
generator seeded with the config seed, in a fixed order. Gradient
accumulation over a batch sums per-sample gradients in batch order.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .data import Manifest
from .metrics import confusion, weighted_prf, MetricsReport
from .model import (
    FusionParams,
    backward_into,
    canonical_order,
    forward,
    init_params,
    loss,
    zero_grads,
)

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass
class TrainConfig:
    dropout: float
    learning_rate: float
    batch_size: int
    shared_dim: int
    proj_dim: int
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        # zero is allowed so no-improvement paths can be exercised
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        for name in ("batch_size", "shared_dim", "proj_dim", "max_epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class HyperGrid:
    """Candidate values per config axis; the cartesian product is
    enumerated in declared order (dropout, lr, batch, shared, proj)."""

    dropouts: list[float]
    learning_rates: list[float]
    batch_sizes: list[int]
    shared_dims: list[int]
    proj_dims: list[int]

    def __post_init__(self):
        for name in ("dropouts", "learning_rates", "batch_sizes",
                     "shared_dims", "proj_dims"):
            if not getattr(self, name):
                raise ValueError(f"grid axis {name} is empty")

    def __len__(self) -> int:
        return (len(self.dropouts) * len(self.learning_rates) * len(self.batch_sizes)
                * len(self.shared_dims) * len(self.proj_dims))

    def configs(self, max_epochs: int, patience: int, seed: int):
        """Yield (index, TrainConfig); per-config seed is seed XOR index."""
        combos = itertools.product(
            self.dropouts, self.learning_rates, self.batch_sizes,
            self.shared_dims, self.proj_dims,
        )
        for index, (dr, lr, bs, sd, pd) in enumerate(combos):
            yield index, TrainConfig(
                dropout=dr, learning_rate=lr, batch_size=bs,
                shared_dim=sd, proj_dim=pd,
                max_epochs=max_epochs, patience=patience, seed=seed ^ index,
            )


# The published sweep: 3 dropouts x 2 learning rates x 3 batch sizes
# x 3 shared sizes x 2 projection sizes = 108 configurations.
DEFAULT_GRID = HyperGrid(
    dropouts=[0.2, 0.3, 0.4],
    learning_rates=[0.001, 0.0001],
    batch_sizes=[32, 64, 128],
    shared_dims=[1024, 2048, 4096],
    proj_dims=[256, 1024],
)


@dataclass
class OptimizerState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    # blocks whose gradient has ever been nonzero; untouched blocks keep
    # m = v = 0 and a zero update, so they can be skipped exactly
    touched: set[str] = field(default_factory=set)

    @classmethod
    def for_params(cls, p: FusionParams) -> "OptimizerState":
        return cls(
            m={name: np.zeros_like(arr) for name, arr in p.param_items()},
            v={name: np.zeros_like(arr) for name, arr in p.param_items()},
        )


def adam_step(
    p: FusionParams,
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    lr: float,
) -> None:
    """Standard bias-corrected Adam update, in place."""
    state.step += 1
    t = state.step
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for name, arr in p.param_items():
        g = grads[name]
        if g.shape != arr.shape:
            raise ValueError(
                f"gradient block {name!r} has shape {g.shape}, expected {arr.shape}"
            )
        if name not in state.touched:
            # an all-zero block keeps m = v = 0 and a zero update, so it can
            # be skipped exactly (and is trivially finite)
            if not g.any():
                continue
            state.touched.add(name)
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in block {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        arr -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    train_accuracy: list[float] = field(default_factory=list)
    val_weighted_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1
    stopping_reason: str = ""

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)

    def to_dict(self) -> dict:
        return {
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "val_weighted_f1": self.val_weighted_f1,
            "best_epoch": self.best_epoch,
            "stopping_reason": self.stopping_reason,
            "epochs_run": self.epochs_run,
        }


def predict(params: FusionParams, records) -> list[int]:
    """Deterministic eval-mode class predictions (argmax probability)."""
    return [int(np.argmax(forward(rec, params, mode="eval").probs)) for rec in records]


def evaluate(params: FusionParams, records) -> MetricsReport:
    labels = [rec.label for rec in records]
    return weighted_prf(confusion(labels, predict(params, records)))


def _check_dataset(manifest: Manifest, modalities) -> tuple[str, ...]:
    mods = canonical_order(modalities)
    missing = [m for m in mods if m not in manifest.modalities]
    if missing:
        raise ValueError(
            f"manifest {manifest.dataset!r} lacks requested modalities {missing}"
        )
    for split in ("train", "val"):
        if not manifest.split(split):
            raise ValueError(f"manifest {manifest.dataset!r} has an empty {split} split")
    return mods


def train(
    manifest: Manifest, modalities, cfg: TrainConfig
) -> tuple[FusionParams, TrainHistory]:
    """Mini-batch training with seeded shuffling, epoch-end validation on
    weighted F1, and early stopping.

    Returns the parameters of the best validation epoch. Stops after
    ``cfg.patience`` epochs without validation improvement, or at
    ``cfg.max_epochs``. The per-epoch shuffle is one permutation drawn
    before batching, so the visiting order is independent of batch size.
    """
    mods = _check_dataset(manifest, modalities)
    train_recs = manifest.split("train")
    val_recs = manifest.split("val")
    raw_dims = {m: manifest.modalities[m].dim for m in mods}

    rng = np.random.default_rng(cfg.seed)
    params = init_params(mods, raw_dims, cfg.shared_dim, cfg.proj_dim, rng)
    state = OptimizerState.for_params(params)
    history = TrainHistory()

    best_f1 = -np.inf
    best_params = params.copy()
    epochs_since_improvement = 0

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(train_recs))
        epoch_loss = 0.0
        correct = 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            grads = zero_grads(params)
            for idx in batch:
                rec = train_recs[idx]
                cache = forward(rec, params, mode="train", rng=rng,
                                dropout_rate=cfg.dropout)
                epoch_loss += loss(cache.probs, rec.label)
                if int(np.argmax(cache.probs)) == rec.label:
                    correct += 1
                backward_into(grads, cache, rec.label, params)
            scale = 1.0 / len(batch)
            for name in grads:
                grads[name] *= scale
            adam_step(params, grads, state, cfg.learning_rate)

        history.train_loss.append(epoch_loss / len(train_recs))
        history.train_accuracy.append(correct / len(train_recs))
        val_f1 = evaluate(params, val_recs).weighted_f1
        history.val_weighted_f1.append(val_f1)

        if val_f1 > best_f1:
            best_f1 = val_f1
            best_params = params.copy()
            history.best_epoch = epoch
            epochs_since_improvement = 0
        else:
            epochs_since_improvement += 1
            if epochs_since_improvement >= cfg.patience:
                history.stopping_reason = "early_stopping"
                break
    if not history.stopping_reason:
        history.stopping_reason = "max_epochs"
    return best_params, history


@dataclass
class GridEntry:
    index: int
    config: TrainConfig
    history: TrainHistory | None
    best_val_f1: float
    error: str | None = None


@dataclass
class GridResult:
    best_index: int
    best_config: TrainConfig
    best_params: FusionParams
    entries: list[GridEntry]


def _run_config(args) -> tuple[int, TrainConfig, TrainHistory | None, FusionParams | None, str | None]:
    index, manifest, mods, cfg = args
    try:
        params, history = train(manifest, mods, cfg)
        return index, cfg, history, params, None
    except Exception as exc:  # a failed config is recorded, not fatal
        return index, cfg, None, None, f"{type(exc).__name__}: {exc}"


def grid_search(
    manifest: Manifest,
    modalities,
    grid: HyperGrid,
    *,
    seed: int = 0,
    max_epochs: int = 100,
    patience: int = 10,
    jobs: int = 1,
    on_result=None,
) -> GridResult:
    """Train one model per grid configuration and keep the best.

    Selection is max validation weighted F1; ties go to the earliest
    enumerated config. With ``jobs`` > 1 configs run in worker processes;
    results are merged by config index so the outcome does not depend on
    completion order. ``on_result`` (if given) is called with each finished
    (index, config, history, params, error); its return value is ignored.
    """
    mods = _check_dataset(manifest, modalities)
    tasks = [(index, manifest, mods, cfg)
             for index, cfg in grid.configs(max_epochs, patience, seed)]

    entries: list[GridEntry] = []
    best: tuple[float, int] | None = None
    best_config = None
    best_params = None

    def consume(result):
        nonlocal best, best_config, best_params
        index, cfg, history, params, error = result
        if on_result is not None:
            on_result(index, cfg, history, params, error)
        if error is not None:
            entries.append(GridEntry(index, cfg, None, float("-inf"), error))
            return
        f1 = max(history.val_weighted_f1)
        entries.append(GridEntry(index, cfg, history, f1))
        # ties resolve to the lowest index
        if best is None or f1 > best[0] or (f1 == best[0] and index < best[1]):
            best = (f1, index)
            best_config = cfg
            best_params = params

    if jobs <= 1:
        for task in tasks:
            consume(_run_config(task))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for result in pool.map(_run_config, tasks):
                consume(result)

    entries.sort(key=lambda e: e.index)
    if best is None:
        failures = "; ".join(f"#{e.index}: {e.error}" for e in entries[:5])
        raise RuntimeError(f"every grid configuration failed ({failures})")
    return GridResult(
        best_index=best[1], best_config=best_config,
        best_params=best_params, entries=entries,
    )
