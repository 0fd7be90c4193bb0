"""Mini-batch training: negative sampling, max-margin loss, sparse Adam.

Each epoch shuffles the training split with an epoch-derived child seed
(`numpy.random.SeedSequence((seed, epoch))`), partitions it into
``n_batches`` contiguous batches, and takes one Adam step per batch. The
batch loss is the mean over its positives of the hinge summed over each
positive's eta negatives; the gradient flows through both the positive and
the negative score whenever the hinge is active.

Scoring and gradient accumulation for a batch are farmed to exactly
``config.threads`` native workers over contiguous slices; each worker
accumulates into private sparse buffers, which are merged in ascending
worker index before a single-threaded optimizer step. Runs are therefore
bit-reproducible for a fixed (seed, threads, backend) triple. Different
thread counts regroup float sums, which keeps single steps equal to ~1e-7
per weight; over many epochs the hinge and relu kinks can occasionally
amplify that reassociation noise into visibly different (equally valid)
trajectories.
"""

from __future__ import annotations

import ctypes
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import KnowledgeGraph
from .kernels import Backend, TrainWorkspace, native_lib
from .models import (
    ConvKBParams,
    DistMultParams,
    ModelKind,
    ModelParams,
    Norm,
    TransEParams,
    init_params,
    native_model_code,
    validate_triples,
)


@dataclass
class TrainConfig:
    """Full experiment configuration; defaults follow the benchmark protocol."""

    model: ModelKind = ModelKind.TRANSE
    dim: int = 256
    epochs: int = 500
    eta: int = 2
    n_batches: int = 100
    lr: float = 0.01
    margin: float = 1.0
    threads: int = 1
    backend: Backend = Backend.VECTORIZED
    seed: int = 0
    normalize_entities: Optional[bool] = None  # None: on for TransE only
    norm: Norm = Norm.L1
    tau: int = 32
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        self.model = ModelKind(self.model)
        self.backend = Backend(self.backend)
        self.norm = Norm(self.norm)

    def validate(self) -> None:
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.eta < 1:
            raise ValueError(f"eta must be >= 1, got {self.eta}")
        if self.n_batches < 1:
            raise ValueError(f"n_batches must be >= 1, got {self.n_batches}")
        if self.threads < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")
        if self.margin < 0:
            raise ValueError(f"margin must be >= 0, got {self.margin}")
        if self.dim < 1:
            raise ValueError(f"dim must be >= 1, got {self.dim}")
        if self.tau < 1:
            raise ValueError(f"tau must be >= 1, got {self.tau}")

    @property
    def normalize_effective(self) -> bool:
        if self.normalize_entities is None:
            return self.model is ModelKind.TRANSE
        return bool(self.normalize_entities)


@dataclass
class TrainingTimings:
    wall_train_seconds: float
    cpu_train_seconds: float
    epoch_wall_seconds: Optional[list[float]] = None
    epoch_mean_losses: Optional[list[float]] = None


@dataclass
class AdamState:
    """First/second moment tables plus the shared global timestep."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def like(cls, param: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(param), np.zeros_like(param))


def adam_step(
    param: np.ndarray,
    gradient: np.ndarray,
    state: AdamState,
    lr: float = 0.01,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    rows: Optional[np.ndarray] = None,
) -> None:
    """One bias-corrected Adam update, in place.

    With ``rows`` given, only those rows of the parameter and its moments
    are updated (``gradient`` then holds just those rows); the timestep is
    global either way.
    """
    if rows is None:
        if gradient.shape != param.shape:
            raise ValueError(f"shape mismatch: {gradient.shape} vs {param.shape}")
        p, m, v = param, state.m, state.v
    else:
        if gradient.shape != (len(rows),) + param.shape[1:]:
            raise ValueError("gradient shape must match the selected rows")
        p, m, v = param[rows], state.m[rows], state.v[rows]

    state.t += 1
    m[...] = beta1 * m + (1.0 - beta1) * gradient
    v[...] = beta2 * v + (1.0 - beta2) * gradient * gradient
    m_hat = m / (1.0 - beta1**state.t)
    v_hat = v / (1.0 - beta2**state.t)
    p -= lr * m_hat / (np.sqrt(v_hat) + eps)

    if rows is not None:
        param[rows] = p
        state.m[rows] = m
        state.v[rows] = v


def pairwise_loss(pos_score: float, neg_score: float, margin: float) -> float:
    """Max-margin hinge: max(0, margin - pos_score + neg_score)."""
    if margin < 0:
        raise ValueError(f"margin must be >= 0, got {margin}")
    return max(0.0, margin - pos_score + neg_score)


def sample_negatives(triple, eta: int, n_entities: int, rng: np.random.Generator) -> np.ndarray:
    """Corrupt one side (head or tail, p=1/2 each) of a positive, eta times.

    The replacement entity is uniform over [0, n_entities); collisions with
    existing true triples are not filtered. Returns an (eta, 3) int32 array.
    """
    if eta < 1:
        raise ValueError(f"eta must be >= 1, got {eta}")
    if n_entities < 2:
        raise ValueError(f"need >= 2 entities to corrupt, got {n_entities}")
    out = np.tile(np.asarray(triple, dtype=np.int32), (eta, 1))
    corrupt_head = rng.random(eta) < 0.5
    replacements = rng.integers(0, n_entities, size=eta, dtype=np.int32)
    out[corrupt_head, 0] = replacements[corrupt_head]
    out[~corrupt_head, 2] = replacements[~corrupt_head]
    return out


def sample_negatives_batch(
    positives: np.ndarray, eta: int, n_entities: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized negative sampling for a batch; same per-negative semantics
    as `sample_negatives`. Returns (n_pos * eta, 3) int32, grouped by
    positive."""
    if n_entities < 2:
        raise ValueError(f"need >= 2 entities to corrupt, got {n_entities}")
    n = len(positives) * eta
    out = np.repeat(np.asarray(positives, dtype=np.int32), eta, axis=0)
    corrupt_head = rng.random(n) < 0.5
    replacements = rng.integers(0, n_entities, size=n, dtype=np.int32)
    out[corrupt_head, 0] = replacements[corrupt_head]
    out[~corrupt_head, 2] = replacements[~corrupt_head]
    return out


def epoch_batches(n_train: int, n_batches: int) -> list[tuple[int, int]]:
    """Split [0, n_train) into n_batches contiguous ranges, sizes within 1."""
    if n_batches < 1:
        raise ValueError(f"n_batches must be >= 1, got {n_batches}")
    if n_train < 1:
        raise ValueError(f"n_train must be >= 1, got {n_train}")
    if n_batches > n_train:
        raise ValueError(f"n_batches ({n_batches}) exceeds n_train ({n_train})")
    base, extra = divmod(n_train, n_batches)
    ranges = []
    at = 0
    for i in range(n_batches):
        size = base + (1 if i < extra else 0)
        ranges.append((at, at + size))
        at += size
    return ranges


_EMPTY_F32 = np.empty(0, dtype=np.float32)


class _NativeTrainer:
    """Owns parameters, moments, and the reusable per-worker workspace for
    the fused native batch step (no allocation on the hot path)."""

    def __init__(self, params: ModelParams, config: TrainConfig, max_batch: int):
        self.params = params
        self.config = config
        self.lib = native_lib(config.backend)
        self.ent = np.ascontiguousarray(params.entities)
        self.rel = np.ascontiguousarray(params.relations)
        # Adam moments, row-interleaved as [m_row | v_row] for locality
        self.mom_ent = np.zeros((self.ent.shape[0], 2 * self.ent.shape[1]),
                                dtype=np.float32)
        self.mom_rel = np.zeros((self.rel.shape[0], 2 * self.rel.shape[1]),
                                dtype=np.float32)
        if isinstance(params, ConvKBParams):
            self.filters = np.ascontiguousarray(params.filters.reshape(-1))
            self.w = np.ascontiguousarray(params.w)
            n_shared = self.filters.size + self.w.size
            self.mom_shared = np.zeros(2 * n_shared, dtype=np.float32)
        else:
            self.filters = self.w = _EMPTY_F32
            self.mom_shared = _EMPTY_F32
            n_shared = 0
        self.t = 0

        d = self.ent.shape[1]
        n_ent, n_rel = self.ent.shape[0], self.rel.shape[0]
        threads = config.threads
        per_worker = -(-max_batch // threads)  # ceil
        cap_ent = per_worker * (2 + 2 * config.eta)
        cap_rel = per_worker
        self._bufs = {
            "ent_ids": np.empty(threads * cap_ent, dtype=np.int32),
            "rel_ids": np.empty(threads * cap_rel, dtype=np.int32),
            "ent_grads": np.empty(threads * cap_ent * d, dtype=np.float32),
            "rel_grads": np.empty(threads * cap_rel * d, dtype=np.float32),
            "shared_grads": np.empty(max(1, threads * n_shared), dtype=np.float32),
            "scratch": np.empty(d + max(1, n_shared), dtype=np.float32),
            "ent_bits": np.zeros(threads * ((n_ent + 63) // 64), dtype=np.uint64),
            "rel_bits": np.zeros(threads * ((n_rel + 63) // 64), dtype=np.uint64),
            "ent_map": np.full(threads * n_ent, -1, dtype=np.int32),
            "rel_map": np.full(threads * n_rel, -1, dtype=np.int32),
            "merged": np.empty(threads * cap_ent, dtype=np.int32),
        }
        ws = TrainWorkspace()
        ws.cap_ent = cap_ent
        ws.cap_rel = cap_rel
        for name, arr in self._bufs.items():
            setattr(ws, name, arr.ctypes.data)
        self._ws = ws

    def step(self, positives: np.ndarray, negatives: np.ndarray) -> float:
        cfg = self.config
        n_pos = len(positives)
        self.t += 1
        loss = ctypes.c_double(0.0)
        rc = self.lib.kgeb_train_batch(
            native_model_code(self.params),
            self.ent,
            self.ent.shape[0],
            self.rel,
            self.rel.shape[0],
            self.ent.shape[1],
            self.filters,
            self.w,
            self.filters.size // 3,
            self.mom_ent,
            self.mom_rel,
            self.mom_shared,
            np.ascontiguousarray(positives, dtype=np.int32).reshape(-1),
            n_pos,
            np.ascontiguousarray(negatives, dtype=np.int32).reshape(-1),
            cfg.eta,
            cfg.margin,
            1.0 / n_pos,
            cfg.threads,
            self.t,
            cfg.lr,
            cfg.adam_beta1,
            cfg.adam_beta2,
            cfg.adam_eps,
            1 if cfg.normalize_effective else 0,
            ctypes.byref(self._ws),
            ctypes.byref(loss),
        )
        if rc != 0:
            raise RuntimeError(f"native train_batch failed with status {rc}")
        return loss.value

    def finalize(self) -> ModelParams:
        p = self.params
        if isinstance(p, ConvKBParams):
            return ConvKBParams(self.ent, self.rel, self.filters.reshape(-1, 3), self.w)
        if isinstance(p, TransEParams):
            return TransEParams(self.ent, self.rel, p.norm)
        return DistMultParams(self.ent, self.rel)


def _epoch_rng(seed: int, epoch: int) -> np.random.Generator:
    # child seed mixed from (seed, epoch) so epochs are decorrelated but
    # reproducible
    return np.random.default_rng(np.random.SeedSequence((seed & 0xFFFFFFFF, epoch)))


def train(kg: KnowledgeGraph, config: TrainConfig) -> tuple[ModelParams, TrainingTimings]:
    """Train a model on ``kg.train`` and return (params, timings).

    The wall/CPU timings cover the whole epoch loop, including negative
    sampling and shuffling, matching the harness's training phase boundary.
    """
    config.validate()
    n_train = len(kg.train)
    if n_train == 0:
        raise ValueError("training split is empty")
    if kg.n_entities < 2:
        raise ValueError("need at least 2 entities to sample negatives")
    ranges = epoch_batches(n_train, config.n_batches)

    params = init_params(
        config.model,
        kg.n_entities,
        kg.n_relations,
        config.dim,
        tau=config.tau,
        seed=config.seed,
        norm=config.norm,
    )
    if config.normalize_effective:
        # start on the unit sphere so every row satisfies the norm invariant
        norms = np.linalg.norm(params.entities, axis=1, keepdims=True)
        np.divide(params.entities, norms, out=params.entities, where=norms > 1e-12)

    max_batch = max(end - start for start, end in ranges)
    trainer = _NativeTrainer(params, config, max_batch)
    train_arr = validate_triples(params, kg.train)

    epoch_losses: list[float] = []
    epoch_walls: list[float] = []
    wall0 = time.perf_counter()
    cpu0 = time.process_time()
    for epoch in range(config.epochs):
        e0 = time.perf_counter()
        rng = _epoch_rng(config.seed, epoch)
        order = rng.permutation(n_train)
        shuffled = train_arr[order]
        total = 0.0
        for start, end in ranges:
            positives = shuffled[start:end]
            negatives = sample_negatives_batch(
                positives, config.eta, kg.n_entities, rng
            )
            total += trainer.step(positives, negatives)
        epoch_losses.append(total / len(ranges))
        epoch_walls.append(time.perf_counter() - e0)
    wall = time.perf_counter() - wall0
    cpu = time.process_time() - cpu0

    timings = TrainingTimings(
        wall_train_seconds=wall,
        cpu_train_seconds=cpu,
        epoch_wall_seconds=epoch_walls,
        epoch_mean_losses=epoch_losses,
    )
    return trainer.finalize(), timings
