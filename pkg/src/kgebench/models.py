"""Parameter storage, score functions, and analytic gradients.

Three embedding models are supported:

* TransE: score is the negated L1 or L2 distance between ``h + r`` and ``t``
  (higher means more plausible, maximum 0).
* DistMult: score is the trilinear form ``sum_i r_i * h_i * t_i``; symmetric
  in head and tail by construction.
* ConvKB: tau width-3 filters slide over the rows of the d x 3 matrix
  ``[h; r; t]``; the relu'd filter-major feature map is dotted with a shared
  weight vector ``w``.

The single-triple score and gradient functions here are plain numpy and
preserve the parameter dtype, so the same code path runs in float64 for
finite-difference gradient checks. Bulk scoring (`score_batch`) goes through
the native kernels and is float32 only.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .kernels import Backend, native_lib


class ModelKind(enum.Enum):
    TRANSE = "transe"
    DISTMULT = "distmult"
    CONVKB = "convkb"


class Norm(enum.Enum):
    L1 = "l1"
    L2 = "l2"


@dataclass
class TransEParams:
    entities: np.ndarray  # (n_entities, d)
    relations: np.ndarray  # (n_relations, d)
    norm: Norm = Norm.L1

    @property
    def dim(self) -> int:
        return self.entities.shape[1]

    @property
    def kind(self) -> ModelKind:
        return ModelKind.TRANSE


@dataclass
class DistMultParams:
    entities: np.ndarray
    relations: np.ndarray

    @property
    def dim(self) -> int:
        return self.entities.shape[1]

    @property
    def kind(self) -> ModelKind:
        return ModelKind.DISTMULT


@dataclass
class ConvKBParams:
    entities: np.ndarray
    relations: np.ndarray
    filters: np.ndarray  # (tau, 3)
    w: np.ndarray  # (tau * d,)

    @property
    def dim(self) -> int:
        return self.entities.shape[1]

    @property
    def tau(self) -> int:
        return self.filters.shape[0]

    @property
    def kind(self) -> ModelKind:
        return ModelKind.CONVKB


ModelParams = Union[TransEParams, DistMultParams, ConvKBParams]


@dataclass
class ScoreGradient:
    """Partial derivatives of a triple's score w.r.t. the involved rows.

    ``d_shared`` is only set for ConvKB: the flattened filter gradients
    (tau*3) followed by the w gradients (tau*d).
    """

    d_head: np.ndarray
    d_relation: np.ndarray
    d_tail: np.ndarray
    d_shared: Optional[np.ndarray] = None


def native_model_code(params: ModelParams) -> int:
    if isinstance(params, TransEParams):
        return 0 if params.norm is Norm.L1 else 1
    if isinstance(params, DistMultParams):
        return 2
    if isinstance(params, ConvKBParams):
        return 3
    raise ValueError(f"unknown model params type: {type(params).__name__}")


def init_params(
    model_kind: ModelKind | str,
    n_entities: int,
    n_relations: int,
    dim: int,
    tau: int = 32,
    seed: int = 0,
    norm: Norm = Norm.L1,
    dtype=np.float32,
) -> ModelParams:
    """Draw initial parameters, deterministically for a given seed.

    Embedding weights (and ConvKB filters) are uniform on
    [-6/sqrt(d), +6/sqrt(d)]; the ConvKB output weights are uniform on
    [-1/sqrt(tau*d), +1/sqrt(tau*d)]. Draw order is entities, relations,
    filters, w.
    """
    model_kind = ModelKind(model_kind)
    if n_entities < 1 or n_relations < 1:
        raise ValueError(
            f"need at least one entity and one relation, got "
            f"{n_entities} entities / {n_relations} relations"
        )
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")

    rng = np.random.default_rng(seed)
    bound = 6.0 / np.sqrt(dim)
    entities = rng.uniform(-bound, bound, size=(n_entities, dim)).astype(dtype)
    relations = rng.uniform(-bound, bound, size=(n_relations, dim)).astype(dtype)

    if model_kind is ModelKind.TRANSE:
        return TransEParams(entities, relations, norm)
    if model_kind is ModelKind.DISTMULT:
        return DistMultParams(entities, relations)
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    filters = rng.uniform(-bound, bound, size=(tau, 3)).astype(dtype)
    w_bound = 1.0 / np.sqrt(tau * dim)
    w = rng.uniform(-w_bound, w_bound, size=tau * dim).astype(dtype)
    return ConvKBParams(entities, relations, filters, w)


def _rows(params: ModelParams, triple) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    h, r, t = int(triple[0]), int(triple[1]), int(triple[2])
    n_ent = params.entities.shape[0]
    n_rel = params.relations.shape[0]
    if not (0 <= h < n_ent and 0 <= t < n_ent and 0 <= r < n_rel):
        raise ValueError(f"triple index out of range: ({h}, {r}, {t})")
    return params.entities[h], params.relations[r], params.entities[t]


def score_transe(params: TransEParams, triple) -> float:
    vh, vr, vt = _rows(params, triple)
    diff = vh + vr - vt
    if params.norm is Norm.L1:
        return float(-np.sum(np.abs(diff)))
    return float(-np.sqrt(np.sum(diff * diff)))


def score_distmult(params: DistMultParams, triple) -> float:
    vh, vr, vt = _rows(params, triple)
    # (h*t)*r keeps head/tail exchange symmetry exact in float arithmetic
    return float(np.sum((vh * vt) * vr))


def score_convkb(params: ConvKBParams, triple) -> float:
    vh, vr, vt = _rows(params, triple)
    # feature map rows: filters @ [h; r; t]-rows, filter-major
    pre = (
        params.filters[:, 0:1] * vh[None, :]
        + params.filters[:, 1:2] * vr[None, :]
        + params.filters[:, 2:3] * vt[None, :]
    )
    act = np.maximum(pre, 0)
    return float(np.sum(act.reshape(-1) * params.w))


def score(params: ModelParams, triple) -> float:
    if isinstance(params, TransEParams):
        return score_transe(params, triple)
    if isinstance(params, DistMultParams):
        return score_distmult(params, triple)
    if isinstance(params, ConvKBParams):
        return score_convkb(params, triple)
    raise ValueError(f"unknown model params type: {type(params).__name__}")


def grad(params: ModelParams, triple, upstream: float = 1.0) -> ScoreGradient:
    """Analytic d(upstream * score)/d(involved rows).

    Conventions: TransE-L1 uses the sign subgradient with sign(0) = 0;
    TransE-L2 has gradient 0 at zero distance; the relu derivative at
    exactly 0 is 0.
    """
    vh, vr, vt = _rows(params, triple)
    dtype = params.entities.dtype
    u = dtype.type(upstream)

    if isinstance(params, TransEParams):
        diff = vh + vr - vt
        if params.norm is Norm.L1:
            s = np.sign(diff)
        else:
            dist = np.sqrt(np.sum(diff * diff))
            s = diff / dist if dist > 1e-12 else np.zeros_like(diff)
        d_head = -u * s
        return ScoreGradient(d_head=d_head, d_relation=d_head.copy(), d_tail=u * s)

    if isinstance(params, DistMultParams):
        return ScoreGradient(
            d_head=u * vr * vt,
            d_relation=u * vh * vt,
            d_tail=u * vh * vr,
        )

    if isinstance(params, ConvKBParams):
        tau, d = params.tau, params.dim
        w2 = params.w.reshape(tau, d)
        pre = (
            params.filters[:, 0:1] * vh[None, :]
            + params.filters[:, 1:2] * vr[None, :]
            + params.filters[:, 2:3] * vt[None, :]
        )
        active = pre > 0
        uw = u * w2 * active
        d_head = np.sum(uw * params.filters[:, 0:1], axis=0)
        d_relation = np.sum(uw * params.filters[:, 1:2], axis=0)
        d_tail = np.sum(uw * params.filters[:, 2:3], axis=0)
        d_filters = np.stack(
            [
                np.sum(uw * vh[None, :], axis=1),
                np.sum(uw * vr[None, :], axis=1),
                np.sum(uw * vt[None, :], axis=1),
            ],
            axis=1,
        )
        d_w = u * np.maximum(pre, 0).reshape(-1)
        d_shared = np.concatenate([d_filters.reshape(-1), d_w]).astype(dtype)
        return ScoreGradient(d_head, d_relation, d_tail, d_shared)

    raise ValueError(f"unknown model params type: {type(params).__name__}")


def validate_triples(params: ModelParams, triples: np.ndarray) -> np.ndarray:
    triples = np.ascontiguousarray(triples, dtype=np.int32)
    if triples.ndim != 2 or triples.shape[1] != 3:
        raise ValueError("triples must have shape (n, 3)")
    n_ent = params.entities.shape[0]
    n_rel = params.relations.shape[0]
    for col, bound in ((0, n_ent), (1, n_rel), (2, n_ent)):
        bad = np.flatnonzero((triples[:, col] < 0) | (triples[:, col] >= bound))
        if bad.size:
            i = int(bad[0])
            raise ValueError(f"triple {i} out of range: {tuple(triples[i])}")
    return triples


_EMPTY_F32 = np.empty(0, dtype=np.float32)


def score_batch(
    params: ModelParams,
    triples: np.ndarray,
    backend: Backend = Backend.VECTORIZED,
    threads: int = 1,
) -> np.ndarray:
    """Score many triples through the native kernels.

    Work is partitioned contiguously across `threads` workers; per-triple
    scores are independent, so the result does not depend on the thread
    count.
    """
    if params.entities.dtype != np.float32:
        raise ValueError("score_batch requires float32 parameters")
    triples = validate_triples(params, triples)
    n = len(triples)
    out = np.empty(n, dtype=np.float32)
    if n == 0:
        return out
    if isinstance(params, ConvKBParams):
        filters, w, tau = params.filters.reshape(-1), params.w, params.tau
    else:
        filters, w, tau = _EMPTY_F32, _EMPTY_F32, 0
    rc = native_lib(backend).kgeb_score_batch(
        native_model_code(params),
        np.ascontiguousarray(params.entities),
        np.ascontiguousarray(params.relations),
        params.dim,
        np.ascontiguousarray(filters),
        tau,
        np.ascontiguousarray(w),
        triples.reshape(-1),
        n,
        int(threads),
        out,
    )
    if rc != 0:
        raise RuntimeError(f"native score_batch failed with status {rc}")
    return out


# ---------------------------------------------------------------------
# checkpoint format: magic "KGEB", little-endian header, float32 tables
# in declaration order (entities, relations[, filters, w]).
# ---------------------------------------------------------------------

_MAGIC = b"KGEB"
_VERSION = 1
_HEADER = struct.Struct("<4sIIQQII")
_KIND_CODES = {
    ("transe", "l1"): 1,
    ("transe", "l2"): 2,
    ("distmult", ""): 3,
    ("convkb", ""): 4,
}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


def save_params(path, params: ModelParams) -> None:
    if isinstance(params, TransEParams):
        code = _KIND_CODES[("transe", params.norm.value)]
    elif isinstance(params, DistMultParams):
        code = _KIND_CODES[("distmult", "")]
    elif isinstance(params, ConvKBParams):
        code = _KIND_CODES[("convkb", "")]
    else:
        raise ValueError(f"unknown model params type: {type(params).__name__}")
    tau = params.tau if isinstance(params, ConvKBParams) else 0
    header = _HEADER.pack(
        _MAGIC,
        _VERSION,
        code,
        params.entities.shape[0],
        params.relations.shape[0],
        params.dim,
        tau,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(params.entities, dtype="<f4").tobytes())
        fh.write(np.ascontiguousarray(params.relations, dtype="<f4").tobytes())
        if isinstance(params, ConvKBParams):
            fh.write(np.ascontiguousarray(params.filters, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(params.w, dtype="<f4").tobytes())


def load_params(path) -> ModelParams:
    with open(path, "rb") as fh:
        header = fh.read(_HEADER.size)
        if len(header) != _HEADER.size:
            raise ValueError(f"truncated checkpoint header in {path}")
        magic, version, code, n_ent, n_rel, dim, tau = _HEADER.unpack(header)
        if magic != _MAGIC:
            raise ValueError(f"not a model checkpoint (bad magic): {path}")
        if version != _VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        if code not in _CODE_KINDS:
            raise ValueError(f"unknown model kind code {code}")

        def read_table(rows: int, cols: int) -> np.ndarray:
            raw = fh.read(rows * cols * 4)
            if len(raw) != rows * cols * 4:
                raise ValueError(f"truncated checkpoint data in {path}")
            return np.frombuffer(raw, dtype="<f4").reshape(rows, cols).copy()

        entities = read_table(n_ent, dim)
        relations = read_table(n_rel, dim)
        kind, variant = _CODE_KINDS[code]
        if kind == "transe":
            return TransEParams(entities, relations, Norm(variant))
        if kind == "distmult":
            return DistMultParams(entities, relations)
        filters = read_table(tau, 3)
        w = read_table(1, tau * dim).reshape(-1)
        return ConvKBParams(entities, relations, filters, w)
