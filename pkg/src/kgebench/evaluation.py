"""Timed inference phases and minimal link-prediction ranking.

Inference for entities and relations is defined here as timed embedding
retrieval (row copies); triple inference scores the test split through
`score_batch` as one timed phase.

`rank_queries` is a training-sanity evaluator, not a leaderboard: for each
test triple it ranks the true tail against all candidate tails and the true
head against all candidate heads, using worst-rank tie-breaking (ties count
against the model). Filtered mode removes candidates that form other known
true triples before ranking. MRR and hits@k are averaged over both
directions.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .kernels import Backend
from .metrics import PhaseTiming, time_phase
from .models import (
    ConvKBParams,
    DistMultParams,
    ModelParams,
    TransEParams,
    Norm,
    score_batch,
    validate_triples,
)

HITS_KS = (1, 3, 10)


@dataclass
class RankResult:
    mrr: float
    hits_at: dict[int, float]
    n_queries: int


def infer_triples(
    params: ModelParams,
    test_triples: np.ndarray,
    backend: Backend = Backend.VECTORIZED,
    threads: int = 1,
) -> tuple[np.ndarray, PhaseTiming]:
    return time_phase(lambda: score_batch(params, test_triples, backend, threads))


def infer_entities(params: ModelParams, entity_indices) -> tuple[np.ndarray, PhaseTiming]:
    idx = np.asarray(entity_indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= params.entities.shape[0]):
        raise ValueError("entity index out of range")
    return time_phase(lambda: params.entities[idx].copy())


def infer_relations(params: ModelParams, relation_indices) -> tuple[np.ndarray, PhaseTiming]:
    idx = np.asarray(relation_indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= params.relations.shape[0]):
        raise ValueError("relation index out of range")
    return time_phase(lambda: params.relations[idx].copy())


def _candidate_scores(params: ModelParams, h: int, r: int, t: int, replace_tail: bool) -> np.ndarray:
    """Scores of all entities substituted into one side of (h, r, t).

    Vectorized over candidates; ConvKB chunks candidates to bound the
    (chunk, tau, d) intermediate.
    """
    ents = params.entities
    if isinstance(params, TransEParams):
        if replace_tail:
            base = ents[h] + params.relations[r]
            diff = base[None, :] - ents
        else:
            diff = ents + params.relations[r][None, :] - ents[t][None, :]
        if params.norm is Norm.L1:
            return -np.sum(np.abs(diff), axis=1)
        return -np.sqrt(np.sum(diff * diff, axis=1))

    if isinstance(params, DistMultParams):
        fixed = ents[h] if replace_tail else ents[t]
        return ((ents * fixed[None, :]) * params.relations[r][None, :]).sum(axis=1)

    if isinstance(params, ConvKBParams):
        vr = params.relations[r]
        fixed = ents[h] if replace_tail else ents[t]
        f_fixed = params.filters[:, 0] if replace_tail else params.filters[:, 2]
        f_var = params.filters[:, 2] if replace_tail else params.filters[:, 0]
        base = (
            f_fixed[:, None] * fixed[None, :]
            + params.filters[:, 1][:, None] * vr[None, :]
        )  # (tau, d)
        w2 = params.w.reshape(params.tau, params.dim)
        n = ents.shape[0]
        out = np.empty(n, dtype=ents.dtype)
        # keep the (chunk, tau, d) intermediate around 16 MiB
        chunk = max(1, (1 << 22) // (params.tau * params.dim))
        for s in range(0, n, chunk):
            e = min(n, s + chunk)
            pre = base[None, :, :] + f_var[None, :, None] * ents[s:e, None, :]
            np.maximum(pre, 0, out=pre)
            out[s:e] = np.einsum("ckd,kd->c", pre, w2)
        return out

    raise ValueError(f"unknown model params type: {type(params).__name__}")


def _rank_from_scores(scores: np.ndarray, true_idx: int, allowed: np.ndarray) -> int:
    """Worst rank of the true candidate among the allowed ones.

    ``allowed`` is a boolean mask (the true candidate must be allowed);
    ties count against the model, so the rank is the number of allowed
    candidates scoring >= the true score.
    """
    s_true = scores[true_idx]
    return int(np.count_nonzero(allowed & (scores >= s_true)))


def _known_maps(known_triples: np.ndarray):
    tails_of: dict[tuple[int, int], list[int]] = {}
    heads_of: dict[tuple[int, int], list[int]] = {}
    for h, r, t in np.asarray(known_triples, dtype=np.int64):
        tails_of.setdefault((int(h), int(r)), []).append(int(t))
        heads_of.setdefault((int(r), int(t)), []).append(int(h))
    return tails_of, heads_of


def rank_queries(
    params: ModelParams,
    test_triples: np.ndarray,
    known_triples: np.ndarray | None = None,
    mode: str = "filtered",
    threads: int = 1,
) -> RankResult:
    """Head- and tail-replacement ranking over all entities.

    ``known_triples`` (typically the union of all splits) drives filtered
    mode; the query's own entity is never filtered out. Ranking depends
    only on the order of scores, so any strictly increasing transform of a
    model's scores leaves the result unchanged.
    """
    if mode not in ("raw", "filtered"):
        raise ValueError(f"mode must be 'raw' or 'filtered', got {mode!r}")
    test = validate_triples(params, test_triples)
    if len(test) == 0:
        raise ValueError("test split is empty")
    if mode == "filtered":
        if known_triples is None:
            raise ValueError("filtered mode needs known_triples")
        tails_of, heads_of = _known_maps(known_triples)
    else:
        tails_of, heads_of = {}, {}

    n_ent = params.entities.shape[0]

    def rank_one(query: np.ndarray) -> tuple[int, int]:
        h, r, t = (int(x) for x in query)
        allowed = np.ones(n_ent, dtype=bool)
        if mode == "filtered":
            drop = [x for x in tails_of.get((h, r), ()) if x != t]
            allowed[drop] = False
        tail_rank = _rank_from_scores(
            _candidate_scores(params, h, r, t, replace_tail=True), t, allowed
        )
        allowed = np.ones(n_ent, dtype=bool)
        if mode == "filtered":
            drop = [x for x in heads_of.get((r, t), ()) if x != h]
            allowed[drop] = False
        head_rank = _rank_from_scores(
            _candidate_scores(params, h, r, t, replace_tail=False), h, allowed
        )
        return tail_rank, head_rank

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            pairs = list(pool.map(rank_one, test))
    else:
        pairs = [rank_one(q) for q in test]

    ranks = np.array([rk for pair in pairs for rk in pair], dtype=np.float64)
    hits = {k: float(np.mean(ranks <= k)) for k in HITS_KS}
    return RankResult(
        mrr=float(np.mean(1.0 / ranks)),
        hits_at=hits,
        n_queries=len(ranks),
    )
