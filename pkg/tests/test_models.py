import numpy as np
import pytest

from kgebench.kernels import Backend
from kgebench.models import (
    ConvKBParams,
    DistMultParams,
    ModelKind,
    Norm,
    TransEParams,
    grad,
    init_params,
    load_params,
    save_params,
    score,
    score_batch,
    score_convkb,
    score_distmult,
    score_transe,
)

from oracles import finite_difference_max_rel_err, kink_safe


class TestInit:
    def test_same_seed_identical_bytes(self):
        a = init_params("convkb", 7, 3, 12, tau=4, seed=42)
        b = init_params("convkb", 7, 3, 12, tau=4, seed=42)
        assert a.entities.tobytes() == b.entities.tobytes()
        assert a.relations.tobytes() == b.relations.tobytes()
        assert a.filters.tobytes() == b.filters.tobytes()
        assert a.w.tobytes() == b.w.tobytes()

    def test_different_seed_differs(self):
        a = init_params("transe", 7, 3, 12, seed=1)
        b = init_params("transe", 7, 3, 12, seed=2)
        assert a.entities.tobytes() != b.entities.tobytes()

    def test_bound_at_dim_256(self):
        p = init_params("distmult", 50, 5, 256, seed=0)
        bound = 6.0 / np.sqrt(256)  # 0.375
        assert bound == 0.375
        for table in (p.entities, p.relations):
            assert np.all(np.abs(table) <= bound)

    def test_convkb_w_bound(self):
        p = init_params("convkb", 10, 2, 16, tau=4, seed=0)
        assert np.all(np.abs(p.w) <= 1.0 / np.sqrt(4 * 16))

    def test_zero_entities_rejected(self):
        with pytest.raises(ValueError):
            init_params("transe", 0, 1, 8)
        with pytest.raises(ValueError):
            init_params("transe", 5, 0, 8)

    def test_dtype_switch(self):
        p = init_params("distmult", 4, 2, 8, seed=0, dtype=np.float64)
        assert p.entities.dtype == np.float64


def explicit_transe(entities, relations, norm=Norm.L1):
    return TransEParams(
        np.asarray(entities, dtype=np.float32),
        np.asarray(relations, dtype=np.float32),
        norm,
    )


class TestScores:
    def test_transe_self_triple_zero_relation(self):
        p = explicit_transe([[0.3, -0.7]], [[0.0, 0.0]])
        assert score_transe(p, (0, 0, 0)) == 0.0

    def test_transe_l1_hand_values(self):
        p = explicit_transe([[1, 0], [1, 1], [2, 2]], [[0, 1]])
        assert score_transe(p, (0, 0, 1)) == 0.0
        assert score_transe(p, (0, 0, 2)) == -2.0

    def test_transe_score_never_positive(self):
        p = init_params("transe", 20, 4, 16, seed=3)
        rng = np.random.default_rng(0)
        for _ in range(100):
            tri = (rng.integers(20), rng.integers(4), rng.integers(20))
            assert score_transe(p, tri) <= 0.0

    def test_transe_l2(self):
        p = explicit_transe([[0, 0], [3, 4]], [[0, 0]], Norm.L2)
        assert score_transe(p, (0, 0, 1)) == -5.0

    def test_transe_translation_invariance(self):
        rng = np.random.default_rng(5)
        for norm in (Norm.L1, Norm.L2):
            ents = rng.uniform(-2, 2, (6, 12)).astype(np.float32)
            rels = rng.uniform(-2, 2, (2, 12)).astype(np.float32)
            c = rng.uniform(-3, 3, 12).astype(np.float32)
            p = TransEParams(ents, rels, norm)
            p_shift = TransEParams(ents + c, rels, norm)
            for _ in range(20):
                tri = (rng.integers(6), rng.integers(2), rng.integers(6))
                a, b = score_transe(p, tri), score_transe(p_shift, tri)
                assert abs(a - b) <= 1e-4 * (1 + abs(a))

    def test_distmult_hand_value(self):
        p = DistMultParams(
            np.array([[1, 0], [4, 5]], dtype=np.float32),
            np.array([[2, 3]], dtype=np.float32),
        )
        assert score_distmult(p, (0, 0, 1)) == 8.0

    def test_distmult_symmetry_exact(self):
        p = init_params("distmult", 30, 6, 24, seed=8)
        rng = np.random.default_rng(1)
        for _ in range(200):
            h, r, t = rng.integers(30), rng.integers(6), rng.integers(30)
            assert score_distmult(p, (h, r, t)) == score_distmult(p, (t, r, h))

    def test_distmult_zero_relation(self):
        p = DistMultParams(
            np.random.default_rng(0).uniform(-1, 1, (4, 8)).astype(np.float32),
            np.zeros((1, 8), dtype=np.float32),
        )
        for h in range(4):
            for t in range(4):
                assert score_distmult(p, (h, 0, t)) == 0.0

    def test_convkb_hand_value(self):
        p = ConvKBParams(
            entities=np.array([[1, 2], [5, 6]], dtype=np.float32),
            relations=np.array([[3, 4]], dtype=np.float32),
            filters=np.array([[1, 2, 3]], dtype=np.float32),
            w=np.array([1, 1], dtype=np.float32),
        )
        assert score_convkb(p, (0, 0, 1)) == 50.0

    def test_convkb_zero_w(self):
        p = init_params("convkb", 6, 2, 8, tau=3, seed=0)
        p.w[:] = 0
        rng = np.random.default_rng(2)
        for _ in range(20):
            tri = (rng.integers(6), rng.integers(2), rng.integers(6))
            assert score_convkb(p, tri) == 0.0

    def test_convkb_selector_filter(self):
        rng = np.random.default_rng(3)
        ents = np.abs(rng.uniform(0.1, 2, (3, 6))).astype(np.float32)
        p = ConvKBParams(
            entities=ents,
            relations=rng.uniform(-1, 1, (1, 6)).astype(np.float32),
            filters=np.array([[1, 0, 0]], dtype=np.float32),
            w=np.ones(6, dtype=np.float32),
        )
        got = score_convkb(p, (1, 0, 2))
        assert got == pytest.approx(float(ents[1].sum()), rel=1e-6)

    def test_index_out_of_range(self):
        p = init_params("transe", 3, 1, 4, seed=0)
        with pytest.raises(ValueError):
            score(p, (3, 0, 0))
        with pytest.raises(ValueError):
            score(p, (0, 1, 0))


class TestGradients:
    def test_distmult_closed_form_example(self):
        p = DistMultParams(
            np.array([[1, 0], [4, 5]], dtype=np.float32),
            np.array([[2, 3]], dtype=np.float32),
        )
        g = grad(p, (0, 0, 1), upstream=1.0)
        assert g.d_head.tolist() == [8.0, 15.0]
        assert g.d_relation.tolist() == [4.0, 0.0]
        assert g.d_tail.tolist() == [2.0, 0.0]

    @pytest.mark.parametrize("kind,norm", [
        ("transe", Norm.L1), ("transe", Norm.L2), ("distmult", None), ("convkb", None),
    ])
    def test_zero_upstream_zero_gradient(self, kind, norm):
        p = init_params(kind, 5, 2, 6, tau=2, seed=1,
                        norm=norm or Norm.L1)
        g = grad(p, (0, 1, 3), upstream=0.0)
        assert not g.d_head.any()
        assert not g.d_relation.any()
        assert not g.d_tail.any()
        if g.d_shared is not None:
            assert not g.d_shared.any()

    @pytest.mark.parametrize("kind,norm", [
        ("transe", Norm.L1), ("transe", Norm.L2), ("distmult", None), ("convkb", None),
    ])
    def test_finite_difference(self, kind, norm):
        rng = np.random.default_rng(17)
        worst = 0.0
        checked = 0
        while checked < 25:
            d = int(rng.integers(2, 9))
            tau = int(rng.integers(1, 4))
            p = init_params(kind, 6, 3, d, tau=tau, seed=int(rng.integers(2**31)),
                            norm=norm or Norm.L1, dtype=np.float64)
            h = int(rng.integers(6))
            t = int(rng.integers(5))
            t = t + 1 if t >= h else t
            tri = (h, int(rng.integers(3)), t)
            if not kink_safe(p, tri):
                continue
            checked += 1
            worst = max(worst, finite_difference_max_rel_err(p, tri))
        assert worst <= 1e-4

    def test_convkb_zero_filters_zero_score_and_w_grad(self):
        p = init_params("convkb", 5, 2, 8, tau=3, seed=0)
        p.filters[:] = 0
        assert score(p, (0, 0, 1)) == 0.0
        g = grad(p, (0, 0, 1), upstream=1.0)
        n_f = p.filters.size
        assert not g.d_shared[n_f:].any()  # w gradient
        assert not g.d_head.any()


class TestScoreBatch:
    @pytest.mark.parametrize("kind", ["transe", "distmult", "convkb"])
    @pytest.mark.parametrize("backend", [Backend.SCALAR, Backend.VECTORIZED])
    def test_matches_single_triple_scores(self, kind, backend):
        p = init_params(kind, 12, 3, 20, tau=4, seed=5)
        rng = np.random.default_rng(7)
        triples = np.stack([
            rng.integers(0, 12, 40), rng.integers(0, 3, 40), rng.integers(0, 12, 40)
        ], axis=1).astype(np.int32)
        got = score_batch(p, triples, backend, threads=1)
        for i, tri in enumerate(triples):
            want = score(p, tri)
            assert abs(got[i] - want) <= 1e-4 * (1 + abs(want))

    def test_thread_count_does_not_change_result(self):
        p = init_params("distmult", 40, 4, 32, seed=6)
        rng = np.random.default_rng(8)
        triples = np.stack([
            rng.integers(0, 40, 333), rng.integers(0, 4, 333), rng.integers(0, 40, 333)
        ], axis=1).astype(np.int32)
        base = score_batch(p, triples, Backend.VECTORIZED, threads=1)
        for threads in (2, 3, 5):
            assert np.array_equal(
                score_batch(p, triples, Backend.VECTORIZED, threads=threads), base
            )

    def test_single_triple(self):
        p = init_params("transe", 5, 2, 8, seed=0)
        got = score_batch(p, np.array([[0, 1, 2]], dtype=np.int32))
        assert got.shape == (1,)
        want = score(p, (0, 1, 2))
        assert abs(got[0] - want) <= 1e-4 * (1 + abs(want))

    def test_reports_bad_triple_position(self):
        p = init_params("transe", 5, 2, 8, seed=0)
        bad = np.array([[0, 0, 1], [0, 0, 99]], dtype=np.int32)
        with pytest.raises(ValueError, match="triple 1"):
            score_batch(p, bad)


class TestCheckpoint:
    @pytest.mark.parametrize("kind,norm", [
        ("transe", Norm.L1), ("transe", Norm.L2), ("distmult", None), ("convkb", None),
    ])
    def test_round_trip(self, kind, norm, tmp_path):
        p = init_params(kind, 9, 4, 10, tau=3, seed=11, norm=norm or Norm.L1)
        path = tmp_path / "model.kgeb"
        save_params(path, p)
        q = load_params(path)
        assert type(q) is type(p)
        assert np.array_equal(p.entities, q.entities)
        assert np.array_equal(p.relations, q.relations)
        if isinstance(p, TransEParams):
            assert q.norm == p.norm
        if isinstance(p, ConvKBParams):
            assert np.array_equal(p.filters, q.filters)
            assert np.array_equal(p.w, q.w)

    def test_magic_guard(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOPE" + b"\x00" * 64)
        with pytest.raises(ValueError, match="magic"):
            load_params(path)

    def test_truncation_guard(self, tmp_path):
        p = init_params("distmult", 6, 2, 8, seed=0)
        path = tmp_path / "model.kgeb"
        save_params(path, p)
        data = path.read_bytes()
        path.write_bytes(data[: len(data) - 10])
        with pytest.raises(ValueError, match="truncated"):
            load_params(path)

    def test_model_kind_enum_values(self):
        assert [k.value for k in ModelKind] == ["transe", "distmult", "convkb"]
