import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import encoder_reference, hinge_reference, l1
from sot_align.cost import dense_costs
from sot_align.errors import InputError, ShapeError, TrainingError
from sot_align.evaluation import hits_at_k, rankings_from_costs
from sot_align.kg import KnowledgeGraph
from sot_align.metric_learning import (
    EncoderParams,
    NegativeTables,
    TrainingConfig,
    alignment_loss,
    encode,
    load_checkpoint,
    loss_and_grad,
    manhattan_distance,
    mean_aggregator,
    negative_tables,
    refining_loss,
    refining_weight,
    sample_negatives,
    save_checkpoint,
    train,
)
from sot_align.synth import SynthParams, generate
from sot_align.textual import PseudoPairSet, embed_names, extract_pseudo_pairs, similarity_matrix


def chain_kg(n, edges=()):
    return KnowledgeGraph.build([(f"k{i}", f"n{i}") for i in range(n)], [(f"k{a}", "r", f"k{b}") for a, b in edges])


class TestRefiningWeight:
    def test_schedule(self):
        cfg = TrainingConfig(total_steps=1000)
        assert refining_weight(0, cfg) == 0.3
        assert refining_weight(250, cfg) == 0.0
        assert refining_weight(125, cfg) == 0.15
        assert refining_weight(900, cfg) == 0.0

    def test_linear_between(self):
        cfg = TrainingConfig(total_steps=400, w0=0.3, decay_fraction=0.25)
        ws = [refining_weight(t, cfg) for t in range(101)]
        assert all(a >= b for a, b in zip(ws, ws[1:]))
        assert ws[50] == pytest.approx(0.15)

    def test_invalid_config(self):
        with pytest.raises(InputError):
            TrainingConfig(margin=0.0)


class TestEncoder:
    def test_isolated_entity_identity_weights(self):
        I2 = np.eye(2)
        params = EncoderParams(I2.copy(), np.zeros(2), I2.copy(), np.zeros(2))
        out = encode(chain_kg(1), np.array([[3.0, 4.0]]), params)
        np.testing.assert_allclose(out.matrix, [[0.6, 0.8, 3.0, 4.0]])
        assert out.struct_dim == 2

    def test_symmetric_pair(self, rng):
        params = EncoderParams.init(3, 4, 2, rng)
        X = np.tile(rng.normal(size=3), (2, 1))
        out = encode(chain_kg(2, [(0, 1)]), X, params).matrix
        np.testing.assert_array_equal(out[0], out[1])

    def test_reference_forward(self, rng):
        kg = chain_kg(5, [(0, 1), (1, 2), (3, 1), (4, 0), (2, 2)])
        X = rng.normal(size=(5, 3))
        params = EncoderParams.init(3, 4, 2, rng)
        params.b1[:] = rng.normal(size=4)
        params.b2[:] = rng.normal(size=2)
        ref = encoder_reference(kg.adjacency, X.tolist(), params.W1.tolist(), params.b1.tolist(), params.W2.tolist(), params.b2.tolist())
        np.testing.assert_allclose(encode(kg, X, params).matrix, ref, atol=1e-10, rtol=0)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ShapeError):
            encode(chain_kg(2), np.ones((2, 5)), EncoderParams.init(3, 3, 3, rng))

    def test_aggregator_rows_sum_to_one(self):
        A = mean_aggregator(chain_kg(4, [(0, 1), (1, 2)])).toarray()
        np.testing.assert_allclose(A.sum(axis=1), 1.0)
        assert A[3, 3] == 1.0 and A[1, 0] == pytest.approx(1 / 3)


class TestManhattan:
    def test_examples(self):
        assert manhattan_distance((0, 0), (0, 0)) == 0.0
        assert manhattan_distance((1, 2), (3, 0)) == 4.0

    def test_against_loop(self, rng):
        a, b = rng.normal(size=50), rng.normal(size=50)
        assert manhattan_distance(a, b) == pytest.approx(l1(a, b), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            manhattan_distance((1, 2), (1, 2, 3))


class TestNegatives:
    def test_two_entities(self):
        E = np.array([[0.0], [1.0]])
        negs = sample_negatives((0, 1), E, E, 1)
        assert negs.left == (1,) and negs.right == (0,)
        assert negs.pairs() == [(1, 1), (0, 0)]

    def test_exhaustive_scan(self, rng):
        E1, E2 = rng.normal(size=(6, 3)), rng.normal(size=(6, 3))
        for i in range(6):
            for j in range(6):
                negs = sample_negatives((i, j), E1, E2, 2)
                assert i not in negs.left and j not in negs.right
                ref_left = sorted((l1(E1[i], E1[p]), p) for p in range(6) if p != i)[:2]
                ref_right = sorted((l1(E2[j], E2[q]), q) for q in range(6) if q != j)[:2]
                assert negs.left == tuple(p for _, p in ref_left)
                assert negs.right == tuple(q for _, q in ref_right)

    def test_tables_match_per_anchor_sampling(self, rng):
        E1, E2 = rng.normal(size=(7, 2)), rng.normal(size=(5, 2))
        tables = negative_tables(E1, E2, 3)
        assert tables.for_anchor(2, 4) == sample_negatives((2, 4), E1, E2, 3)


def one_sided(left, n2):
    return NegativeTables(np.asarray(left, dtype=np.int64), np.zeros((n2, 0), dtype=np.int64))


class TestLosses:
    def test_inactive_hinge(self):
        E1, E2 = np.array([[0.0], [10.0]]), np.array([[0.0]])
        assert alignment_loss([(0, 0)], one_sided([[1], [0]], 1), E1, E2, 3.0) == 0.0

    def test_hand_example(self):
        E1, E2 = np.array([[0.0], [0.8]]), np.array([[1.0]])
        assert alignment_loss([(0, 0)], one_sided([[1], [0]], 1), E1, E2, 0.5) == pytest.approx(1.3, abs=1e-15)

    def test_refining_weights(self):
        E1, E2 = np.array([[0.0], [0.8]]), np.array([[1.0]])
        negs = one_sided([[1], [0]], 1)
        assert refining_loss([(0, 0)], np.array([[0.0]]), negs, E1, E2, 0.5) == 0.0
        assert refining_loss([(0, 0)], np.array([[-0.7]]), negs, E1, E2, 0.5) == 0.0
        assert refining_loss([(0, 0)], np.array([[1.0]]), negs, E1, E2, 0.5) == alignment_loss([(0, 0)], negs, E1, E2, 0.5)

    def test_against_scalar_recomputation(self, rng):
        for _ in range(10):
            E1, E2 = rng.normal(size=(8, 4)), rng.normal(size=(9, 4))
            negs = negative_tables(E1, E2, 3)
            P = [(0, 1), (3, 3), (7, 8)]
            S = rng.uniform(-1, 1, (8, 9))
            table = {p: negs.for_anchor(*p).pairs() for p in [(i, j) for i in range(8) for j in range(9)]}
            assert alignment_loss(P, negs, E1, E2, 1.5) == pytest.approx(hinge_reference(P, [1.0] * 3, table, E1, E2, 1.5), abs=1e-10)
            Q = [(i, j) for i in range(8) for j in (0, 4)]
            w = [max(S[i, j], 0.0) for i, j in Q]
            assert refining_loss(Q, S, negs, E1, E2, 1.5) == pytest.approx(hinge_reference(Q, w, table, E1, E2, 1.5), abs=1e-10)


emb = arrays(np.float64, (5, 3), elements=st.floats(-5, 5))


@given(emb, emb, st.floats(0.1, 4.0))
def test_losses_nonnegative(E1, E2, margin):
    negs = negative_tables(E1, E2, 2)
    P = [(0, 0), (1, 2)]
    assert alignment_loss(P, negs, E1, E2, margin) >= 0.0
    assert refining_loss(P, np.ones((5, 5)), negs, E1, E2, margin) >= 0.0
    assert refining_loss(P, np.zeros((5, 5)), negs, E1, E2, margin) == 0.0


@given(st.lists(st.integers(0, 12), min_size=4, max_size=8), st.sampled_from([0.25, 0.5, 1.0, 3.0]))
def test_hinge_inactive_when_negatives_far(extra, margin):
    # anchors coincide and consecutive entities sit at least `margin` apart
    # (quarter-integer positions keep the distances exact)
    x = np.cumsum([margin + g / 4 for g in extra])[:, None]
    negs = negative_tables(x, x, 2)
    assert alignment_loss([(k, k) for k in range(len(x))], negs, x, x, margin) == 0.0


# -- gradient check ---------------------------------------------------------

def _instance(rng):
    n1, n2 = int(rng.integers(4, 11)), int(rng.integers(4, 11))
    d, h, e = int(rng.integers(2, 6)), int(rng.integers(2, 9)), int(rng.integers(2, 9))
    kg1 = chain_kg(n1, [tuple(rng.integers(n1, size=2)) for _ in range(n1)])
    kg2 = chain_kg(n2, [tuple(rng.integers(n2, size=2)) for _ in range(n2)])
    X1, X2 = rng.normal(size=(n1, d)), rng.normal(size=(n2, d))
    params = EncoderParams(rng.normal(size=(d, h)), rng.normal(size=h) * 0.1, rng.normal(size=(h, e)), rng.normal(size=e) * 0.1)
    k = min(3, n1 - 1, n2 - 1)
    negs = NegativeTables(
        np.array([rng.choice([x for x in range(n1) if x != i], k, replace=False) for i in range(n1)]),
        np.array([rng.choice([x for x in range(n2) if x != j], k, replace=False) for j in range(n2)]),
    )
    P = list(zip(rng.permutation(n1)[:3].tolist(), rng.permutation(n2)[:3].tolist()))
    Q = [(i, int(j)) for i in range(n1) for j in rng.permutation(n2)[:2]]
    q_w = rng.uniform(0, 1, len(Q))
    return dict(agg1=mean_aggregator(kg1), agg2=mean_aggregator(kg2), X1=X1, X2=X2, P=P, Q=Q, q_weights=q_w, negs=negs), params


def _kink_gap(inst, params, margin):
    """Smallest distance of any non-smooth point (hinge, relu, |.|) from its kink."""
    from sot_align.metric_learning import _forward

    E1, c1 = _forward(inst["agg1"], inst["X1"], params)
    E2, c2 = _forward(inst["agg2"], inst["X2"], params)
    gaps = [np.abs(c1.P1).min(), np.abs(c2.P1).min()]
    negs = inst["negs"]
    for i, j in inst["P"] + inst["Q"]:
        pos = np.abs(E1[i] - E2[j]).sum()
        gaps.append(np.abs(E1[i] - E2[j]).min())
        for a, b in negs.for_anchor(i, j).pairs():
            gaps.append(np.abs(E1[a] - E2[b]).min())
            gaps.append(abs(pos - np.abs(E1[a] - E2[b]).sum() + margin) * 1e-2)  # hinge needs >= 1e-3
    return min(gaps)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 20:
        inst, params = _instance(rng)
        margin = float(rng.uniform(0.5, 3.0))
        w = float(rng.uniform(0.0, 0.3))
        if _kink_gap(inst, params, margin) < 1e-5:
            continue
        parts, grads = loss_and_grad(params, margin=margin, w=w, **inst)
        assert parts.alignment >= 0 and parts.refining >= 0
        eps = 1e-6
        for name, p, g in zip(EncoderParams.NAMES, params.arrays(), grads.arrays()):
            fd = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + eps
                up = loss_and_grad(params, margin=margin, w=w, **inst)[0].total
                p[idx] = old - eps
                down = loss_and_grad(params, margin=margin, w=w, **inst)[0].total
                p[idx] = old
                fd[idx] = (up - down) / (2 * eps)
            denom = max(np.linalg.norm(fd), np.linalg.norm(g), 1e-8)
            assert np.linalg.norm(fd - g) / denom < 1e-4, name
        checked += 1


# -- training ---------------------------------------------------------------

@pytest.fixture(scope="module")
def small_world():
    data = generate(SynthParams(matchable=30, dangling1=5, dangling2=5, exact_fraction=0.3, seed=3))
    X1 = embed_names(data.kg1, data.words).matrix
    X2 = embed_names(data.kg2, data.words).matrix
    S = similarity_matrix(X1, X2)
    return data, X1, X2, S, extract_pseudo_pairs(S, 0.99)


def test_training_is_deterministic(small_world):
    data, X1, X2, S, P = small_world
    cfg = TrainingConfig(total_steps=30, learning_rate=1e-2)
    a = train(data.kg1, data.kg2, X1, X2, P, cfg, S=S)
    b = train(data.kg1, data.kg2, X1, X2, P, cfg, S=S)
    for x, y in zip(a.params.arrays(), b.params.arrays()):
        assert x.tobytes() == y.tobytes()
    assert a.history == b.history


def test_zero_weight_step_equals_alignment_only(small_world):
    data, X1, X2, S, P = small_world
    zero = train(data.kg1, data.kg2, X1, X2, P, TrainingConfig(total_steps=1, w0=0.0), S=S)
    align_only = train(data.kg1, data.kg2, X1, X2, P, TrainingConfig(total_steps=1), S=S, Q=[])
    for x, y in zip(zero.params.arrays(), align_only.params.arrays()):
        assert x.tobytes() == y.tobytes()


def test_loss_decreases_with_fixed_negatives(small_world):
    data, X1, X2, S, P = small_world
    cfg = TrainingConfig(total_steps=50, learning_rate=1e-3, resample_every=1000)
    hist = train(data.kg1, data.kg2, X1, X2, P, cfg, S=S).history
    assert hist[-1].total <= hist[0].total
    assert hist[-1].alignment <= hist[0].alignment


def test_training_does_not_hurt_hits(small_world):
    data, X1, X2, S, P = small_world
    raw = hits_at_k(rankings_from_costs(dense_costs(X1, X2)), data.gold, 1)
    res = train(data.kg1, data.kg2, X1, X2, P, TrainingConfig(total_steps=300, learning_rate=1e-3), S=S)
    trained = hits_at_k(rankings_from_costs(dense_costs(res.emb1, res.emb2)), data.gold, 1)
    assert trained >= raw


def test_too_few_anchors_skips(small_world, caplog):
    data, X1, X2, S, _ = small_world
    res = train(data.kg1, data.kg2, X1, X2, PseudoPairSet(((0, 0),), 0.99), TrainingConfig(total_steps=5), S=S)
    assert res.skipped and res.params is None
    np.testing.assert_array_equal(res.emb1.matrix, X1)
    assert "skipping training" in caplog.text


def test_supervised_pairs_extend_anchors(small_world):
    data, X1, X2, S, _ = small_world
    res = train(data.kg1, data.kg2, X1, X2, PseudoPairSet((), 0.99), TrainingConfig(total_steps=2), supervised=data.gold.pairs[:5], S=S)
    assert not res.skipped


@pytest.mark.filterwarnings("ignore:invalid value")
def test_non_finite_loss_raises(small_world):
    data, X1, X2, S, P = small_world
    bad = X1.copy()
    bad[0, 0] = np.inf
    with pytest.raises(TrainingError, match="learning rate"):
        train(data.kg1, data.kg2, bad, X2, P, TrainingConfig(total_steps=2), S=S)


def test_checkpoint_round_trip(tmp_path, rng):
    params = EncoderParams.init(4, 5, 3, rng)
    params.b1[:] = rng.normal(size=5)
    save_checkpoint(tmp_path / "enc.ckpt", params, {"seed": 7, "steps": 10})
    again, meta = load_checkpoint(tmp_path / "enc.ckpt")
    for x, y in zip(params.arrays(), again.arrays()):
        assert x.shape == y.shape and x.tobytes() == y.tobytes()
    assert meta == {"seed": 7, "steps": 10}


def test_checkpoint_rejects_other_files(tmp_path):
    (tmp_path / "x").write_bytes(b"not a checkpoint")
    with pytest.raises(InputError):
        load_checkpoint(tmp_path / "x")
