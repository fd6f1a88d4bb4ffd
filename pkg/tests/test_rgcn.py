import numpy as np
import pytest
import torch

from convrec.data.batching import RecInstance, pad_batch
from convrec.errors import ModelError
from convrec.models import ModelConfig, RGCNRec, SideData, rgcn_layer
from convrec.models.rgcn import rank_items

import oracles


def random_graph(rng, max_nodes=10, max_rels=3, d=4):
    n = rng.integers(2, max_nodes + 1)
    r = rng.integers(1, max_rels + 1)
    n_edges = rng.integers(0, 3 * n)
    triples = [
        (int(rng.integers(n)), int(rng.integers(r)), int(rng.integers(n)))
        for _ in range(n_edges)
    ]
    states = rng.normal(size=(n, d))
    rel_ws = [rng.normal(size=(d, d)) for _ in range(r)]
    w0 = rng.normal(size=(d, d))
    return states, triples, rel_ws, w0


def as_torch(states, triples, rel_ws, w0):
    return (
        torch.as_tensor(states, dtype=torch.float64),
        torch.as_tensor(triples, dtype=torch.long).reshape(-1, 3),
        [torch.as_tensor(w, dtype=torch.float64) for w in rel_ws],
        torch.as_tensor(w0, dtype=torch.float64),
    )


# -------------------------------------------------------------------- layer

def test_no_edges_identity():
    h = torch.eye(3, dtype=torch.float64)
    triples = torch.zeros((0, 3), dtype=torch.long)
    out = rgcn_layer(h, triples, [torch.eye(3, dtype=torch.float64)],
                     torch.eye(3, dtype=torch.float64))
    assert torch.equal(out, h)


def test_single_message():
    h = torch.tensor([[1.0, 2.0], [5.0, -1.0]], dtype=torch.float64)
    triples = torch.tensor([[0, 0, 1]], dtype=torch.long)  # 0 -> 1
    eye = torch.eye(2, dtype=torch.float64)
    out = rgcn_layer(h, triples, [eye], torch.zeros(2, 2, dtype=torch.float64))
    assert torch.allclose(out[1], h[0])
    assert torch.allclose(out[0], torch.zeros(2, dtype=torch.float64))


def test_layer_matches_nested_loop_oracle():
    rng = np.random.default_rng(7)
    for _ in range(50):
        states, triples, rel_ws, w0 = random_graph(rng)
        th, tt, tw, tw0 = as_torch(states, triples, rel_ws, w0)
        ours = rgcn_layer(th, tt, tw, tw0, activation=torch.relu).numpy()
        ref = oracles.rgcn_oracle(states, triples, rel_ws, w0, activation="relu")
        assert np.max(np.abs(ours - ref)) < 1e-10


def test_relabeling_equivariance_exact():
    rng = np.random.default_rng(13)
    for _ in range(20):
        states, triples, rel_ws, w0 = random_graph(rng)
        n = states.shape[0]
        perm = rng.permutation(n)
        inv = np.argsort(perm)
        # relabel: node i becomes perm[i]; states/triples permute accordingly
        p_states = states[inv]
        p_triples = [(int(perm[h]), r, int(perm[t])) for (h, r, t) in triples]
        th, tt, tw, tw0 = as_torch(states, triples, rel_ws, w0)
        ph, pt, _, _ = as_torch(p_states, p_triples, rel_ws, w0)
        base = rgcn_layer(th, tt, tw, tw0, activation=torch.relu).numpy()
        permuted = rgcn_layer(ph, pt, tw, tw0, activation=torch.relu).numpy()
        assert np.array_equal(base, permuted[perm])  # bit-exact


def test_dimension_mismatch_is_model_error():
    h = torch.zeros(2, 3, dtype=torch.float64)
    triples = torch.zeros((0, 3), dtype=torch.long)
    with pytest.raises(ModelError):
        rgcn_layer(h, triples, [torch.zeros(2, 2, dtype=torch.float64)],
                   torch.zeros(3, 3, dtype=torch.float64))


# ------------------------------------------------------------ user rep/rank

def toy_model(n_entities=5, catalog=4, mapped=None):
    config = ModelConfig(
        name="rgcn", catalog_size=catalog, n_entities=n_entities, n_relations=1,
        embedding_dim=4, hidden_dim=4, num_layers=1, num_heads=1, seed=5,
    )
    side = SideData(entity_triples=[(0, 0, 1)], item2entity=mapped or {0: 0, 1: 1, 2: 2})
    return RGCNRec(config, side)


def batch_with_entities(entity_lists):
    insts = [RecInstance([], list(e), [], target_item=0) for e in entity_lists]
    return pad_batch(insts, 0, 8)


def test_user_rep_single_and_empty():
    model = toy_model().double()
    states = model.graph.node_states()
    batch = batch_with_entities([[2], []])
    reps = model.user_rep(batch, states)
    assert torch.allclose(reps[0], states[2])
    assert torch.equal(reps[1], torch.zeros_like(reps[1]))


def test_user_rep_mean_of_two():
    model = toy_model().double()
    states = model.graph.node_states()
    reps = model.user_rep(batch_with_entities([[1, 3]]), states)
    expected = (states[1] + states[3]) / 2.0
    assert torch.max(torch.abs(reps[0] - expected)) < 1e-12


def test_rank_items_one_hot_and_zero():
    items = np.eye(3)
    out = rank_items(np.array([0.0, 1.0, 0.0]), items)
    assert out.ranking[0] == 1
    zero = rank_items(np.zeros(3), items)
    assert zero.ranking == [0, 1, 2]


def test_rank_items_matches_dot_oracle():
    rng = np.random.default_rng(3)
    user = rng.normal(size=4)
    items = rng.normal(size=(3, 4))
    out = rank_items(user, items)
    expected = [float(items[i] @ user) for i in range(3)]
    assert np.allclose(out.scores, expected, atol=1e-12)
    assert out.ranking == sorted(range(3), key=lambda i: (-expected[i], i))


def test_unmapped_items_share_fallback_scores():
    model = toy_model(mapped={0: 0}).double()  # items 1..3 unmapped
    scores = model.rank(batch_with_entities([[1, 2]]))[0]
    assert scores[1] == pytest.approx(scores[2])
    assert scores[2] == pytest.approx(scores[3])


def test_forward_deterministic_bitwise():
    model = toy_model()
    batch = batch_with_entities([[1, 2], [0]])
    one = model.rank(batch)
    two = model.rank(batch)
    assert np.array_equal(one, two)
