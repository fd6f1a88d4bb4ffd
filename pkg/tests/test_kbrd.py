import numpy as np
import pytest
import torch

from convrec.data.batching import ConvInstance, RecInstance, pad_batch
from convrec.errors import ModelError
from convrec.models import KBRD, ModelConfig, SideData
from convrec.models.decoding import greedy_decode

SEP = 19


def make_kbrd(seed=6, vocab_size=20):
    config = ModelConfig(
        name="kbrd", vocab_size=vocab_size, catalog_size=5, n_entities=6,
        n_relations=1, embedding_dim=6, hidden_dim=8, num_layers=1,
        num_heads=2, seed=seed, sep_id=vocab_size - 1, max_positions=64,
    )
    side = SideData(
        entity_triples=[(0, 0, 1), (2, 0, 1), (3, 0, 4)],
        item2entity={0: 0, 1: 1, 2: 2, 3: 3, 4: 4},
    )
    return KBRD(config, side)


def rec_batch():
    insts = [RecInstance([4, 5], [0, 2], [1], target_item=2)]
    return pad_batch(insts, 0, 32)


def conv_batch():
    insts = [ConvInstance([4, 5, SEP, 6], [2, 7, 8, 3], context_entity_ids=[0, 2])]
    return pad_batch(insts, 0, 32)


def test_zero_user_rep_gives_zero_bias():
    model = make_kbrd().double()
    bias = model.vocab_bias(torch.zeros(6, dtype=torch.float64))
    assert torch.equal(bias, torch.zeros(20, dtype=torch.float64))


def test_bias_additivity():
    model = make_kbrd().double()
    u1 = torch.randn(6, dtype=torch.float64)
    u2 = torch.randn(6, dtype=torch.float64)
    with torch.no_grad():
        combined = model.vocab_bias(u1 + u2)
        separate = model.vocab_bias(u1) + model.vocab_bias(u2)
    assert torch.allclose(combined, separate, atol=1e-12)


def test_bias_dimension_mismatch():
    model = make_kbrd()
    with pytest.raises(ModelError):
        model.vocab_bias(torch.zeros(7))


def test_zero_bias_generation_matches_plain_decoder():
    model = make_kbrd()
    ctx = [4, 5, SEP, 6]
    plain = greedy_decode(model.conv.make_decoder(ctx), 2, 3, 0, 6)
    biased = greedy_decode(model.make_decoder(ctx, entity_ids=[]), 2, 3, 0, 6)
    assert plain.token_ids == biased.token_ids


def crafted_bias_model(boost_token):
    """Uniform decoder plus a bias of +10 on one token id."""
    model = make_kbrd()
    with torch.no_grad():
        # Flatten the decoder: zero output layer -> uniform next-token logits.
        model.conv.out.weight.zero_()
        model.conv.out.bias.zero_()
        # One-hot user rep (axis 0) -> +10 logit on the boosted token only.
        model.bias_proj.weight.zero_()
        model.bias_proj.weight[boost_token, 0] = 10.0
        # Entity 0's pooled state becomes the first basis vector.
        states = model.rec.graph.node_states()
    return model, states


def test_plus_ten_bias_wins_first_step_under_greedy():
    model, _ = crafted_bias_model(boost_token=7)
    handle = model.conv.make_decoder([4], logits_bias=model.vocab_bias(
        torch.eye(6, dtype=model.dtype)[0]
    ))
    out = greedy_decode(handle, 2, 3, 0, 4)
    assert out.token_ids[0] == 7  # argmax of uniform-plus-bias


def test_bias_changes_with_entity_list():
    # The same context must decode differently once the recommended items'
    # entities flow into the bias (the override path in the service).
    model, _ = crafted_bias_model(boost_token=9)
    with torch.no_grad():
        states = model.rec.graph.node_states()
        # Make entity 3's state the bias-activating basis vector.
        model.rec.graph.entity_emb.weight.zero_()
        for p in model.rec.graph.relation_weights:
            p.zero_()
        for p in model.rec.graph.self_weights:
            p.zero_()
        model.rec.graph.entity_emb.weight[3, 0] = 1.0
        model.rec.graph.self_weights[0].copy_(torch.eye(6))
    without = greedy_decode(model.make_decoder([4], entity_ids=[]), 2, 3, 0, 4)
    with_item = greedy_decode(model.make_decoder([4], entity_ids=[3]), 2, 3, 0, 4)
    assert without.token_ids[0] != with_item.token_ids[0]
    assert with_item.token_ids[0] == 9


def test_joint_losses_both_tasks():
    model = make_kbrd()
    rec_loss = model.loss(rec_batch())
    conv_loss = model.loss(conv_batch())
    assert torch.isfinite(rec_loss) and torch.isfinite(conv_loss)
    (rec_loss + conv_loss).backward()
    assert model.rec.graph.entity_emb.weight.grad is not None


def test_conv_loss_uses_entity_bias():
    model = make_kbrd().double()
    batch = conv_batch()
    with_entities = model.loss(batch).item()
    stripped = conv_batch()
    stripped.masks["context_entities"][:] = 0
    without = model.loss(stripped).item()
    assert with_entities != pytest.approx(without)
