import numpy as np
import pytest

from convrec.data.batching import (
    ConvInstance,
    RecInstance,
    iterate_batches,
    make_instances,
    pad_batch,
)
from convrec.data.corpus import Dialog, Utterance, Vocabulary
from convrec.errors import BatchError


def vocab():
    return Vocabulary(["a", "b", "c", "d", "e"])


def turn(role, tokens, items=(), entities=(), policy=None):
    v = vocab()
    return Utterance(
        role=role,
        text=" ".join(tokens),
        tokens=list(tokens),
        token_ids=v.encode(list(tokens)),
        item_ids=list(items),
        entity_ids=list(entities),
        policy_label=("goal", policy) if policy is not None else None,
    )


def three_turn_dialog():
    return Dialog(
        "d1",
        [
            turn("seeker", ["a", "b"], entities=[5], policy=0),
            turn("recommender", ["c"], items=[3, 7], entities=[1], policy=1),
            turn("seeker", ["d"], policy=2),
        ],
    )


# ----------------------------------------------------------- make_instances

def test_rec_one_instance_per_mentioned_item():
    insts = make_instances([three_turn_dialog()], "rec", 10, vocab())
    assert len(insts) == 2
    assert insts[0].target_item == 3 and insts[1].target_item == 7
    assert insts[0].context_token_ids == insts[1].context_token_ids
    assert insts[0].context_entity_ids == [5]


def test_rec_no_items_no_instances():
    d = Dialog("d", [turn("seeker", ["a"]), turn("recommender", ["b"])])
    assert make_instances([d], "rec", 10, vocab()) == []


def test_conv_context_truncated_to_window():
    v = vocab()
    turns = [turn("seeker", [t]) for t in ["a", "b", "c", "d"]]
    turns.append(turn("recommender", ["e"]))
    d = Dialog("d", turns)
    insts = make_instances([d], "conv", 2, v)
    assert len(insts) == 1
    # turns 3-4 ("c","d") only, joined by the separator
    expected = v.encode(["c"]) + [v.sep_id] + v.encode(["d"])
    assert insts[0].context_token_ids == expected
    assert insts[0].response_token_ids == [v.start] + v.encode(["e"]) + [v.end]


def test_policy_instances_carry_labels_and_context_labels():
    insts = make_instances([three_turn_dialog()], "policy", 10, vocab())
    assert [i.target_label for i in insts] == [0, 1, 2]
    assert insts[2].context_label_ids == [0, 1]


def test_first_turn_has_empty_context():
    d = Dialog("d", [turn("recommender", ["a"], items=[1])])
    insts = make_instances([d], "rec", 10, vocab())
    assert insts[0].context_token_ids == []
    assert insts[0].context_entity_ids == []


def test_rec_from_seeker_switch():
    d = Dialog("d", [turn("seeker", ["a"], items=[2]), turn("recommender", ["b"], items=[1])])
    default = make_instances([d], "rec", 10, vocab())
    both = make_instances([d], "rec", 10, vocab(), rec_from_seeker=True)
    assert [i.target_item for i in default] == [1]
    assert sorted(i.target_item for i in both) == [1, 2]


# ---------------------------------------------------------------- pad_batch

def test_pad_shapes_and_masks():
    insts = [
        RecInstance([1, 2], [5], [9], target_item=0),
        RecInstance([3], [], [], target_item=1),
    ]
    batch = pad_batch(insts, pad_id=0, max_len=10)
    assert batch.arrays["context_tokens"].tolist() == [[1, 2], [3, 0]]
    assert batch.masks["context_tokens"].tolist() == [[1, 1], [1, 0]]
    assert batch.lengths["context_tokens"] == [2, 1]
    assert batch.targets["target_item"].tolist() == [0, 1]


def test_pad_recency_truncation():
    insts = [ConvInstance([1, 2, 3, 4], [2, 5, 3])]
    batch = pad_batch(insts, pad_id=0, max_len=2)
    assert batch.arrays["context_tokens"].tolist() == [[3, 4]]
    assert batch.arrays["response"].tolist() == [[5, 3]]


def test_pad_single_row_width():
    insts = [RecInstance([1, 2, 3], [1], [1], target_item=0)]
    batch = pad_batch(insts, pad_id=0, max_len=10)
    assert batch.arrays["context_tokens"].shape == (1, 3)
    batch = pad_batch(insts, pad_id=0, max_len=2)
    assert batch.arrays["context_tokens"].shape == (1, 2)


def test_pad_empty_list_errors():
    with pytest.raises(BatchError):
        pad_batch([], pad_id=0, max_len=4)


def test_mask_row_sums_equal_lengths():
    rng = np.random.default_rng(0)
    insts = [
        RecInstance(list(rng.integers(1, 9, size=rng.integers(0, 7))), [], [], target_item=0)
        for _ in range(20)
    ]
    batch = pad_batch(insts, pad_id=0, max_len=5)
    assert batch.masks["context_tokens"].sum(axis=1).tolist() == \
        batch.lengths["context_tokens"]


def test_truncation_is_suffix():
    rng = np.random.default_rng(1)
    for _ in range(25):
        row = list(rng.integers(1, 9, size=rng.integers(1, 12)))
        inst = RecInstance(row, [], [], target_item=0)
        batch = pad_batch([inst], pad_id=0, max_len=4)
        n = batch.lengths["context_tokens"][0]
        kept = batch.arrays["context_tokens"][0, :n].tolist()
        assert kept == row[-4:][:n]


# ----------------------------------------------------------- iterate_batches

def rec_instances(n):
    return [RecInstance([i], [i], [i], target_item=i % 3) for i in range(n)]


def test_batch_sizes():
    sizes = [b.size for b in iterate_batches(rec_instances(5), 2)]
    assert sizes == [2, 2, 1]


def test_same_seed_same_stream():
    a = [b.arrays["context_tokens"].tolist()
         for b in iterate_batches(rec_instances(30), 4, shuffle=True, seed=9)]
    b = [b.arrays["context_tokens"].tolist()
         for b in iterate_batches(rec_instances(30), 4, shuffle=True, seed=9)]
    assert a == b


def test_different_seeds_same_multiset():
    def flatten(seed):
        out = []
        for batch in iterate_batches(rec_instances(100), 7, shuffle=True, seed=seed):
            out.extend(batch.arrays["context_tokens"][:, 0].tolist())
        return out

    one, two = flatten(1), flatten(2)
    assert one != two
    assert sorted(one) == sorted(two)


def test_conservation_across_settings():
    for batch_size in (1, 3, 8, 100):
        for shuffle in (False, True):
            total = sum(
                b.size
                for b in iterate_batches(rec_instances(23), batch_size, shuffle, seed=3)
            )
            assert total == 23
