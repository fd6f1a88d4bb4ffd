import numpy as np
import pytest

from convrec.data.batching import PolicyInstance, RecInstance, pad_batch
from convrec.errors import ModelError
from convrec.models import ModelConfig, PMI, Popularity, RankOutput


def rec_batch(contexts):
    insts = [RecInstance(list(c), [], [], target_item=0) for c in contexts]
    return pad_batch(insts, pad_id=0, max_len=16)


# --------------------------------------------------------------- popularity

def fitted_popularity(targets, catalog=3):
    model = Popularity(ModelConfig(name="popularity", catalog_size=catalog))
    model.fit_counts([RecInstance([], [], [], target_item=t) for t in targets])
    return model


def test_popularity_counts_order():
    # counts {A:3, B:1}, catalog {A,B,C} -> [A, B, C]
    model = fitted_popularity([0, 0, 0, 1])
    assert model.rank_single().ranking == [0, 1, 2]


def test_popularity_empty_training_is_id_order():
    model = Popularity(ModelConfig(name="popularity", catalog_size=4))
    assert model.rank_single().ranking == [0, 1, 2, 3]


def test_popularity_ignores_context():
    model = fitted_popularity([2, 2, 1])
    scores = model.rank(rec_batch([[1, 2], [5]]))
    assert np.array_equal(scores[0], scores[1])


def test_popularity_unseen_after_seen_ties_by_id():
    model = fitted_popularity([3, 3, 1], catalog=6)
    assert model.rank_single().ranking == [3, 1, 0, 2, 4, 5]


def test_popularity_needs_catalog():
    with pytest.raises(ModelError):
        Popularity(ModelConfig(name="popularity", catalog_size=0))


def test_rank_output_tie_rule():
    out = RankOutput.from_scores(np.array([1.0, 2.0, 2.0, 0.5]))
    assert out.ranking == [1, 2, 0, 3]


# ---------------------------------------------------------------------- pmi

def fitted_pmi(sequences, labels=3):
    model = PMI(ModelConfig(name="pmi", label_count=labels))
    model.fit_sequences(sequences)
    return model


def test_pmi_spec_example_argmax():
    # train [[x,y],[x,y]] with x=0, y=1, z=2; context [x], candidates {y,z}.
    # With add-one smoothing the two candidates tie exactly, so the
    # ascending-id rule decides; y carries the lower id.
    model = fitted_pmi([[0, 1], [0, 1]])
    out = model.predict([0], [1, 2])
    assert int(np.argmax(out.probs)) == 0  # candidate index 0 == label y
    seen = model.predict([0], [1])
    assert seen.probs[0] == pytest.approx(1.0)


def test_pmi_observed_transition_dominates_unobserved():
    # y follows x three times, z never and z also occurs elsewhere; the
    # smoothed estimate must now strictly prefer y.
    model = fitted_pmi([[0, 1], [0, 1], [0, 1], [2, 2]])
    out = model.predict([0], [1, 2])
    assert out.probs[0] > out.probs[1]


def test_pmi_empty_context_uniform():
    model = fitted_pmi([[0, 1, 2]])
    out = model.predict([], [0, 1, 2])
    assert np.allclose(out.probs, 1.0 / 3.0)


def test_pmi_single_candidate():
    model = fitted_pmi([[0, 1]])
    assert model.predict([0], [2]).probs[0] == pytest.approx(1.0)


def test_pmi_empty_candidates_error():
    model = fitted_pmi([[0, 1]])
    with pytest.raises(ModelError):
        model.predict([0], [])


def test_pmi_needs_sequences():
    model = PMI(ModelConfig(name="pmi", label_count=2))
    with pytest.raises(ModelError):
        model.fit_sequences([])


def test_pmi_table_formula_brute_force():
    sequences = [[0, 1, 2, 1], [1, 0]]
    model = fitted_pmi(sequences)
    pairs = np.zeros((3, 3))
    uni = np.zeros(3)
    for seq in sequences:
        for lab in seq:
            uni[lab] += 1
        for a, b in zip(seq, seq[1:]):
            pairs[a, b] += 1
    n_total = pairs.sum() + 1.0
    expected = np.log((pairs + 1.0) * n_total / np.outer(uni + 1.0, uni + 1.0))
    assert np.allclose(model.pmi_table(), expected, atol=1e-12)


def test_pmi_policy_probs_batch_normalized():
    model = fitted_pmi([[0, 1, 2], [2, 1, 0]])
    insts = [
        PolicyInstance([1, 2], [], [0, 1], target_label=2),
        PolicyInstance([], [], [], target_label=0),
    ]
    probs = model.policy_probs(pad_batch(insts, 0, 8))
    assert probs.shape == (2, 3)
    assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(probs[1], 1.0 / 3.0)
