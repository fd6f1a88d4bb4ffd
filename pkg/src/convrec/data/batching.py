"""Task-specific instances and padded batch construction.

Dialogs become flat training instances per sub-task; instances become
padded, masked integer arrays. Flattened contexts join turns with the
vocabulary's reserved separator id so sequence models can see turn
boundaries. Truncation always keeps the most recent ids.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from ..errors import BatchError
from .corpus import Dialog, Vocabulary, tokenize

TASKS = ("rec", "conv", "policy")


@dataclass
class RecInstance:
    context_token_ids: list[int]
    context_entity_ids: list[int]
    context_item_ids: list[int]
    target_item: int
    task: str = "rec"


@dataclass
class ConvInstance:
    context_token_ids: list[int]
    response_token_ids: list[int]   # [start, ..., end]
    context_entity_ids: list[int] = field(default_factory=list)  # feeds KG-grounded decoders
    task: str = "conv"


@dataclass
class PolicyInstance:
    context_token_ids: list[int]
    profile_token_ids: list[int]
    context_label_ids: list[int]    # policy labels of earlier turns, in order
    target_label: int
    task: str = "policy"


@dataclass
class TaskBatch:
    task: str
    arrays: dict[str, np.ndarray]           # field -> (B, L) int64
    masks: dict[str, np.ndarray]            # field -> (B, L) int64, 1 = real
    lengths: dict[str, list[int]]
    targets: dict[str, np.ndarray] = field(default_factory=dict)  # field -> (B,)

    @property
    def size(self) -> int:
        return len(next(iter(self.lengths.values())))


def _flatten_turns(turns, vocab: Vocabulary) -> list[int]:
    flat: list[int] = []
    for i, utt in enumerate(turns):
        if i > 0:
            flat.append(vocab.sep_id)
        flat.extend(utt.token_ids)
    return flat


def make_instances(
    split: list[Dialog],
    task: str,
    max_context_turns: int,
    vocab: Vocabulary,
    rec_from_seeker: bool = False,
    item_seq_source: str = "dialog",
):
    """Extract per-turn training instances from dialogs.

    rec: one instance per (recommender turn, mentioned item); conv: one per
    recommender turn; policy: one per turn carrying a policy label. The
    context is every prior turn, truncated to the last max_context_turns.
    """
    if task not in TASKS:
        raise BatchError(f"unknown task '{task}'")
    if max_context_turns < 1:
        raise BatchError("max_context_turns must be >= 1")
    if item_seq_source not in ("dialog", "profile"):
        raise BatchError(f"unknown item_seq_source '{item_seq_source}'")

    instances = []
    for dialog in split:
        turns = dialog.utterances
        profile = dialog.user_profile
        for t, utt in enumerate(turns):
            context = turns[max(0, t - max_context_turns) : t]
            if task == "rec":
                if utt.role != "recommender" and not rec_from_seeker:
                    continue
                if not utt.item_ids:
                    continue
                token_ids = _flatten_turns(context, vocab)
                entity_ids = [e for turn in context for e in turn.entity_ids]
                if item_seq_source == "profile":
                    item_ids = list(profile.item_ids) if profile else []
                else:
                    item_ids = [i for turn in context for i in turn.item_ids]
                for item in utt.item_ids:
                    instances.append(
                        RecInstance(
                            context_token_ids=list(token_ids),
                            context_entity_ids=list(entity_ids),
                            context_item_ids=list(item_ids),
                            target_item=item,
                        )
                    )
            elif task == "conv":
                if utt.role != "recommender":
                    continue
                instances.append(
                    ConvInstance(
                        context_token_ids=_flatten_turns(context, vocab),
                        response_token_ids=[vocab.start] + list(utt.token_ids) + [vocab.end],
                        context_entity_ids=[e for turn in context for e in turn.entity_ids],
                    )
                )
            else:
                if utt.policy_label is None:
                    continue
                profile_ids: list[int] = []
                if profile:
                    for s, sentence in enumerate(profile.sentences):
                        if s > 0:
                            profile_ids.append(vocab.sep_id)
                        profile_ids.extend(vocab.encode(tokenize(sentence, "whitespace")))
                instances.append(
                    PolicyInstance(
                        context_token_ids=_flatten_turns(context, vocab),
                        profile_token_ids=profile_ids,
                        context_label_ids=[
                            turn.policy_label[1] for turn in context if turn.policy_label
                        ],
                        target_label=utt.policy_label[1],
                    )
                )
    return instances


_FIELDS = {
    "rec": ("context_token_ids", "context_entity_ids", "context_item_ids"),
    "conv": ("context_token_ids", "context_entity_ids", "response_token_ids"),
    "policy": ("context_token_ids", "profile_token_ids", "context_label_ids"),
}
_TARGETS = {"rec": "target_item", "policy": "target_label"}
_SHORT = {
    "context_token_ids": "context_tokens",
    "context_entity_ids": "context_entities",
    "context_item_ids": "context_items",
    "response_token_ids": "response",
    "profile_token_ids": "profile_tokens",
    "context_label_ids": "context_labels",
}


def pad_batch(instances: list, pad_id: int = 0, max_len: int = 256) -> TaskBatch:
    """Left-aligned, right-padded arrays; rows beyond max_len keep the last
    max_len ids (recency truncation)."""
    if not instances:
        raise BatchError("cannot pad an empty instance list")
    task = instances[0].task
    if any(inst.task != task for inst in instances):
        raise BatchError("mixed tasks in one batch")

    arrays: dict[str, np.ndarray] = {}
    masks: dict[str, np.ndarray] = {}
    lengths: dict[str, list[int]] = {}
    for attr in _FIELDS[task]:
        rows = [getattr(inst, attr)[-max_len:] for inst in instances]
        lens = [len(r) for r in rows]
        width = max(lens, default=0)
        mat = np.full((len(rows), width), pad_id, dtype=np.int64)
        mask = np.zeros((len(rows), width), dtype=np.int64)
        for i, row in enumerate(rows):
            mat[i, : len(row)] = row
            mask[i, : len(row)] = 1
        name = _SHORT[attr]
        arrays[name], masks[name], lengths[name] = mat, mask, lens

    targets: dict[str, np.ndarray] = {}
    if task in _TARGETS:
        attr = _TARGETS[task]
        targets[attr] = np.array([getattr(inst, attr) for inst in instances], dtype=np.int64)
    return TaskBatch(task=task, arrays=arrays, masks=masks, lengths=lengths, targets=targets)


def iterate_batches(
    instances: list,
    batch_size: int,
    shuffle: bool = False,
    seed: int = 0,
    pad_id: int = 0,
    max_len: int = 256,
):
    """Yield TaskBatches covering every instance exactly once.

    With shuffle, order is the seeded permutation of the instance list; the
    same seed reproduces the same stream. The last batch may be short.
    """
    if batch_size < 1:
        raise BatchError("batch_size must be >= 1")
    order = list(range(len(instances)))
    if shuffle:
        random.Random(seed).shuffle(order)
    for lo in range(0, len(order), batch_size):
        chunk = [instances[i] for i in order[lo : lo + batch_size]]
        yield pad_batch(chunk, pad_id=pad_id, max_len=max_len)
