from .corpus import (
    DatasetBundle,
    Dialog,
    KnowledgeGraph,
    Utterance,
    Vocabulary,
    build_vocab,
    compute_checksums,
    link_entities,
    load_unified,
    tokenize,
)
from .batching import (
    ConvInstance,
    PolicyInstance,
    RecInstance,
    TaskBatch,
    iterate_batches,
    make_instances,
    pad_batch,
)

__all__ = [
    "ConvInstance",
    "DatasetBundle",
    "Dialog",
    "KnowledgeGraph",
    "PolicyInstance",
    "RecInstance",
    "TaskBatch",
    "Utterance",
    "Vocabulary",
    "build_vocab",
    "compute_checksums",
    "iterate_batches",
    "link_entities",
    "load_unified",
    "make_instances",
    "pad_batch",
    "tokenize",
]
