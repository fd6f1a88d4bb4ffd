"""Model zoo registry: build any model by name from a ModelConfig."""

from __future__ import annotations

from ..errors import ModelError
from .base import (
    BaseModel,
    GenOutput,
    ModelConfig,
    PolicyOutput,
    RankOutput,
    SideData,
    seeded_init,
)
from .conversation import HRED, TransformerSeq2Seq
from .decoding import beam_decode, greedy_decode
from .kbrd import KBRD
from .mgcg import MGCG
from .pmi import PMI
from .popularity import Popularity
from .rgcn import RGCNRec, rgcn_layer
from .sequential import GRU4Rec, SASRec
from .textcnn import TextCNN

MODEL_REGISTRY: dict[str, type[BaseModel]] = {
    cls.NAME: cls
    for cls in (
        Popularity, PMI, GRU4Rec, SASRec, TextCNN, RGCNRec,
        HRED, TransformerSeq2Seq, MGCG, KBRD,
    )
}

_NEEDS_SIDE = {"rgcn", "kbrd"}


def build_model(config: ModelConfig, side: SideData | None = None) -> BaseModel:
    cls = MODEL_REGISTRY.get(config.name)
    if cls is None:
        raise ModelError(
            f"unknown model '{config.name}'; available: {sorted(MODEL_REGISTRY)}"
        )
    if config.name in _NEEDS_SIDE:
        return cls(config, side or SideData())
    return cls(config)


__all__ = [
    "BaseModel",
    "GenOutput",
    "HRED",
    "KBRD",
    "MGCG",
    "MODEL_REGISTRY",
    "ModelConfig",
    "PMI",
    "PolicyOutput",
    "Popularity",
    "RGCNRec",
    "RankOutput",
    "SASRec",
    "GRU4Rec",
    "SideData",
    "TextCNN",
    "TransformerSeq2Seq",
    "beam_decode",
    "build_model",
    "greedy_decode",
    "rgcn_layer",
    "seeded_init",
]
