"""Bit-exact model persistence.

An artifact is two files in a directory: `artifact.manifest.json` (the
model configs, the experiment config snapshot, the corpus fingerprint, the
save-time metric report and one entry per parameter with name, shape,
dtype tag and byte offset) and `artifact.params.bin` (every parameter
concatenated as little-endian float32). Round-tripping preserves each
float bit-for-bit.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CheckpointError
from ..models.base import ModelConfig

log = logging.getLogger(__name__)

MANIFEST_NAME = "artifact.manifest.json"
PARAMS_NAME = "artifact.params.bin"
FORMAT_TAG = "convrec-artifact"
DTYPE_TAG = "<f4"


@dataclass
class ModelArtifact:
    model_configs: dict[str, dict]          # task -> ModelConfig fields
    params: dict[str, np.ndarray]           # qualified name -> float32 array
    corpus_fingerprint: str = ""
    metrics: dict = field(default_factory=dict)
    config_tree: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def model_config(self, task: str) -> ModelConfig:
        return ModelConfig(**self.model_configs[task])


def save_artifact(artifact: ModelArtifact, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    blob = bytearray()
    for name in sorted(artifact.params):
        array = np.ascontiguousarray(artifact.params[name], dtype=np.dtype(DTYPE_TAG))
        raw = array.tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(array.shape),
                "dtype": DTYPE_TAG,
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        blob.extend(raw)
        offset += len(raw)
    manifest = {
        "format": FORMAT_TAG,
        "version": 1,
        "corpus_fingerprint": artifact.corpus_fingerprint,
        "model_configs": artifact.model_configs,
        "metrics": artifact.metrics,
        "config_tree": artifact.config_tree,
        "meta": artifact.meta,
        "params": entries,
    }
    (out_dir / MANIFEST_NAME).write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", "utf-8"
    )
    (out_dir / PARAMS_NAME).write_bytes(bytes(blob))
    return out_dir


def load_artifact(path: str | Path, active_fingerprint: str | None = None) -> ModelArtifact:
    """Read an artifact directory.

    A fingerprint differing from `active_fingerprint` logs a warning and
    loading proceeds; a blob too short for a manifest entry is a load error
    naming the missing parameter.
    """
    path = Path(path)
    manifest_path = path / MANIFEST_NAME if path.is_dir() else path
    if not manifest_path.is_file():
        raise CheckpointError(f"artifact manifest not found: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"corrupt manifest {manifest_path}: {exc}") from exc
    if manifest.get("format") != FORMAT_TAG:
        raise CheckpointError(f"not a model artifact: {manifest_path}")

    blob = (manifest_path.parent / PARAMS_NAME).read_bytes()
    params: dict[str, np.ndarray] = {}
    for entry in manifest["params"]:
        lo, hi = entry["offset"], entry["offset"] + entry["nbytes"]
        if hi > len(blob):
            raise CheckpointError(
                f"parameter blob truncated: '{entry['name']}' needs bytes "
                f"{lo}..{hi} of {len(blob)}"
            )
        array = np.frombuffer(blob[lo:hi], dtype=np.dtype(entry["dtype"]))
        params[entry["name"]] = array.reshape(entry["shape"]).copy()

    fingerprint = manifest.get("corpus_fingerprint", "")
    if active_fingerprint is not None and fingerprint and fingerprint != active_fingerprint:
        log.warning(
            "artifact was trained on a different corpus (fingerprint %s != %s); "
            "results may not be meaningful", fingerprint[:12], active_fingerprint[:12]
        )
    return ModelArtifact(
        model_configs=manifest["model_configs"],
        params=params,
        corpus_fingerprint=fingerprint,
        metrics=manifest.get("metrics", {}),
        config_tree=manifest.get("config_tree", {}),
        meta=manifest.get("meta", {}),
    )
