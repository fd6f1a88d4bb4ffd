"""Hierarchical experiment configuration.

Settings live in three layers with right-most precedence:

    built-in defaults  <  config file  <  command-line overrides

Files are UTF-8 YAML-subset text (two-space indentation, ``key: value``
lines, ``-`` list items). Keys never contain dots; dotted paths address
nested keys (``train.lr``). A loaded tree is treated as immutable and may
be shared across threads.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError

_MISSING = object()

# Shipped default layer. Every key is a deliberate choice of this artifact;
# config files override any of them.
DEFAULTS: dict[str, Any] = {
    "dataset": {
        "name": "toy",              # registry name of the dataset
        "path": "data/toy",         # directory holding the unified corpus files
        "tokenizer": "whitespace",  # whitespace | char
        "min_freq": 1,              # vocabulary frequency cutoff
        "max_vocab": 30000,         # vocabulary size cap (incl. specials)
    },
    "data": {
        "max_context_turns": 10,    # dialog turns kept as model context
        "max_seq_len": 256,         # flattened rows keep the last max_seq_len ids
        "rec_from_seeker": False,   # also emit rec instances from seeker turns
        "item_seq_source": "dialog",  # dialog | profile: item sequence fed to sequential models
    },
    "task": {},                     # per sub-task: {rec: {model: ...}, conv: ..., policy: ...}
    "model": {
        "embedding_dim": 32,
        "hidden_dim": 32,
        "num_layers": 1,
        "num_heads": 2,
        "dropout": 0.0,
        "max_gen_len": 30,          # decode length cap
    },
    "train": {
        "seed": 7,
        "epochs": 2,
        "batch_size": 16,
        "lr": 0.001,
        "weight_decay": 0.0,
        "clip_norm": 1.0,
        "schedule": {"warmup_steps": 0, "decay": 1.0},
        "early_stop": {"patience": 3, "margin": 0.0, "mode": "min"},
        "monitor": "loss",          # key of the per-epoch validation report to track
    },
    "eval": {
        "ks_rec": [1, 10, 50],
        "ks_policy": [1, 3, 5],
        "bleu_smoothing": False,    # no smoothing: any zero n-gram precision zeroes the sentence
        "beam_size": 1,
    },
    "serve": {
        "top_k": 10,                # recommendations returned per turn
        "bias_top_m": 3,            # top items feeding the decoder vocabulary bias
        "port": 8080,
        "sessions_dir": "sessions",
    },
    "debug": False,
}

SCALARS = (str, int, float, bool)


def _check_tree(tree: Any, path: str = "") -> None:
    if isinstance(tree, Mapping):
        for key, value in tree.items():
            if not isinstance(key, str) or not key or "." in key:
                raise ConfigError(
                    f"invalid config key {key!r} under '{path or '<root>'}': "
                    "keys must be nonempty strings without dots"
                )
            _check_tree(value, f"{path}.{key}" if path else key)
    elif isinstance(tree, list):
        for i, value in enumerate(tree):
            _check_tree(value, f"{path}[{i}]")
    elif tree is not None and not isinstance(tree, SCALARS):
        raise ConfigError(f"unsupported value type {type(tree).__name__} at '{path}'")


def parse_config_text(text: str, source: str = "<string>") -> dict[str, Any]:
    """Parse config text, reporting the line number on failure."""
    try:
        tree = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        line = getattr(getattr(exc, "problem_mark", None), "line", None)
        where = f"{source}:{line + 1}" if line is not None else source
        raise ConfigError(f"parse error at {where}: {exc}") from exc
    if tree is None:
        tree = {}
    if not isinstance(tree, dict):
        raise ConfigError(f"parse error at {source}: top level must be a mapping")
    _check_tree(tree)
    return tree


def merge_trees(base: Mapping[str, Any], overlay: Mapping[str, Any]) -> dict[str, Any]:
    """Deep merge; overlay wins per key, nested maps merge recursively."""
    merged = {k: copy.deepcopy(v) for k, v in base.items()}
    for key, value in overlay.items():
        if key in merged and isinstance(merged[key], dict) and isinstance(value, Mapping):
            merged[key] = merge_trees(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _lookup(tree: Mapping[str, Any], dotted_key: str) -> Any:
    node: Any = tree
    for part in dotted_key.split("."):
        if not isinstance(node, Mapping) or part not in node:
            raise KeyError(dotted_key)
        node = node[part]
    return node


def get(tree: Mapping[str, Any], dotted_key: str, default: Any = _MISSING) -> Any:
    """Fetch a dotted key; `default` is returned only when given."""
    if not dotted_key:
        raise ConfigError("empty config key")
    try:
        return _lookup(tree, dotted_key)
    except KeyError:
        if default is not _MISSING:
            return default
        raise ConfigError(f"missing config key '{dotted_key}'") from None


def _coerce(raw: str, like: Any) -> Any:
    """Coerce an override string to the type of an existing value."""
    if isinstance(like, bool):
        lowered = raw.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"cannot coerce {raw!r} to bool")
    if isinstance(like, int) and not isinstance(like, bool):
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"cannot coerce {raw!r} to int") from exc
    if isinstance(like, float):
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"cannot coerce {raw!r} to float") from exc
    if isinstance(like, list):
        parsed = yaml.safe_load(raw)
        if not isinstance(parsed, list):
            raise ConfigError(f"cannot coerce {raw!r} to list")
        return parsed
    return raw


def _set_dotted(tree: dict[str, Any], dotted_key: str, value: Any) -> None:
    parts = dotted_key.split(".")
    node = tree
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"config key '{dotted_key}' addresses through a scalar")
    node[parts[-1]] = value


def apply_overrides(
    tree: dict[str, Any],
    overrides: Mapping[str, str],
    strict: bool = True,
    log=None,
) -> dict[str, Any]:
    """Apply flat dotted-key string overrides onto a merged tree.

    Values are coerced to the type already present at the key. A key absent
    from the tree is an unknown-key error in strict mode and a warning
    otherwise (the raw string is kept verbatim).
    """
    result = copy.deepcopy(tree)
    for dotted_key, raw in overrides.items():
        try:
            current = _lookup(result, dotted_key)
        except KeyError:
            if strict:
                raise ConfigError(
                    f"unknown config key '{dotted_key}' "
                    "(not present in defaults or config file)"
                ) from None
            if log is not None:
                log.warning("unknown config key '%s'; kept verbatim", dotted_key)
            _set_dotted(result, dotted_key, raw)
            continue
        _set_dotted(result, dotted_key, _coerce(raw, current))
    return result


def load_config(
    file_path: str | Path | None,
    cli_overrides: Mapping[str, str] | None = None,
    debug: bool = False,
    log=None,
) -> dict[str, Any]:
    """Build the effective tree: defaults < file < overrides.

    `file_path=None` loads defaults only (used by tools that ship their own
    settings). Override coercion follows the pre-override value's type; with
    no such value the string is kept verbatim (debug mode) or rejected.
    """
    tree = copy.deepcopy(DEFAULTS)
    if file_path is not None:
        path = Path(file_path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        tree = merge_trees(tree, parse_config_text(path.read_text("utf-8"), str(path)))
    if debug:
        tree["debug"] = True
    if cli_overrides:
        tree = apply_overrides(tree, cli_overrides, strict=not tree.get("debug", False), log=log)
    _check_tree(tree)
    return tree


def validate(tree: Mapping[str, Any], schema: Mapping[str, tuple[type, bool]]) -> list[str]:
    """Check required keys and scalar types; violations are returned, not raised.

    Schema keys may use a single ``*`` segment, expanded against the keys
    present at that level (``task.*.model``).
    """
    violations: list[str] = []
    for pattern, (expected, required) in schema.items():
        for dotted_key in _expand_pattern(tree, pattern):
            try:
                value = _lookup(tree, dotted_key)
            except KeyError:
                if required:
                    violations.append(f"missing required key '{dotted_key}'")
                continue
            if not _type_ok(value, expected):
                violations.append(
                    f"type mismatch at '{dotted_key}': expected {expected.__name__}, "
                    f"got {type(value).__name__} ({value!r})"
                )
    return violations


def _type_ok(value: Any, expected: type) -> bool:
    if expected is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if expected is int:
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, expected)


def _expand_pattern(tree: Mapping[str, Any], pattern: str):
    if "*" not in pattern:
        yield pattern
        return
    head, _, tail = pattern.partition(".*")
    try:
        node = _lookup(tree, head)
    except KeyError:
        return
    if isinstance(node, Mapping):
        for key in node:
            yield f"{head}.{key}{tail}"


def core_schema() -> dict[str, tuple[type, bool]]:
    """Keys every runnable experiment must carry."""
    return {
        "dataset.name": (str, True),
        "dataset.tokenizer": (str, True),
        "task.*.model": (str, True),
        "train.seed": (int, True),
        "train.epochs": (int, True),
        "train.batch_size": (int, True),
        "train.lr": (float, True),
    }


def dump_config(tree: Mapping[str, Any]) -> str:
    """Serialize to the same text format `load_config` reads."""
    return yaml.safe_dump(dict(tree), default_flow_style=False, sort_keys=True, indent=2)
