"""Converters from raw public dataset layouts to the unified corpus files.

Each converter is registered under a format name and writes the full set of
unified files (dialogs, knowledge graphs, item map, surface forms,
checksums) into an output directory. Conversion is deterministic: the same
raw input produces byte-identical output.
"""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import IngestError
from .corpus import tokenize, write_checksums

log = logging.getLogger(__name__)

MENTION_RE = re.compile(r"@(\d+)")
YEAR_SUFFIX_RE = re.compile(r"\s*\(\d{4}\)\s*$")

ITEM_HUB = "<items>"

CONVERTERS: dict[str, callable] = {}


def register_converter(name: str):
    def wrap(fn):
        CONVERTERS[name] = fn
        return fn
    return wrap


@dataclass
class IngestReport:
    dialogs: int = 0
    utterances: int = 0
    resolved_mentions: int = 0
    unresolved_mentions: int = 0
    skipped_records: int = 0
    split_sizes: dict[str, int] = field(default_factory=dict)


def ingest_raw(raw_dir: str | Path, format_name: str, out_dir: str | Path, **options) -> IngestReport:
    """Convert a raw dataset directory into unified corpus files."""
    raw_dir = Path(raw_dir)
    if not raw_dir.is_dir():
        raise IngestError(f"raw directory not found: {raw_dir}")
    converter = CONVERTERS.get(format_name)
    if converter is None:
        raise IngestError(
            f"unknown raw format '{format_name}'; known formats: {sorted(CONVERTERS)}"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = converter(raw_dir, out_dir, **options)
    if report.dialogs == 0:
        raise IngestError(f"no dialogs parsed from {raw_dir}")
    write_checksums(out_dir)
    return report


def _dump_jsonl(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")


def _dump_tsv(path: Path, rows: list[tuple]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in rows:
            fh.write("\t".join(row) + "\n")


@register_converter("redial")
def convert_redial(raw_dir: Path, out_dir: Path, min_word_freq: int = 5) -> IngestReport:
    """Movie-dialog raw layout: JSONL conversations with inline @id mentions.

    Expected files: train_data.jsonl (required), test_data.jsonl and
    valid_data.jsonl (optional). Records carry conversationId, the two
    worker ids, messages[{senderWorkerId, text}], and a movieMentions table
    mapping mention ids to titles. Missing splits are carved off the end of
    the train file (10% each, at least one dialog).

    Side data is derived, not shipped: the entity graph links each movie to
    a shared hub plus movies co-mentioned within one conversation; the word
    graph links adjacent frequent tokens.
    """
    report = IngestReport()
    raw_splits: dict[str, list[dict]] = {}
    for split, fname in (("train", "train_data.jsonl"), ("valid", "valid_data.jsonl"),
                         ("test", "test_data.jsonl")):
        path = raw_dir / fname
        if not path.is_file():
            continue
        records = []
        for lineno, line in enumerate(path.read_text("utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                report.skipped_records += 1
                log.warning("%s:%d: skipping malformed JSON record", fname, lineno)
        raw_splits[split] = records
    if "train" not in raw_splits:
        raise IngestError(f"missing raw file: {raw_dir / 'train_data.jsonl'}")

    train = raw_splits["train"]
    if "test" not in raw_splits:
        cut = max(1, len(train) // 10)
        raw_splits["test"], train = train[-cut:], train[:-cut]
    if "valid" not in raw_splits:
        cut = max(1, len(train) // 10)
        raw_splits["valid"], train = train[-cut:], train[:-cut]
    raw_splits["train"] = train

    catalog: dict[str, None] = {}           # insertion-ordered set of titles
    dialogs_by_split: dict[str, list[dict]] = {}
    co_mentions: set[tuple[str, str]] = set()
    token_counts: Counter[str] = Counter()
    adjacency: set[tuple[str, str]] = set()

    for split in ("train", "valid", "test"):
        dialogs = []
        for rec in raw_splits[split]:
            parsed = _parse_redial_record(rec, catalog, report)
            if parsed is None:
                report.skipped_records += 1
                continue
            dialogs.append(parsed)
            mentioned = sorted({t for msg in parsed["messages"] for t in msg["items"]})
            for i, a in enumerate(mentioned):
                for b in mentioned[i + 1:]:
                    co_mentions.add((a, b))
            for msg in parsed["messages"]:
                tokens = tokenize(msg["text"])
                token_counts.update(tokens)
                adjacency.update(zip(tokens, tokens[1:]))
            report.dialogs += 1
            report.utterances += len(parsed["messages"])
        dialogs_by_split[split] = dialogs
        report.split_sizes[split] = len(dialogs)

    frequent = {t for t, c in token_counts.items() if c >= min_word_freq}
    word_triples = sorted(
        (a, "adjacent_to", b) for a, b in adjacency if a in frequent and b in frequent and a != b
    )
    word_nodes = {n for triple in word_triples for n in (triple[0], triple[2])}

    # Word fields can only be filled once the word-graph node set is known.
    for dialogs in dialogs_by_split.values():
        for dialog in dialogs:
            for msg in dialog["messages"]:
                msg["words"] = sorted({t for t in tokenize(msg["text"]) if t in word_nodes})

    titles = sorted(catalog)
    entity_triples = [(t, "is_item", ITEM_HUB) for t in titles]
    entity_triples += [(a, "co_mentioned_with", b) for a, b in sorted(co_mentions)]

    for split, dialogs in dialogs_by_split.items():
        _dump_jsonl(out_dir / f"{split}.jsonl", dialogs)
    _dump_tsv(out_dir / "entity_kg.tsv", entity_triples)
    _dump_tsv(out_dir / "word_kg.tsv", word_triples)
    _dump_tsv(out_dir / "item2entity.tsv", [(t, t) for t in titles])
    surfaces = []
    for title in titles:
        surface = tokenize(YEAR_SUFFIX_RE.sub("", title))
        if 0 < len(surface) <= 3:
            surfaces.append((" ".join(surface), title))
    _dump_tsv(out_dir / "surface_forms.tsv", sorted(set(surfaces)))
    return report


def _parse_redial_record(rec: dict, catalog: dict, report: IngestReport) -> dict | None:
    try:
        conv_id = str(rec["conversationId"])
        seeker_id = rec["initiatorWorkerId"]
        recommender_id = rec["respondentWorkerId"]
        raw_messages = rec["messages"]
        mention_table = {str(k): str(v) for k, v in (rec.get("movieMentions") or {}).items()}
    except (KeyError, TypeError, AttributeError):
        return None

    messages = []
    for msg in raw_messages:
        sender = msg.get("senderWorkerId")
        text = msg.get("text", "")
        if sender == seeker_id:
            role = "seeker"
        elif sender == recommender_id:
            role = "recommender"
        else:
            return None
        items = []

        def _sub(match: re.Match) -> str:
            title = mention_table.get(match.group(1))
            if title is None:
                report.unresolved_mentions += 1
                return ""
            report.resolved_mentions += 1
            items.append(title)
            catalog.setdefault(title, None)
            return YEAR_SUFFIX_RE.sub("", title)

        clean = MENTION_RE.sub(_sub, text)
        clean = " ".join(clean.split())
        messages.append(
            {
                "role": role,
                "text": clean,
                "items": items,
                "entities": list(items),
                "words": [],
                "policy": None,
            }
        )
    if not messages:
        return None
    return {"conv_id": conv_id, "user_profile": None, "messages": messages}
