"""Unified, model-independent dialog corpus.

On disk a corpus directory holds:

    {train,valid,test}.jsonl   one JSON object per dialog (see Dialog schema)
    entity_kg.tsv              head<TAB>relation<TAB>tail, by name
    word_kg.tsv                same format, over vocabulary words
    item2entity.tsv            item name<TAB>entity name
    surface_forms.tsv          lowercase n-gram (n<=3)<TAB>entity name
    embeddings.txt             token<SP>f1<SP>f2... (optional)
    checksums.txt              sha256 hex + two spaces + filename (optional)

All symbolic references on disk are names; dense integer ids are assigned
at load time (sorted-name order) and validated against the side data.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import CorpusError, IntegrityError

PAD, UNK, START, END = 0, 1, 2, 3
SPECIAL_TOKENS = ("<pad>", "<unk>", "<start>", "<end>")

ROLES = ("seeker", "recommender")

SPLIT_NAMES = ("train", "valid", "test")

CORPUS_FILES = (
    "train.jsonl",
    "valid.jsonl",
    "test.jsonl",
    "entity_kg.tsv",
    "word_kg.tsv",
    "item2entity.tsv",
    "surface_forms.tsv",
)


@dataclass
class Utterance:
    role: str
    text: str
    tokens: list[str]
    token_ids: list[int]
    item_ids: list[int] = field(default_factory=list)
    entity_ids: list[int] = field(default_factory=list)
    word_ids: list[int] = field(default_factory=list)
    policy_label: tuple[str, int] | None = None  # (label kind, label id)


@dataclass
class UserProfile:
    item_ids: list[int] = field(default_factory=list)
    sentences: list[str] = field(default_factory=list)


@dataclass
class Dialog:
    conv_id: str
    utterances: list[Utterance]
    user_profile: UserProfile | None = None


class Vocabulary:
    """Token table with fixed specials at ids 0..3.

    One extra id (`sep_id`, one past the token table) is reserved for the
    turn separator used when flattening dialog contexts; it never maps to a
    corpus token. Models size their embedding tables with `model_vocab_size`.
    """

    def __init__(self, tokens: list[str]):
        self.id2token = list(SPECIAL_TOKENS) + list(tokens)
        self.token2id = {tok: i for i, tok in enumerate(self.id2token)}
        if len(self.token2id) != len(self.id2token):
            raise CorpusError("duplicate token in vocabulary")
        self.pad, self.unk, self.start, self.end = PAD, UNK, START, END

    def __len__(self) -> int:
        return len(self.id2token)

    @property
    def sep_id(self) -> int:
        return len(self.id2token)

    @property
    def model_vocab_size(self) -> int:
        return len(self.id2token) + 1  # token table + separator slot

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.token2id.get(tok, UNK) for tok in tokens]

    def decode(self, ids: list[int], skip_special: bool = True) -> list[str]:
        out = []
        for i in ids:
            if i == self.sep_id:
                if not skip_special:
                    out.append("<sep>")
                continue
            if skip_special and i in (PAD, UNK, START, END):
                continue
            out.append(self.id2token[i] if 0 <= i < len(self.id2token) else "<unk>")
        return out


@dataclass
class KnowledgeGraph:
    node_names: list[str]                      # index = node id
    relation_names: list[str]                  # index = relation id
    triples: list[tuple[int, int, int]]        # (head id, relation id, tail id)

    def __post_init__(self):
        self.node_ids = {name: i for i, name in enumerate(self.node_names)}
        n = len(self.node_names)
        for h, r, t in self.triples:
            if not (0 <= h < n and 0 <= t < n):
                raise CorpusError(f"triple endpoint out of range: ({h},{r},{t})")
            if not 0 <= r < len(self.relation_names):
                raise CorpusError(f"unknown relation id in triple: ({h},{r},{t})")

    @property
    def n_nodes(self) -> int:
        return len(self.node_names)

    @property
    def n_relations(self) -> int:
        return len(self.relation_names)


@dataclass
class DatasetBundle:
    splits: dict[str, list[Dialog]]
    vocab: Vocabulary
    entity_kg: KnowledgeGraph
    word_kg: KnowledgeGraph
    item_catalog: list[str]                    # index = item id
    item2entity: dict[int, int]                # item id -> entity node id
    surface_map: dict[str, int]                # lowercase n-gram -> entity id
    policy_labels: list[str]                   # index = label id; empty if unused
    policy_kind: str | None = None
    word_vectors: dict[str, np.ndarray] | None = None
    fingerprint: str = ""
    tokenizer: str = "whitespace"

    @property
    def n_items(self) -> int:
        return len(self.item_catalog)


def tokenize(text: str, kind: str = "whitespace") -> list[str]:
    """Split text into tokens.

    whitespace: lowercase, then split on Unicode whitespace.
    char: one token per non-space character, case preserved.
    """
    if kind == "whitespace":
        return text.lower().split()
    if kind == "char":
        return [ch for ch in text if not ch.isspace()]
    raise CorpusError(f"unknown tokenizer kind '{kind}'")


def build_vocab(train_dialogs: list[Dialog], min_freq: int = 1, max_size: int = 30000) -> Vocabulary:
    """Frequency vocabulary over the train split only.

    Tokens with frequency >= min_freq, most frequent first, ties broken
    lexicographically, truncated to max_size - 4 and preceded by the four
    specials.
    """
    if min_freq < 1:
        raise CorpusError("min_freq must be >= 1")
    if max_size < 4:
        raise CorpusError("max_size must leave room for the specials")
    counts: Counter[str] = Counter()
    for dialog in train_dialogs:
        for utt in dialog.utterances:
            counts.update(utt.tokens)
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )
    return Vocabulary(kept[: max_size - 4])


def link_entities(tokens: list[str], surface_map: dict[str, int]) -> list[int]:
    """Greedy longest-match entity linking over a token sequence.

    Surface forms are lowercase token n-grams with n <= 3; matched tokens
    are consumed, matching proceeds left to right.
    """
    linked: list[int] = []
    i = 0
    n = len(tokens)
    while i < n:
        matched = False
        for width in (3, 2, 1):
            if i + width > n:
                continue
            surface = " ".join(tokens[i : i + width])
            if surface in surface_map:
                linked.append(surface_map[surface])
                i += width
                matched = True
                break
        if not matched:
            i += 1
    return linked


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def compute_checksums(data_dir: str | Path, filenames=None) -> dict[str, str]:
    data_dir = Path(data_dir)
    names = filenames or [p.name for p in sorted(data_dir.iterdir())
                          if p.is_file() and p.name != "checksums.txt"]
    return {name: sha256_file(data_dir / name) for name in names}


def write_checksums(data_dir: str | Path) -> Path:
    data_dir = Path(data_dir)
    out = data_dir / "checksums.txt"
    sums = compute_checksums(data_dir)
    out.write_text("".join(f"{digest}  {name}\n" for name, digest in sorted(sums.items())), "utf-8")
    return out


def read_checksums(path: Path) -> dict[str, str]:
    sums = {}
    for line in path.read_text("utf-8").splitlines():
        if not line.strip():
            continue
        digest, _, name = line.partition("  ")
        sums[name.strip()] = digest.strip()
    return sums


def _verify_checksums(data_dir: Path, expected: dict[str, str]) -> None:
    for name, want in sorted(expected.items()):
        path = data_dir / name
        if not path.is_file():
            raise IntegrityError(f"checksummed file missing: {name}")
        got = sha256_file(path)
        if got != want:
            raise IntegrityError(f"checksum mismatch for {name}: expected {want}, got {got}")


def _read_kg(path: Path) -> KnowledgeGraph:
    names: set[str] = set()
    relations: set[str] = set()
    raw_triples: list[tuple[str, str, str]] = []
    if path.is_file():
        for lineno, line in enumerate(path.read_text("utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise CorpusError(f"{path.name}:{lineno}: expected head<TAB>relation<TAB>tail")
            head, rel, tail = parts
            names.update((head, tail))
            relations.add(rel)
            raw_triples.append((head, rel, tail))
    node_names = sorted(names)
    relation_names = sorted(relations)
    node_ids = {n: i for i, n in enumerate(node_names)}
    rel_ids = {r: i for i, r in enumerate(relation_names)}
    triples = [(node_ids[h], rel_ids[r], node_ids[t]) for h, r, t in raw_triples]
    return KnowledgeGraph(node_names, relation_names, triples)


def _read_pairs(path: Path) -> list[tuple[str, str]]:
    pairs = []
    if path.is_file():
        for lineno, line in enumerate(path.read_text("utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise CorpusError(f"{path.name}:{lineno}: expected two tab-separated fields")
            pairs.append((parts[0], parts[1]))
    return pairs


def _read_embeddings(path: Path) -> dict[str, np.ndarray] | None:
    if not path.is_file():
        return None
    vectors: dict[str, np.ndarray] = {}
    dim = None
    for lineno, line in enumerate(path.read_text("utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split(" ")
        token, values = parts[0], parts[1:]
        vec = np.array([float(v) for v in values], dtype=np.float64)
        if dim is None:
            dim = vec.shape[0]
        elif vec.shape[0] != dim:
            raise CorpusError(f"{path.name}:{lineno}: inconsistent embedding width")
        vectors[token] = vec
    return vectors or None


def fetch_corpus(url: str, dest_dir: str | Path,
                 expected_checksums: dict[str, str] | None = None) -> Path:
    """Download a corpus tarball and unpack it into dest_dir.

    When checksums are given, every listed file is verified after
    extraction; a mismatch raises before anything is loaded.
    """
    import tarfile
    import tempfile
    import urllib.request

    dest_dir = Path(dest_dir)
    dest_dir.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(suffix=".tar.gz") as tmp:
        with urllib.request.urlopen(url) as response:
            while chunk := response.read(65536):
                tmp.write(chunk)
        tmp.flush()
        with tarfile.open(tmp.name, "r:*") as tar:
            for member in tar.getmembers():
                name = Path(member.name).name  # flatten; reject path tricks
                if not member.isfile() or name.startswith("."):
                    continue
                with tar.extractfile(member) as src:
                    (dest_dir / name).write_bytes(src.read())
    if expected_checksums:
        _verify_checksums(dest_dir, expected_checksums)
    return dest_dir


def load_unified(
    data_dir: str | Path,
    tokenizer: str = "whitespace",
    min_freq: int = 1,
    max_vocab: int = 30000,
    expected_checksums: dict[str, str] | None = None,
    download_url: str | None = None,
) -> DatasetBundle:
    """Load and fully validate a unified corpus directory.

    A missing directory is fetched from `download_url` when one is
    configured. Checksums are verified whenever `expected_checksums` is
    given or a checksums.txt file is present. Every invariant of the bundle
    types is checked here; the first offending record is named in the error.
    """
    data_dir = Path(data_dir)
    if not data_dir.is_dir() and download_url:
        fetch_corpus(download_url, data_dir, expected_checksums)
    if not data_dir.is_dir():
        raise CorpusError(f"corpus directory not found: {data_dir}")

    sums = dict(expected_checksums or {})
    sums_file = data_dir / "checksums.txt"
    if not sums and sums_file.is_file():
        sums = read_checksums(sums_file)
    if sums:
        _verify_checksums(data_dir, sums)

    entity_kg = _read_kg(data_dir / "entity_kg.tsv")
    word_kg = _read_kg(data_dir / "word_kg.tsv")

    item2entity_pairs = _read_pairs(data_dir / "item2entity.tsv")
    raw_splits: dict[str, list[dict]] = {}
    for split in SPLIT_NAMES:
        path = data_dir / f"{split}.jsonl"
        if not path.is_file():
            raise CorpusError(f"missing corpus file: {path.name}")
        records = []
        for lineno, line in enumerate(path.read_text("utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise CorpusError(f"{path.name}:{lineno}: invalid JSON ({exc})") from exc
        raw_splits[split] = records

    # Item catalog: mapped items plus anything mentioned in any split.
    item_names: set[str] = {item for item, _ in item2entity_pairs}
    for records in raw_splits.values():
        for rec in records:
            profile = rec.get("user_profile") or {}
            item_names.update(profile.get("items", []))
            for msg in rec.get("messages", []):
                item_names.update(msg.get("items", []))
    item_catalog = sorted(item_names)
    item_ids = {name: i for i, name in enumerate(item_catalog)}

    item2entity: dict[int, int] = {}
    for item, entity in item2entity_pairs:
        if entity not in entity_kg.node_ids:
            raise CorpusError(f"item2entity.tsv: unknown entity '{entity}' for item '{item}'")
        item2entity[item_ids[item]] = entity_kg.node_ids[entity]

    surface_map: dict[str, int] = {}
    for surface, entity in _read_pairs(data_dir / "surface_forms.tsv"):
        if entity not in entity_kg.node_ids:
            raise CorpusError(f"surface_forms.tsv: unknown entity '{entity}'")
        if len(surface.split(" ")) > 3:
            raise CorpusError(f"surface_forms.tsv: surface form longer than 3 tokens: '{surface}'")
        surface_map[surface.lower()] = entity_kg.node_ids[entity]

    # Policy label set: union across splits, sorted for dense stable ids.
    label_names: set[str] = set()
    kinds: set[str] = set()
    for records in raw_splits.values():
        for rec in records:
            for msg in rec.get("messages", []):
                policy = msg.get("policy")
                if policy:
                    kinds.add(policy.get("kind", "label"))
                    label_names.add(policy["label"])
    if len(kinds) > 1:
        raise CorpusError(f"mixed policy label kinds: {sorted(kinds)}")
    policy_labels = sorted(label_names)
    label_ids = {name: i for i, name in enumerate(policy_labels)}
    policy_kind = next(iter(kinds), None)

    # Parse dialogs, tokenizing as we go; vocabulary comes from train only.
    parsed: dict[str, list[Dialog]] = {}
    seen_ids: dict[str, str] = {}
    for split, records in raw_splits.items():
        dialogs = []
        for rec in records:
            conv_id = str(rec.get("conv_id", ""))
            if not conv_id:
                raise CorpusError(f"{split}.jsonl: dialog without conv_id")
            if conv_id in seen_ids:
                raise CorpusError(
                    f"conv_id '{conv_id}' appears in both {seen_ids[conv_id]} and {split}"
                )
            seen_ids[conv_id] = split
            utterances = []
            for msg in rec.get("messages", []):
                role = msg.get("role")
                if role not in ROLES:
                    raise CorpusError(f"dialog {conv_id}: bad role {role!r}")
                for ent in msg.get("entities", []):
                    if ent not in entity_kg.node_ids:
                        raise CorpusError(f"dialog {conv_id}: unknown entity '{ent}'")
                for word in msg.get("words", []):
                    if word not in word_kg.node_ids:
                        raise CorpusError(f"dialog {conv_id}: unknown word '{word}'")
                policy = msg.get("policy")
                tokens = tokenize(msg.get("text", ""), tokenizer)
                utterances.append(
                    Utterance(
                        role=role,
                        text=msg.get("text", ""),
                        tokens=tokens,
                        token_ids=[],
                        item_ids=[item_ids[i] for i in msg.get("items", [])],
                        entity_ids=[entity_kg.node_ids[e] for e in msg.get("entities", [])],
                        word_ids=[word_kg.node_ids[w] for w in msg.get("words", [])],
                        policy_label=(
                            (policy.get("kind", "label"), label_ids[policy["label"]])
                            if policy
                            else None
                        ),
                    )
                )
            if not utterances:
                raise CorpusError(f"dialog {conv_id}: no utterances")
            profile = rec.get("user_profile")
            user_profile = None
            if profile:
                for item in profile.get("items", []):
                    if item not in item_ids:
                        raise CorpusError(f"dialog {conv_id}: unknown profile item '{item}'")
                user_profile = UserProfile(
                    item_ids=[item_ids[i] for i in profile.get("items", [])],
                    sentences=list(profile.get("sentences", [])),
                )
            dialogs.append(Dialog(conv_id=conv_id, utterances=utterances, user_profile=user_profile))
        parsed[split] = dialogs

    vocab = build_vocab(parsed["train"], min_freq=min_freq, max_size=max_vocab)
    for dialogs in parsed.values():
        for dialog in dialogs:
            for utt in dialog.utterances:
                utt.token_ids = vocab.encode(utt.tokens)

    present = [n for n in CORPUS_FILES if (data_dir / n).is_file()]
    fingerprint = hashlib.sha256(
        "".join(f"{n}:{sha256_file(data_dir / n)};" for n in present).encode()
    ).hexdigest()

    return DatasetBundle(
        splits=parsed,
        vocab=vocab,
        entity_kg=entity_kg,
        word_kg=word_kg,
        item_catalog=item_catalog,
        item2entity=item2entity,
        surface_map=surface_map,
        policy_labels=policy_labels,
        policy_kind=policy_kind,
        word_vectors=_read_embeddings(data_dir / "embeddings.txt"),
        fingerprint=fingerprint,
        tokenizer=tokenizer,
    )
