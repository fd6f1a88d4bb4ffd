"""Seeded synthetic movie-dialog corpus for tests and demos.

License-gated public datasets are never bundled; this generator stands in
for them. `generate_unified` writes a ready-to-load corpus directory,
`generate_raw` writes the raw mention-markup layout consumed by the
'redial' converter. Both are deterministic functions of the seed.
"""

from __future__ import annotations

import json
import random
from pathlib import Path

from .corpus import write_checksums
from .ingest import _dump_jsonl, _dump_tsv

ADJECTIVES = ["silent", "crimson", "golden", "broken", "electric", "midnight", "paper", "iron"]
NOUNS = ["harbor", "comet", "garden", "signal", "empire", "orchard", "mirror", "voyage"]
GENRES = ["comedy", "thriller", "romance", "scifi", "drama", "western"]

SEEKER_OPENERS = [
    "hi i am looking for a {genre} movie",
    "hello can you suggest something {genre}",
    "hey i want to watch a good {genre} film tonight",
]
SEEKER_FOLLOWUPS = [
    "that sounds interesting tell me more",
    "i already saw that one got anything else",
    "hmm maybe something more {genre}",
    "great who stars in it",
]
RECOMMENDER_ASKS = [
    "sure do you prefer {genre} or {genre2}",
    "happy to help what kind of mood are you in",
]
RECOMMENDER_RECS = [
    "you should watch {title} it is a fine {genre} picture",
    "i recommend {title} a classic of {genre}",
    "try {title} people who like {genre} love it",
]
RECOMMENDER_CHAT = [
    "it has a wonderful ending",
    "the cast is excellent in that one",
]

POLICY_LABELS = ["ask_preference", "chat", "recommend"]


def _titles(rng: random.Random, count: int) -> list[str]:
    picks = set()
    while len(picks) < count:
        name = f"{rng.choice(ADJECTIVES)} {rng.choice(NOUNS)}"
        picks.add(name.title())
    return sorted(picks)


def _movie_genre(titles: list[str], rng: random.Random) -> dict[str, str]:
    # Round-robin so every genre owns at least one movie (and thus a KG node).
    return {t: GENRES[i % len(GENRES)] for i, t in enumerate(titles)}


def generate_unified(out_dir: str | Path, seed: int = 7, n_dialogs: int = 12) -> dict:
    """Write a unified corpus directory; returns generation bookkeeping."""
    rng = random.Random(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    titles = _titles(rng, 18)
    genre_of = _movie_genre(titles, rng)
    genre_entities = sorted({f"genre:{g}" for g in genre_of.values()})

    entity_triples = sorted(
        [(t, "has_genre", f"genre:{genre_of[t]}") for t in titles]
        + [(a, "similar_to", b)
           for a in titles for b in titles
           if a < b and genre_of[a] == genre_of[b] and rng.random() < 0.4]
    )

    mood_words = ["funny", "scary", "sweet", "space", "gritty", "dusty"]
    word_set = set(GENRES) | set(mood_words) | {"movie", "film", "picture"}
    # Every word node must appear in a triple; the hub edge guarantees that.
    word_triples = sorted(
        {(w, "related_to", "movie") for w in word_set if w != "movie"}
        | {(rng.choice(mood_words), "related_to", rng.choice(GENRES)) for _ in range(14)}
    )

    surfaces = sorted(
        [(t.lower(), t) for t in titles] + [(g, f"genre:{g}") for g in GENRES]
    )

    counts = {"dialogs": 0, "utterances": 0, "rec_turns": 0, "policy_turns": 0}
    dialogs = []
    for d in range(n_dialogs):
        genre = rng.choice(GENRES)
        candidates = [t for t in titles if genre_of[t] == genre] or titles
        n_rounds = rng.randint(1, 3)
        messages = []

        opener = rng.choice(SEEKER_OPENERS).format(genre=genre)
        messages.append(_msg("seeker", opener, [], word_set))
        ask = rng.choice(RECOMMENDER_ASKS).format(genre=genre, genre2=rng.choice(GENRES))
        messages.append(_msg("recommender", ask, [], word_set, policy="ask_preference"))
        counts["policy_turns"] += 1

        for _ in range(n_rounds):
            follow = rng.choice(SEEKER_FOLLOWUPS).format(genre=rng.choice(GENRES))
            messages.append(_msg("seeker", follow, [], word_set))
            n_items = rng.choice([1, 1, 2])
            recs = rng.sample(candidates, k=min(n_items, len(candidates)))
            line = rng.choice(RECOMMENDER_RECS).format(title=recs[0].lower(), genre=genre)
            messages.append(_msg("recommender", line, recs, word_set, policy="recommend"))
            counts["rec_turns"] += 1
            counts["policy_turns"] += 1
            if rng.random() < 0.5:
                messages.append(_msg("seeker", rng.choice(SEEKER_FOLLOWUPS).format(genre=genre),
                                     [], word_set))
                messages.append(_msg("recommender", rng.choice(RECOMMENDER_CHAT), [], word_set,
                                     policy="chat"))
                counts["policy_turns"] += 1

        profile_items = rng.sample(titles, k=rng.randint(1, 3))
        dialogs.append(
            {
                "conv_id": f"toy-{d:03d}",
                "user_profile": {
                    "items": profile_items,
                    "sentences": [f"i like {genre} movies"],
                },
                "messages": messages,
            }
        )
        counts["dialogs"] += 1
        counts["utterances"] += len(messages)

    n_valid = max(1, n_dialogs // 6)
    n_test = max(1, n_dialogs // 6)
    split_at = n_dialogs - n_valid - n_test
    splits = {
        "train": dialogs[:split_at],
        "valid": dialogs[split_at : split_at + n_valid],
        "test": dialogs[split_at + n_valid :],
    }
    for split, recs in splits.items():
        _dump_jsonl(out_dir / f"{split}.jsonl", recs)
        counts[f"{split}_dialogs"] = len(recs)

    _dump_tsv(out_dir / "entity_kg.tsv", entity_triples)
    _dump_tsv(out_dir / "word_kg.tsv", word_triples)
    _dump_tsv(out_dir / "item2entity.tsv", [(t, t) for t in titles])
    _dump_tsv(out_dir / "surface_forms.tsv", surfaces)

    emb_rng = random.Random(seed + 1)
    emb_tokens = sorted(word_set | {w for t in titles for w in t.lower().split()})
    with open(out_dir / "embeddings.txt", "w", encoding="utf-8", newline="\n") as fh:
        for tok in emb_tokens:
            vec = [f"{emb_rng.gauss(0.0, 1.0):.6f}" for _ in range(8)]
            fh.write(tok + " " + " ".join(vec) + "\n")

    write_checksums(out_dir)
    return counts


def _msg(role: str, text: str, items: list[str], word_set: set[str], policy: str | None = None) -> dict:
    tokens = set(text.lower().split())
    genre_entities = [f"genre:{g}" for g in GENRES if g in tokens]
    return {
        "role": role,
        "text": text,
        "items": list(items),
        "entities": list(items) + genre_entities,
        "words": sorted(t for t in tokens if t in word_set),
        "policy": {"kind": "goal", "label": policy} if policy else None,
    }


def generate_raw(out_dir: str | Path, seed: int = 7, n_dialogs: int = 20) -> dict:
    """Write a raw mention-markup dataset for the 'redial' converter."""
    rng = random.Random(seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    titles = _titles(rng, 15)
    movie_ids = {str(100 + i): f"{t} ({rng.randint(1970, 2020)})" for i, t in enumerate(titles)}
    id_list = sorted(movie_ids)

    records = []
    for d in range(n_dialogs):
        seeker, recommender = 2 * d, 2 * d + 1
        genre = rng.choice(GENRES)
        messages = [
            {"senderWorkerId": seeker,
             "text": rng.choice(SEEKER_OPENERS).format(genre=genre)},
        ]
        mentions = {}
        for _ in range(rng.randint(1, 3)):
            mid = rng.choice(id_list)
            mentions[mid] = movie_ids[mid]
            messages.append(
                {"senderWorkerId": recommender,
                 "text": f"you could try @{mid} it is {genre}"}
            )
            messages.append(
                {"senderWorkerId": seeker,
                 "text": rng.choice(SEEKER_FOLLOWUPS).format(genre=rng.choice(GENRES))}
            )
        records.append(
            {
                "conversationId": 9000 + d,
                "initiatorWorkerId": seeker,
                "respondentWorkerId": recommender,
                "movieMentions": mentions,
                "messages": messages,
            }
        )

    cut = max(1, len(records) // 5)
    with open(out_dir / "train_data.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for rec in records[:-cut]:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(out_dir / "test_data.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for rec in records[-cut:]:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    return {"dialogs": len(records), "movies": len(titles)}
