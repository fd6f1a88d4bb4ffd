"""Interaction sessions: live chat state, per-turn component records,
human corrections, and an append-only journal per session.

Every turn stores the outputs of each pipeline component so a user can
inspect what the system did and why. Only the latest turn of a session may
be corrected; a correction replaces the named intermediate output and
re-runs just the downstream components. Journals store finished records,
so restarting the service restores sessions without recomputation.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import SessionError
from ..training.system import System

OVERRIDE_FIELDS = ("policy", "recommendations")


@dataclass
class ServingSystem:
    system_id: str
    system: System
    description: str = ""

    @property
    def top_k(self) -> int:
        from .. import config as cfg
        return cfg.get(self.system.config, "serve.top_k")


@dataclass
class Session:
    session_id: str
    system_id: str
    profile: dict
    turns: list[dict] = field(default_factory=list)
    status: str = "open"
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "system_id": self.system_id,
            "profile": self.profile,
            "turns": list(self.turns),
            "status": self.status,
        }


class SessionStore:
    def __init__(self, registry: dict[str, ServingSystem], sessions_dir: str | Path | None = None):
        self.registry = registry
        self.sessions: dict[str, Session] = {}
        self.sessions_dir = Path(sessions_dir) if sessions_dir else None
        if self.sessions_dir:
            self.sessions_dir.mkdir(parents=True, exist_ok=True)
            self._restore()
        self._lock = threading.Lock()

    # ---------------------------------------------------------------- journal

    def _journal(self, session_id: str, event: dict) -> None:
        if not self.sessions_dir:
            return
        path = self.sessions_dir / f"{session_id}.jsonl"
        with open(path, "a", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")

    def _restore(self) -> None:
        for path in sorted(self.sessions_dir.glob("*.jsonl")):
            session = None
            for line in path.read_text("utf-8").splitlines():
                if not line.strip():
                    continue
                event = json.loads(line)
                kind = event.get("event")
                if kind == "create":
                    data = event["session"]
                    session = Session(
                        session_id=data["session_id"],
                        system_id=data["system_id"],
                        profile=data["profile"],
                    )
                elif session is None:
                    break
                elif kind == "turn":
                    session.turns.append(event["turn"])
                elif kind == "override":
                    if session.turns:
                        session.turns[-1] = event["turn"]
                elif kind == "close":
                    session.status = "closed"
            if session is not None:
                self.sessions[session.session_id] = session

    # ----------------------------------------------------------------- basics

    def _session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise SessionError(f"unknown session '{session_id}'", code="unknown_session")
        return session

    def serving(self, session: Session) -> ServingSystem:
        return self.registry[session.system_id]

    def create(self, profile: dict | None, system_id: str) -> dict:
        serving = self.registry.get(system_id)
        if serving is None:
            raise SessionError(
                f"unknown system '{system_id}'", code="unknown_system",
                details={"available": sorted(self.registry)},
            )
        profile = {
            "items": list((profile or {}).get("items", [])),
            "sentences": list((profile or {}).get("sentences", [])),
        }
        catalog_size = serving.system.bundle.n_items
        bad = [i for i in profile["items"]
               if not isinstance(i, int) or not 0 <= i < catalog_size]
        if bad:
            raise SessionError(
                f"profile items not in catalog: {bad}", code="validation",
                details={"unknown_items": bad},
            )
        session = Session(
            session_id=uuid.uuid4().hex,
            system_id=system_id,
            profile=profile,
        )
        with self._lock:
            self.sessions[session.session_id] = session
        self._journal(session.session_id, {"event": "create", "session": session.to_dict()})
        return session.to_dict()

    def get(self, session_id: str) -> dict:
        return self._session(session_id).to_dict()

    def close(self, session_id: str) -> dict:
        session = self._session(session_id)
        with session.lock:
            if session.status != "closed":
                session.status = "closed"
                self._journal(session_id, {"event": "close"})
        return session.to_dict()

    # ------------------------------------------------------------------ turns

    def _history_rows(self, session: Session, upto: int | None = None) -> list[dict]:
        """Dialog rows for the system pipeline from the stored turn records."""
        rows = []
        for turn in session.turns[: upto if upto is not None else len(session.turns)]:
            rows.append({"role": "seeker", "text": turn["user_text"]})
            policy = turn.get("policy_output") or {}
            rows.append(
                {
                    "role": "recommender",
                    "text": turn.get("response") or "",
                    "policy_label": policy.get("label_id"),
                }
            )
        return rows

    def _run_turn(self, session: Session, user_text: str, turn_index: int,
                  overrides: dict) -> dict:
        serving = self.serving(session)
        out = serving.system.interact_step(
            self._history_rows(session, upto=turn_index),
            user_text,
            profile=session.profile,
            rec_override=overrides.get("recommendations"),
            policy_override=overrides.get("policy"),
        )
        return {
            "turn_id": turn_index + 1,
            "user_text": user_text,
            "policy_output": out["policy"],
            "recommendations": out["recommendations"],
            "response": out["response"],
            "overrides_applied": dict(overrides),
            "created_at": time.time(),
        }

    def post_message(self, session_id: str, text: str) -> dict:
        session = self._session(session_id)
        with session.lock:
            if session.status == "closed":
                raise SessionError(
                    f"session '{session_id}' is closed", code="closed_session"
                )
            text = (text or "").strip()
            if not text:
                raise SessionError("message text is empty", code="validation")
            turn = self._run_turn(session, text, len(session.turns), {})
            session.turns.append(turn)
            self._journal(session_id, {"event": "turn", "turn": turn})
            return turn

    def apply_override(self, session_id: str, turn_id: int, fieldname: str, value) -> dict:
        session = self._session(session_id)
        with session.lock:
            if session.status == "closed":
                raise SessionError(
                    f"session '{session_id}' is closed", code="closed_session"
                )
            if not session.turns:
                raise SessionError("session has no turns yet", code="validation")
            latest = session.turns[-1]
            if turn_id != latest["turn_id"]:
                raise SessionError(
                    f"turn {turn_id} is not the latest turn "
                    f"({latest['turn_id']}); only the latest may be revised",
                    code="stale_turn",
                )
            if fieldname not in OVERRIDE_FIELDS:
                raise SessionError(
                    f"field must be one of {OVERRIDE_FIELDS}", code="validation"
                )
            serving = self.serving(session)
            value = self._validate_override(serving, fieldname, value)

            # A policy correction re-runs recommendation and response, so an
            # earlier recommendation override is superseded; a recommendation
            # correction keeps any policy override in force.
            overrides = dict(latest.get("overrides_applied", {}))
            if fieldname == "policy":
                overrides = {"policy": value}
            else:
                overrides["recommendations"] = value
            revised = self._run_turn(
                session, latest["user_text"], len(session.turns) - 1, overrides
            )
            session.turns[-1] = revised
            self._journal(
                session_id,
                {"event": "override", "field": fieldname, "value": value, "turn": revised},
            )
            return revised

    def _validate_override(self, serving: ServingSystem, fieldname: str, value):
        bundle = serving.system.bundle
        if fieldname == "recommendations":
            if not isinstance(value, list) or not value:
                raise SessionError(
                    "recommendations override must be a nonempty item-id list",
                    code="validation",
                )
            bad = [v for v in value if not isinstance(v, int) or not 0 <= v < bundle.n_items]
            if bad:
                raise SessionError(
                    f"unknown items in override: {bad}", code="validation",
                    details={"unknown_items": bad},
                )
            return [int(v) for v in value]
        labels = bundle.policy_labels
        if isinstance(value, str):
            if value not in labels:
                raise SessionError(
                    f"unknown policy label '{value}'", code="validation",
                    details={"labels": labels},
                )
            return labels.index(value)
        if not isinstance(value, int) or not 0 <= value < len(labels):
            raise SessionError(
                f"policy label id {value} outside the {len(labels)}-label set",
                code="validation",
            )
        return int(value)
