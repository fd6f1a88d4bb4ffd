import pytest
from fastapi.testclient import TestClient

from convrec import config as cfg
from convrec.service import ServingSystem, SessionStore, create_app
from convrec.training import System


@pytest.fixture(scope="module")
def serving(bundle, tmp_path_factory):
    tree = cfg.merge_trees(
        cfg.load_config(None),
        {
            "dataset": {"name": "toy"},
            "task": {
                "rec": {"model": "popularity"},
                "conv": {"model": "transformer"},
                "policy": {"model": "pmi"},
            },
            "model": {"embedding_dim": 8, "hidden_dim": 8, "num_layers": 1,
                      "num_heads": 2, "max_gen_len": 6},
            "train": {"epochs": 1, "batch_size": 8, "seed": 13},
        },
    )
    system = System(tree, bundle)
    system.fit()
    return ServingSystem("toy-sys", system, description="toy fixture")


@pytest.fixture()
def client(serving, tmp_path):
    store = SessionStore({"toy-sys": serving}, sessions_dir=tmp_path / "sessions")
    return TestClient(create_app(store))


def create_session(client, items=(0, 1), system_id="toy-sys"):
    response = client.post(
        "/api/sessions",
        json={"system_id": system_id,
              "profile": {"items": list(items), "sentences": ["i like comedy movies"]}},
    )
    return response


def strip_times(turn):
    return {k: v for k, v in turn.items() if k != "created_at"}


def test_create_session_open_and_empty(client):
    response = create_session(client)
    assert response.status_code == 201
    session = response.json()["session"]
    assert session["status"] == "open"
    assert session["turns"] == []


def test_create_rejects_unknown_system(client):
    response = create_session(client, system_id="nope")
    assert response.status_code == 404
    assert response.json()["error"]["code"] == "unknown_system"


def test_create_rejects_unknown_profile_items(client):
    response = create_session(client, items=(0, 9999))
    assert response.status_code == 400
    assert 9999 in response.json()["error"]["details"]["unknown_items"]


def test_session_ids_unique(client):
    a = create_session(client).json()["session"]["session_id"]
    b = create_session(client).json()["session"]["session_id"]
    assert a != b


def test_first_turn_fully_populated(client, serving):
    sid = create_session(client).json()["session"]["session_id"]
    turn = client.post(f"/api/sessions/{sid}/messages",
                       json={"text": "hi i want a comedy movie"}).json()["turn"]
    assert turn["turn_id"] == 1
    assert len(turn["recommendations"]) == serving.top_k
    assert turn["policy_output"]["label"]
    assert turn["response"]
    assert turn["overrides_applied"] == {}


def test_empty_message_rejected(client):
    sid = create_session(client).json()["session"]["session_id"]
    response = client.post(f"/api/sessions/{sid}/messages", json={"text": "   "})
    assert response.status_code == 400


def test_identical_sessions_identical_turns(client):
    texts = ["hi i want a comedy movie", "something funnier please"]
    turns = []
    for _ in range(2):
        sid = create_session(client).json()["session"]["session_id"]
        turns.append([
            client.post(f"/api/sessions/{sid}/messages", json={"text": t}).json()["turn"]
            for t in texts
        ])
    first, second = turns
    assert [strip_times(t) for t in first] == [strip_times(t) for t in second]


def test_closed_session_rejects_messages(client):
    sid = create_session(client).json()["session"]["session_id"]
    closed = client.delete(f"/api/sessions/{sid}").json()["session"]
    assert closed["status"] == "closed"
    response = client.post(f"/api/sessions/{sid}/messages", json={"text": "hi"})
    assert response.status_code == 409
    again = client.delete(f"/api/sessions/{sid}")  # idempotent
    assert again.json()["session"]["status"] == "closed"


def test_get_state_after_two_messages(client):
    sid = create_session(client).json()["session"]["session_id"]
    for text in ("hi there", "another one"):
        client.post(f"/api/sessions/{sid}/messages", json={"text": text})
    session = client.get(f"/api/sessions/{sid}").json()["session"]
    assert [t["turn_id"] for t in session["turns"]] == [1, 2]


def test_unknown_session_404(client):
    assert client.get("/api/sessions/nope").status_code == 404


# ----------------------------------------------------------------- overrides

def test_override_identity_value_keeps_downstream(client):
    sid = create_session(client).json()["session"]["session_id"]
    turn = client.post(f"/api/sessions/{sid}/messages",
                       json={"text": "hi i want a comedy movie"}).json()["turn"]
    same_items = [r["item_id"] for r in turn["recommendations"]]
    revised = client.post(
        f"/api/sessions/{sid}/override",
        json={"turn_id": 1, "field": "recommendations", "value": same_items},
    ).json()["turn"]
    assert revised["overrides_applied"] == {"recommendations": same_items}
    assert revised["response"] == turn["response"]
    assert revised["policy_output"] == turn["policy_output"]
    assert [r["item_id"] for r in revised["recommendations"]] == same_items


def test_override_locality_upstream_untouched(client):
    sid = create_session(client).json()["session"]["session_id"]
    turn = client.post(f"/api/sessions/{sid}/messages",
                       json={"text": "hi i want a comedy movie"}).json()["turn"]
    revised = client.post(
        f"/api/sessions/{sid}/override",
        json={"turn_id": 1, "field": "recommendations", "value": [3, 1]},
    ).json()["turn"]
    assert revised["policy_output"] == turn["policy_output"]  # upstream intact
    assert revised["user_text"] == turn["user_text"]
    assert [r["item_id"] for r in revised["recommendations"]] == [3, 1]


def test_override_stale_turn_rejected(client):
    sid = create_session(client).json()["session"]["session_id"]
    client.post(f"/api/sessions/{sid}/messages", json={"text": "one"})
    client.post(f"/api/sessions/{sid}/messages", json={"text": "two"})
    response = client.post(
        f"/api/sessions/{sid}/override",
        json={"turn_id": 1, "field": "recommendations", "value": [0]},
    )
    assert response.status_code == 409
    assert response.json()["error"]["code"] == "stale_turn"


def test_override_validation_unknown_item(client):
    sid = create_session(client).json()["session"]["session_id"]
    client.post(f"/api/sessions/{sid}/messages", json={"text": "one"})
    response = client.post(
        f"/api/sessions/{sid}/override",
        json={"turn_id": 1, "field": "recommendations", "value": [123456]},
    )
    assert response.status_code == 400


def test_policy_override_by_label_name(client, bundle):
    sid = create_session(client).json()["session"]["session_id"]
    client.post(f"/api/sessions/{sid}/messages", json={"text": "one"})
    revised = client.post(
        f"/api/sessions/{sid}/override",
        json={"turn_id": 1, "field": "policy", "value": "chat"},
    ).json()["turn"]
    assert revised["policy_output"]["label"] == "chat"
    assert revised["overrides_applied"]["policy"] == bundle.policy_labels.index("chat")


def test_turn_ids_gapless_after_overrides(client):
    sid = create_session(client).json()["session"]["session_id"]
    client.post(f"/api/sessions/{sid}/messages", json={"text": "one"})
    client.post(f"/api/sessions/{sid}/override",
                json={"turn_id": 1, "field": "recommendations", "value": [2]})
    client.post(f"/api/sessions/{sid}/messages", json={"text": "two"})
    session = client.get(f"/api/sessions/{sid}").json()["session"]
    assert [t["turn_id"] for t in session["turns"]] == [1, 2]


# ------------------------------------------------------------ replay/journal

def test_replay_reproduces_turn_records(client):
    script = ["hi i want a comedy movie", "what about something scary", "thanks"]

    def run():
        sid = create_session(client).json()["session"]["session_id"]
        for text in script[:2]:
            client.post(f"/api/sessions/{sid}/messages", json={"text": text})
        client.post(f"/api/sessions/{sid}/override",
                    json={"turn_id": 2, "field": "recommendations", "value": [4, 2]})
        client.post(f"/api/sessions/{sid}/messages", json={"text": script[2]})
        return client.get(f"/api/sessions/{sid}").json()["session"]["turns"]

    first, second = run(), run()
    assert [strip_times(t) for t in first] == [strip_times(t) for t in second]


def test_journal_restores_sessions(serving, tmp_path):
    sessions_dir = tmp_path / "journal"
    store = SessionStore({"toy-sys": serving}, sessions_dir=sessions_dir)
    client = TestClient(create_app(store))
    sid = create_session(client).json()["session"]["session_id"]
    client.post(f"/api/sessions/{sid}/messages", json={"text": "hi i want a movie"})
    client.post(f"/api/sessions/{sid}/override",
                json={"turn_id": 1, "field": "recommendations", "value": [1]})
    before = client.get(f"/api/sessions/{sid}").json()["session"]

    revived_store = SessionStore({"toy-sys": serving}, sessions_dir=sessions_dir)
    revived = TestClient(create_app(revived_store))
    after = revived.get(f"/api/sessions/{sid}").json()["session"]
    assert after == before
