import json

import pytest

from boolsearch.chat import API_KEY_ENV_VAR, ChatClient, request_hash
from boolsearch.errors import ChatError

from _server import ScriptedServer


def chat_response(content):
    return {"choices": [{"message": {"content": content}}]}


class TestConfiguration:
    def test_unknown_mode(self):
        with pytest.raises(ChatError, match="mode"):
            ChatClient(endpoint="http://x", mode="offline")

    def test_live_requires_endpoint(self):
        with pytest.raises(ChatError, match="endpoint"):
            ChatClient(mode="live")

    def test_replay_requires_cassette(self):
        with pytest.raises(ChatError, match="cassette"):
            ChatClient(mode="replay")

    def test_missing_credential_fails_before_any_request(self, monkeypatch):
        monkeypatch.delenv(API_KEY_ENV_VAR, raising=False)
        # unroutable endpoint: if a request were attempted this would hang
        client = ChatClient(endpoint="http://192.0.2.1/v1", model="m",
                            timeout=0.1, max_attempts=1)
        with pytest.raises(ChatError, match=API_KEY_ENV_VAR):
            client.complete("sys", "user")


class TestReplay:
    def test_replay_is_byte_identical_without_network(self, tmp_path):
        messages = [
            {"role": "system", "content": "sys"},
            {"role": "user", "content": "user"},
        ]
        cassette = tmp_path / "c.jsonl"
        cassette.write_text(json.dumps({
            "request_hash": request_hash("m", messages),
            "response": "recorded reply",
        }) + "\n")
        client = ChatClient(model="m", mode="replay", cassette_path=cassette)
        assert client.complete("sys", "user") == "recorded reply"
        assert client.complete("sys", "user") == "recorded reply"

    def test_unknown_request_rejected(self, tmp_path):
        cassette = tmp_path / "c.jsonl"
        cassette.write_text("")
        client = ChatClient(model="m", mode="replay", cassette_path=cassette)
        with pytest.raises(ChatError, match="no recorded response"):
            client.complete("sys", "never seen")


class TestTransport:
    def test_success_and_payload_shape(self, monkeypatch):
        monkeypatch.setenv(API_KEY_ENV_VAR, "key")

        def respond(path, body, headers):
            assert body["model"] == "m"
            assert [m["role"] for m in body["messages"]] == ["system", "user"]
            return 200, chat_response("hello")

        with ScriptedServer(respond) as server:
            client = ChatClient(endpoint=server.url, model="m")
            assert client.complete("sys", "user") == "hello"
            auth = server.requests[0]["headers"]["Authorization"]
        assert auth == "Bearer key"

    def test_rate_limit_retried_then_surfaced(self, monkeypatch):
        monkeypatch.setenv(API_KEY_ENV_VAR, "key")

        def always_429(path, body, headers):
            return 429, {"error": "slow down"}

        with ScriptedServer(always_429) as server:
            client = ChatClient(endpoint=server.url, model="m", backoff_base=0.01)
            with pytest.raises(ChatError, match="429"):
                client.complete("sys", "user")
            assert len(server.requests) == 3

    def test_server_error_retried_then_recovers(self, monkeypatch):
        monkeypatch.setenv(API_KEY_ENV_VAR, "key")
        state = {"calls": 0}

        def flaky(path, body, headers):
            state["calls"] += 1
            if state["calls"] == 1:
                return 500, {}
            return 200, chat_response("ok")

        with ScriptedServer(flaky) as server:
            client = ChatClient(endpoint=server.url, model="m", backoff_base=0.01)
            assert client.complete("sys", "user") == "ok"

    def test_malformed_payload_rejected(self, monkeypatch):
        monkeypatch.setenv(API_KEY_ENV_VAR, "key")

        def respond(path, body, headers):
            return 200, {"unexpected": True}

        with ScriptedServer(respond) as server:
            client = ChatClient(endpoint=server.url, model="m")
            with pytest.raises(ChatError, match="malformed"):
                client.complete("sys", "user")


class TestRecord:
    def test_record_then_replay(self, tmp_path, monkeypatch):
        monkeypatch.setenv(API_KEY_ENV_VAR, "key")
        cassette = tmp_path / "c.jsonl"

        def respond(path, body, headers):
            return 200, chat_response("fresh")

        with ScriptedServer(respond) as server:
            recorder = ChatClient(endpoint=server.url, model="m", mode="record",
                                  cassette_path=cassette)
            assert recorder.complete("sys", "user") == "fresh"
        replayer = ChatClient(model="m", mode="replay", cassette_path=cassette)
        assert replayer.complete("sys", "user") == "fresh"
