"""Single choke-point for language-model and embedding calls.

Three modes:

* ``live``     -- chat-completions-style JSON over HTTP.
* ``replay``   -- responses served from a fixture directory, keyed by
                  (purpose_tag, digest of messages). A miss is an error,
                  never a silent fallback.
* ``scripted`` -- responses produced by deterministic callables registered
                  per purpose tag. Used by the simulation harness and tests;
                  behaves like replay (hermetic, reproducible), without a
                  file per call.

Embeddings default to a seeded feature-hashing embedder so cosine ranking
works offline. No other module performs network calls.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PURPOSE_TAGS = (
    "elicitation",
    "dedup-judge",
    "story-chain-step",
    "context-derivation",
    "ideology-judge",
    "experience-judge",
)

ROLES = ("system", "user", "assistant")


class GatewayError(Exception):
    pass


class FixtureMissError(GatewayError):
    def __init__(self, purpose_tag: str, digest: str):
        super().__init__(f"no fixture for purpose_tag={purpose_tag} digest={digest}")
        self.purpose_tag = purpose_tag
        self.digest = digest


class UpstreamUnavailableError(GatewayError):
    pass


class BudgetExceededError(GatewayError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple
    purpose_tag: str
    temperature: float = 0.0
    max_tokens: int = 1024
    session_id: str | None = None

    def __post_init__(self):
        if not self.messages:
            raise GatewayError("messages must be nonempty")
        if self.messages[0]["role"] != "system":
            raise GatewayError("first message must have role 'system'")
        for m in self.messages:
            if m["role"] not in ROLES:
                raise GatewayError(f"unknown role {m['role']!r}")
        if self.purpose_tag not in PURPOSE_TAGS:
            raise GatewayError(f"unknown purpose_tag {self.purpose_tag!r}")
        if self.temperature < 0:
            raise GatewayError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise GatewayError("max_tokens must be positive")


def chat_request(purpose_tag: str, system: str, user: str, *,
                 session_id: str | None = None, temperature: float = 0.0) -> ChatRequest:
    return ChatRequest(
        messages=(
            {"role": "system", "content": system},
            {"role": "user", "content": user},
        ),
        purpose_tag=purpose_tag,
        session_id=session_id,
        temperature=temperature,
    )


def request_digest(messages) -> str:
    canon = json.dumps(
        [{"role": m["role"], "content": m["content"]} for m in messages],
        sort_keys=True, ensure_ascii=True, separators=(",", ":"),
    )
    return hashlib.sha256(canon.encode()).hexdigest()


def estimate_tokens(text: str) -> int:
    # Crude chars/4 heuristic; good enough for budget enforcement.
    return max(1, (len(text) + 3) // 4)


@dataclass
class GatewayConfig:
    mode: str = "scripted"
    fixture_dir: str | None = None
    endpoint: str | None = None
    api_key_env: str = "MORALGRAPH_API_KEY"
    model: str = "gpt-4"
    retries: int = 3
    timeout: float = 30.0
    backoff: float = 0.5
    token_budget: int = 35_000
    embed_dim: int = 256
    embed_seed: int = 0
    max_parallel: int = 8


class LLMGateway:
    def __init__(self, config: GatewayConfig | None = None,
                 scripted: dict | None = None):
        self.config = config or GatewayConfig()
        if self.config.mode not in ("live", "replay", "scripted"):
            raise GatewayError(f"unknown gateway mode {self.config.mode!r}")
        self._scripted = dict(scripted or {})
        self._fixtures: dict[tuple[str, str], str] = {}
        self._budget_used: dict[str, int] = {}
        self._embed_cache: dict[str, np.ndarray] = {}
        self.call_log: list[dict] = []
        if self.config.mode == "replay":
            if not self.config.fixture_dir:
                raise GatewayError("replay mode requires a fixture directory")
            self._load_fixtures(Path(self.config.fixture_dir))

    # --- fixtures ---

    def _load_fixtures(self, root: Path):
        for path in sorted(root.rglob("*.json")):
            doc = json.loads(path.read_text())
            self._fixtures[(doc["purpose_tag"], doc["request_digest"])] = doc["response"]

    @staticmethod
    def write_fixture(fixture_dir, purpose_tag: str, messages, response: str) -> Path:
        """Author a replay fixture for the given messages."""
        digest = request_digest(messages)
        root = Path(fixture_dir) / purpose_tag
        root.mkdir(parents=True, exist_ok=True)
        path = root / f"{digest[:24]}.json"
        path.write_text(json.dumps(
            {"purpose_tag": purpose_tag, "request_digest": digest, "response": response},
            indent=2, sort_keys=True))
        return path

    def register_script(self, purpose_tag: str, fn):
        self._scripted[purpose_tag] = fn

    # --- chat ---

    def complete_chat(self, req: ChatRequest) -> str:
        self._charge_budget(req, sum(estimate_tokens(m["content"]) for m in req.messages))
        if self.config.mode == "replay":
            reply = self._replay(req)
        elif self.config.mode == "scripted":
            reply = self._run_script(req)
        else:
            reply = self._call_live(req)
        self._charge_budget(req, estimate_tokens(reply))
        self.call_log.append({"purpose_tag": req.purpose_tag,
                              "digest": request_digest(req.messages),
                              "session_id": req.session_id})
        return reply

    def _charge_budget(self, req: ChatRequest, tokens: int):
        if req.session_id is None:
            return
        used = self._budget_used.get(req.session_id, 0) + tokens
        self._budget_used[req.session_id] = used
        if used > self.config.token_budget:
            raise BudgetExceededError(
                f"session {req.session_id} exceeded token budget "
                f"({used} > {self.config.token_budget})")

    def budget_used(self, session_id: str) -> int:
        return self._budget_used.get(session_id, 0)

    def _replay(self, req: ChatRequest) -> str:
        digest = request_digest(req.messages)
        key = (req.purpose_tag, digest)
        if key not in self._fixtures:
            raise FixtureMissError(req.purpose_tag, digest)
        return self._fixtures[key]

    def _run_script(self, req: ChatRequest) -> str:
        fn = self._scripted.get(req.purpose_tag)
        if fn is None:
            raise FixtureMissError(req.purpose_tag, request_digest(req.messages))
        return fn(req)

    def _call_live(self, req: ChatRequest) -> str:
        import httpx

        if not self.config.endpoint:
            raise GatewayError("live mode requires an endpoint URL")
        headers = {}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": self.config.model,
            "messages": [dict(m) for m in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        last_error = None
        for attempt in range(self.config.retries + 1):
            try:
                resp = httpx.post(self.config.endpoint, json=body,
                                  headers=headers, timeout=self.config.timeout)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except Exception as exc:  # noqa: BLE001 - retried, then surfaced
                last_error = exc
                if attempt < self.config.retries:
                    time.sleep(self.config.backoff * (2 ** attempt))
        raise UpstreamUnavailableError(
            f"upstream unavailable after {self.config.retries} retries: {last_error}")

    # --- embeddings ---

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise GatewayError("cannot embed empty text")
        cached = self._embed_cache.get(text)
        if cached is not None:
            return cached
        vec = feature_hash_embed(text, self.config.embed_dim, self.config.embed_seed)
        self._embed_cache[text] = vec
        return vec


def feature_hash_embed(text: str, dim: int = 256, seed: int = 0) -> np.ndarray:
    """Seeded feature-hashing embedder over word unigrams and bigrams."""
    import re as _re

    tokens = _re.findall(r"[a-z0-9']+", text.lower())
    feats = list(tokens)
    feats.extend(f"{a}_{b}" for a, b in zip(tokens, tokens[1:]))
    vec = np.zeros(dim)
    salt = str(seed).encode()
    for feat in feats:
        h = hashlib.blake2b(feat.encode(), key=salt, digest_size=8).digest()
        idx = int.from_bytes(h[:4], "big") % dim
        sign = 1.0 if h[4] % 2 == 0 else -1.0
        vec[idx] += sign
    norm = np.linalg.norm(vec)
    if norm == 0:
        # Text with no word features; fall back to a single hashed bucket.
        h = hashlib.blake2b(text.encode(), key=salt, digest_size=8).digest()
        vec[int.from_bytes(h[:4], "big") % dim] = 1.0
        norm = 1.0
    return vec / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))
