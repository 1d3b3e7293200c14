"""Response generation and rubric scoring through a chat-completions endpoint.

A judge is anything with ``complete(system, user) -> str``. :class:`ChatClient`
talks to an OpenAI-compatible HTTP endpoint; :class:`MockJudge` answers the
same prompts deterministically in-process so pipelines run offline.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Protocol, Sequence

import httpx

from .errors import (
    DeliveryError,
    EmptyContextError,
    EmptyResponseError,
    GradeParseError,
    MissingFieldError,
)

log = logging.getLogger(__name__)

GENERATION_SYSTEM = "You are an AI assistant that uses reference documents to respond to a given query."

GENERATION_USER = (
    "Please respond to the following query according to the information provided in the "
    "reference documents.\n"
    "Be sure to only use what is in the reference documents to respond to the query and "
    "nothing else.\n"
    "\n"
    "Query:\n"
    "{query}\n"
    "\n"
    "Reference documents:\n"
    "{references}"
)

SCORING_SYSTEM = (
    "You are an AI assistant who compares a response to its ideal response. "
    "Given a query, a response, and an ideal response, determine how close the response "
    "is to the ideal response. Return only a single digit (1, 2, 3, 4, or 5) with no explanations."
)

RUBRIC = (
    "1 – The response includes substantially less of the relevant information than the ideal response.",
    "2 – The response includes about half of the relevant information present in the ideal response.",
    "3 – The response includes most of the relevant information present in the ideal response.",
    "4 – The response includes nearly all relevant information present in the ideal response.",
    "5 – The response includes all relevant information present in the ideal response.",
)

SCORING_USER = (
    "RUBRIC\n"
    + "\n".join(RUBRIC)
    + "\n\nQuery: {query}\nResponse: {response}\nIdeal Response: {ideal}"
)

_DOC_HEADER = "Document {i}:"
_DOC_SPLIT = re.compile(r"^Document (\d+):\n", re.MULTILINE)
_GRADE = re.compile(r"([1-5])\s*\.?")


def format_references(references: Sequence[str]) -> str:
    return "\n\n".join(f"{_DOC_HEADER.format(i=i)}\n{text}" for i, text in enumerate(references, 1))


def build_generation_prompt(query: str, references: Sequence[str]) -> tuple[str, str]:
    """System and user messages asking for an answer grounded in ``references``.

    References keep the given order (rank order for top-K answers), each under
    a ``Document i:`` line.
    """
    if not references:
        raise EmptyContextError("generation needs at least one reference document")
    user = GENERATION_USER.format(query=query, references=format_references(references))
    return GENERATION_SYSTEM, user


def build_scoring_prompt(query: str, response: str, ideal: str) -> tuple[str, str]:
    for name, value in (("query", query), ("response", response), ("ideal", ideal)):
        if not value or not value.strip():
            raise MissingFieldError(f"scoring prompt needs a non-empty {name}")
    return SCORING_SYSTEM, SCORING_USER.format(query=query, response=response, ideal=ideal)


def parse_grade(reply: str) -> int:
    """Accept a lone digit 1-5, optionally followed by a period."""
    m = _GRADE.fullmatch(reply.strip())
    if m is None:
        raise GradeParseError(reply)
    return int(m.group(1))


class Judge(Protocol):
    def complete(self, system: str, user: str) -> str: ...


@dataclass
class JudgeConfig:
    endpoint_url: str
    model_name: str
    api_key_env: str | None = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_attempts: int = 3
    backoff_base: float = 1.0
    max_in_flight: int = 4
    timeout: float = 60.0
    audit_path: str | Path | None = None

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")


class ChatClient:
    """OpenAI-compatible ``/chat/completions`` client with bounded retries.

    Transport errors, 429 and 5xx responses are retried with exponential
    backoff (``backoff_base * 2**attempt`` seconds); other HTTP errors fail
    immediately.
    """

    def __init__(
        self,
        cfg: JudgeConfig,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.cfg = cfg
        headers = {}
        key = os.environ.get(cfg.api_key_env, "") if cfg.api_key_env else ""
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(
            base_url=cfg.endpoint_url.rstrip("/"),
            headers=headers,
            timeout=cfg.timeout,
            transport=transport,
        )
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(cfg.max_in_flight)
        self._audit_lock = threading.Lock()

    def _audit(self, entry: dict) -> None:
        if self.cfg.audit_path is None:
            return
        line = json.dumps(entry, ensure_ascii=False, sort_keys=True)
        with self._audit_lock, open(self.cfg.audit_path, "a", encoding="utf-8") as fh:
            fh.write(line + "\n")

    def complete(self, system: str, user: str) -> str:
        payload = {
            "model": self.cfg.model_name,
            "temperature": self.cfg.temperature,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
        }
        last_error = "no attempt made"
        for attempt in range(self.cfg.max_attempts):
            if attempt:
                self._sleep(self.cfg.backoff_base * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._http.post("/chat/completions", json=payload)
            except httpx.TransportError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                log.warning("judge attempt %d/%d failed: %s", attempt + 1, self.cfg.max_attempts, last_error)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                log.warning("judge attempt %d/%d failed: %s", attempt + 1, self.cfg.max_attempts, last_error)
                continue
            if resp.status_code >= 400:
                raise DeliveryError(f"HTTP {resp.status_code}: {resp.text[:200]}", attempt + 1)
            try:
                text = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise DeliveryError(f"malformed completion body: {exc}", attempt + 1) from exc
            self._audit({"request": payload, "reply": text})
            return text or ""
        raise DeliveryError(
            f"judge unreachable after {self.cfg.max_attempts} attempts ({last_error})",
            self.cfg.max_attempts,
        )

    def close(self) -> None:
        self._http.close()


def generate_response(judge: Judge, query: str, references: Sequence[str]) -> str:
    """Answer ``query`` from ``references`` through ``judge``.

    The ideal answer is this call with every pool positive as references.
    """
    system, user = build_generation_prompt(query, references)
    text = judge.complete(system, user)
    if not text or not text.strip():
        raise EmptyResponseError("judge returned an empty completion")
    return text


def score_response(judge: Judge, query: str, response: str, ideal: str) -> int:
    system, user = build_scoring_prompt(query, response, ideal)
    return parse_grade(judge.complete(system, user))


# ---------------------------------------------------------------------------
# deterministic offline judge


def _round_half_up(x: float) -> int:
    return int(Decimal(repr(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


class MockJudge:
    """In-process judge answering the two prompt kinds without a model.

    Generation echoes the query and lists the references, one JSON-encoded
    reference per line. Scoring grades by reference overlap with the ideal
    answer: ``1 + round(4 * shared / len(ideal refs))``, half rounded up,
    clamped to 1..5. The seed is written into every generated answer.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)

    def _generate(self, user: str) -> str:
        head, _, refs_block = user.partition("\n\nReference documents:\n")
        query = head.split("\nQuery:\n", 1)[-1]
        parts = _DOC_SPLIT.split(refs_block)
        # split yields ["", "1", text1, "2", text2, ...]
        refs = [parts[i].removesuffix("\n\n") for i in range(2, len(parts), 2)]
        lines = [f"mock-{self.seed}: {json.dumps(query, ensure_ascii=False)}"]
        lines += ["- " + json.dumps(ref, ensure_ascii=False) for ref in refs]
        return "\n".join(lines)

    @staticmethod
    def _references(answer: str) -> set[str]:
        refs = set()
        for line in answer.split("\n"):
            if line.startswith("- "):
                try:
                    refs.add(json.loads(line[2:]))
                except json.JSONDecodeError:
                    continue
        return refs

    def _score(self, user: str) -> str:
        body = user.split("\nResponse: ", 1)[1]
        response, _, ideal = body.rpartition("\nIdeal Response: ")
        got, want = self._references(response), self._references(ideal)
        if not want:
            return "1"
        grade = 1 + _round_half_up(4 * len(got & want) / len(want))
        return str(min(5, max(1, grade)))

    def complete(self, system: str, user: str) -> str:
        if system == GENERATION_SYSTEM:
            return self._generate(user)
        if system == SCORING_SYSTEM:
            return self._score(user)
        raise ValueError("mock judge only answers the generation and scoring prompts")


def mock_judge(seed: int) -> MockJudge:
    return MockJudge(seed)
