"""Topic naming through a chat provider, with a deterministic offline fallback.

The prompt scripts are fixed templates: a few-shot script that frames the
task with five keyword-list exemplars, and a short naming request that
substitutes a topic's keyword list. Rendering is byte-stable; goldens pin
it. Naming never fails a run: any provider problem falls back to a name
derived from the topic's own keywords.
"""

from __future__ import annotations

import csv
import json
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import requests

from .topics import TopicModel

LOGGER = logging.getLogger(__name__)

ROLE_SYSTEM = "system"
ROLE_USER = "user"

FEW_SHOT_ROLE_LINE = (
    "You are an expert in science and technology information. "
    "You can predict promising technologies through papers and patents."
)
FEW_SHOT_TASK_LINE = (
    "I'll give you a list of keywords. You look at it and name it emerging technology. "
    "Let me show you an example."
)
FEW_SHOT_CHECK_LINE = "Do you understand how to do it?"

# Exemplar pairs: a 20-term keyword list and the technology it names.
FEW_SHOT_EXEMPLARS: tuple[tuple[tuple[str, ...], str], ...] = (
    (
        (
            "wind", "energy", "hydrogen", "electricity", "pv", "fuel", "power",
            "cost", "production", "turkey", "demand", "system", "generation",
            "storage", "sources", "ltd", "battery", "turbine", "speed", "diesel",
        ),
        "renewable energy storage and conversion technology utilizing hydrogen energy",
    ),
    (
        (
            "heat", "air", "temperature", "adsorption", "cooling", "absorption",
            "transfer", "water", "mass", "cop", "performance", "desiccant",
            "refrigeration", "degrees", "flow", "cycle", "system", "chiller",
            "exchanger", "ltd",
        ),
        "next-generation eco-friendly heating and cooling system core material technology",
    ),
    (
        (
            "co2", "reaction", "catalyst", "co", "catalysts", "reduction",
            "carbonate", "carbon", "activity", "cu", "dioxide", "tio2",
            "synthesis", "selectivity", "formation", "conversion", "complexes",
            "acid", "dmc", "carbonates",
        ),
        "carbon dioxide capture and storage technology",
    ),
    (
        (
            "vehicle", "tire", "road", "wheel", "control", "tyre", "steering",
            "driver", "braking", "vehicles", "friction", "controller", "model",
            "yaw", "stability", "slip", "brake", "angle", "force", "dynamics",
        ),
        "advanced autonomous vehicle technology",
    ),
    (
        (
            "fruit", "color", "vision", "imaging", "images", "image", "quality",
            "wavelengths", "fruits", "nm", "features", "processing", "shape",
            "meat", "machine", "samples", "food", "colour", "detection", "crop",
        ),
        "ai-based machine vision technology",
    ),
)

KEYWORD_LIST_PLACEHOLDER = "{KEYWORD_LIST}"
NAMING_LIST_LINE = "I'll show you the keyword list: " + KEYWORD_LIST_PLACEHOLDER + "."
NAMING_REQUEST_LINE = "Now, give me a list of 5 technology opportunities."


@dataclass(frozen=True)
class PromptScript:
    """Ordered chat messages, each a (role, text) pair."""

    messages: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("prompt script must not be empty")
        for role, _ in self.messages:
            if role not in (ROLE_SYSTEM, ROLE_USER):
                raise ValueError(f"unknown role {role!r}")

    def as_wire(self) -> list[dict[str, str]]:
        return [{"role": role, "content": text} for role, text in self.messages]


def _exemplar_block(keywords: Sequence[str], technology: str) -> str:
    return f"Keyword list: {', '.join(keywords)}\nRelated technology: {technology}"


def render_few_shot_prompt(per_line: bool = False) -> PromptScript:
    """The fixed few-shot script: role framing, five exemplars, comprehension check.

    Default structure folds the script into one system and one user message;
    per_line keeps every template line as its own message instead.
    """
    blocks = [FEW_SHOT_TASK_LINE]
    blocks.extend(_exemplar_block(kw, tech) for kw, tech in FEW_SHOT_EXEMPLARS)
    blocks.append(FEW_SHOT_CHECK_LINE)
    if per_line:
        messages = [(ROLE_SYSTEM, FEW_SHOT_ROLE_LINE)]
        messages.extend((ROLE_USER, block) for block in blocks)
        return PromptScript(tuple(messages))
    return PromptScript(
        (
            (ROLE_SYSTEM, FEW_SHOT_ROLE_LINE),
            (ROLE_USER, "\n\n".join(blocks)),
        )
    )


def render_naming_prompt(keywords: Sequence[str]) -> PromptScript:
    """The naming request with the comma-joined keyword list substituted in."""
    if not keywords:
        raise ValueError("keyword list must not be empty")
    line = NAMING_LIST_LINE.replace(KEYWORD_LIST_PLACEHOLDER, ", ".join(keywords))
    return PromptScript(((ROLE_USER, line + "\n\n" + NAMING_REQUEST_LINE),))


class ChatError(Exception):
    """Raised when the chat provider cannot return a usable answer."""


class HttpChatProvider:
    """Chat service speaking POST /chat.

    Request body {"messages": [{"role", "content"}, ...]}, response
    {"content": "..."}. Transient failures (connection errors, non-200)
    retry with exponential backoff, mirroring the embedding provider.
    """

    def __init__(
        self,
        base_url: str,
        max_attempts: int = 3,
        timeout: float = 60.0,
        backoff: float = 1.0,
        session: requests.Session | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.max_attempts = max_attempts
        self.timeout = timeout
        self.backoff = backoff
        self.session = session or requests.Session()

    def chat(self, messages: list[dict[str, str]]) -> str:
        url = f"{self.base_url}/chat"
        last_error = "no attempts made"
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                response = self.session.post(url, json={"messages": messages}, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = str(exc)
                LOGGER.warning("chat attempt %d failed: %s", attempt + 1, exc)
                continue
            if response.status_code != 200:
                last_error = f"HTTP {response.status_code}"
                LOGGER.warning("chat attempt %d got %s", attempt + 1, last_error)
                continue
            payload = response.json()
            content = payload.get("content")
            if not isinstance(content, str) or not content.strip():
                raise ChatError("provider returned no content")
            return content
        raise ChatError(f"chat request failed after {self.max_attempts} attempts: {last_error}")


_ENUMERATION_RE = re.compile(r"^\s*(?:\d+[.)]\s*|[-*•]\s*)")


def parse_candidates(content: str) -> list[str]:
    """Split a provider answer into candidate names, one per non-empty line.

    Leading enumeration marks (1., 2), -, *) are stripped so numbered lists
    and bullets both parse.
    """
    candidates = []
    for line in content.splitlines():
        cleaned = _ENUMERATION_RE.sub("", line).strip()
        if cleaned:
            candidates.append(cleaned)
    return candidates


def fallback_name(keywords: Sequence[str], topic: int) -> str:
    """Deterministic offline name: the top 3 keywords joined by '/'."""
    if not keywords:
        LOGGER.warning("topic %d has no keywords; using placeholder name", topic)
        return f"topic-{topic}"
    return "/".join(keywords[:3])


@dataclass(frozen=True)
class TopicNaming:
    """Chosen name for one topic plus the full provider exchange for audit."""

    topic: int
    name: str
    source: str  # "provider" or "fallback"
    candidates: tuple[str, ...] = ()
    request: tuple[dict, ...] = field(default=())
    response: str | None = None


def name_topics(model: TopicModel, chat=None) -> list[TopicNaming]:
    """Name every topic in the model.

    With a chat provider, the few-shot script primes each request and the
    first candidate in the answer becomes the name (all candidates are
    kept). Without one, or on any provider failure, the fallback name is
    used; no topic is ever left unnamed.
    """
    few_shot = render_few_shot_prompt()
    namings: list[TopicNaming] = []
    for topic in sorted(model.shares):
        keyword_terms = [term for term, _ in model.keywords.get(topic, ())]
        if chat is None:
            namings.append(TopicNaming(topic, fallback_name(keyword_terms, topic), "fallback"))
            continue
        try:
            if not keyword_terms:
                raise ChatError("topic has no keywords to prompt with")
            prompt = render_naming_prompt(keyword_terms)
            wire = few_shot.as_wire() + prompt.as_wire()
            content = chat.chat(wire)
            candidates = parse_candidates(content)
            if not candidates:
                raise ChatError("provider answer contained no candidates")
            namings.append(
                TopicNaming(
                    topic,
                    candidates[0],
                    "provider",
                    tuple(candidates),
                    tuple(wire),
                    content,
                )
            )
        except Exception as exc:
            LOGGER.warning("naming via provider failed for topic %d: %s", topic, exc)
            namings.append(TopicNaming(topic, fallback_name(keyword_terms, topic), "fallback"))
    return namings


def write_names_csv(namings: Sequence[TopicNaming], path: str | Path) -> None:
    """Name export contract: topic,name,source."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["topic", "name", "source"])
        for naming in namings:
            writer.writerow([naming.topic, naming.name, naming.source])


def read_names_csv(path: str | Path) -> dict[int, str]:
    with Path(path).open("r", encoding="utf-8", newline="") as handle:
        return {int(row["topic"]): row["name"] for row in csv.DictReader(handle)}


def write_transcripts(namings: Sequence[TopicNaming], path: str | Path) -> None:
    """Full provider exchanges as JSONL for audit."""
    file_path = Path(path)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with file_path.open("w", encoding="utf-8") as handle:
        for naming in namings:
            row = {
                "topic": naming.topic,
                "name": naming.name,
                "source": naming.source,
                "candidates": list(naming.candidates),
                "request": list(naming.request),
                "response": naming.response,
            }
            handle.write(json.dumps(row, ensure_ascii=False, sort_keys=True) + "\n")
