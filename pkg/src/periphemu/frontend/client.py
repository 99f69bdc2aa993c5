"""LLM clients: the protocol, a transcript-replaying mock, and an HTTP client."""

from __future__ import annotations

import json
import os
import time
import urllib.request
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Optional, Protocol, Union

API_KEY_ENV = "PERIPHEMU_API_KEY"
API_URL_ENV = "PERIPHEMU_API_URL"
MODEL_ENV = "PERIPHEMU_MODEL"
DEFAULT_URL = "https://generativelanguage.googleapis.com/v1beta/openai/chat/completions"
DEFAULT_MODEL = "gemini-2.0-flash"


class LlmClient(Protocol):
    def complete(self, system: str, prompt: str, temperature: Optional[float] = None) -> str: ...


class ClientConfigError(RuntimeError):
    pass


class TranscriptMismatch(RuntimeError):
    pass


@dataclass
class Record:
    system: str
    prompt: str
    response: str
    stage: Optional[int] = None
    key: str = ""


def save_transcript(records: Iterable[Record], path: Union[str, Path]) -> None:
    doc = {"records": [asdict(r) for r in records]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_transcript(path: Union[str, Path]) -> list[Record]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [Record(**r) for r in doc["records"]]


class MockClient:
    """Replays recorded responses in order.

    With ``check_prompts`` the request must match the record exactly, so a replay
    that diverges from the recording fails loudly instead of drifting.
    """

    def __init__(self, records: Iterable[Record], check_prompts: bool = True):
        self.records = list(records)
        self.check_prompts = check_prompts
        self.pos = 0

    @classmethod
    def from_file(cls, path, check_prompts: bool = True) -> "MockClient":
        return cls(load_transcript(path), check_prompts)

    def complete(self, system: str, prompt: str, temperature: Optional[float] = None) -> str:
        if self.pos >= len(self.records):
            raise TranscriptMismatch(f"transcript exhausted after {self.pos} records")
        rec = self.records[self.pos]
        if self.check_prompts and (rec.system != system or rec.prompt != prompt):
            raise TranscriptMismatch(
                f"record {self.pos} (stage {rec.stage} {rec.key}) does not match the request:\n"
                f"expected prompt:\n{rec.prompt}\n---\ngot:\n{prompt}"
            )
        self.pos += 1
        return rec.response

    @property
    def exhausted(self) -> bool:
        return self.pos >= len(self.records)


class FunctionClient:
    """Answers with ``fn(system, prompt)``; used to script tests and build transcripts."""

    def __init__(self, fn: Callable[[str, str], str]):
        self.fn = fn

    def complete(self, system: str, prompt: str, temperature: Optional[float] = None) -> str:
        return self.fn(system, prompt)


class HttpClient:
    """Chat-completions client (OpenAI-compatible endpoint).

    Driver files given to :meth:`attach` are sent ahead of every prompt.  Requests
    are serialized and spaced by ``min_interval`` seconds.
    """

    def __init__(self, api_key: str, url: str = DEFAULT_URL, model: str = DEFAULT_MODEL,
                 min_interval: float = 4.0, timeout: float = 120.0):
        self.api_key = api_key
        self.url = url
        self.model = model
        self.min_interval = min_interval
        self.timeout = timeout
        self.files: dict[str, str] = {}
        self._last = 0.0

    @classmethod
    def from_env(cls) -> "HttpClient":
        key = os.environ.get(API_KEY_ENV)
        if not key:
            raise ClientConfigError(f"live mode needs the {API_KEY_ENV} environment variable")
        return cls(key, os.environ.get(API_URL_ENV, DEFAULT_URL), os.environ.get(MODEL_ENV, DEFAULT_MODEL))

    def attach(self, files: dict[str, str]) -> None:
        self.files = dict(files)

    def complete(self, system: str, prompt: str, temperature: Optional[float] = None) -> str:
        corpus = "\n\n".join(f"// file: {name}\n{text}" for name, text in self.files.items())
        messages = [{"role": "system", "content": system}]
        if corpus:
            messages.append({"role": "user", "content": "Driver code files:\n\n" + corpus})
        messages.append({"role": "user", "content": prompt})
        body = {"model": self.model, "messages": messages}
        if temperature is not None:
            body["temperature"] = temperature
        wait = self.min_interval - (time.monotonic() - self._last)
        if wait > 0:
            time.sleep(wait)
        req = urllib.request.Request(
            self.url,
            data=json.dumps(body).encode(),
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {self.api_key}"},
        )
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            doc = json.load(resp)
        self._last = time.monotonic()
        return doc["choices"][0]["message"]["content"]
