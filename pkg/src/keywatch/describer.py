"""Frame description generation.

A provider turns one frame image plus a fixed prompt into a text
description. Two providers are shipped: an HTTP client for any
OpenAI-compatible vision chat endpoint, and an in-process stub for tests
and offline runs. A content-addressed read-through cache sits in front of
either one so repeated runs never re-bill the endpoint.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx
from PIL import Image, UnidentifiedImageError

from .dataset import FrameRecord
from .errors import (
    AllFailed,
    EmptyResponse,
    ImageReadError,
    KeywatchError,
    ProviderRejected,
    ProviderUnreachable,
)

DEFAULT_PROMPT = (
    "You are a surveillance monitor for urban safety. "
    "Describe the activities and objects present in this scene."
)

_MIME_BY_FORMAT = {"JPEG": "image/jpeg", "PNG": "image/png", "TIFF": "image/tiff"}


def prompt_fingerprint(prompt: str) -> int:
    """Stable 64-bit content hash of a prompt string."""
    digest = hashlib.blake2b(prompt.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


@dataclass(frozen=True)
class ProviderConfig:
    """Connection and prompting settings for a description provider."""

    endpoint_url: str = ""
    model_id: str = "stub"
    prompt: str = DEFAULT_PROMPT
    timeout: float = 60.0
    max_retries: int = 3
    max_concurrency: int = 4
    api_key: str | None = None

    @property
    def prompt_hash(self) -> int:
        return prompt_fingerprint(self.prompt)


@dataclass(frozen=True)
class DescriptionRecord:
    """The text a provider produced for one frame."""

    frame_id: str
    text: str
    model_id: str
    prompt_hash: int
    created_at: str
    meta: tuple[tuple[str, str], ...] = ()


def load_image(path: str | Path) -> tuple[bytes, str]:
    """Read an image file and return (bytes, mime type).

    The bytes must decode as JPEG, PNG, or TIFF.
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageReadError(path, str(exc)) from exc
    try:
        with Image.open(io.BytesIO(data)) as img:
            fmt = img.format
    except UnidentifiedImageError as exc:
        raise ImageReadError(path, "not a decodable image") from exc
    mime = _MIME_BY_FORMAT.get(fmt or "")
    if mime is None:
        raise ImageReadError(path, f"unsupported image format {fmt!r}")
    return data, mime


class Provider(Protocol):
    """Anything that can describe a frame image."""

    request_count: int

    def describe(
        self, frame: FrameRecord, image: bytes, mime: str, config: ProviderConfig
    ) -> tuple[str, dict[str, str]]:
        """Return (description text, response metadata)."""
        ...


class HttpChatProvider:
    """Client for an OpenAI-compatible `/v1/chat/completions` vision endpoint.

    Transient failures (connection errors and 5xx responses) are retried
    with exponential backoff starting at `backoff_base` seconds and
    doubling; 4xx responses are surfaced immediately as ProviderRejected.
    """

    def __init__(
        self,
        backoff_base: float = 1.0,
        sleep: Callable[[float], None] = time.sleep,
        client: httpx.Client | None = None,
    ):
        self.backoff_base = backoff_base
        self._sleep = sleep
        self._client = client
        self._lock = threading.Lock()
        self.request_count = 0

    def _post(self, url: str, payload: dict, headers: dict, timeout: float) -> httpx.Response:
        with self._lock:
            self.request_count += 1
        if self._client is not None:
            return self._client.post(url, json=payload, headers=headers, timeout=timeout)
        return httpx.post(url, json=payload, headers=headers, timeout=timeout)

    def describe(
        self, frame: FrameRecord, image: bytes, mime: str, config: ProviderConfig
    ) -> tuple[str, dict[str, str]]:
        url = config.endpoint_url.rstrip("/") + "/v1/chat/completions"
        payload = {
            "model": config.model_id,
            "messages": [
                {
                    "role": "user",
                    "content": [
                        {"type": "text", "text": config.prompt},
                        {
                            "type": "image_url",
                            "image_url": {
                                "url": f"data:{mime};base64,"
                                + base64.b64encode(image).decode("ascii")
                            },
                        },
                    ],
                }
            ],
        }
        headers = {}
        if config.api_key:
            headers["Authorization"] = f"Bearer {config.api_key}"

        attempts = config.max_retries + 1
        last_error = "no attempts made"
        for attempt in range(attempts):
            if attempt > 0:
                self._sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                response = self._post(url, payload, headers, config.timeout)
            except httpx.HTTPError as exc:
                last_error = f"{type(exc).__name__}: {exc}"
                continue
            if 400 <= response.status_code < 500:
                raise ProviderRejected(response.status_code, response.text)
            if response.status_code != 200:
                last_error = f"HTTP {response.status_code}"
                continue
            return self._parse(response, frame.frame_id)
        raise ProviderUnreachable(attempts, last_error)

    @staticmethod
    def _parse(response: httpx.Response, frame_id: str) -> tuple[str, dict[str, str]]:
        try:
            body = response.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, LookupError, TypeError):
            raise ProviderRejected(response.status_code, response.text) from None
        if isinstance(content, list):  # some servers return content parts
            content = " ".join(
                part.get("text", "") for part in content if isinstance(part, dict)
            )
        if not isinstance(content, str) or not content.strip():
            raise EmptyResponse(frame_id)
        meta = {}
        for key in ("model", "system_fingerprint"):
            if isinstance(body.get(key), str):
                meta[key] = body[key]
        return content, meta


class StubProvider:
    """Deterministic in-process provider keyed by frame_id.

    `latency` may map frame_id to a sleep in seconds, for exercising the
    concurrency path.
    """

    def __init__(
        self,
        texts: Mapping[str, str],
        latency: Mapping[str, float] | None = None,
    ):
        self.texts = dict(texts)
        self.latency = dict(latency or {})
        self._lock = threading.Lock()
        self.request_count = 0

    def describe(
        self, frame: FrameRecord, image: bytes, mime: str, config: ProviderConfig
    ) -> tuple[str, dict[str, str]]:
        with self._lock:
            self.request_count += 1
        delay = self.latency.get(frame.frame_id, 0.0)
        if delay:
            time.sleep(delay)
        text = self.texts.get(frame.frame_id, "")
        if not text.strip():
            raise EmptyResponse(frame.frame_id)
        return text, {}


class DescriptionCache:
    """Directory of description records addressed by content hash.

    The key covers the frame image bytes, the model id, and the prompt
    hash, so changing any of them is a cache miss. Writes go through a
    temp file plus rename and are therefore atomic per entry.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    @staticmethod
    def key(image_digest: str, model_id: str, prompt_hash: int) -> str:
        material = f"{image_digest}\n{model_id}\n{prompt_hash:016x}"
        return hashlib.sha256(material.encode("utf-8")).hexdigest()

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> dict | None:
        path = self._path(key)
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            return None

    def put(self, key: str, payload: dict) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(payload, fh, sort_keys=True)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


@dataclass
class BatchResult:
    """Successful records (in input order) plus per-frame failures."""

    records: list[DescriptionRecord]
    errors: list[tuple[str, KeywatchError]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Describer:
    """Read-through describing front end: cache first, provider on miss."""

    def __init__(
        self,
        config: ProviderConfig,
        provider: Provider | None = None,
        cache: DescriptionCache | None = None,
    ):
        self.config = config
        self.provider = provider if provider is not None else HttpChatProvider()
        self.cache = cache

    def describe_frame(self, frame: FrameRecord) -> DescriptionRecord:
        image, mime = load_image(frame.path)
        digest = hashlib.sha256(image).hexdigest()
        key = DescriptionCache.key(digest, self.config.model_id, self.config.prompt_hash)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return DescriptionRecord(
                    frame_id=frame.frame_id,
                    text=hit["text"],
                    model_id=hit["model_id"],
                    prompt_hash=int(hit["prompt_hash"]),
                    created_at=hit["created_at"],
                    meta=tuple(sorted(hit.get("meta", {}).items())),
                )
        text, meta = self.provider.describe(frame, image, mime, self.config)
        if not text.strip():
            raise EmptyResponse(frame.frame_id)
        record = DescriptionRecord(
            frame_id=frame.frame_id,
            text=text,
            model_id=self.config.model_id,
            prompt_hash=self.config.prompt_hash,
            created_at=_utcnow(),
            meta=tuple(sorted(meta.items())),
        )
        if self.cache is not None:
            self.cache.put(
                key,
                {
                    "text": record.text,
                    "model_id": record.model_id,
                    "prompt_hash": record.prompt_hash,
                    "created_at": record.created_at,
                    "meta": dict(record.meta),
                },
            )
        return record

    def batch_describe(self, frames: list[FrameRecord]) -> BatchResult:
        """Describe frames with at most max_concurrency requests in flight.

        Output order matches input order. Per-frame failures are collected
        rather than raised; AllFailed is raised only when nothing succeeded.
        """
        if not frames:
            return BatchResult(records=[])
        workers = max(1, self.config.max_concurrency)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(self.describe_frame, frame) for frame in frames]
        records: list[DescriptionRecord] = []
        errors: list[tuple[str, KeywatchError]] = []
        for frame, future in zip(frames, futures):
            try:
                records.append(future.result())
            except KeywatchError as exc:
                errors.append((frame.frame_id, exc))
        if not records:
            raise AllFailed(len(frames), first=errors[0][1])
        return BatchResult(records=records, errors=errors)


# --- description store ----------------------------------------------------


def save_description_store(records: list[DescriptionRecord], path: str | Path) -> None:
    """Write records as JSON lines, sorted for stable output."""
    rows = sorted(records, key=lambda r: (r.frame_id, r.model_id, r.prompt_hash))
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in rows:
            payload = {
                "frame_id": r.frame_id,
                "text": r.text,
                "model_id": r.model_id,
                "prompt_hash": r.prompt_hash,
                "created_at": r.created_at,
            }
            if r.meta:
                payload["meta"] = dict(r.meta)
            fh.write(json.dumps(payload, sort_keys=True) + "\n")


def load_description_store(path: str | Path) -> list[DescriptionRecord]:
    records = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = json.loads(line)
            records.append(
                DescriptionRecord(
                    frame_id=row["frame_id"],
                    text=row["text"],
                    model_id=row["model_id"],
                    prompt_hash=int(row["prompt_hash"]),
                    created_at=row["created_at"],
                    meta=tuple(sorted(row.get("meta", {}).items())),
                )
            )
    return records
