"""Account manifests and per-account post collection.

Posts come from a :class:`PostSource` (live paged HTTP API or recorded
replay files), get capped per account, and are stamped with the group code
declared in the manifest.
"""
from __future__ import annotations

import csv
import json
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Mapping

DEFAULT_POST_CAP = 3200
BEARER_TOKEN_ENV = "HARVEST_BEARER_TOKEN"


class HarvestError(Exception):
    """Base class for harvesting failures."""


class ManifestError(HarvestError):
    """Manifest file is missing, malformed, or violates its invariants."""


class DuplicateHandleError(ManifestError):
    pass


class PostFormatError(HarvestError):
    """A posts/replay file line does not parse as a post record."""


class UnknownAccountError(HarvestError):
    """The source has no data for the requested handle."""


class RateLimitedError(HarvestError):
    """Transient rate-limit signal from a source; retryable."""


class RateLimitExceededError(HarvestError):
    """Rate-limit retries were exhausted for an account."""


class TransportError(HarvestError):
    """Non-retryable transport failure talking to a live source."""


@dataclass(frozen=True)
class AccountEntry:
    """One manifest row: a named account assigned to a group code."""

    library_name: str
    group: str
    handle: str


@dataclass(frozen=True)
class FetchPolicy:
    """Limits and retry behaviour for per-account collection."""

    max_posts_per_account: int = DEFAULT_POST_CAP
    page_size: int = 200
    max_retries: int = 3
    backoff_base: float = 1.0  # seconds; doubles per retry

    def __post_init__(self):
        if self.max_posts_per_account < 1:
            raise ValueError("max_posts_per_account must be >= 1")
        if self.page_size < 1:
            raise ValueError("page_size must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.backoff_base < 0:
            raise ValueError("backoff_base must be >= 0")


@dataclass(frozen=True)
class RawPost:
    """One harvested post."""

    id: str
    account: str
    group: str
    text: str
    created_at: datetime | None = None


def _parse_timestamp(value: str) -> datetime:
    # Accept ISO-8601 with either 'Z' or an explicit offset; naive means UTC.
    ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def post_from_json(line: str, *, lineno: int | None = None, path=None) -> RawPost:
    """Parse one line of a posts/replay file into a RawPost."""
    where = f"{path or '<string>'}:{lineno}" if lineno is not None else str(path or "<string>")
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise PostFormatError(f"{where}: invalid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise PostFormatError(f"{where}: post record must be a JSON object")
    try:
        post_id = str(obj["id"])
        account = str(obj["account"])
        group = str(obj["group"])
        text = str(obj["text"])
    except KeyError as exc:
        raise PostFormatError(f"{where}: missing field {exc.args[0]!r}") from None
    created = obj.get("created_at")
    created_at = None
    if created is not None:
        try:
            created_at = _parse_timestamp(str(created))
        except ValueError:
            raise PostFormatError(f"{where}: bad created_at {created!r}") from None
    return RawPost(id=post_id, account=account, group=group, text=text, created_at=created_at)


def post_to_json(post: RawPost) -> str:
    """Serialize a RawPost to one JSON line (fixed key order, UTF-8 text)."""
    obj = {"id": post.id, "account": post.account, "group": post.group, "text": post.text}
    if post.created_at is not None:
        obj["created_at"] = post.created_at.astimezone(timezone.utc).isoformat()
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"))


def read_posts(path) -> list[RawPost]:
    """Read a line-delimited posts file (blank lines ignored)."""
    posts = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            posts.append(post_from_json(line, lineno=lineno, path=path))
    return posts


def write_posts(posts: Iterable[RawPost], path) -> None:
    """Write posts as line-delimited JSON (LF endings)."""
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for post in posts:
            f.write(post_to_json(post))
            f.write("\n")


MANIFEST_HEADER = ["library_name", "group", "handle"]


def load_manifest(path) -> list[AccountEntry]:
    """Load the account manifest CSV, in file order.

    Raises ManifestError (with line number) on malformed rows and
    DuplicateHandleError when a handle repeats.
    """
    entries: list[AccountEntry] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None:
            raise ManifestError(f"{path}:1: empty manifest, expected header "
                                f"{','.join(MANIFEST_HEADER)}")
        if [h.strip() for h in header] != MANIFEST_HEADER:
            raise ManifestError(f"{path}:1: bad header {header!r}, expected "
                                f"{','.join(MANIFEST_HEADER)}")
        for row in reader:
            lineno = reader.line_num
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 3:
                raise ManifestError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            name, group, handle = (cell.strip() for cell in row)
            if not handle:
                raise ManifestError(f"{path}:{lineno}: empty handle")
            if not group:
                raise ManifestError(f"{path}:{lineno}: empty group")
            if "/" in handle:
                raise ManifestError(f"{path}:{lineno}: handle {handle!r} may not contain '/'")
            if handle in seen:
                raise DuplicateHandleError(f"{path}:{lineno}: duplicate handle {handle!r}")
            seen.add(handle)
            entries.append(AccountEntry(library_name=name, group=group, handle=handle))
    return entries


def filter_active(handle_post_counts: Mapping[str, int], min_posts: int) -> set[str]:
    """Handles whose total post count is at least min_posts (inclusive)."""
    for handle, count in handle_post_counts.items():
        if count < 0:
            raise ValueError(f"negative post count for {handle!r}")
    return {handle for handle, count in handle_post_counts.items() if count >= min_posts}


class PostSource(ABC):
    """A paged, replayable supplier of per-account posts.

    Pages are newest-first; fetching the same (handle, cursor) twice yields
    the same page.
    """

    @abstractmethod
    def fetch_page(self, handle: str, cursor: str | None,
                   limit: int) -> tuple[list[RawPost], str | None]:
        """Return (posts, next_cursor); next_cursor None at end of stream."""

    @abstractmethod
    def post_count(self, handle: str) -> int:
        """Total posts available for the handle (drives the activity filter)."""


class ReplaySource(PostSource):
    """Replays recorded posts from a directory of per-handle JSONL files.

    The file for handle H is ``<directory>/<H>.jsonl`` with any leading '@'
    stripped; lines are stored newest-first.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self._cache: dict[str, list[RawPost]] = {}

    def _load(self, handle: str) -> list[RawPost]:
        if handle not in self._cache:
            path = self.directory / f"{handle.lstrip('@')}.jsonl"
            if not path.is_file():
                raise UnknownAccountError(f"no replay fixture for {handle!r} at {path}")
            self._cache[handle] = read_posts(path)
        return self._cache[handle]

    def fetch_page(self, handle, cursor, limit):
        posts = self._load(handle)
        offset = int(cursor) if cursor is not None else 0
        page = posts[offset:offset + limit]
        end = offset + len(page)
        return page, (str(end) if end < len(posts) else None)

    def post_count(self, handle):
        return len(self._load(handle))


class HttpTimelineSource(PostSource):
    """Live paged timeline client (cursor-based, bearer-token auth).

    Wire contract:
      GET {base_url}/accounts/{handle}            -> {"post_count": N}
      GET {base_url}/accounts/{handle}/posts
          ?limit=N[&cursor=C]                     -> {"posts": [...],
                                                     "next_cursor": C | null}
    Each post object uses the posts-file field names (id, account, group,
    text, created_at). Auth is ``Authorization: Bearer $HARVEST_BEARER_TOKEN``
    from the environment, never a CLI flag. Status mapping: 404 unknown
    account, 429 rate limited (retryable), other >= 400 transport error.
    """

    def __init__(self, base_url: str, session=None, token: str | None = None,
                 timeout: float = 30.0):
        import os

        if token is None:
            token = os.environ.get(BEARER_TOKEN_ENV)
        if not token:
            raise TransportError(f"no bearer token: set {BEARER_TOKEN_ENV}")
        if session is None:
            import requests

            session = requests.Session()
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self._session = session
        self._headers = {"Authorization": f"Bearer {token}"}

    def _get(self, url: str, params: dict):
        try:
            resp = self._session.get(url, params=params, headers=self._headers,
                                     timeout=self.timeout)
        except Exception as exc:  # requests transport errors
            raise TransportError(f"GET {url}: {exc}") from exc
        if resp.status_code == 404:
            raise UnknownAccountError(f"GET {url}: account not found")
        if resp.status_code == 429:
            raise RateLimitedError(f"GET {url}: rate limited")
        if resp.status_code >= 400:
            raise TransportError(f"GET {url}: HTTP {resp.status_code}")
        return resp.json()

    def fetch_page(self, handle, cursor, limit):
        params = {"limit": limit}
        if cursor is not None:
            params["cursor"] = cursor
        payload = self._get(f"{self.base_url}/accounts/{handle}/posts", params)
        posts = [post_from_json(json.dumps(obj)) for obj in payload.get("posts", [])]
        return posts, payload.get("next_cursor")

    def post_count(self, handle):
        payload = self._get(f"{self.base_url}/accounts/{handle}", {})
        return int(payload["post_count"])


def fetch_account(entry: AccountEntry, policy: FetchPolicy,
                  source: PostSource) -> list[RawPost]:
    """Collect up to policy.max_posts_per_account posts for one account.

    Pages are pulled newest-first until the cap or end-of-stream; every post
    is stamped with the manifest handle and group. Rate-limited pages are
    retried with exponential backoff (backoff_base * 2**attempt), failing
    with RateLimitExceededError after max_retries retries.
    """
    posts: list[RawPost] = []
    cursor: str | None = None
    attempts = 0
    while True:
        try:
            page, next_cursor = source.fetch_page(entry.handle, cursor, policy.page_size)
        except RateLimitedError:
            if attempts >= policy.max_retries:
                raise RateLimitExceededError(
                    f"{entry.handle!r}: rate limited after {attempts} retries") from None
            time.sleep(policy.backoff_base * (2 ** attempts))
            attempts += 1
            continue
        attempts = 0
        for post in page:
            posts.append(replace(post, account=entry.handle, group=entry.group))
            if len(posts) >= policy.max_posts_per_account:
                return posts
        if next_cursor is None:
            return posts
        cursor = next_cursor


@dataclass
class HarvestResult:
    """Outcome of harvesting a manifest: posts plus per-account accounting."""

    posts: list[RawPost] = field(default_factory=list)
    fetched: dict[str, int] = field(default_factory=dict)
    skipped_inactive: list[str] = field(default_factory=list)
    failures: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def harvest_accounts(entries: Iterable[AccountEntry], policy: FetchPolicy,
                     source: PostSource, min_active: int = 0,
                     workers: int = 1) -> HarvestResult:
    """Harvest every manifest account, in manifest order.

    Accounts below min_active total posts (per source.post_count) are
    skipped before fetching. With workers > 1 accounts are fetched
    concurrently; results are still merged in manifest order.
    """
    entries = list(entries)
    result = HarvestResult()

    active: list[AccountEntry] = []
    counts: dict[str, int] = {}
    for entry in entries:
        try:
            counts[entry.handle] = source.post_count(entry.handle)
        except HarvestError as exc:
            result.failures[entry.handle] = str(exc)
    keep = filter_active(counts, min_active)
    for entry in entries:
        if entry.handle in result.failures:
            continue
        if entry.handle in keep:
            active.append(entry)
        else:
            result.skipped_inactive.append(entry.handle)

    fetched: dict[str, list[RawPost]] = {}

    def run(entry: AccountEntry):
        return fetch_account(entry, policy, source)

    if workers > 1 and len(active) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {entry.handle: pool.submit(run, entry) for entry in active}
        for entry in active:
            try:
                fetched[entry.handle] = futures[entry.handle].result()
            except HarvestError as exc:
                result.failures[entry.handle] = str(exc)
    else:
        for entry in active:
            try:
                fetched[entry.handle] = run(entry)
            except HarvestError as exc:
                result.failures[entry.handle] = str(exc)

    for entry in active:
        if entry.handle in fetched:
            batch = fetched[entry.handle]
            result.fetched[entry.handle] = len(batch)
            result.posts.extend(batch)
    return result
