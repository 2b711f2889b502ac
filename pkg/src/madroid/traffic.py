"""Core records and parsers for capture logs, hook logs and view-tree dumps.

All three inputs are UTF-8 JSON. Capture and hook logs carry one object
per line; a view tree is a single nested document. Parsed structures are
frozen and may be shared between threads.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator
from urllib.parse import urlsplit

from .errors import EmptyCaptureError, InputError, StructureError

BODY_INLINE_CAP = 1 << 20

PAGE_ROLES = ("main", "exit", "other")

Headers = tuple[tuple[str, str], ...]


def url_host(url):
    """Return the lower-cased host of an absolute URL, or None."""
    try:
        parts = urlsplit(url)
        host = parts.hostname
    except ValueError:
        return None
    if not parts.scheme or not host:
        return None
    return host


def is_absolute_url(url):
    return isinstance(url, str) and url_host(url) is not None


@dataclass(frozen=True)
class HttpMessage:
    id: str
    session_id: str
    timestamp: int
    method: str
    url: str
    request_headers: Headers = ()
    response_headers: Headers = ()
    status: int | None = None
    mime: str | None = None
    body: bytes | None = None
    body_ref: str | None = None
    referer: str | None = None

    def __post_init__(self):
        if not is_absolute_url(self.url):
            raise InputError(f"message {self.id!r}: not an absolute URL: {self.url!r}")
        if not isinstance(self.timestamp, int) or isinstance(self.timestamp, bool) or self.timestamp <= 0:
            raise InputError(f"message {self.id!r}: timestamp must be a positive integer")
        if self.status is not None and not 100 <= self.status <= 599:
            raise InputError(f"message {self.id!r}: status {self.status} out of range")

    @property
    def host(self):
        return url_host(self.url)

    def response_header(self, name):
        """First response header value named `name` (case-insensitive)."""
        name = name.lower()
        for key, value in self.response_headers:
            if key.lower() == name:
                return value
        return None

    def request_header(self, name):
        name = name.lower()
        for key, value in self.request_headers:
            if key.lower() == name:
                return value
        return None

    @property
    def media_type(self):
        if not self.mime:
            return ""
        return self.mime.split(";", 1)[0].strip().lower()


@dataclass(frozen=True)
class CaptureLog:
    app_id: str
    messages: tuple[HttpMessage, ...]
    skipped: int = field(default=0, compare=False)

    def __post_init__(self):
        ordered = tuple(sorted(self.messages, key=lambda m: (m.timestamp, m.id)))
        object.__setattr__(self, "messages", ordered)
        ids = [m.id for m in ordered]
        if len(set(ids)) != len(ids):
            raise InputError("duplicate message ids in capture")

    def __len__(self):
        return len(self.messages)

    def __iter__(self):
        return iter(self.messages)

    def by_id(self):
        return {m.id: m for m in self.messages}

    def index_of(self, message_id):
        for i, m in enumerate(self.messages):
            if m.id == message_id:
                return i
        raise KeyError(message_id)


@dataclass(frozen=True)
class HookRecord:
    timestamp: int
    url: str
    stack: tuple[str, ...]
    thread: str = ""

    def __post_init__(self):
        if not self.stack:
            raise InputError("hook record with empty stack")
        if not is_absolute_url(self.url):
            raise InputError(f"hook record url is not absolute: {self.url!r}")


@dataclass(frozen=True)
class ViewNode:
    id: str
    class_name: str
    bounds: tuple[int, int, int, int]
    clickable: bool = False
    text: str | None = None
    children: tuple["ViewNode", ...] = ()

    def __post_init__(self):
        if len(self.bounds) != 4 or any(v < 0 for v in self.bounds):
            raise StructureError(f"node {self.id!r}: bounds must be four non-negative numbers")

    @property
    def is_leaf(self):
        return not self.children

    @property
    def area(self):
        return self.bounds[2] * self.bounds[3]

    def iter_preorder(self) -> Iterator["ViewNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


@dataclass(frozen=True)
class ViewTree:
    root: ViewNode
    page_role: str = "other"
    app_id: str = ""

    def __post_init__(self):
        if self.page_role not in PAGE_ROLES:
            raise StructureError(f"unknown page_role {self.page_role!r}")
        seen = set()
        for node in self.root.iter_preorder():
            if node.id in seen:
                raise StructureError(f"duplicate node id {node.id!r}")
            seen.add(node.id)

    def nodes(self):
        return list(self.root.iter_preorder())

    def leaves(self):
        return [n for n in self.root.iter_preorder() if n.is_leaf]

    def node(self, node_id):
        for n in self.root.iter_preorder():
            if n.id == node_id:
                return n
        raise KeyError(node_id)

    def __len__(self):
        return sum(1 for _ in self.root.iter_preorder())


# -- stream helpers ---------------------------------------------------------


def _lines(stream) -> Iterable[bytes]:
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(bytes(stream))
    elif isinstance(stream, str):
        stream = io.BytesIO(stream.encode("utf-8"))
    try:
        for line in stream:
            yield line
    except (OSError, ValueError) as exc:
        raise InputError(f"unreadable stream: {exc}") from exc


def _decode_line(raw):
    if isinstance(raw, str):
        text = raw
    else:
        text = raw.decode("utf-8")
    text = text.strip()
    if not text:
        raise ValueError("blank line")
    obj = json.loads(text)
    if not isinstance(obj, dict):
        raise ValueError("record is not an object")
    return obj


def _headers(value) -> Headers:
    if value is None:
        return ()
    if isinstance(value, dict):
        return tuple((str(k), str(v)) for k, v in value.items())
    return tuple((str(k), str(v)) for k, v in value)


def message_from_record(obj, blob_dir=None) -> HttpMessage:
    """Build one HttpMessage from a decoded capture line."""
    body = None
    body_ref = obj.get("body_ref")
    if obj.get("body_b64") is not None:
        body = base64.b64decode(obj["body_b64"], validate=True)
    elif body_ref is not None and blob_dir is not None:
        path = os.path.join(blob_dir, body_ref)
        with open(path, "rb") as fh:
            body = fh.read()
    status = obj.get("status")
    if status is not None and (not isinstance(status, int) or isinstance(status, bool)):
        raise ValueError("status must be an integer")
    ts = obj["ts_ms"]
    if not isinstance(ts, int) or isinstance(ts, bool):
        raise ValueError("ts_ms must be an integer")
    return HttpMessage(
        id=str(obj["id"]),
        session_id=str(obj.get("session_id") or ""),
        timestamp=ts,
        method=str(obj.get("method") or "GET"),
        url=obj["url"],
        request_headers=_headers(obj.get("req_headers")),
        response_headers=_headers(obj.get("resp_headers")),
        status=status,
        mime=obj.get("mime"),
        body=body,
        body_ref=body_ref,
        referer=obj.get("referer"),
    )


def parse_capture(stream, app_id="", blob_dir=None) -> CaptureLog:
    """Parse a line-delimited capture log.

    Malformed lines (bad JSON, missing fields, invalid URL, duplicate id)
    are skipped; the count is kept on ``CaptureLog.skipped``.
    """
    messages = []
    seen = set()
    skipped = 0
    for raw in _lines(stream):
        try:
            msg = message_from_record(_decode_line(raw), blob_dir)
        except (ValueError, KeyError, TypeError, InputError, OSError):
            skipped += 1
            continue
        if msg.id in seen:
            skipped += 1
            continue
        seen.add(msg.id)
        messages.append(msg)
    if not messages:
        raise EmptyCaptureError("capture contains no parseable message")
    return CaptureLog(app_id=app_id, messages=tuple(messages), skipped=skipped)


def load_capture(path, app_id=None) -> CaptureLog:
    path = os.fspath(path)
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise InputError(f"cannot open capture {path}: {exc}") from exc
    with fh:
        return parse_capture(fh, app_id=app_id or "", blob_dir=os.path.dirname(path))


def message_to_record(msg: HttpMessage, blob_dir=None, inline_cap=BODY_INLINE_CAP) -> dict:
    rec = {
        "id": msg.id,
        "session_id": msg.session_id,
        "ts_ms": msg.timestamp,
        "method": msg.method,
        "url": msg.url,
        "status": msg.status,
        "mime": msg.mime,
        "req_headers": [list(h) for h in msg.request_headers],
        "resp_headers": [list(h) for h in msg.response_headers],
        "referer": msg.referer,
    }
    if msg.body is not None:
        if len(msg.body) > inline_cap and blob_dir is not None:
            ref = hashlib.sha256(msg.body).hexdigest() + ".bin"
            with open(os.path.join(blob_dir, ref), "wb") as fh:
                fh.write(msg.body)
            rec["body_ref"] = ref
        else:
            rec["body_b64"] = base64.b64encode(msg.body).decode("ascii")
    elif msg.body_ref is not None:
        rec["body_ref"] = msg.body_ref
    return rec


def serialize_capture(log: CaptureLog, blob_dir=None, inline_cap=BODY_INLINE_CAP) -> bytes:
    out = io.StringIO()
    for msg in log.messages:
        rec = message_to_record(msg, blob_dir, inline_cap)
        out.write(json.dumps(rec, ensure_ascii=False, sort_keys=True))
        out.write("\n")
    return out.getvalue().encode("utf-8")


def parse_hook_log(stream) -> tuple[list[HookRecord], int]:
    """Parse a hook log; returns ``(records, skipped)`` in file order."""
    records = []
    skipped = 0
    for raw in _lines(stream):
        try:
            obj = _decode_line(raw)
            stack = obj["stack"]
            if not isinstance(stack, list) or not all(isinstance(f, str) for f in stack):
                raise ValueError("stack must be an array of strings")
            ts = obj.get("ts_ms", 0)
            if not isinstance(ts, int) or isinstance(ts, bool):
                raise ValueError("ts_ms must be an integer")
            records.append(
                HookRecord(timestamp=ts, url=obj["url"], stack=tuple(stack), thread=str(obj.get("thread", "")))
            )
        except (ValueError, KeyError, TypeError, InputError):
            skipped += 1
    return records, skipped


def load_hook_log(path):
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise InputError(f"cannot open hook log {path}: {exc}") from exc
    with fh:
        return parse_hook_log(fh)


def serialize_hook_log(records: Iterable[HookRecord]) -> bytes:
    lines = [
        json.dumps({"ts_ms": r.timestamp, "url": r.url, "thread": r.thread, "stack": list(r.stack)}, sort_keys=True)
        for r in records
    ]
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def _node_from_obj(obj, path_ids: set, seen_ids: set) -> ViewNode:
    if not isinstance(obj, dict):
        raise StructureError("view node must be an object")
    if id(obj) in path_ids:
        raise StructureError("cyclic reference in view tree")
    node_id = str(obj["id"])
    if node_id in seen_ids:
        raise StructureError(f"duplicate node id {node_id!r}")
    seen_ids.add(node_id)
    path_ids.add(id(obj))
    try:
        children = tuple(_node_from_obj(c, path_ids, seen_ids) for c in obj.get("children") or ())
    finally:
        path_ids.discard(id(obj))
    bounds = obj.get("bounds") or [0, 0, 0, 0]
    if len(bounds) != 4:
        raise StructureError(f"node {node_id!r}: bounds must have four values")
    return ViewNode(
        id=node_id,
        class_name=str(obj.get("class", "")),
        bounds=tuple(int(v) for v in bounds),
        clickable=bool(obj.get("clickable", False)),
        text=obj.get("text"),
        children=children,
    )


def view_tree_from_dict(doc) -> ViewTree:
    if not isinstance(doc, dict) or "root" not in doc:
        raise InputError("view tree document needs a 'root' object")
    try:
        root = _node_from_obj(doc["root"], set(), set())
    except (KeyError, TypeError, ValueError) as exc:
        raise StructureError(f"malformed view node: {exc}") from exc
    return ViewTree(root=root, page_role=doc.get("page_role") or "other", app_id=str(doc.get("app_id") or ""))


def parse_view_tree(stream) -> ViewTree:
    if isinstance(stream, (bytes, bytearray, str)):
        data = stream
    else:
        try:
            data = stream.read()
        except (OSError, ValueError) as exc:
            raise InputError(f"unreadable stream: {exc}") from exc
    try:
        doc = json.loads(data)
    except (ValueError, UnicodeDecodeError) as exc:
        raise InputError(f"view tree is not valid JSON: {exc}") from exc
    return view_tree_from_dict(doc)


def load_view_tree(path) -> ViewTree:
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise InputError(f"cannot open view tree {path}: {exc}") from exc
    with fh:
        return parse_view_tree(fh)


def node_to_dict(node: ViewNode) -> dict:
    return {
        "id": node.id,
        "class": node.class_name,
        "bounds": list(node.bounds),
        "clickable": node.clickable,
        "text": node.text,
        "children": [node_to_dict(c) for c in node.children],
    }


def view_tree_to_dict(tree: ViewTree) -> dict:
    return {"app_id": tree.app_id, "page_role": tree.page_role, "root": node_to_dict(tree.root)}
