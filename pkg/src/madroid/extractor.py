"""Ad content extraction from labelled capture traffic.

Load-time content (images, scripts) comes from ad-load responses. Click-time
content comes from redirect chains rebuilt offline from the recorded
capture, starting at URLs that ad-load responses bind to click events.
"""

from __future__ import annotations

import hashlib
import html
import json
import os
import re
import struct
from dataclasses import dataclass
from enum import Enum
from urllib.parse import urljoin, urlsplit

from .domains import registrable_domain
from .errors import ContractError, NotFoundError
from .hookmap import Label
from .traffic import CaptureLog, HttpMessage, is_absolute_url

DEFAULT_WINDOW_MS = 10_000
DEFAULT_CLICK_ATTRS = ("clickurl", "click_url", "clk", "landing", "curl")
DEFAULT_SCRIPT_PATTERNS = (r"click", r"clk", r"redirect", r"landing")

STORE_HOSTS = ("play.google.com",)
STORE_SCHEMES = ("market",)

_SUBRESOURCE_TYPES = ("image/", "text/css", "font/", "audio/", "video/")


class ArtifactKind(str, Enum):
    IMAGE = "Image"
    SCRIPT = "Script"
    REDIRECT_CHAIN = "RedirectChain"
    DOWNLOADED_APP = "DownloadedApp"
    STORE_DEEP_LINK = "StoreDeepLink"


class ClickOutcome(str, Enum):
    LANDING_PAGE = "LandingPage"
    STORE_DEEP_LINK = "StoreDeepLink"
    APK_DOWNLOAD = "ApkDownload"
    UNRESOLVED = "Unresolved"


@dataclass(frozen=True)
class Hop:
    message_id: str | None
    url: str
    status: int | None


@dataclass
class RedirectChain:
    hops: list
    outcome: ClickOutcome | None = None

    @property
    def urls(self):
        return [h.url for h in self.hops]

    @property
    def message_ids(self):
        return [h.message_id for h in self.hops if h.message_id is not None]

    def __len__(self):
        return len(self.hops)


@dataclass(frozen=True)
class AdArtifact:
    kind: ArtifactKind
    source_message_ids: tuple
    payload: bytes | tuple
    host: str
    # landing or download domain for click-time artifacts
    origin: str = ""

    def __post_init__(self):
        object.__setattr__(self, "source_message_ids", tuple(self.source_message_ids))
        if isinstance(self.payload, list):
            object.__setattr__(self, "payload", tuple(self.payload))
        if not self.payload:
            raise ContractError(f"{self.kind.value} artifact with empty payload")

    @property
    def payload_bytes(self) -> bytes:
        if isinstance(self.payload, bytes):
            return self.payload
        return "\n".join(self.payload).encode("utf-8")

    @property
    def content_hash(self):
        return hashlib.sha256(self.payload_bytes).hexdigest()


# -- APK sniffing -------------------------------------------------------------

_ZIP_LOCAL = b"PK\x03\x04"
_ZIP_EOCD = b"PK\x05\x06"
_ZIP_CENTRAL = b"PK\x01\x02"


def _central_names(body, eocd_at):
    if eocd_at + 22 > len(body):
        return None
    entries, cd_size, cd_offset = struct.unpack_from("<10xHII", body, eocd_at)
    if cd_offset + cd_size > eocd_at:
        return None
    names = []
    pos = cd_offset
    for _ in range(entries):
        if body[pos:pos + 4] != _ZIP_CENTRAL or pos + 46 > len(body):
            return None
        name_len, extra_len, comment_len = struct.unpack_from("<HHH", body, pos + 28)
        names.append(body[pos + 46:pos + 46 + name_len])
        pos += 46 + name_len + extra_len + comment_len
    return names


def is_apk(body) -> bool:
    """True for a ZIP whose central directory lists ``AndroidManifest.xml``.

    Every end-of-central-directory candidate is tried from the back, so
    trailing junk after an intact archive does not hide it.
    """
    if not body or len(body) < 4 or not body.startswith(_ZIP_LOCAL):
        return False
    at = len(body)
    while True:
        at = body.rfind(_ZIP_EOCD, 0, at)
        if at < 0:
            return False
        try:
            names = _central_names(body, at)
        except struct.error:
            names = None
        if names is not None:
            return b"AndroidManifest.xml" in names


# -- load-time artifacts -------------------------------------------------------

_IMAGE_MAGIC = (b"\x89PNG\r\n\x1a\n", b"\xff\xd8\xff", b"GIF87a", b"GIF89a", b"BM")
_SCRIPT_RE = re.compile(rb"<script\b([^>]*)>(.*?)(?:</script\s*>|\Z)", re.IGNORECASE | re.DOTALL)


def looks_like_image(body):
    if body[:4] == b"RIFF" and body[8:12] == b"WEBP":
        return True
    return body.startswith(_IMAGE_MAGIC)


def _looks_like_html(msg: HttpMessage):
    mt = msg.media_type
    if mt in ("text/html", "application/xhtml+xml"):
        return True
    head = (msg.body or b"")[:512].lstrip().lower()
    return head.startswith((b"<!doctype html", b"<html")) or b"<script" in (msg.body or b"")


def script_blocks(body: bytes):
    """Inline script bodies in document order; tolerates unclosed tags."""
    blocks = []
    for m in _SCRIPT_RE.finditer(body):
        content = m.group(2).strip()
        if content:
            blocks.append(content)
    return blocks


def extract_load_artifacts(capture: CaptureLog, labels, stats=None):
    """Images and scripts carried by ad-load responses.

    ``labels`` maps message id to TrafficLabel. Messages without content
    (impression pings, metadata) produce nothing. If ``stats`` is a dict
    it receives a ``bodyless`` counter.
    """
    artifacts = []
    bodyless = 0
    for msg in capture.messages:
        label = labels.get(msg.id)
        if label is None or label.label != Label.AD_LOAD:
            continue
        if not msg.body:
            bodyless += 1
            continue
        host = registrable_domain(msg.url)
        mt = msg.media_type
        if mt.startswith("image/") or looks_like_image(msg.body):
            artifacts.append(AdArtifact(ArtifactKind.IMAGE, (msg.id,), msg.body, host))
        elif "javascript" in mt or "ecmascript" in mt:
            if msg.body.strip():
                artifacts.append(AdArtifact(ArtifactKind.SCRIPT, (msg.id,), msg.body, host))
        elif _looks_like_html(msg):
            for block in script_blocks(msg.body):
                artifacts.append(AdArtifact(ArtifactKind.SCRIPT, (msg.id,), block, host))
    if stats is not None:
        stats["bodyless"] = stats.get("bodyless", 0) + bodyless
    return artifacts


# -- click bindings ------------------------------------------------------------

_HREF_RE = re.compile(r"""<a\b[^>]*?\bhref\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s>]+))""", re.IGNORECASE)
_URL_RE = re.compile(r"""(?:https?|market)://[^\s"'<>\\)]+""", re.IGNORECASE)


def _decode_text(body):
    if not body or b"\x00" in body[:1024] or looks_like_image(body):
        return None
    try:
        return body.decode("utf-8")
    except UnicodeDecodeError:
        return body.decode("latin-1")


def _json_bindings(node, names, out):
    if isinstance(node, dict):
        for key, value in node.items():
            if isinstance(value, str) and key.lower() in names:
                if is_absolute_url(value):
                    out.append(value)
            else:
                _json_bindings(value, names, out)
    elif isinstance(node, list):
        for item in node:
            _json_bindings(item, names, out)


def extract_click_bindings(msg: HttpMessage, attr_names=DEFAULT_CLICK_ATTRS, script_patterns=DEFAULT_SCRIPT_PATTERNS):
    """Candidate click URLs bound in an ad-load response body.

    Sources: anchor hrefs, configured attribute/key names, and absolute
    URLs inside script blocks that match one of ``script_patterns``.
    Deduplicated, in document order.
    """
    text = _decode_text(msg.body)
    if text is None:
        return []
    names = {n.lower() for n in attr_names}
    found = []

    stripped = text.lstrip()
    if stripped.startswith(("{", "[")):
        try:
            doc = json.loads(stripped)
        except ValueError:
            doc = None
        if doc is not None:
            _json_bindings(doc, names, found)
            return list(dict.fromkeys(found))

    hits = []
    for m in _HREF_RE.finditer(text):
        url = html.unescape(next(g for g in m.groups() if g is not None).strip())
        hits.append((m.start(), url))
    if names:
        alt = "|".join(re.escape(n) for n in sorted(names, key=len, reverse=True))
        attr_re = re.compile(
            r"""(?<![\w-])["']?(?:%s)["']?\s*[:=]\s*(?:"([^"]*)"|'([^']*)')""" % alt, re.IGNORECASE
        )
        for m in attr_re.finditer(text):
            url = html.unescape(m.group(1) if m.group(1) is not None else m.group(2))
            hits.append((m.start(), url.replace("\\/", "/")))
    patterns = [re.compile(p, re.IGNORECASE) for p in script_patterns]
    for sm in re.finditer(r"<script\b[^>]*>(.*?)(?:</script\s*>|\Z)", text, re.IGNORECASE | re.DOTALL):
        offset = sm.start(1)
        for um in _URL_RE.finditer(sm.group(1)):
            url = um.group(0).replace("\\/", "/")
            if any(p.search(url) for p in patterns):
                hits.append((offset + um.start(), url))

    hits.sort(key=lambda h: h[0])
    return list(dict.fromkeys(url for _, url in hits if is_absolute_url(url)))


# -- redirect chains -------------------------------------------------------------


def _strip_fragment(url):
    return url.split("#", 1)[0]


def is_store_url(url):
    parts = urlsplit(url)
    return parts.scheme.lower() in STORE_SCHEMES or (parts.hostname or "") in STORE_HOSTS


def _is_subresource(msg):
    mt = msg.media_type
    return mt.startswith(_SUBRESOURCE_TYPES) or "javascript" in mt


def _body_text(msg):
    if not msg.body:
        return ""
    return msg.body.decode("utf-8", errors="replace")


def _next_hop(messages, i, window_ms):
    cur = messages[i]
    later = messages[i + 1:]
    location = cur.response_header("location") if cur.status and 300 <= cur.status < 400 else None
    if location:
        target = _strip_fragment(urljoin(cur.url, location))
        for j, m in enumerate(later, i + 1):
            if _strip_fragment(m.url) == target:
                return j, None
        if is_store_url(target):
            return None, target
    for j, m in enumerate(later, i + 1):
        if m.referer and m.referer == cur.url and not _is_subresource(m):
            return j, None
    if cur.session_id and cur.body:
        text = _body_text(cur)
        for j, m in enumerate(later, i + 1):
            if m.timestamp - cur.timestamp > window_ms:
                break
            if m.session_id == cur.session_id and not _is_subresource(m) and m.url in text:
                return j, None
    return None, None


def reconstruct_redirect_chain(capture: CaptureLog, click_url, window_ms=DEFAULT_WINDOW_MS) -> RedirectChain:
    """Follow a click-bound URL through the capture to its outcome.

    Linkage rules, first match wins: a 3xx Location equal to a later
    message's URL; a later message whose Referer is the current URL; a
    later message in the same session, within ``window_ms``, whose URL
    appears in the current response body. A Location pointing at a store
    page that was never requested ends the chain with an unrecorded hop.
    """
    messages = capture.messages
    target = _strip_fragment(click_url)
    start = next((i for i, m in enumerate(messages) if _strip_fragment(m.url) == target), None)
    if start is None:
        raise NotFoundError(f"click URL not present in capture: {click_url}")

    i = start
    hops = [Hop(messages[i].id, messages[i].url, messages[i].status)]
    while True:
        j, store_target = _next_hop(messages, i, window_ms)
        if j is None:
            if store_target is not None:
                hops.append(Hop(None, store_target, None))
            break
        i = j
        hops.append(Hop(messages[i].id, messages[i].url, messages[i].status))
    chain = RedirectChain(hops)
    chain.outcome = classify_click_outcome(chain, capture)
    return chain


def _apk_hop(chain, by_id):
    for hop in chain.hops:
        msg = by_id.get(hop.message_id)
        if msg is not None and is_apk(msg.body):
            return msg
    return None


def classify_click_outcome(chain: RedirectChain, capture: CaptureLog) -> ClickOutcome:
    """Precedence: ApkDownload > StoreDeepLink > LandingPage > Unresolved."""
    by_id = capture.by_id()
    if _apk_hop(chain, by_id) is not None:
        return ClickOutcome.APK_DOWNLOAD
    if any(is_store_url(h.url) for h in chain.hops):
        return ClickOutcome.STORE_DEEP_LINK
    last = by_id.get(chain.hops[-1].message_id) if chain.hops else None
    if last is not None and last.status is not None and 200 <= last.status < 300 and _looks_like_html(last):
        return ClickOutcome.LANDING_PAGE
    return ClickOutcome.UNRESOLVED


def chain_artifacts(chain: RedirectChain, capture: CaptureLog, binding_message_id, ad_host):
    """Artifacts produced by one click chain."""
    by_id = capture.by_id()
    sources = [binding_message_id] + [m for m in chain.message_ids if m != binding_message_id]
    final_url = chain.hops[-1].url
    out = [
        AdArtifact(
            ArtifactKind.REDIRECT_CHAIN,
            sources,
            tuple(chain.urls),
            ad_host,
            origin=_origin(final_url),
        )
    ]
    if chain.outcome == ClickOutcome.APK_DOWNLOAD:
        apk = _apk_hop(chain, by_id)
        out.append(AdArtifact(ArtifactKind.DOWNLOADED_APP, [apk.id], apk.body, ad_host, origin=_origin(apk.url)))
    elif chain.outcome == ClickOutcome.STORE_DEEP_LINK:
        store = [h for h in chain.hops if is_store_url(h.url)]
        ids = [h.message_id for h in store if h.message_id is not None] or [sources[-1]]
        out.append(
            AdArtifact(ArtifactKind.STORE_DEEP_LINK, ids, tuple(h.url for h in store), ad_host, origin=_origin(store[0].url))
        )
    return out


def _origin(url):
    if is_store_url(url) and urlsplit(url).scheme.lower() in STORE_SCHEMES:
        return "play.google.com"
    try:
        return registrable_domain(url)
    except Exception:
        return ""


# -- artifact store ----------------------------------------------------------------

_EXT = {
    ArtifactKind.IMAGE: ".img",
    ArtifactKind.SCRIPT: ".js",
    ArtifactKind.REDIRECT_CHAIN: ".urls",
    ArtifactKind.DOWNLOADED_APP: ".apk",
    ArtifactKind.STORE_DEEP_LINK: ".urls",
}


def write_artifact_store(artifacts, out_dir):
    """Write hash-named payload files plus ``index.json``; returns the index."""
    os.makedirs(out_dir, exist_ok=True)
    index = []
    for art in artifacts:
        digest = art.content_hash
        name = digest + _EXT[art.kind]
        path = os.path.join(out_dir, name)
        if not os.path.exists(path):
            with open(path, "wb") as fh:
                fh.write(art.payload_bytes)
        index.append(
            {
                "kind": art.kind.value,
                "hash": digest,
                "file": name,
                "source_message_ids": list(art.source_message_ids),
                "host": art.host,
                "origin": art.origin,
            }
        )
    with open(os.path.join(out_dir, "index.json"), "w", encoding="utf-8") as fh:
        json.dump(index, fh, indent=2, sort_keys=True)
    return index

