"""Fixture builders shared by the test modules."""

from __future__ import annotations

import io
import json
import os
import zipfile

import numpy as np
from PIL import Image

from madroid.traffic import CaptureLog, HookRecord, HttpMessage, serialize_capture, serialize_hook_log

MY1TRK = "http://my1trk.com/redirect/action/1InYjNywuJnNnYTwiKHNmf3BlZ2E_eQ_Pyi"
CLICK_URL = "http://cl.untildogtop.com/t/clk"
AD_HTML = (
    b'<html><body><div class="ad"><a href="http://cl.untildogtop.com/t/clk">'
    b"Protect your privacy</a></div></body></html>"
)

SDK_STACK = ("com.startapp.android.publish.adsCommon.Utils.send", "com.bbsoft.InternetPolyglot.Main.onCreate")
FLURRY_STACK = ("com.flurry.sdk.Agent.send", "com.bbsoft.InternetPolyglot.Main.onCreate")
WEBVIEW_STACK = ("android.webkit.WebViewClient.shouldOverrideUrlLoading", "java.lang.Thread.run")


def msg(mid, ts, url, status=200, mime=None, body=b"", session="s1", method="GET", headers=(), referer=None):
    return HttpMessage(
        id=str(mid),
        session_id=session,
        timestamp=ts,
        method=method,
        url=url,
        response_headers=tuple(headers),
        status=status,
        mime=mime,
        body=body,
        referer=referer,
    )


def table1_messages():
    """The seven requests of the worked example, with plausible bodies."""
    return [
        msg(1, 1_000, "http://info.static.startappservice.com/1.4/getadsmetadata", mime="application/json",
            body=b'{"adTypes":["banner"],"ttl":3600}', session="s1"),
        msg(2, 2_000, "http://data.flurry.com/aap.do", method="POST", mime="application/octet-stream",
            body=b"\x00\x01flurry", session="s2"),
        msg(3, 3_000, "http://req.startappservice.com/1.4/gethtmlad", mime="text/html", body=AD_HTML, session="s3"),
        msg(4, 3_500, "http://imp.startappservice.com/tracking/adImpression", status=204, session="s3"),
        msg(5, 5_000, CLICK_URL, status=302, headers=(("Location", MY1TRK),), session="s4"),
        msg(6, 5_100, MY1TRK, status=302, headers=(("Location", "http://www.spyoff.com/geo"),), session="s4"),
        msg(7, 5_200, "http://www.spyoff.com/geo", mime="text/html",
            body=b"<html><body>Your IP is exposed</body></html>", session="s4"),
    ]


def table1_hooks():
    urls = {m.id: m.url for m in table1_messages()}
    stacks = {"1": SDK_STACK, "2": FLURRY_STACK, "3": SDK_STACK, "4": SDK_STACK,
              "5": WEBVIEW_STACK, "6": WEBVIEW_STACK, "7": WEBVIEW_STACK}
    return [HookRecord(900 + int(k) * 1000, urls[k], stacks[k], "main") for k in sorted(urls)]


def write_bundle(root, messages, hooks, app_id="com.bbsoft.InternetPolyglot", trees=()):
    os.makedirs(root, exist_ok=True)
    capture = os.path.join(root, "capture.jsonl")
    hook_log = os.path.join(root, "hooks.jsonl")
    with open(capture, "wb") as fh:
        fh.write(serialize_capture(CaptureLog(app_id, tuple(messages)), blob_dir=root))
    with open(hook_log, "wb") as fh:
        fh.write(serialize_hook_log(hooks))
    tree_paths = []
    for i, tree in enumerate(trees):
        path = os.path.join(root, f"s{i}.tree.json")
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(tree, fh)
        tree_paths.append(path)
    return capture, hook_log, tree_paths


def write_table1_bundle(root):
    return write_bundle(root, table1_messages(), table1_hooks())


def make_apk(extra_entries=(), manifest=True) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        if manifest:
            zf.writestr("AndroidManifest.xml", b"\x03\x00\x08\x00manifest")
        zf.writestr("classes.dex", b"dex\n035\x00")
        for name, data in extra_entries:
            zf.writestr(name, data)
    return buf.getvalue()


def png_bytes(array) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(array, dtype=np.uint8)).save(buf, format="PNG")
    return buf.getvalue()


def tree_doc(role, nodes, root_bounds=(0, 0, 1080, 1920)):
    """View tree document with one root FrameLayout over ``nodes``."""
    return {
        "page_role": role,
        "root": {
            "id": "root",
            "class": "android.widget.FrameLayout",
            "bounds": list(root_bounds),
            "clickable": False,
            "children": nodes,
        },
    }


def leaf(nid, cls, bounds, clickable=True, text=None):
    node = {"id": nid, "class": cls, "bounds": list(bounds), "clickable": clickable, "children": []}
    if text is not None:
        node["text"] = text
    return node


def fig4_graph_doc():
    """Main page with a bottom banner, reaching an exit dialog and a settings page
    at equal depth; the settings page leads to a details page."""
    main = tree_doc("main", [
        leaf("title", "android.widget.TextView", (0, 0, 1080, 150)),
        leaf("play", "android.widget.Button", (340, 800, 400, 150)),
        leaf("settings", "android.widget.Button", (340, 1000, 400, 150)),
        leaf("banner", "android.webkit.WebView", (0, 1770, 1080, 150)),
        leaf("logo", "android.widget.ImageView", (440, 300, 200, 200), clickable=False),
    ])
    settings = tree_doc("other", [
        leaf("sound", "android.widget.Switch", (40, 200, 1000, 120)),
        leaf("promo", "android.widget.ViewFlipper", (40, 600, 1000, 400)),
        leaf("more", "android.widget.Button", (40, 1200, 1000, 120)),
    ])
    exit_page = tree_doc("exit", [
        leaf("yes", "android.widget.Button", (100, 1500, 400, 150)),
        leaf("no", "android.widget.Button", (580, 1500, 400, 150)),
        leaf("interstitial", "com.ads.sdk.AdWebView", (0, 0, 1080, 1824)),
        leaf("icon", "android.widget.ImageView", (40, 40, 100, 100)),
    ])
    details = tree_doc("other", [
        leaf("back", "android.widget.ImageButton", (0, 0, 120, 120)),
        leaf("text", "android.widget.TextView", (0, 200, 1080, 800)),
    ])
    return {
        "entry": "main",
        "states": [
            {"id": "main", "tree": main},
            {"id": "settings", "tree": settings},
            {"id": "exit", "tree": exit_page},
            {"id": "details", "tree": details},
        ],
        "transitions": [
            {"from": "main", "node": "settings", "to": "settings"},
            {"from": "main", "node": "play", "to": "exit"},
            {"from": "settings", "node": "more", "to": "details"},
            {"from": "details", "node": "back", "to": "main"},
        ],
    }


def hooks_for(messages, stacks):
    """One hook record per message; ``stacks`` maps message id to a stack,
    unlisted ids get a framework-only stack."""
    return [HookRecord(m.timestamp - 1, m.url, stacks.get(m.id, WEBVIEW_STACK), "main") for m in messages]


APK_URL = "http://dl.freeapps.test/files/cleaner.apk"
TRACK_URL = "http://trk.adnet.test/click?id=9"


def apk_messages(apk=None):
    """Ad page binding a click to a tracker that redirects to an APK download."""
    page = b'<html><a href="' + TRACK_URL.encode() + b'">Install now</a></html>'
    return [
        msg(1, 1_000, "http://req.startappservice.com/1.4/gethtmlad", mime="text/html", body=page, session="a"),
        msg(2, 2_000, TRACK_URL, status=302, headers=(("Location", APK_URL),), session="b"),
        msg(3, 2_100, APK_URL, mime="application/vnd.android.package-archive",
            body=make_apk() if apk is None else apk, session="b"),
    ]


def market_messages():
    """Ad page binding a click to a tracker that redirects into the app store."""
    page = b'<html><a href="' + TRACK_URL.encode() + b'">Get it</a></html>'
    return [
        msg(1, 1_000, "http://req.startappservice.com/1.4/gethtmlad", mime="text/html", body=page, session="a"),
        msg(2, 2_000, TRACK_URL, status=302, headers=(("Location", "market://details?id=com.cleaner"),), session="b"),
    ]
