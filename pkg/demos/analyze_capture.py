"""Analyze a small recorded session: an SDK loads an ad, the user clicks it,
and a tracker redirects through to a landing page."""

import os
import sys
import tempfile

from madroid.clients import mock_clients
from madroid.pipeline import run_pipeline
from madroid.report import render_report_table
from madroid.traffic import CaptureLog, HookRecord, HttpMessage, serialize_capture, serialize_hook_log

SDK = ("com.startapp.android.publish.adsCommon.Utils.send", "com.example.app.Main.onCreate")
WEBVIEW = ("android.webkit.WebViewClient.shouldOverrideUrlLoading", "java.lang.Thread.run")
CLICK = "http://cl.untildogtop.com/t/clk"


def message(mid, ts, url, session, status=200, mime=None, body=b"", location=None):
    headers = (("Location", location),) if location else ()
    return HttpMessage(id=str(mid), session_id=session, timestamp=ts, method="GET", url=url,
                       response_headers=headers, status=status, mime=mime, body=body, referer=None)


messages = [
    message(1, 1000, "http://req.startappservice.com/1.4/gethtmlad", "s1", mime="text/html",
            body=b'<html><a href="' + CLICK.encode() + b'">Protect your privacy</a></html>'),
    message(2, 1500, "http://api.weather.test/today", "s2", mime="application/json", body=b"{}"),
    message(3, 4000, CLICK, "s3", status=302, location="http://www.spyoff.com/geo"),
    message(4, 4100, "http://www.spyoff.com/geo", "s3", mime="text/html", body=b"<html>Your IP is exposed</html>"),
]
hooks = [HookRecord(m.timestamp - 1, m.url, SDK if m.id == "1" else WEBVIEW, "main") for m in messages]

with tempfile.TemporaryDirectory() as tmp:
    capture = os.path.join(tmp, "capture.jsonl")
    hook_log = os.path.join(tmp, "hooks.jsonl")
    with open(capture, "wb") as fh:
        fh.write(serialize_capture(CaptureLog("com.example.app", tuple(messages)), blob_dir=tmp))
    with open(hook_log, "wb") as fh:
        fh.write(serialize_hook_log(hooks))
    report = run_pipeline(capture, hook_log, clients=mock_clients(), out_dir=os.path.join(tmp, "out"))
    for mid, label in sorted(report.traffic["labels"].items()):
        print(f"message {mid}: {label['label']}")
    sys.stdout.write(render_report_table(report))
