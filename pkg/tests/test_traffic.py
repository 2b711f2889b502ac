import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import table1_hooks, table1_messages
from madroid.errors import EmptyCaptureError, InputError, StructureError
from madroid.traffic import (
    CaptureLog,
    HookRecord,
    HttpMessage,
    load_capture,
    message_to_record,
    parse_capture,
    parse_hook_log,
    parse_view_tree,
    serialize_capture,
    serialize_hook_log,
    view_tree_from_dict,
    view_tree_to_dict,
)


def _capture_bytes(messages):
    return serialize_capture(CaptureLog("app", tuple(messages)))


def test_table1_capture_parses_seven_messages():
    log = parse_capture(_capture_bytes(table1_messages()), app_id="com.bbsoft.InternetPolyglot")
    assert len(log) == 7
    assert log.messages[0].host == "info.static.startappservice.com"
    assert log.messages[-1].host == "www.spyoff.com"
    assert log.skipped == 0


def test_empty_stream_is_empty_capture():
    with pytest.raises(EmptyCaptureError):
        parse_capture(b"")


def test_malformed_url_line_is_skipped():
    lines = _capture_bytes(table1_messages()[:3]).decode().splitlines()
    bad = json.loads(lines[0])
    bad["id"] = "x"
    bad["url"] = "not a url"
    text = "\n".join(lines + [json.dumps(bad)]) + "\n"
    log = parse_capture(text)
    assert len(log) == 3
    assert log.skipped == 1


def test_duplicate_id_is_skipped():
    lines = _capture_bytes(table1_messages()[:2]).decode().splitlines()
    log = parse_capture("\n".join(lines + [lines[0]]))
    assert (len(log), log.skipped) == (2, 1)


def test_unreadable_stream_is_input_error(tmp_path):
    with pytest.raises(InputError):
        load_capture(tmp_path / "missing.jsonl")


class _Broken:
    def __iter__(self):
        raise OSError("device gone")


def test_broken_stream_is_input_error():
    with pytest.raises(InputError):
        parse_capture(_Broken())


def test_message_invariants():
    with pytest.raises(InputError):
        HttpMessage("1", "s", 10, "GET", "/relative")
    with pytest.raises(InputError):
        HttpMessage("1", "s", 0, "GET", "http://a.test/")
    with pytest.raises(InputError):
        HttpMessage("1", "s", 10, "GET", "http://a.test/", status=99)
    assert HttpMessage("1", "s", 10, "GET", "http://a.test/", status=None).status is None


def test_header_lookup_is_case_insensitive():
    m = HttpMessage("1", "s", 10, "GET", "http://a.test/", response_headers=(("Location", "http://b.test/"),))
    assert m.response_header("location") == "http://b.test/"


def test_large_bodies_go_to_blob_files(tmp_path):
    body = b"z" * 2048
    log = CaptureLog("app", (HttpMessage("1", "s", 10, "GET", "http://a.test/", status=200, body=body),))
    data = serialize_capture(log, blob_dir=str(tmp_path), inline_cap=1024)
    rec = json.loads(data)
    assert "body_b64" not in rec and rec["body_ref"].endswith(".bin")
    back = parse_capture(data, blob_dir=str(tmp_path))
    assert back.messages[0].body == body


def test_hook_log_examples():
    line = json.dumps({
        "ts_ms": 5,
        "url": "http://req.startappservice.com/1.4/gethtmlad",
        "thread": "main",
        "stack": ["com.startapp.sdk.Net.send", "com.game.Main.onCreate"],
    })
    records, skipped = parse_hook_log(line + "\n")
    assert skipped == 0 and len(records) == 1
    assert records[0].stack[0] == "com.startapp.sdk.Net.send"

    empty = json.dumps({"ts_ms": 5, "url": "http://a.test/", "stack": []})
    records, skipped = parse_hook_log(empty)
    assert records == [] and skipped == 1


def test_hook_log_preserves_order_of_100_lines():
    recs = [HookRecord(i + 1, f"http://h{i}.test/p", (f"com.lib{i}.x.A.b",), "t") for i in range(100)]
    random.Random(3).shuffle(recs)
    parsed, skipped = parse_hook_log(serialize_hook_log(recs))
    assert skipped == 0
    assert parsed == recs


def test_hook_roundtrip_table1():
    parsed, _ = parse_hook_log(serialize_hook_log(table1_hooks()))
    assert parsed == table1_hooks()


FIG4_TREE = {
    "app_id": "com.example",
    "page_role": "main",
    "root": {
        "id": "n0", "class": "android.widget.LinearLayout", "bounds": [0, 0, 1080, 1920], "clickable": False,
        "children": [
            {"id": "n1", "class": "android.widget.FrameLayout", "bounds": [0, 0, 1080, 1700], "children": [
                {"id": "n3", "class": "android.widget.TextView", "bounds": [0, 0, 1080, 200], "clickable": True},
                {"id": "n4", "class": "android.widget.Button", "bounds": [0, 300, 540, 200], "clickable": True},
            ]},
            {"id": "n2", "class": "android.widget.FrameLayout", "bounds": [0, 1700, 1080, 220], "children": [
                {"id": "n5", "class": "android.webkit.WebView", "bounds": [0, 1720, 1080, 200], "clickable": True},
            ]},
        ],
    },
}


def test_fig4_tree_has_six_nodes():
    tree = parse_view_tree(json.dumps(FIG4_TREE))
    assert len(tree) == 6
    assert [n.id for n in tree.leaves()] == ["n3", "n4", "n5"]
    assert tree.page_role == "main"


def test_single_root_tree():
    tree = parse_view_tree(json.dumps({"root": {"id": "r", "class": "X", "bounds": [0, 0, 1, 1]}}))
    assert len(tree) == 1 and tree.page_role == "other"


def test_duplicate_node_id_is_structure_error():
    doc = json.loads(json.dumps(FIG4_TREE))
    doc["root"]["children"][1]["children"][0]["id"] = "n3"
    with pytest.raises(StructureError):
        parse_view_tree(json.dumps(doc))


def test_cyclic_tree_is_structure_error():
    node = {"id": "a", "class": "X", "bounds": [0, 0, 1, 1], "children": []}
    node["children"].append(node)
    with pytest.raises(StructureError):
        view_tree_from_dict({"root": node})


def test_view_tree_roundtrip():
    tree = view_tree_from_dict(FIG4_TREE)
    assert view_tree_from_dict(view_tree_to_dict(tree)) == tree


# -- properties ----------------------------------------------------------------------

_hosts = st.sampled_from(["a.test", "b.example.com", "cdn.ads.test", "10.0.0.1"])
_messages = st.builds(
    lambda i, ts, host, status, body, sess: HttpMessage(
        f"m{i}", sess, ts, "GET", f"http://{host}/p{i}", status=status, mime="text/plain", body=body
    ),
    st.integers(0, 10_000),
    st.integers(1, 10**12),
    _hosts,
    st.one_of(st.none(), st.integers(100, 599)),
    st.one_of(st.none(), st.binary(max_size=64)),
    st.sampled_from(["s1", "s2", ""]),
)


def _unique(msgs):
    seen = {}
    for m in msgs:
        seen.setdefault(m.id, m)
    return list(seen.values())


@given(st.lists(_messages, min_size=1, max_size=25).map(_unique))
def test_capture_roundtrip(msgs):
    log = CaptureLog("app", tuple(msgs))
    assert parse_capture(serialize_capture(log), app_id="app") == log


@given(st.lists(_messages, min_size=1, max_size=25).map(_unique), st.randoms(use_true_random=False))
def test_capture_is_totally_ordered_for_any_line_order(msgs, rnd):
    lines = [json.dumps(message_to_record(m)) for m in msgs]
    rnd.shuffle(lines)
    log = parse_capture("\n".join(lines))
    keys = [(m.timestamp, m.id) for m in log.messages]
    assert keys == sorted(keys)


@given(
    st.lists(_messages, min_size=1, max_size=15).map(_unique),
    st.lists(st.sampled_from(["{", "[]", '{"id": 1}', "not json", '{"id":"q","ts_ms":1,"url":"x"}']), max_size=8),
)
def test_skipped_plus_parsed_equals_lines(msgs, junk):
    lines = [json.dumps(message_to_record(m)) for m in msgs] + junk
    log = parse_capture("\n".join(lines))
    assert len(log) + log.skipped == len(lines)
