import random
import re

import pytest
from hypothesis import given
from hypothesis import strategies as st

from madroid.detectors.keywords import (
    KeywordSet,
    default_close_keywords,
    default_gambling_keywords,
    detect_close_keywords,
    detect_gambling,
    has_cjk,
    load_keyword_file,
    tokenize,
)
from madroid.detectors.verdicts import CensoredKind, Group
from madroid.errors import ConfigurationError, InputError


def keyword_oracle(texts, keywords):
    """Brute force: whole-word regex for Latin keywords, raw substring for CJK."""
    found = set()
    for kw in keywords:
        kw = kw.strip()
        if not kw:
            continue
        for text in texts:
            folded = text.casefold()
            if has_cjk(kw):
                if kw.casefold().replace(" ", "") in re.sub(r"[\W_]+", " ", folded):
                    found.add(kw)
                continue
            words = [w for w in re.split(r"[\W_]+", kw.casefold()) if w]
            pattern = r"(?<![^\W_])" + r"[\W_]+".join(map(re.escape, words)) + r"(?![^\W_])"
            if re.search(pattern, folded):
                found.add(kw)
    return sorted(found)


def test_close_skip_example():
    v = detect_close_keywords(["Download Now", "skip"])
    assert v.devious and v.group == Group.CLICK_DECEPTIVE
    assert v.evidence["matched"] == ["skip"]


def test_close_empty_texts():
    assert not detect_close_keywords([]).devious


def test_close_whole_token_only():
    assert not detect_close_keywords(["skipping"]).devious
    assert detect_close_keywords(["[X] Close"]).devious
    assert detect_close_keywords(["点击跳过广告"]).evidence["matched"] == ["跳过"]


def test_gambling_examples():
    kws = default_gambling_keywords()
    v = detect_gambling(["Welcome", "casino", "bonus"], kws)
    assert v.devious and v.subkinds == (CensoredKind.GAMBLING,)
    assert "casino" in v.evidence["matched"]
    assert not detect_gambling(["weather", "today"], kws).devious
    assert detect_gambling(["来玩炸金花赢大奖"], kws).devious


def test_multiword_keywords_need_consecutive_tokens():
    kws = ["online casino"]
    assert detect_gambling(["Best ONLINE-casino!"], kws).devious
    assert not detect_gambling(["online poker casino"], kws).devious


def test_empty_keyword_list_is_configuration_error():
    with pytest.raises(ConfigurationError):
        detect_gambling(["casino"], [])
    with pytest.raises(ConfigurationError):
        KeywordSet(["  ", ""])


def test_bundled_lists():
    assert len(default_gambling_keywords()) == 100
    assert {"close", "exit", "skip", "关闭", "退出", "跳过"} <= set(default_close_keywords())


def test_keyword_file(tmp_path):
    path = tmp_path / "kw.txt"
    path.write_text("# comment\nlotto\n\nslots # trailing\n", encoding="utf-8")
    assert load_keyword_file(path) == ["lotto", "slots"]
    with pytest.raises(InputError):
        load_keyword_file(tmp_path / "missing.txt")


def test_tokenize():
    assert tokenize("Win_BIG, now!") == ["win", "big", "now"]
    assert tokenize("") == []


_VOCAB = ["close", "exit", "skip", "casino", "bonus", "play", "now", "win", "big", "poker",
          "slots", "exiting", "closed", "跳过", "关闭", "炸金花", "赌场"]
_SEP = [" ", ", ", "-", "!", "_", "  ", "。"]


def _random_text(rnd):
    words = [rnd.choice(_VOCAB) for _ in range(rnd.randint(0, 6))]
    out = ""
    for w in words:
        out += (w.upper() if rnd.random() < 0.3 else w) + rnd.choice(_SEP)
    return out


def _random_keywords(rnd):
    kws = set()
    for _ in range(rnd.randint(1, 5)):
        n = rnd.choice([1, 1, 1, 2])
        kws.add(" ".join(rnd.choice(_VOCAB) for _ in range(n)))
    return sorted(kws)


def test_matches_brute_force_oracle_on_1000_lists():
    rnd = random.Random(2024)
    for _ in range(1000):
        texts = [_random_text(rnd) for _ in range(rnd.randint(0, 4))]
        kws = _random_keywords(rnd)
        assert KeywordSet(kws).match(texts) == keyword_oracle(texts, kws), (texts, kws)


@given(st.lists(st.sampled_from(_VOCAB), max_size=8), st.randoms(use_true_random=False))
def test_single_word_matching_is_order_invariant(tokens, rnd):
    kws = KeywordSet(["close", "casino", "跳过", "skip"])
    shuffled = tokens[:]
    rnd.shuffle(shuffled)
    assert kws.match([" ".join(tokens)]) == kws.match([" ".join(shuffled)])
    assert kws.match(tokens) == kws.match(shuffled)
