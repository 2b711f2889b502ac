"""Keyword detectors over OCR text: close-button words and gambling terms.

Text is split on whitespace and punctuation and case-folded. Latin
keywords must equal a whole token (multi-word keywords must appear as
consecutive tokens). Keywords containing CJK characters are matched by
substring, because OCR output for Chinese is not word-segmented.
"""

from __future__ import annotations

import re
from importlib import resources

from ..errors import ConfigurationError, InputError
from .verdicts import CensoredKind, Group, Verdict

_SPLIT = re.compile(r"[\W_]+", re.UNICODE)


def tokenize(text):
    return [t for t in _SPLIT.split(text.casefold()) if t]


_CJK_RANGES = ((0x3040, 0x30FF), (0x3400, 0x4DBF), (0x4E00, 0x9FFF), (0xF900, 0xFAFF))


def has_cjk(text):
    return any(lo <= ord(ch) <= hi for ch in text for lo, hi in _CJK_RANGES)


class KeywordSet:
    def __init__(self, keywords):
        keywords = [k.strip() for k in keywords if k and k.strip()]
        if not keywords:
            raise ConfigurationError("keyword list is empty")
        self.words = {}
        self.phrases = {}
        self.cjk = {}
        for kw in keywords:
            folded = kw.casefold()
            if has_cjk(folded):
                self.cjk[folded.replace(" ", "")] = kw
                continue
            tokens = tuple(tokenize(folded))
            if len(tokens) == 1:
                self.words[tokens[0]] = kw
            elif tokens:
                self.phrases[tokens] = kw

    def __len__(self):
        return len(self.words) + len(self.phrases) + len(self.cjk)

    def match(self, texts):
        """Sorted list of keywords found in ``texts``."""
        found = set()
        for text in texts:
            tokens = tokenize(text)
            for tok in tokens:
                if tok in self.words:
                    found.add(self.words[tok])
            for phrase, kw in self.phrases.items():
                n = len(phrase)
                if any(tuple(tokens[i:i + n]) == phrase for i in range(len(tokens) - n + 1)):
                    found.add(kw)
            for folded, kw in self.cjk.items():
                if any(folded in tok for tok in tokens):
                    found.add(kw)
        return sorted(found)


def parse_keyword_lines(lines):
    return [ln.split("#", 1)[0].strip() for ln in lines if ln.split("#", 1)[0].strip()]


def load_keyword_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_keyword_lines(fh)
    except OSError as exc:
        raise InputError(f"cannot read keyword file {path}: {exc}") from exc


def _bundled(name):
    text = resources.files("madroid").joinpath(f"data/{name}").read_text(encoding="utf-8")
    return parse_keyword_lines(text.splitlines())


def default_close_keywords():
    return _bundled("close_keywords.txt")


def default_gambling_keywords():
    return _bundled("gambling_keywords.txt")


def _as_set(keywords):
    return keywords if isinstance(keywords, KeywordSet) else KeywordSet(keywords)


def detect_close_keywords(texts, keywords=None) -> Verdict:
    """Click-deceptive when the image text contains close/exit/skip words."""
    kws = _as_set(keywords if keywords is not None else default_close_keywords())
    matched = kws.match(texts)
    return Verdict(bool(matched), Group.CLICK_DECEPTIVE, (), {"matched": matched}, "close-text")


def detect_gambling(texts, keywords) -> Verdict:
    kws = _as_set(keywords)
    matched = kws.match(texts)
    subkinds = (CensoredKind.GAMBLING,) if matched else ()
    return Verdict(bool(matched), Group.CENSORED, subkinds, {"matched": matched}, "gambling-text")
