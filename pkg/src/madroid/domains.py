"""Registrable-domain (eTLD+1) lookup against a public-suffix rule file."""

from __future__ import annotations

import ipaddress
import os
from functools import lru_cache
from importlib import resources

from .errors import InputError
from .traffic import url_host

_PRIVATE_MARKER = "===BEGIN PRIVATE DOMAINS==="


class SuffixRules:
    """Parsed public-suffix rules.

    Follows the standard matching algorithm: exception rules win, otherwise
    the rule with most labels wins, and the implicit ``*`` rule applies when
    nothing matches.
    """

    def __init__(self, lines, include_private=False):
        self.exact = set()
        self.wildcard = set()
        self.exception = set()
        for raw in lines:
            line = raw.strip()
            if _PRIVATE_MARKER in line and not include_private:
                break
            if not line or line.startswith("//"):
                continue
            rule = line.split()[0].lower()
            for form in _forms(rule):
                if form.startswith("!"):
                    self.exception.add(form[1:])
                elif form.startswith("*."):
                    self.wildcard.add(form[2:])
                else:
                    self.exact.add(form)

    @classmethod
    def from_file(cls, path, include_private=False):
        try:
            with open(path, encoding="utf-8") as fh:
                return cls(fh.readlines(), include_private)
        except OSError as exc:
            raise InputError(f"cannot read suffix rules {path}: {exc}") from exc

    def public_suffix_length(self, labels):
        """Number of trailing labels forming the public suffix of ``labels``."""
        n = len(labels)
        best = 1
        for i in range(n):
            candidate = ".".join(labels[i:])
            size = n - i
            if candidate in self.exception:
                return size - 1
            if candidate in self.exact and size > best:
                best = size
            if i > 0 and candidate in self.wildcard and size + 1 > best:
                best = size + 1
        return best

    def registrable(self, host):
        host = host.strip(".").lower()
        if _is_ip(host):
            return host
        labels = host.split(".")
        suffix_len = self.public_suffix_length(labels)
        if suffix_len >= len(labels):
            return host
        return ".".join(labels[-(suffix_len + 1):])


def _forms(rule):
    prefix = ""
    if rule.startswith("!"):
        prefix, rule = "!", rule[1:]
    elif rule.startswith("*."):
        prefix, rule = "*.", rule[2:]
    out = [prefix + rule]
    try:
        ascii_form = rule.encode("idna").decode("ascii")
    except UnicodeError:
        ascii_form = rule
    if ascii_form != rule:
        out.append(prefix + ascii_form)
    return out


def _is_ip(host):
    candidate = host[1:-1] if host.startswith("[") else host
    try:
        ipaddress.ip_address(candidate)
    except ValueError:
        return False
    return True


@lru_cache(maxsize=None)
def default_rules() -> SuffixRules:
    override = os.environ.get("MADROID_SUFFIX_RULES")
    if override:
        return SuffixRules.from_file(override)
    text = resources.files("madroid").joinpath("data/public_suffix_list.dat").read_text(encoding="utf-8")
    return SuffixRules(text.splitlines())


def registrable_domain(url, rules: SuffixRules | None = None) -> str:
    """eTLD+1 of the host in ``url``.

    >>> registrable_domain("http://req.startappservice.com/1.4/gethtmlad")
    'startappservice.com'
    """
    host = url_host(url)
    if host is None:
        raise InputError(f"cannot extract a host from {url!r}")
    return (rules or default_rules()).registrable(host)


def host_label(value, rules: SuffixRules | None = None) -> str:
    """Registrable domain of a bare host name or of a URL."""
    if "://" in value:
        return registrable_domain(value, rules)
    return (rules or default_rules()).registrable(value)
