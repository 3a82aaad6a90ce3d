"""Syntactic normalization and validation of bibliographic identifiers."""

from __future__ import annotations

import re
from urllib.parse import urlsplit

IDENTIFIER_KINDS = (
    "DOI", "ISBN", "PMC", "PMID", "ARXIV", "OCLC", "ISSN", "BIBCODE",
    "JSTOR", "LCCN", "MR", "OL", "OSTI", "SSRN", "ZBL",
)

# Kinds used by the labeling rules and the co-occurrence statistics.
CORE_KINDS = ("DOI", "ISBN", "PMC", "PMID", "ARXIV")


class IdentifierRejection(ValueError):
    """Raised when a raw identifier value fails its kind's syntax or checksum."""

    def __init__(self, kind: str, raw: str, reason: str):
        super().__init__(f"{kind} {raw!r}: {reason}")
        self.kind = kind
        self.raw = raw
        self.reason = reason


_DOI_PREFIX = re.compile(r"^(?:https?://(?:dx\.)?doi\.org/|doi:)\s*", re.I)
_DOI_PATTERN = re.compile(r"^10\.[0-9.]+/\S+$")
_ARXIV_NEW = re.compile(r"^\d{4}\.\d{4,5}(v\d+)?$")
_ARXIV_OLD = re.compile(r"^[a-z-]+(\.[a-z-]+)?/\d{7}(v\d+)?$")
_BIBCODE = re.compile(r"^\d{4}[A-Za-z.&][A-Za-z0-9.&+]{13}[A-Z.:]$")
_ZBL = re.compile(r"^\d{4}\.\d{5}$|^\d{1,8}$")
_LCCN = re.compile(r"^[a-z]{0,3}\d{8,10}$")


def _isbn10_checksum_ok(digits: str) -> bool:
    # weighted sum 10*d1 + 9*d2 + ... + 1*d10 must be 0 mod 11, X = 10
    total = 0
    for i, ch in enumerate(digits):
        value = 10 if ch == "X" else int(ch)
        total += (10 - i) * value
    return total % 11 == 0


def _isbn13_checksum_ok(digits: str) -> bool:
    total = sum(int(ch) * (1 if i % 2 == 0 else 3) for i, ch in enumerate(digits))
    return total % 10 == 0


def normalize_identifier(kind: str, raw: str) -> str:
    """Return the canonical text of ``raw`` for ``kind``.

    Raises :class:`IdentifierRejection` on any syntax or checksum failure so
    callers can count and log the rejection instead of storing a bad value.
    """
    if kind not in IDENTIFIER_KINDS:
        raise IdentifierRejection(kind, raw, "unknown identifier kind")
    value = raw.strip()
    if not value:
        raise IdentifierRejection(kind, raw, "empty value")

    if kind == "DOI":
        value = _DOI_PREFIX.sub("", value).strip().lower()
        if not _DOI_PATTERN.match(value):
            raise IdentifierRejection(kind, raw, "does not match 10.<registrant>/<suffix>")
        return value

    if kind == "ISBN":
        value = re.sub(r"[\s-]", "", value).upper()
        if re.fullmatch(r"\d{9}[\dX]", value):
            if not _isbn10_checksum_ok(value):
                raise IdentifierRejection(kind, raw, "ISBN-10 checksum failed")
            return value
        if re.fullmatch(r"\d{13}", value):
            if not _isbn13_checksum_ok(value):
                raise IdentifierRejection(kind, raw, "ISBN-13 checksum failed")
            return value
        raise IdentifierRejection(kind, raw, "not 10 or 13 digits")

    if kind == "PMID":
        value = re.sub(r"^pmid:?\s*", "", value, flags=re.I)
        if not value.isdigit():
            raise IdentifierRejection(kind, raw, "PMID must be digits only")
        return value

    if kind == "PMC":
        value = re.sub(r"^pmc:?\s*", "", value, flags=re.I)
        if not value.isdigit():
            raise IdentifierRejection(kind, raw, "PMC must be digits after the PMC prefix")
        return value

    if kind == "ARXIV":
        value = re.sub(r"^arxiv:?\s*", "", value, flags=re.I).lower()
        if _ARXIV_NEW.match(value) or _ARXIV_OLD.match(value):
            return value
        raise IdentifierRejection(kind, raw, "matches neither old nor new arXiv form")

    if kind == "ISSN":
        value = value.replace("-", "").replace(" ", "").upper()
        if not re.fullmatch(r"\d{7}[\dX]", value):
            raise IdentifierRejection(kind, raw, "ISSN must be 8 characters")
        total = sum((8 - i) * int(ch) for i, ch in enumerate(value[:7]))
        check = (11 - total % 11) % 11
        expected = "X" if check == 10 else str(check)
        if value[7] != expected:
            raise IdentifierRejection(kind, raw, "ISSN checksum failed")
        return value[:4] + "-" + value[4:]

    if kind in ("OCLC", "OSTI", "SSRN", "MR"):
        value = re.sub(rf"^{kind.lower()}:?\s*", "", value, flags=re.I)
        value = value.lstrip()
        if not value.isdigit():
            raise IdentifierRejection(kind, raw, f"{kind} must be digits only")
        return value

    if kind == "BIBCODE":
        if len(value) != 19 or not _BIBCODE.match(value):
            raise IdentifierRejection(kind, raw, "bibcode must be 19 characters")
        return value

    if kind == "JSTOR":
        value = re.sub(r"^https?://www\.jstor\.org/stable/", "", value, flags=re.I)
        if not value or any(c.isspace() for c in value):
            raise IdentifierRejection(kind, raw, "JSTOR id must be a single token")
        return value

    if kind == "LCCN":
        value = value.replace("-", "").replace(" ", "").lower()
        if not _LCCN.match(value):
            raise IdentifierRejection(kind, raw, "LCCN shape not recognized")
        return value

    if kind == "OL":
        value = re.sub(r"^ol:?\s*", "", value, flags=re.I).upper()
        if not value.startswith("OL"):
            value = "OL" + value
        if not re.fullmatch(r"OL\d+[AMW]", value):
            raise IdentifierRejection(kind, raw, "OL id must look like OL123W")
        return value

    if kind == "ZBL":
        if not _ZBL.match(value):
            raise IdentifierRejection(kind, raw, "Zbl id shape not recognized")
        return value

    raise IdentifierRejection(kind, raw, "unhandled kind")  # pragma: no cover


# Registrable two-level public suffixes; only the handful needed for the
# url_top_level_domain feature, not a full public-suffix database.
TWO_LEVEL_SUFFIXES = frozenset({
    "co.uk", "org.uk", "ac.uk", "gov.uk", "me.uk", "net.uk", "ltd.uk",
    "plc.uk", "sch.uk", "nhs.uk",
    "com.au", "net.au", "org.au", "edu.au", "gov.au", "id.au", "asn.au",
    "co.nz", "net.nz", "org.nz", "govt.nz", "ac.nz",
    "co.jp", "ne.jp", "or.jp", "go.jp", "ac.jp",
    "co.in", "net.in", "org.in", "ac.in", "edu.in", "gov.in", "res.in",
    "co.za", "org.za", "net.za", "ac.za", "gov.za",
    "com.br", "net.br", "org.br", "gov.br",
    "com.cn", "net.cn", "org.cn", "gov.cn",
    "com.mx", "com.ar", "com.tr", "com.sg", "com.hk", "co.kr", "co.il",
})


def top_level_domain(url: str) -> str:
    """Leftmost label of the registrable domain; "" for anything unparseable.

    "https://www.bbc.co.uk/news" -> "bbc", "http://youtube.com/watch" ->
    "youtube".  Scheme-less inputs like "www.nytimes.com/x" are accepted.
    """
    text = url.strip()
    if not text:
        return ""
    if "://" not in text:
        text = "//" + text
    try:
        host = urlsplit(text).hostname or ""
    except ValueError:
        return ""
    host = host.strip(".").lower()
    labels = host.split(".")
    if len(labels) < 2 or any(not lbl for lbl in labels):
        return ""
    if all(lbl.isdigit() for lbl in labels):  # bare IPv4
        return ""
    if len(labels) >= 3 and ".".join(labels[-2:]) in TWO_LEVEL_SUFFIXES:
        return labels[-3]
    return labels[-2]
