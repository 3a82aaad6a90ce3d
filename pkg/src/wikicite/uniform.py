"""Map heterogeneous citation templates onto the uniform 29-key record."""

from __future__ import annotations

import json
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources

from .identifiers import IdentifierRejection, normalize_identifier, top_level_domain
from .wikicode import RawCitation, TemplateCall

log = logging.getLogger(__name__)

# The frozen dataset schema.  Order matters: it is the column order of every
# emitted row.
UNIFORM_KEYS = (
    "type", "title", "authors", "periodical", "chapter", "publisher",
    "edition", "publication_place", "date", "year", "access_date",
    "archive_url", "archive_date", "volume", "issue", "pages", "url",
    "url_top_level_domain", "work", "website", "newspaper", "series",
    "language", "degree", "conference", "encyclopedia", "id_list", "quote",
    "trans_title",
)

PROVENANCE_KEYS = (
    "page_id", "page_title", "section_path", "order_index",
    "preceding_words", "page_total_words", "page_citation_count",
)


@dataclass
class UniformCitation:
    type: str = ""
    title: str = ""
    authors: list[str] = field(default_factory=list)
    periodical: str = ""
    chapter: str = ""
    publisher: str = ""
    edition: str = ""
    publication_place: str = ""
    date: str = ""
    year: str = ""
    access_date: str = ""
    archive_url: str = ""
    archive_date: str = ""
    volume: str = ""
    issue: str = ""
    pages: str = ""
    url: str = ""
    url_top_level_domain: str = ""
    work: str = ""
    website: str = ""
    newspaper: str = ""
    series: str = ""
    language: str = ""
    degree: str = ""
    conference: str = ""
    encyclopedia: str = ""
    id_list: dict[str, str] = field(default_factory=dict)
    quote: str = ""
    trans_title: str = ""

    def to_dict(self) -> dict:
        d = {}
        for key in UNIFORM_KEYS:
            value = getattr(self, key)
            d[key] = list(value) if key == "authors" else (dict(value) if key == "id_list" else value)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "UniformCitation":
        kwargs = {k: d[k] for k in UNIFORM_KEYS if k in d}
        if "authors" in kwargs:
            kwargs["authors"] = list(kwargs["authors"])
        if "id_list" in kwargs:
            kwargs["id_list"] = dict(kwargs["id_list"])
        return cls(**kwargs)


@dataclass
class CitationRecord:
    """A uniform citation plus its provenance: one row of the dataset."""

    citation: UniformCitation
    page_id: int = 0
    page_title: str = ""
    section_path: str = ""
    order_index: int = 0
    preceding_words: list[str] = field(default_factory=list)
    page_total_words: int = 0
    page_citation_count: int = 0

    def to_dict(self) -> dict:
        d = self.citation.to_dict()
        for key in PROVENANCE_KEYS:
            value = getattr(self, key)
            d[key] = list(value) if key == "preceding_words" else value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CitationRecord":
        return cls(
            citation=UniformCitation.from_dict(d),
            page_id=d.get("page_id", 0),
            page_title=d.get("page_title", ""),
            section_path=d.get("section_path", ""),
            order_index=d.get("order_index", 0),
            preceding_words=list(d.get("preceding_words", [])),
            page_total_words=d.get("page_total_words", 0),
            page_citation_count=d.get("page_citation_count", 0),
        )


class AliasTable:
    """Per-template routing of source parameter names to uniform keys."""

    def __init__(self, common: dict[str, str], per_template: dict[str, dict[str, str]]):
        self.common = common
        self.per_template = per_template

    @classmethod
    def load(cls, path=None) -> "AliasTable":
        if path is None:
            text = resources.files("wikicite.data").joinpath("param_aliases.json").read_text()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        data = json.loads(text)
        return cls(data.get("common", {}), data.get("per_template", {}))

    def route(self, template_class: str, param: str) -> str | None:
        overrides = self.per_template.get(template_class, {})
        if param in overrides:
            return overrides[param]
        return self.common.get(param)


_DEFAULT_ALIASES: AliasTable | None = None


def default_aliases() -> AliasTable:
    global _DEFAULT_ALIASES
    if _DEFAULT_ALIASES is None:
        _DEFAULT_ALIASES = AliasTable.load()
    return _DEFAULT_ALIASES


_NUM_SUFFIX_RE = re.compile(r"^(.*?)(\d+)$")


def map_to_uniform(call: TemplateCall, aliases: AliasTable | None = None,
                   counters: Counter | None = None) -> UniformCitation:
    """Route every parameter of ``call`` to exactly one uniform key.

    Unknown parameters are dropped and counted; identifier values failing
    normalization are rejected and counted rather than stored.
    """
    aliases = aliases or default_aliases()
    counters = counters if counters is not None else Counter()
    out = UniformCitation(type=call.name)

    # author parts are assembled after the routing pass so last/first pairs
    # and numbered variants land in one ordered list
    raw_authors: list[tuple[int, int, str]] = []  # (index, appearance, name)
    lasts: dict[int, str] = {}
    firsts: dict[int, str] = {}
    appearance = 0

    if call.positional_params and any(p.strip() for p in call.positional_params):
        counters["positional_params"] += len(call.positional_params)

    for key, value in call.named_params.items():
        value = value.strip()
        if not value:
            continue
        name = key.strip().lower()
        index = 1
        m = _NUM_SUFFIX_RE.match(name)
        target = aliases.route(call.name, name)
        if target is None and m:
            base_target = aliases.route(call.name, m.group(1))
            if base_target is not None and base_target.startswith("author:"):
                target = base_target
                index = int(m.group(2))
        if target is None:
            counters["unknown_params"] += 1
            continue
        if target == "drop":
            counters["dropped_params"] += 1
            continue
        if target.startswith("id:"):
            kind = target[3:]
            try:
                canonical = normalize_identifier(kind, value)
            except IdentifierRejection as exc:
                counters["rejected_identifiers"] += 1
                log.debug("rejected identifier: %s", exc)
                continue
            if kind in out.id_list:
                counters["extra_identifiers"] += 1
                log.debug("extra %s value dropped: %r", kind, value)
            else:
                out.id_list[kind] = canonical
            continue
        if target == "author:raw":
            appearance += 1
            raw_authors.append((index, appearance, value))
            continue
        if target == "author:vancouver":
            for part in value.split(","):
                part = part.strip()
                if part:
                    appearance += 1
                    raw_authors.append((index, appearance, part))
            continue
        if target == "author:last":
            lasts.setdefault(index, value)
            continue
        if target == "author:first":
            firsts.setdefault(index, value)
            continue
        if getattr(out, target):
            counters["duplicate_params"] += 1
        else:
            setattr(out, target, value)

    for idx in sorted(set(lasts) | set(firsts)):
        last, first = lasts.get(idx, ""), firsts.get(idx, "")
        name = f"{last}, {first}" if (last and first) else (last or first)
        appearance += 1
        raw_authors.append((idx, appearance, name))
    out.authors = [name for _, _, name in sorted(raw_authors)]

    if out.url:
        out.url_top_level_domain = top_level_domain(out.url)
    return out


def record_from_raw(raw: RawCitation, aliases: AliasTable | None = None,
                    counters: Counter | None = None) -> CitationRecord:
    return CitationRecord(
        citation=map_to_uniform(raw.template, aliases, counters),
        page_id=raw.page_id,
        page_title=raw.page_title,
        section_path=raw.section_path,
        order_index=raw.order_index,
        preceding_words=list(raw.preceding_words),
        page_total_words=raw.page_total_words,
        page_citation_count=raw.page_citation_count,
    )
