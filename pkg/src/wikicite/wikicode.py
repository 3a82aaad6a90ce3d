"""Wikicode template tokenizer and citation extraction with page context.

The tokenizer is deliberately not a full MediaWiki parser: it matches nested
``{{...}}`` runs, ignores markup hidden in nowiki/comment/pre zones, and
treats anything unbalanced as plain text.  That is all the citation pipeline
needs, and it keeps the scanner total over arbitrary byte strings.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass, field
from importlib import resources

from .dump_ingest import WikiPage

MAX_STATEMENT_WORDS = 40

_COMMENT_RE = re.compile(r"<!--.*?(?:-->|\Z)", re.S)
# the (?<!/) keeps self-closing tags from being read as opening tags
_ZONE_TAG_RE = re.compile(r"<(nowiki|pre)(?:\s[^>]*)?(?<!/)>.*?(?:</\1\s*>|\Z)", re.S | re.I)
_ZONE_SELFCLOSED_RE = re.compile(r"<(?:nowiki|pre)(?:\s[^>]*)?/>", re.I)
_HEADING_RE = re.compile(r"(?m)^(={2,6})[ \t]*(.+?)[ \t]*\1[ \t]*$")
_REF_PAIR_RE = re.compile(r"<ref(\s[^>]*?)?(?<!/)>(.*?)</ref\s*>", re.S | re.I)
_REF_SELFCLOSED_RE = re.compile(r"<ref(\s[^>]*?)?/>", re.S | re.I)
_REF_NAME_RE = re.compile(r"""name\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s>/]+))""", re.I)

# Named parameters that carry a persistent identifier, in the casing used by
# the citation templates; used for the conservative dedup key.
_ID_PARAM_NAMES = (
    "doi", "isbn", "pmc", "pmid", "arxiv", "eprint", "oclc", "issn",
    "bibcode", "jstor", "lccn", "mr", "ol", "osti", "ssrn", "zbl",
)


@dataclass
class TemplateCall:
    """One ``{{...}}`` call: normalized name, split parameters, source span."""

    name: str
    positional_params: tuple[str, ...] = ()
    named_params: dict[str, str] = field(default_factory=dict)
    source_span: tuple[int, int] = (0, 0)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "positional": list(self.positional_params),
            "named": dict(self.named_params),
            "span": list(self.source_span),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TemplateCall":
        return cls(
            name=d["name"],
            positional_params=tuple(d.get("positional", ())),
            named_params=dict(d.get("named", {})),
            source_span=tuple(d.get("span", (0, 0))),
        )


@dataclass
class RawCitation:
    """A kept citation template call plus its page context."""

    page_id: int
    page_title: str
    template: TemplateCall
    section_path: str
    order_index: int
    preceding_words: list[str]
    page_total_words: int
    page_citation_count: int = 0

    def to_dict(self) -> dict:
        return {
            "page_id": self.page_id,
            "page_title": self.page_title,
            "template": self.template.to_dict(),
            "section_path": self.section_path,
            "order_index": self.order_index,
            "preceding_words": list(self.preceding_words),
            "page_total_words": self.page_total_words,
            "page_citation_count": self.page_citation_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RawCitation":
        return cls(
            page_id=d["page_id"],
            page_title=d.get("page_title", ""),
            template=TemplateCall.from_dict(d["template"]),
            section_path=d["section_path"],
            order_index=d["order_index"],
            preceding_words=list(d["preceding_words"]),
            page_total_words=d["page_total_words"],
            page_citation_count=d.get("page_citation_count", 0),
        )


def normalize_template_name(name: str) -> str:
    """Lowercase, underscores to spaces, internal whitespace collapsed."""
    return re.sub(r"\s+", " ", name.replace("_", " ")).strip().lower()


def _blank_hidden(text: str) -> str:
    """Replace nowiki/comment/pre content with spaces, preserving offsets."""
    out = list(text)
    for rx in (_COMMENT_RE, _ZONE_TAG_RE, _ZONE_SELFCLOSED_RE):
        for m in rx.finditer(text):
            for i in range(m.start(), m.end()):
                out[i] = " "
    return "".join(out)


def _match_brace_spans(scan: str) -> list[tuple[int, int]]:
    """Spans of balanced ``{{...}}`` pairs in ``scan``, innermost pairing.

    Runs of three or more braces pair from the inside out, like the MediaWiki
    preprocessor; unmatched braces are simply never part of a span.
    """
    spans: list[tuple[int, int]] = []
    stack: list[int] = []
    i, n = 0, len(scan)
    while i < n:
        ch = scan[i]
        if ch == "{":
            j = i
            while j < n and scan[j] == "{":
                j += 1
            run = j - i
            # opens at i+run-2, i+run-4, ...; push outermost first
            for pos in range(i + (run % 2), j - 1, 2):
                stack.append(pos)
            i = j
        elif ch == "}":
            j = i
            while j < n and scan[j] == "}":
                j += 1
            close = i
            while close + 1 < j and stack:
                start = stack.pop()
                spans.append((start, close + 2))
                close += 2
            i = j
        else:
            i += 1
    return spans


def _top_level_spans(spans: list[tuple[int, int]]) -> list[tuple[int, int]]:
    top: list[tuple[int, int]] = []
    last_end = -1
    for start, end in sorted(spans, key=lambda s: (s[0], -s[1])):
        if start >= last_end:
            top.append((start, end))
            last_end = end
    return top


def _split_depth0(scan: str, sep: str, first_only: bool = False) -> list[int]:
    """Positions of ``sep`` at zero brace and bracket nesting depth."""
    hits: list[int] = []
    brace = bracket = 0
    i, n = 0, len(scan)
    while i < n:
        two = scan[i:i + 2]
        if two == "{{":
            brace += 1
            i += 2
            continue
        if two == "}}":
            brace = max(0, brace - 1)
            i += 2
            continue
        if two == "[[":
            bracket += 1
            i += 2
            continue
        if two == "]]":
            bracket = max(0, bracket - 1)
            i += 2
            continue
        if scan[i] == sep and brace == 0 and bracket == 0:
            hits.append(i)
            if first_only:
                return hits
        i += 1
    return hits


def _parse_call(text: str, scan: str, span: tuple[int, int]) -> TemplateCall | None:
    start, end = span
    inner = text[start + 2:end - 2]
    inner_scan = scan[start + 2:end - 2]
    pipes = _split_depth0(inner_scan, "|")
    cut = pipes[0] if pipes else len(inner)
    name = normalize_template_name(inner[:cut])
    if not name:
        return None
    positional: list[str] = []
    named: dict[str, str] = {}
    bounds = pipes + [len(inner)]
    for k in range(len(pipes)):
        lo, hi = bounds[k] + 1, bounds[k + 1]
        part, part_scan = inner[lo:hi], inner_scan[lo:hi]
        eq = _split_depth0(part_scan, "=", first_only=True)
        if eq:
            named[part[:eq[0]].strip()] = part[eq[0] + 1:].strip()
        else:
            positional.append(part)
    return TemplateCall(name, tuple(positional), named, (start, end))


def tokenize_templates(wikitext: str) -> list[TemplateCall]:
    """Every top-level ``{{...}}`` call, in document order.

    Nested calls stay verbatim inside their parent's parameter values.
    Braces inside nowiki, HTML comments, and pre blocks do not count;
    unbalanced runs are left as plain text.
    """
    scan = _blank_hidden(wikitext)
    spans = _top_level_spans(_match_brace_spans(scan))
    calls = []
    for span in spans:
        call = _parse_call(wikitext, scan, span)
        if call is not None:
            calls.append(call)
    return calls


def render_template(call: TemplateCall) -> str:
    """Canonical print; ``tokenize_templates`` of the output round-trips."""
    parts = [call.name]
    parts.extend(call.positional_params)
    parts.extend(f"{k}={v}" for k, v in call.named_params.items())
    return "{{" + "|".join(parts) + "}}"


# ---------------------------------------------------------------------------
# Plain-text stripping and page context


_FILE_LINK_RE = re.compile(
    r"\[\[\s*(?:File|Image|Category)\s*:[^\[\]]*(?:\[\[[^\]]*\]\][^\[\]]*)*\]\]",
    re.I,
)
_PIPED_LINK_RE = re.compile(r"\[\[(?:[^|\[\]]*)\|([^\[\]]*)\]\]")
_PLAIN_LINK_RE = re.compile(r"\[\[([^\[\]]*)\]\]")
_EXT_LINK_LABELED_RE = re.compile(r"\[(?:https?|ftp)://[^\s\]]*\s+([^\]]*)\]", re.I)
_EXT_LINK_BARE_RE = re.compile(r"\[(?:https?|ftp)://[^\s\]]*\]", re.I)
_TABLE_RE = re.compile(r"\{\|.*?\|\}", re.S)
_GALLERY_RE = re.compile(
    r"<(gallery|math|source|syntaxhighlight|timeline|score)(?:\s[^>]*)?>.*?(?:</\1\s*>|\Z)",
    re.S | re.I,
)
_TAG_RE = re.compile(r"</?[A-Za-z][^>\n]*>")
_HEADING_LINE_RE = re.compile(r"(?m)^[ \t]*={2,6}.*$")
_QUOTE_MARK_RE = re.compile(r"'{2,}")


def strip_markup(wikitext: str) -> str:
    """Best-effort plain text: templates, refs, tables and markup removed.

    Tables and galleries are dropped wholesale; the goal is clean statement
    text, not completeness.
    """
    text = _COMMENT_RE.sub(" ", wikitext)
    text = _ZONE_SELFCLOSED_RE.sub(" ", text)
    text = _ZONE_TAG_RE.sub(" ", text)
    text = _GALLERY_RE.sub(" ", text)
    text = _REF_SELFCLOSED_RE.sub(" ", text)
    text = _REF_PAIR_RE.sub(" ", text)
    for _ in range(8):
        text, n = _TABLE_RE.subn(" ", text)
        if not n:
            break
    # strip template calls with the same matcher used for tokenizing
    spans = _top_level_spans(_match_brace_spans(text))
    if spans:
        pieces, prev = [], 0
        for start, end in spans:
            pieces.append(text[prev:start])
            prev = end
        pieces.append(text[prev:])
        text = " ".join(pieces)
    text = _FILE_LINK_RE.sub(" ", text)
    text = _PIPED_LINK_RE.sub(r"\1", text)
    text = _PLAIN_LINK_RE.sub(r"\1", text)
    text = _EXT_LINK_LABELED_RE.sub(r"\1", text)
    text = _EXT_LINK_BARE_RE.sub(" ", text)
    text = _HEADING_LINE_RE.sub(" ", text)
    text = _QUOTE_MARK_RE.sub("", text)
    text = _TAG_RE.sub(" ", text)
    return html.unescape(text)


def _heading_positions(scan: str) -> list[tuple[int, str]]:
    out = []
    for m in _HEADING_RE.finditer(scan):
        title = strip_markup(m.group(2)).strip()
        out.append((m.start(), title))
    return out


def section_for(wikitext: str, pos: int, headings: list[tuple[int, str]] | None = None) -> str:
    """Innermost section heading before ``pos``, or "LEAD"."""
    if headings is None:
        headings = _heading_positions(_blank_hidden(wikitext))
    current = "LEAD"
    for start, title in headings:
        if start >= pos:
            break
        current = title or "LEAD"
    return current


def plain_text_context(wikitext: str, span: tuple[int, int]) -> tuple[list[str], str]:
    """Last <=40 plain-text words before ``span`` and the containing section."""
    words = strip_markup(wikitext[:span[0]]).split()
    return words[-MAX_STATEMENT_WORDS:], section_for(wikitext, span[0])


# ---------------------------------------------------------------------------
# Template configuration (the 35 supported citation template names)


def load_template_config(path=None) -> dict[str, str]:
    """Mapping of supported template name -> canonical class.

    The file is line oriented: one name per line, aliases written as
    ``alias -> canonical``; ``#`` starts a comment.
    """
    if path is None:
        text = resources.files("wikicite.data").joinpath("citation_templates.txt").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    mapping: dict[str, str] = {}
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" in line:
            alias, canonical = (normalize_template_name(p) for p in line.split("->", 1))
            mapping[alias] = canonical
        else:
            name = normalize_template_name(line)
            mapping[name] = name
    return mapping


def _as_mapping(known_templates) -> dict[str, str]:
    if isinstance(known_templates, dict):
        return known_templates
    return {normalize_template_name(n): normalize_template_name(n) for n in known_templates}


def _suppressed_ranges(scan: str) -> list[tuple[int, int]]:
    """Content ranges of repeated ``<ref name=X>`` definitions.

    Only the first definition of a named ref is counted; templates inside a
    later definition with the same name are ignored.
    """
    seen: set[str] = set()
    ranges: list[tuple[int, int]] = []
    for m in _REF_PAIR_RE.finditer(scan):
        attrs = m.group(1) or ""
        name_m = _REF_NAME_RE.search(attrs)
        if not name_m:
            continue
        name = next(g for g in name_m.groups() if g is not None).strip()
        if not name:
            continue
        if name in seen:
            ranges.append((m.start(2), m.end(2)))
        else:
            seen.add(name)
    return ranges


def _dedup_key(call: TemplateCall) -> tuple | None:
    title = ""
    url = ""
    first_id = ""
    for key, value in call.named_params.items():
        lk = key.strip().lower()
        if lk == "title" and not title:
            title = re.sub(r"\s+", " ", value).strip().lower()
        elif lk == "url" and not url:
            url = value.strip()
        elif lk in _ID_PARAM_NAMES and not first_id and value.strip():
            first_id = value.strip().lower()
    if not title and not url and not first_id:
        return None  # never merged
    return (call.name, title, first_id, url)


def extract_citations(page: WikiPage, known_templates) -> list[RawCitation]:
    """Kept citations of ``page``: supported templates, first occurrence only.

    Dedup is conservative: same canonical template name plus same normalized
    title / first identifier / URL.  Repeated ``<ref name=X>`` definitions
    count once.  Each kept citation gets its section, order index, preceding
    statement words and the page word count.
    """
    mapping = _as_mapping(known_templates)
    if not mapping:
        raise ValueError("known_templates must not be empty")
    wikitext = page.wikitext
    scan = _blank_hidden(wikitext)
    spans = _top_level_spans(_match_brace_spans(scan))
    suppressed = _suppressed_ranges(scan)
    headings = _heading_positions(scan)

    kept: list[RawCitation] = []
    seen_keys: set[tuple] = set()
    for span in spans:
        call = _parse_call(wikitext, scan, span)
        if call is None:
            continue
        canonical = mapping.get(call.name)
        if canonical is None:
            continue
        if any(lo <= span[0] < hi for lo, hi in suppressed):
            continue
        call.name = canonical
        key = _dedup_key(call)
        if key is not None:
            if key in seen_keys:
                continue
            seen_keys.add(key)
        words = strip_markup(wikitext[:span[0]]).split()[-MAX_STATEMENT_WORDS:]
        kept.append(RawCitation(
            page_id=page.page_id,
            page_title=page.title,
            template=call,
            section_path=section_for(wikitext, span[0], headings),
            order_index=len(kept),
            preceding_words=words,
            page_total_words=0,
        ))

    total_words = len(strip_markup(wikitext).split())
    for citation in kept:
        citation.page_total_words = total_words
        citation.page_citation_count = len(kept)
    return kept
