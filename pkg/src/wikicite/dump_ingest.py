"""Stream pages out of a MediaWiki pages-articles XML dump."""

from __future__ import annotations

import bz2
import gzip
import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterator

log = logging.getLogger(__name__)

_REDIRECT_TEXT_RE = re.compile(r"^\s*#REDIRECT", re.I)


class DumpFormatError(Exception):
    """Malformed dump XML; carries the parser's line/column position."""


@dataclass
class WikiPage:
    page_id: int
    title: str
    namespace: int
    wikitext: str
    is_redirect: bool


@dataclass
class DumpSource:
    """A dump location plus how it is compressed ("auto" sniffs)."""

    location: str | Path | IO[bytes]
    compression: str = "auto"

    def open(self) -> IO[bytes]:
        if hasattr(self.location, "read"):
            return self.location  # caller-managed stream
        path = Path(self.location)
        comp = self.compression
        if comp == "auto":
            suffix = path.suffix.lower()
            comp = {"": "none", ".xml": "none", ".bz2": "bzip2", ".gz": "gzip"}.get(suffix, "none")
        if comp == "bzip2":
            return bz2.open(path, "rb")
        if comp == "gzip":
            return gzip.open(path, "rb")
        if comp == "none":
            return open(path, "rb")
        raise ValueError(f"unknown compression {comp!r}")


def _localname(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def stream_pages(source: DumpSource | str | Path) -> Iterator[WikiPage]:
    """Yield every page of the dump once, in order, one page buffered at a time.

    Pages without a ``<text>`` element are skipped and counted in a warning
    log line.  Malformed XML raises :class:`DumpFormatError` after any
    complete pages have been yielded.
    """
    if not isinstance(source, DumpSource):
        source = DumpSource(source)
    handle = source.open()
    skipped = 0
    try:
        parser = ET.iterparse(handle, events=("end",))
        try:
            for _event, elem in parser:
                if _localname(elem.tag) != "page":
                    continue
                page = _parse_page(elem)
                elem.clear()  # keep memory bounded by the largest single page
                if page is None:
                    skipped += 1
                    continue
                yield page
        except ET.ParseError as exc:
            raise DumpFormatError(f"malformed dump XML: {exc}") from exc
    finally:
        if skipped:
            log.warning("skipped %d pages with missing <text>", skipped)
        if handle is not source.location:
            handle.close()


def _parse_page(elem) -> WikiPage | None:
    page_id = 0
    title = ""
    namespace = 0
    wikitext = None
    has_redirect_elem = False
    for child in elem:
        name = _localname(child.tag)
        if name == "title":
            title = child.text or ""
        elif name == "ns":
            try:
                namespace = int(child.text or "0")
            except ValueError:
                namespace = 0
        elif name == "id" and page_id == 0:
            try:
                page_id = int(child.text or "0")
            except ValueError:
                page_id = 0
        elif name == "redirect":
            has_redirect_elem = True
        elif name == "revision":
            for rev_child in child:
                if _localname(rev_child.tag) == "text":
                    wikitext = rev_child.text or ""
    if wikitext is None:
        log.warning("page %d (%r) has no <text>; skipped", page_id, title)
        return None
    is_redirect = has_redirect_elem or bool(_REDIRECT_TEXT_RE.match(wikitext))
    return WikiPage(page_id, title, namespace, wikitext, is_redirect)


def is_citable_article(page: WikiPage) -> bool:
    """Main-namespace, non-redirect pages are the only ones carrying citations."""
    return page.namespace == 0 and not page.is_redirect
