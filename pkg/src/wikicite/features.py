"""Numeric features for the citation classifier.

Five groups per record: citation-text characters, statement tokens with
hashed-subword fallback for out-of-vocabulary words, POS tag counts, a
section one-hot, and two positional scalars.
"""

from __future__ import annotations

import json
import math
import re
import zlib
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .labeling import LabeledCitation, strip_leakage
from .postag import pos_tag
from .uniform import UNIFORM_KEYS, CitationRecord, UniformCitation

PAD_ID = 0
UNK_ID = 1

DEFAULT_MIN_COUNT = 5
DEFAULT_POS_TOP = 35
DEFAULT_SECTIONS_TOP = 150
DEFAULT_SUBWORD_BUCKETS = 100_003
MAX_STATEMENT_WORDS = 40

# Uniform keys rendered into the citation text seen by the char encoder.
# Leakage fields are excluded; records are stripped before rendering anyway.
_CHAR_TEXT_KEYS = tuple(
    k for k in UNIFORM_KEYS
    if k not in ("type", "url", "url_top_level_domain", "work", "newspaper",
                 "website", "id_list")
)


def citation_char_text(c: UniformCitation) -> str:
    """Canonical template-call print of the non-leaking uniform fields."""
    parts = []
    for key in _CHAR_TEXT_KEYS:
        value = getattr(c, key)
        if key == "authors":
            value = "; ".join(value)
        if value:
            parts.append(f"|{key}={value}")
    return "{{citation" + "".join(parts) + "}}"


def subword_ids(word: str, buckets: int) -> tuple[int, ...]:
    """Hashed character 3-6 grams of ``<word>``; always at least one id."""
    decorated = "<" + word + ">"
    grams = []
    for n in range(3, 7):
        for i in range(len(decorated) - n + 1):
            grams.append(decorated[i:i + n])
    return tuple(zlib.crc32(g.encode("utf-8")) % buckets for g in grams)


def _normalize_section(section: str) -> str:
    return re.sub(r"\s+", " ", section).strip().casefold()


@dataclass
class Vocabulary:
    token_ids: dict[str, int] = field(default_factory=dict)
    char_ids: dict[str, int] = field(default_factory=dict)
    pos_tags: list[str] = field(default_factory=list)
    sections: list[str] = field(default_factory=list)
    subword_buckets: int = DEFAULT_SUBWORD_BUCKETS
    min_count: int = DEFAULT_MIN_COUNT
    pos_top: int = DEFAULT_POS_TOP
    sections_top: int = DEFAULT_SECTIONS_TOP

    @property
    def n_tokens(self) -> int:
        return 2 + len(self.token_ids)

    @property
    def n_chars(self) -> int:
        return 2 + len(self.char_ids)

    def save(self, path) -> None:
        blob = {
            "token_ids": self.token_ids,
            "char_ids": self.char_ids,
            "pos_tags": self.pos_tags,
            "sections": self.sections,
            "subword_buckets": self.subword_buckets,
            "min_count": self.min_count,
            "pos_top": self.pos_top,
            "sections_top": self.sections_top,
            "version": 1,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(blob, fh, ensure_ascii=False, sort_keys=True)

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            blob = json.load(fh)
        return cls(
            token_ids=blob["token_ids"],
            char_ids=blob["char_ids"],
            pos_tags=blob["pos_tags"],
            sections=blob["sections"],
            subword_buckets=blob["subword_buckets"],
            min_count=blob["min_count"],
            pos_top=blob.get("pos_top", DEFAULT_POS_TOP),
            sections_top=blob.get("sections_top", DEFAULT_SECTIONS_TOP),
        )

    def content_hash(self) -> str:
        import hashlib
        payload = json.dumps(
            [sorted(self.token_ids.items()), sorted(self.char_ids.items()),
             self.pos_tags, self.sections, self.subword_buckets],
            ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()[:16]


def _ranked(counter: Counter, limit: int) -> list[str]:
    return [key for key, _ in sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:limit]]


def build_vocabulary(train: Iterable[LabeledCitation],
                     min_count: int = DEFAULT_MIN_COUNT,
                     pos_top: int = DEFAULT_POS_TOP,
                     sections_top: int = DEFAULT_SECTIONS_TOP,
                     subword_buckets: int = DEFAULT_SUBWORD_BUCKETS,
                     max_words: int = MAX_STATEMENT_WORDS) -> Vocabulary:
    """Count-based vocabulary; deterministic regardless of input order."""
    token_counts: Counter = Counter()
    chars: set[str] = set()
    tag_counts: Counter = Counter()
    section_counts: Counter = Counter()
    for item in train:
        words = item.record.preceding_words[-max_words:]
        token_counts.update(w.lower() for w in words)
        tag_counts.update(pos_tag(words))
        chars.update(citation_char_text(item.record.citation))
        section_counts[_normalize_section(item.record.section_path)] += 1

    kept = sorted(
        ((t, c) for t, c in token_counts.items() if c >= min_count),
        key=lambda kv: (-kv[1], kv[0]))
    token_ids = {token: i + 2 for i, (token, _) in enumerate(kept)}
    char_ids = {ch: i + 2 for i, ch in enumerate(sorted(chars))}
    return Vocabulary(
        token_ids=token_ids,
        char_ids=char_ids,
        pos_tags=_ranked(tag_counts, pos_top),
        sections=_ranked(section_counts, sections_top),
        subword_buckets=subword_buckets,
        min_count=min_count,
        pos_top=pos_top,
        sections_top=sections_top,
    )


@dataclass
class FeatureVector:
    char_ids: tuple[int, ...]
    token_ids: tuple[int, ...]
    subword_ids: tuple[tuple[int, ...], ...]  # parallel to token_ids; () when in-vocab
    pos_counts: np.ndarray
    section_onehot: np.ndarray
    order_scalar: float
    totwords_scalar: float


def featurize(item: LabeledCitation | CitationRecord, vocab: Vocabulary,
              max_words: int = MAX_STATEMENT_WORDS) -> FeatureVector:
    """Encode one record against ``vocab``; pure and deterministic.

    Plain :class:`CitationRecord` inputs are leakage-stripped first so the
    prediction stage sees the same distribution the model trained on.
    """
    if isinstance(item, LabeledCitation):
        record = item.record
        citation = record.citation
    else:
        record = item
        citation = strip_leakage(record.citation)

    text = citation_char_text(citation)
    char_ids = tuple(vocab.char_ids.get(ch, UNK_ID) for ch in text)

    words = record.preceding_words[-max_words:]
    token_ids = []
    subwords = []
    for word in words:
        token_id = vocab.token_ids.get(word.lower(), UNK_ID)
        token_ids.append(token_id)
        if token_id == UNK_ID:
            subwords.append(subword_ids(word.lower(), vocab.subword_buckets))
        else:
            subwords.append(())

    tag_index = {tag: i for i, tag in enumerate(vocab.pos_tags)}
    pos_counts = np.zeros(vocab.pos_top, dtype=np.int64)
    for tag in pos_tag(words):
        i = tag_index.get(tag)
        if i is not None:
            pos_counts[i] += 1

    section_onehot = np.zeros(vocab.sections_top, dtype=np.int64)
    normalized = _normalize_section(record.section_path)
    if normalized in vocab.sections:
        section_onehot[vocab.sections.index(normalized)] = 1

    count = record.page_citation_count
    order_scalar = record.order_index / count if count > 0 else 0.0
    return FeatureVector(
        char_ids=char_ids,
        token_ids=tuple(token_ids),
        subword_ids=tuple(subwords),
        pos_counts=pos_counts,
        section_onehot=section_onehot,
        order_scalar=order_scalar,
        totwords_scalar=math.log1p(record.page_total_words),
    )
