import json
from pathlib import Path

import numpy as np
import pytest

from wikicite.labeling import (BOOK, JOURNAL_ARTICLE, WEB_CONTENT,
                               LabeledCitation, strip_leakage)
from wikicite.uniform import CitationRecord, UniformCitation
from wikicite.wikicode import load_template_config

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def fixture_dump_path() -> Path:
    return DATA / "fixture_dump.xml"


@pytest.fixture(scope="session")
def fixture_annotations() -> dict:
    with open(DATA / "fixture_annotations.json", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def templates() -> dict:
    return load_template_config()


@pytest.fixture(scope="session")
def replay_path() -> Path:
    return DATA / "crossref_replay.jsonl"


@pytest.fixture(scope="session")
def gold_path() -> Path:
    return DATA / "crossref_gold.jsonl"


# ---------------------------------------------------------------------------
# Synthetic corpora used by several suites


_BOOK_WORDS = ["chronicle", "monograph", "chapter", "archive", "edition",
               "volume", "press", "manuscript"]
_JOUR_WORDS = ["study", "trial", "analysis", "hypothesis", "experiment",
               "dataset", "finding", "measurement"]
_WEB_WORDS = ["video", "interview", "website", "stream", "chart", "episode",
              "blog", "review"]
_COMMON = ["the", "a", "of", "in", "was", "and", "to", "for", "with", "by"]


def make_labeled_item(label: str, idx: int, rng) -> LabeledCitation:
    """One separable synthetic training example for the given class."""
    if label == BOOK:
        words, publisher, periodical = _BOOK_WORDS, "Halcyon Press", ""
    elif label == JOURNAL_ARTICLE:
        words, publisher, periodical = _JOUR_WORDS, "", "Journal of Results"
    else:
        words, publisher, periodical = _WEB_WORDS, "", ""
    statement = []
    for _ in range(20):
        pool = words if rng.random() < 0.6 else _COMMON
        statement.append(pool[int(rng.integers(0, len(pool)))])
    citation = UniformCitation(
        title=f"{words[idx % len(words)].title()} {idx}",
        authors=[f"Author {idx % 13}"],
        publisher=publisher, periodical=periodical,
        year=str(1960 + idx % 60),
    )
    record = CitationRecord(
        citation=strip_leakage(citation),
        page_id=idx, page_title=f"Page {idx}",
        section_path=["LEAD", "History", "Reception"][idx % 3],
        order_index=idx % 7, preceding_words=statement,
        page_total_words=200 + idx, page_citation_count=7,
    )
    return LabeledCitation(record=record, label=label)


@pytest.fixture(scope="session")
def separable_dataset() -> list:
    """300 synthetic examples, 100 per class, separable by construction."""
    rng = np.random.default_rng(42)
    dataset = []
    for i in range(100):
        dataset.append(make_labeled_item(BOOK, i, rng))
        dataset.append(make_labeled_item(JOURNAL_ARTICLE, i, rng))
        dataset.append(make_labeled_item(WEB_CONTENT, i, rng))
    return dataset


def make_report_corpus(n: int = 200, seed: int = 11):
    """Deterministic mixed corpus for the report arithmetic checks.

    Returns (records, class_map) where class_map mimics the pipeline's
    known/predicted assignment.
    """
    rng = np.random.default_rng(seed)
    journals = ["nature", "science", "cell", "local annals", "field notes"]
    records = []
    class_map = {}
    for i in range(n):
        page_id = int(rng.integers(1, 40))
        roll = rng.random()
        ids = {}
        periodical = ""
        label = None
        if roll < 0.35:
            label = JOURNAL_ARTICLE
            periodical = journals[int(rng.integers(0, len(journals)))]
            ids["DOI"] = f"10.7777/r.{int(rng.integers(0, 150)):03d}"
            if rng.random() < 0.3:
                ids["PMID"] = str(int(rng.integers(1, 99999)))
            if rng.random() < 0.15:
                ids["PMC"] = str(int(rng.integers(1, 9999)))
        elif roll < 0.6:
            label = BOOK
            ids["ISBN"] = "0306406152"
            if rng.random() < 0.2:
                ids["OCLC"] = str(int(rng.integers(1, 99999)))
        elif roll < 0.8:
            label = WEB_CONTENT
        else:
            label = None
        if rng.random() < 0.1:
            ids["ARXIV"] = f"{int(rng.integers(1000, 2000))}.{int(rng.integers(10000, 60000))}"
        year = ""
        if rng.random() < 0.85:
            year = str(int(rng.integers(1500, 2021)))
        citation = UniformCitation(
            type="cite journal" if label == JOURNAL_ARTICLE else "cite web",
            title=f"Title {i}", periodical=periodical, year=year, id_list=ids,
        )
        record = CitationRecord(
            citation=citation, page_id=page_id, page_title=f"P{page_id}",
            section_path="LEAD", order_index=i,
            preceding_words=["some", "words"], page_total_words=100,
            page_citation_count=5,
        )
        records.append(record)
        if label is not None:
            source = "known" if rng.random() < 0.7 else "predicted"
            class_map[f"{page_id}:{i}"] = (label, source)
    return records, class_map
