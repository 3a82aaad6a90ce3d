"""Crossref works lookup: rate-limited client, cache, replay, and heuristics.

All evaluation and CI paths run against recorded replay fixtures; the live
transport exists for real enrichment runs and is never exercised by tests.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .identifiers import IdentifierRejection, normalize_identifier
from .ratelimit import TokenBucket
from .uniform import CitationRecord

log = logging.getLogger(__name__)

WORKS_URL = "https://api.crossref.org/works"

OK = "ok"
INVALID_HTTP = "invalid_http"
INVALID_PARSE = "invalid_parse"
TRANSIENT = "transient"
SKIPPED_EMPTY_TITLE = "skipped_empty_title"
INVALID_OUTCOMES = (INVALID_HTTP, INVALID_PARSE)


class TransientFailure(Exception):
    """Retries exhausted on 5xx/timeouts."""


class ReplayMiss(Exception):
    """A query was not found in the replay fixture."""


class CacheCorruption(Exception):
    """A cache entry failed verification; carries the offending path."""


@dataclass
class LookupQuery:
    title: str
    first_author: str = ""
    key: str = ""  # provenance key, page_id:order_index

    def __post_init__(self):
        self.title = " ".join(self.title.split())


@dataclass
class CrossrefCandidate:
    doi: str
    score: float
    rank: int
    title: str = ""
    container_title: str = ""
    year: int | None = None


@dataclass
class LookupConfig:
    max_rps: float = 50.0
    retained_results: int = 3
    score_threshold: float = 34.997
    retries: int = 3
    backoff_base: float = 1.0
    cache_dir: str | Path | None = None
    replay_file: str | Path | None = None
    contact_env: str = "WIKICITE_CONTACT"

    def __post_init__(self):
        if not 0 < self.max_rps <= 50:
            raise ValueError("max_rps must be in (0, 50] per provider policy")
        if self.score_threshold < 0:
            raise ValueError("score_threshold must be >= 0")


def build_query(record: CitationRecord) -> LookupQuery | None:
    """Title plus first author; None when the title is empty (skip, counted)."""
    title = " ".join(record.citation.title.split())
    if not title:
        return None
    authors = record.citation.authors
    return LookupQuery(
        title=title,
        first_author=authors[0] if authors else "",
        key=f"{record.page_id}:{record.order_index}",
    )


def canonical_request(query: LookupQuery, rows: int = 3) -> dict:
    request = {"query.bibliographic": query.title, "rows": rows}
    if query.first_author:
        request["query.author"] = query.first_author
    return request


def query_hash(request: dict) -> str:
    payload = json.dumps(request, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


# ---------------------------------------------------------------------------
# Transports


class LiveTransport:
    """HTTP client against the works endpoint behind a shared token bucket."""

    def __init__(self, config: LookupConfig, session=None,
                 clock=time.monotonic, sleep=time.sleep):
        import requests

        self.config = config
        self.session = session or requests.Session()
        self.bucket = TokenBucket(config.max_rps, clock=clock, sleep=sleep)
        self._sleep = sleep
        contact = os.environ.get(config.contact_env, "")
        self.headers = {"User-Agent": "wikicite/0.1" + (f" (mailto:{contact})" if contact else "")}
        self.mailto = contact

    def fetch(self, request: dict) -> tuple[int, str]:
        import requests

        params = dict(request)
        if self.mailto:
            params["mailto"] = self.mailto
        last_exc = None
        for attempt in range(self.config.retries):
            self.bucket.acquire()
            try:
                resp = self.session.get(WORKS_URL, params=params,
                                        headers=self.headers, timeout=30)
            except requests.RequestException as exc:
                last_exc = exc
                self._sleep(self.config.backoff_base * (2 ** attempt))
                continue
            if 500 <= resp.status_code < 600:
                self._sleep(self.config.backoff_base * (2 ** attempt))
                continue
            return resp.status_code, resp.text
        raise TransientFailure(f"retries exhausted for {request!r}: {last_exc}")


class ReplayTransport:
    """Deterministic transport backed by a recorded query->response file.

    The file is line-delimited JSON objects with keys ``query_hash``,
    ``request``, ``response_body`` and ``status``.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self.responses: dict[str, tuple[int, str]] = {}
        with open(self.path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{self.path}:{line_no}: bad replay line: {exc}") from exc
                self.responses[entry["query_hash"]] = (
                    int(entry["status"]), entry["response_body"])

    def fetch(self, request: dict) -> tuple[int, str]:
        h = query_hash(request)
        if h not in self.responses:
            raise ReplayMiss(f"no recorded response for query hash {h}")
        return self.responses[h]


class ResponseCache:
    """One JSON file per query hash; resumable and corruption-checked."""

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, h: str) -> Path:
        return self.dir / f"{h}.json"

    def get(self, h: str):
        path = self._path(h)
        if not path.exists():
            return None
        try:
            with open(path, encoding="utf-8") as fh:
                entry = json.load(fh)
            return int(entry["status"]), entry["response_body"]
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CacheCorruption(
                f"cache entry {path} failed verification ({exc}); "
                "delete the file to re-fetch") from exc

    def put(self, h: str, request: dict, status: int, body: str) -> None:
        path = self._path(h)
        tmp = path.with_suffix(".tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump({"request": request, "status": status, "response_body": body}, fh,
                      ensure_ascii=False)
        tmp.replace(path)


# ---------------------------------------------------------------------------
# Fetching and selection


@dataclass
class LookupResult:
    outcome: str
    candidates: list[CrossrefCandidate] = field(default_factory=list)


def _parse_candidates(body: str, keep: int) -> list[CrossrefCandidate] | None:
    try:
        message = json.loads(body).get("message", {})
        items = message.get("items", [])
    except (json.JSONDecodeError, AttributeError):
        return None
    candidates = []
    for rank, item in enumerate(items[:keep], start=1):
        raw_doi = item.get("DOI", "")
        try:
            doi = normalize_identifier("DOI", raw_doi)
        except IdentifierRejection:
            log.debug("dropping candidate with bad DOI %r", raw_doi)
            continue
        titles = item.get("title") or [""]
        containers = item.get("container-title") or [""]
        year = None
        issued = item.get("issued", {}).get("date-parts", [[None]])
        if issued and issued[0] and issued[0][0]:
            year = int(issued[0][0])
        candidates.append(CrossrefCandidate(
            doi=doi, score=float(item.get("score", 0.0)), rank=rank,
            title=titles[0], container_title=containers[0], year=year))
    return candidates


def fetch_candidates(query: LookupQuery, config: LookupConfig, transport,
                     cache: ResponseCache | None = None) -> LookupResult:
    """Top <=3 candidates for one query, reading through the cache.

    HTTP 4xx and unparseable bodies are INVALID outcomes (counted, not
    fatal); exhausted retries are TRANSIENT and never cached.
    """
    request = canonical_request(query, config.retained_results)
    h = query_hash(request)
    cached = cache.get(h) if cache is not None else None
    if cached is not None:
        status, body = cached
    else:
        try:
            status, body = transport.fetch(request)
        except TransientFailure:
            return LookupResult(TRANSIENT)
        if cache is not None:
            cache.put(h, request, status, body)
    if 400 <= status < 500:
        return LookupResult(INVALID_HTTP)
    if status != 200:
        return LookupResult(TRANSIENT)
    candidates = _parse_candidates(body, config.retained_results)
    if candidates is None:
        return LookupResult(INVALID_PARSE)
    return LookupResult(OK, candidates)


def select_doi(candidates: list[CrossrefCandidate],
               config: LookupConfig) -> str | None:
    """First-result heuristic: rank 1 wins iff its score clears the threshold."""
    if not candidates:
        return None
    first = candidates[0]
    if first.rank != 1:
        return None
    return first.doi if first.score >= config.score_threshold else None


# ---------------------------------------------------------------------------
# Heuristic evaluation over gold pairs


@dataclass
class HeuristicReport:
    table: dict[int, dict[str, int]]  # rank -> matched / not_matched / invalid
    thresholds: list[float]
    precision: list[float]
    recall: list[float]
    chosen_threshold: float
    tuning_precision: float
    tuning_recall: float
    holdout: dict[str, float | int]

    def to_dict(self) -> dict:
        return {
            "table": {str(k): dict(v) for k, v in self.table.items()},
            "thresholds": list(self.thresholds),
            "precision": list(self.precision),
            "recall": list(self.recall),
            "chosen_threshold": self.chosen_threshold,
            "tuning_precision": self.tuning_precision,
            "tuning_recall": self.tuning_recall,
            "holdout": dict(self.holdout),
        }


def _pr_at(threshold: float, pairs: list[tuple[list[CrossrefCandidate], str]],
           total_correct: int):
    """Precision over accepted pairs; recall over the retrievable-correct set.

    Recall is the fraction of pairs whose rank-1 candidate is right that
    still clear the threshold, so it starts at 1.0 and falls while precision
    rises; the two cross at an interior threshold.
    """
    accepted = correct = 0
    for candidates, true_doi in pairs:
        if candidates and candidates[0].score >= threshold:
            accepted += 1
            if candidates[0].doi == true_doi:
                correct += 1
    precision = correct / accepted if accepted else 0.0
    recall = correct / total_correct if total_correct else 0.0
    return precision, recall


def evaluate_heuristics(gold: list[tuple[LookupQuery, str]], config: LookupConfig,
                        transport, cache: ResponseCache | None = None,
                        split: float = 0.8, seed: int = 0) -> HeuristicReport:
    """Rank-1/2/3 heuristic table plus threshold selection on an 80/20 split.

    The chosen threshold minimizes |precision - recall| on the tuning split,
    breaking ties toward the larger precision + recall, then the smaller
    threshold.  Recall is counted against the tuning pairs whose rank-1
    candidate is correct (see :func:`_pr_at`).
    """
    if len(gold) < 50:
        log.warning("gold set has only %d pairs; the threshold will be unstable", len(gold))
    fetched = []
    for query, true_doi in gold:
        true_doi = normalize_identifier("DOI", true_doi)
        result = fetch_candidates(query, config, transport, cache)
        fetched.append((result, true_doi))

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(fetched))
    n_tune = int(round(len(fetched) * split))
    tune = [fetched[i] for i in order[:n_tune]]
    holdout = [fetched[i] for i in order[n_tune:]]

    table = {}
    for rank in (1, 2, 3):
        matched = not_matched = invalid = 0
        for result, true_doi in tune:
            if result.outcome in INVALID_OUTCOMES:
                invalid += 1
            elif result.outcome != OK:
                continue
            elif len(result.candidates) >= rank and result.candidates[rank - 1].doi == true_doi:
                matched += 1
            else:
                not_matched += 1
        table[rank] = {"matched": matched, "not_matched": not_matched, "invalid": invalid}

    usable = [(r.candidates, true) for r, true in tune if r.outcome == OK]
    total_correct = sum(1 for cands, true in usable
                        if cands and cands[0].doi == true)
    grid = sorted({cands[0].score for cands, _ in usable if cands})
    precision, recall = [], []
    for threshold in grid:
        p, r = _pr_at(threshold, usable, total_correct)
        precision.append(p)
        recall.append(r)
    if grid:
        best = min(range(len(grid)),
                   key=lambda i: (abs(precision[i] - recall[i]),
                                  -(precision[i] + recall[i]), grid[i]))
        chosen = grid[best]
        tune_p, tune_r = precision[best], recall[best]
    else:
        chosen, tune_p, tune_r = config.score_threshold, 0.0, 0.0

    ho = {"accepted_correct": 0, "accepted_wrong": 0, "rejected_correct": 0,
          "rejected_wrong": 0, "invalid": 0}
    for result, true_doi in holdout:
        if result.outcome in INVALID_OUTCOMES:
            ho["invalid"] += 1
            continue
        if result.outcome != OK:
            continue
        cands = result.candidates
        hit = bool(cands) and cands[0].doi == true_doi
        if cands and cands[0].score >= chosen:
            ho["accepted_correct" if hit else "accepted_wrong"] += 1
        else:
            ho["rejected_correct" if hit else "rejected_wrong"] += 1
    accepted = ho["accepted_correct"] + ho["accepted_wrong"]
    ho["precision"] = ho["accepted_correct"] / accepted if accepted else 0.0
    correct_total = ho["accepted_correct"] + ho["rejected_correct"]
    ho["recall"] = ho["accepted_correct"] / correct_total if correct_total else 0.0

    return HeuristicReport(
        table=table, thresholds=list(grid), precision=precision, recall=recall,
        chosen_threshold=chosen, tuning_precision=tune_p, tuning_recall=tune_r,
        holdout=ho,
    )


# ---------------------------------------------------------------------------
# Corpus enrichment


@dataclass
class EnrichmentRow:
    key: str
    outcome: str  # ok / none / invalid_* / transient / skipped_empty_title
    doi: str = ""
    score: float = 0.0
    rank: int = 0

    def to_dict(self) -> dict:
        return {"key": self.key, "outcome": self.outcome, "doi": self.doi,
                "score": self.score, "rank": self.rank}


@dataclass
class LookupReport:
    eligible: int = 0
    queried: int = 0
    matched: int = 0
    unmatched: int = 0
    invalid: int = 0
    transient: int = 0
    skipped_empty_title: int = 0
    unique_dois: int = 0

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def enrich_corpus(records: list[CitationRecord], eligible_keys: set[str],
                  config: LookupConfig, transport,
                  cache: ResponseCache | None = None):
    """Attach Crossref DOIs to eligible journal citations lacking one.

    ``eligible_keys`` holds ``page_id:order_index`` keys of citations
    classified as journal articles.  Returns ``(rows, report)`` in input
    order; with a warm cache a re-run issues no further network calls.
    """
    rows: list[EnrichmentRow] = []
    report = LookupReport()
    dois = set()
    for record in records:
        key = f"{record.page_id}:{record.order_index}"
        if key not in eligible_keys or "DOI" in record.citation.id_list:
            continue
        report.eligible += 1
        query = build_query(record)
        if query is None:
            report.skipped_empty_title += 1
            rows.append(EnrichmentRow(key=key, outcome=SKIPPED_EMPTY_TITLE))
            continue
        report.queried += 1
        result = fetch_candidates(query, config, transport, cache)
        if result.outcome in INVALID_OUTCOMES:
            report.invalid += 1
            rows.append(EnrichmentRow(key=key, outcome=result.outcome))
            continue
        if result.outcome == TRANSIENT:
            report.transient += 1
            rows.append(EnrichmentRow(key=key, outcome=TRANSIENT))
            continue
        doi = select_doi(result.candidates, config)
        if doi is None:
            report.unmatched += 1
            rows.append(EnrichmentRow(key=key, outcome="none"))
        else:
            report.matched += 1
            dois.add(doi)
            first = result.candidates[0]
            rows.append(EnrichmentRow(key=key, outcome=OK, doi=doi,
                                      score=first.score, rank=first.rank))
    report.unique_dois = len(dois)
    return rows, report


def apply_enrichment(records: list[CitationRecord], rows: list[EnrichmentRow]) -> int:
    """Write matched DOIs into the records' identifier lists; returns count."""
    by_key = {row.key: row for row in rows if row.outcome == OK}
    applied = 0
    for record in records:
        key = f"{record.page_id}:{record.order_index}"
        row = by_key.get(key)
        if row is not None and "DOI" not in record.citation.id_list:
            record.citation.id_list["DOI"] = row.doi
            applied += 1
    return applied
