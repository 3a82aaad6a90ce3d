from collections import Counter

import pytest

from wikicite.uniform import (UNIFORM_KEYS, AliasTable, CitationRecord,
                              UniformCitation, default_aliases, map_to_uniform,
                              record_from_raw)
from wikicite.wikicode import extract_citations, tokenize_templates


def call(text):
    return tokenize_templates(text)[0]


def test_schema_has_exactly_29_keys():
    assert len(UNIFORM_KEYS) == 29
    assert len(set(UNIFORM_KEYS)) == 29


class TestAppendixPair:
    def test_author_form(self):
        u = map_to_uniform(call("{{citation|author=John Smith|accessdate=February 17, 2006}}"))
        assert u.type == "citation"
        assert u.authors == ["John Smith"]
        assert u.access_date == "February 17, 2006"

    def test_creator_form_lands_in_same_field(self):
        u1 = map_to_uniform(call("{{citation|author=John Smith|accessdate=February 17, 2006}}"))
        u2 = map_to_uniform(call("{{citation|creator=John Smith|accessdate=September 15, 2006}}"))
        assert u2.authors == u1.authors
        assert u2.access_date == "September 15, 2006"
        assert u2.type == u1.type


def test_empty_template_all_keys_empty():
    u = map_to_uniform(call("{{cite web}}"))
    assert u.type == "cite web"
    for key in UNIFORM_KEYS:
        value = getattr(u, key)
        if key == "type":
            continue
        assert value in ("", [], {}), (key, value)


def test_key_stability_every_record_has_all_29():
    for text in ("{{cite web}}", "{{cite book|title=X|isbn=0306406152}}",
                 "{{cite journal|journal=J|doi=10.1/a|volume=3}}"):
        d = map_to_uniform(call(text)).to_dict()
        assert list(d.keys()) == list(UNIFORM_KEYS)


def test_identifier_rejection_excluded_and_counted():
    counters = Counter()
    u = map_to_uniform(call("{{cite book|title=X|isbn=12345|oclc=99}}"),
                       counters=counters)
    assert "ISBN" not in u.id_list
    assert u.id_list["OCLC"] == "99"
    assert counters["rejected_identifiers"] == 1


def test_multivalued_identifier_keeps_first():
    counters = Counter()
    u = map_to_uniform(call("{{cite book|isbn=0306406152|isbn2=9780306406157}}"),
                       counters=counters)
    assert u.id_list["ISBN"] == "0306406152"
    # isbn2 is not a known alias; it lands in the unknown counter
    assert counters["unknown_params"] == 1
    counters = Counter()
    u = map_to_uniform(call("{{cite journal|doi=10.1/a|doi=10.1/b}}"),
                       counters=counters)
    # duplicate keys collapse at parse time, last value wins there
    assert u.id_list["DOI"] == "10.1/b"


def test_unknown_params_counted():
    counters = Counter()
    map_to_uniform(call("{{cite web|unheard-of=1|other junk=2|title=T}}"),
                   counters=counters)
    assert counters["unknown_params"] == 2


def test_author_assembly_orders():
    u = map_to_uniform(call("{{cite book|last1=Smith|first1=John|last2=Doe|first2=Jane}}"))
    assert u.authors == ["Smith, John", "Doe, Jane"]
    u = map_to_uniform(call("{{cite book|last=Solo}}"))
    assert u.authors == ["Solo"]
    u = map_to_uniform(call("{{cite journal|vauthors=Smith J, Doe K}}"))
    assert u.authors == ["Smith J", "Doe K"]
    u = map_to_uniform(call("{{cite book|author1=A One|author2=B Two}}"))
    assert u.authors == ["A One", "B Two"]


def test_periodical_aliases():
    for param in ("journal", "magazine", "periodical"):
        u = map_to_uniform(call("{{citation|%s=The Venue}}" % param))
        assert u.periodical == "The Venue", param
    u = map_to_uniform(call("{{cite news|newspaper=The Daily}}"))
    assert u.newspaper == "The Daily" and u.periodical == ""


def test_url_top_level_domain_derived():
    u = map_to_uniform(call("{{cite web|url=https://www.nytimes.com/a}}"))
    assert u.url_top_level_domain == "nytimes"
    u = map_to_uniform(call("{{cite web|title=no url}}"))
    assert u.url_top_level_domain == ""


def test_per_template_override_arxiv_eprint():
    u = map_to_uniform(call("{{cite arxiv|eprint=1234.56789|title=Preprint}}"))
    assert u.id_list["ARXIV"] == "1234.56789"
    # eprint means nothing on other templates
    counters = Counter()
    u = map_to_uniform(call("{{cite web|eprint=1234.56789}}"), counters=counters)
    assert u.id_list == {} and counters["unknown_params"] == 1


def test_totality_over_fixture_corpus(fixture_dump_path, templates):
    from wikicite.dump_ingest import is_citable_article, stream_pages
    count = 0
    for page in stream_pages(fixture_dump_path):
        if not is_citable_article(page):
            continue
        for raw in extract_citations(page, templates):
            record = record_from_raw(raw)
            assert isinstance(record, CitationRecord)
            assert record.citation.type == raw.template.name
            assert record.page_id == page.page_id
            count += 1
    assert count > 0


def test_record_roundtrip_through_dict():
    u = map_to_uniform(call("{{cite journal|title=T|journal=J|doi=10.1/a|last=K|first=L}}"))
    record = CitationRecord(citation=u, page_id=5, page_title="P",
                            section_path="LEAD", order_index=2,
                            preceding_words=["a", "b"], page_total_words=10,
                            page_citation_count=3)
    again = CitationRecord.from_dict(record.to_dict())
    assert again == record


def test_alias_table_loadable_and_routed(tmp_path):
    table = default_aliases()
    assert table.route("cite web", "accessdate") == "access_date"
    assert table.route("cite arxiv", "eprint") == "id:ARXIV"
    custom = tmp_path / "aliases.json"
    custom.write_text('{"common": {"title": "title"}, "per_template": {}}')
    small = AliasTable.load(custom)
    assert small.route("cite web", "title") == "title"
    assert small.route("cite web", "author") is None


def test_unsupported_by_caller_contract():
    # map_to_uniform trusts its caller to filter; an unknown template still
    # maps, carrying its name as the type
    u = map_to_uniform(call("{{made up thing|title=X}}"))
    assert u.type == "made up thing"
