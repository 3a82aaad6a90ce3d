"""wikicite: citation extraction, harmonization, classification and DOI lookup
for MediaWiki XML dumps."""

from .dump_ingest import DumpSource, WikiPage, is_citable_article, stream_pages
from .identifiers import IdentifierRejection, normalize_identifier, top_level_domain
from .labeling import (CLASS_LABELS, LabeledCitation, assign_label,
                       build_training_set, strip_leakage)
from .uniform import (AliasTable, CitationRecord, UNIFORM_KEYS,
                      UniformCitation, map_to_uniform)
from .wikicode import (RawCitation, TemplateCall, extract_citations,
                       load_template_config, plain_text_context,
                       render_template, tokenize_templates)

__version__ = "0.1.0"

__all__ = [
    "AliasTable", "CLASS_LABELS", "CitationRecord", "DumpSource",
    "IdentifierRejection", "LabeledCitation", "RawCitation", "TemplateCall",
    "UNIFORM_KEYS", "UniformCitation", "WikiPage", "assign_label",
    "build_training_set", "extract_citations", "is_citable_article",
    "load_template_config", "map_to_uniform", "normalize_identifier",
    "plain_text_context", "render_template", "stream_pages", "strip_leakage",
    "tokenize_templates", "top_level_domain", "__version__",
]
