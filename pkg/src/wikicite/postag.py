"""Self-contained part-of-speech taggers over the Penn Treebank tagset.

Two implementations with the same interface: a deterministic suffix/lexicon
rule tagger (no weights needed) and an averaged perceptron trained on the
small tagged corpus shipped with the package.  The perceptron is the default
when its weights file is available.
"""

from __future__ import annotations

import json
import random
import re
from collections import defaultdict
from importlib import resources

_PUNCT_TAGS = {
    ".": ".", ",": ",", ":": ":", ";": ":", "?": ".", "!": ".",
    "(": "-LRB-", ")": "-RRB-", "``": "``", "''": "''", '"': "''",
    "$": "$", "#": "#", "--": ":", "-": ":",
}

_LEXICON = {
    "the": "DT", "a": "DT", "an": "DT", "this": "DT", "that": "DT",
    "these": "DT", "those": "DT", "each": "DT", "every": "DT", "some": "DT",
    "any": "DT", "no": "DT", "all": "PDT", "both": "DT", "another": "DT",
    "of": "IN", "in": "IN", "on": "IN", "at": "IN", "by": "IN", "for": "IN",
    "with": "IN", "from": "IN", "into": "IN", "during": "IN", "after": "IN",
    "before": "IN", "between": "IN", "under": "IN", "over": "IN",
    "through": "IN", "against": "IN", "about": "IN", "as": "IN",
    "until": "IN", "since": "IN", "near": "IN", "among": "IN",
    "and": "CC", "or": "CC", "but": "CC", "nor": "CC", "yet": "CC",
    "to": "TO",
    "is": "VBZ", "are": "VBP", "was": "VBD", "were": "VBD", "be": "VB",
    "been": "VBN", "being": "VBG", "am": "VBP",
    "has": "VBZ", "have": "VBP", "had": "VBD", "having": "VBG",
    "does": "VBZ", "do": "VBP", "did": "VBD", "done": "VBN",
    "will": "MD", "would": "MD", "can": "MD", "could": "MD", "may": "MD",
    "might": "MD", "shall": "MD", "should": "MD", "must": "MD",
    "not": "RB", "n't": "RB", "also": "RB", "very": "RB", "well": "RB",
    "then": "RB", "now": "RB", "here": "RB", "there": "EX", "however": "RB",
    "he": "PRP", "she": "PRP", "it": "PRP", "they": "PRP", "we": "PRP",
    "i": "PRP", "you": "PRP", "him": "PRP", "her": "PRP$", "them": "PRP",
    "his": "PRP$", "its": "PRP$", "their": "PRP$", "our": "PRP$",
    "who": "WP", "whom": "WP", "whose": "WP$", "which": "WDT", "what": "WP",
    "when": "WRB", "where": "WRB", "why": "WRB", "how": "WRB",
    "more": "JJR", "most": "JJS", "less": "JJR", "least": "JJS",
    "first": "JJ", "new": "JJ", "other": "JJ", "such": "JJ", "many": "JJ",
    "one": "CD", "two": "CD", "three": "CD", "four": "CD", "five": "CD",
    "six": "CD", "seven": "CD", "eight": "CD", "nine": "CD", "ten": "CD",
}

_BE_HAVE = {"is", "are", "was", "were", "be", "been", "being", "am",
            "has", "have", "had", "having"}

_NUMBER_RE = re.compile(r"^[+-]?\d[\d,]*(\.\d*)?\.?$|^\d+(st|nd|rd|th)$")
_TRAILING_PUNCT = ",.;:!?\"')]"


def _core(token: str) -> str:
    """Statement words are whitespace-split, so trailing punctuation sticks."""
    stripped = token.rstrip(_TRAILING_PUNCT)
    return stripped if stripped else token


class RuleTagger:
    """Deterministic lexicon + suffix tagger; the no-weights fallback."""

    def tag(self, tokens: list[str]) -> list[str]:
        tags: list[str] = []
        for i, token in enumerate(tokens):
            tags.append(self._tag_one(token, i, tokens, tags))
        return tags

    def _tag_one(self, token: str, i: int, tokens: list[str], tags: list[str]) -> str:
        if token in _PUNCT_TAGS:
            return _PUNCT_TAGS[token]
        token = _core(token)
        lower = token.lower()
        if _NUMBER_RE.match(token):
            return "CD"
        if lower in _LEXICON:
            return _LEXICON[lower]
        if token[:1].isupper() and i > 0:
            return "NNP"
        if lower.endswith("ly"):
            return "RB"
        if lower.endswith("ing") and len(lower) > 4:
            return "VBG"
        if lower.endswith("ed") and len(lower) > 3:
            # participle after a form of be/have, simple past otherwise
            prev = _core(tokens[i - 1]).lower() if i > 0 else ""
            return "VBN" if prev in _BE_HAVE else "VBD"
        if lower.endswith(("tion", "ment", "ness", "ity", "ism", "ance", "ence")):
            return "NN"
        if lower.endswith(("ous", "ful", "ive", "able", "ible", "al", "ic", "ian")):
            return "JJ"
        if lower.endswith("est") and len(lower) > 4:
            return "JJS"
        if lower.endswith("s") and not lower.endswith(("ss", "us", "is")):
            return "NNS"
        return "NN"


class PerceptronTagger:
    """Greedy averaged perceptron tagger (Collins-style updates)."""

    START = ("-START-", "-START2-")
    END = ("-END-", "-END2-")

    def __init__(self):
        self.weights: dict[str, dict[str, float]] = {}
        self.tagdict: dict[str, str] = {}
        self.classes: list[str] = []

    # -- inference ---------------------------------------------------------

    def tag(self, tokens: list[str]) -> list[str]:
        prev, prev2 = self.START
        tags = []
        context = list(self.START) + [self._normalize(t) for t in tokens] + list(self.END)
        for i, token in enumerate(tokens):
            guess = self._fixed_tag(token) or self.tagdict.get(_core(token).lower())
            if guess is None:
                feats = self._features(i, token, context, prev, prev2)
                guess = self._predict(feats)
            tags.append(guess)
            prev2, prev = prev, guess
        return tags

    @staticmethod
    def _fixed_tag(token: str) -> str | None:
        # numbers and bare punctuation are unambiguous; no need to score them
        if token in _PUNCT_TAGS:
            return _PUNCT_TAGS[token]
        if _NUMBER_RE.match(_core(token)):
            return "CD"
        return None

    def _predict(self, feats: dict[str, int]) -> str:
        scores: dict[str, float] = defaultdict(float)
        for feat, value in feats.items():
            if feat not in self.weights:
                continue
            for tag, weight in self.weights[feat].items():
                scores[tag] += value * weight
        if not scores:
            return "NN"
        return max(self.classes, key=lambda tag: (scores[tag], tag))

    # -- training ----------------------------------------------------------

    def train(self, sentences: list[list[tuple[str, str]]], epochs: int = 8,
              seed: int = 7) -> None:
        self._make_tagdict(sentences)
        self.classes = sorted({tag for sent in sentences for _, tag in sent})
        totals: dict[tuple[str, str], float] = defaultdict(float)
        tstamps: dict[tuple[str, str], int] = defaultdict(int)
        instances = 0
        rng = random.Random(seed)
        data = list(sentences)
        for _ in range(epochs):
            rng.shuffle(data)
            for sent in data:
                tokens = [w for w, _ in sent]
                context = list(self.START) + [self._normalize(t) for t in tokens] + list(self.END)
                prev, prev2 = self.START
                for i, (token, truth) in enumerate(sent):
                    guess = self._fixed_tag(token) or self.tagdict.get(_core(token).lower())
                    if guess is None:
                        feats = self._features(i, token, context, prev, prev2)
                        guess = self._predict(feats)
                        instances += 1
                        if guess != truth:
                            for feat in feats:
                                self._update(totals, tstamps, instances, feat, truth, 1.0)
                                self._update(totals, tstamps, instances, feat, guess, -1.0)
                    prev2, prev = prev, guess
        # average the weights over all update timestamps
        for feat, tag_weights in self.weights.items():
            for tag, weight in tag_weights.items():
                key = (feat, tag)
                total = totals[key] + (instances - tstamps[key]) * weight
                averaged = total / instances if instances else weight
                tag_weights[tag] = round(averaged, 6)

    def _update(self, totals, tstamps, instances, feat, tag, delta) -> None:
        key = (feat, tag)
        weight = self.weights.setdefault(feat, {}).get(tag, 0.0)
        totals[key] += (instances - tstamps[key]) * weight
        tstamps[key] = instances
        self.weights[feat][tag] = weight + delta

    def _make_tagdict(self, sentences) -> None:
        counts: dict[str, dict[str, int]] = defaultdict(lambda: defaultdict(int))
        for sent in sentences:
            for word, tag in sent:
                counts[_core(word).lower()][tag] += 1
        for word, tag_counts in counts.items():
            tag, count = max(tag_counts.items(), key=lambda kv: (kv[1], kv[0]))
            total = sum(tag_counts.values())
            # only unambiguous, reasonably frequent words bypass the model
            if total >= 3 and count / total >= 0.97:
                self.tagdict[word] = tag

    # -- features ----------------------------------------------------------

    @staticmethod
    def _normalize(token: str) -> str:
        token = _core(token)
        if token.isdigit():
            return "!DIGITS" if len(token) != 4 else "!YEAR"
        if any(c.isdigit() for c in token):
            return "!MIXED"
        return token.lower()

    def _features(self, i: int, token: str, context: list[str],
                  prev: str, prev2: str) -> dict[str, int]:
        j = i + 2  # context is padded with two start markers
        word = self._normalize(token)
        feats = {
            "bias": 1,
            "w=" + word: 1,
            "suf3=" + word[-3:]: 1,
            "suf2=" + word[-2:]: 1,
            "pre1=" + word[:1]: 1,
            "t-1=" + prev: 1,
            "t-2=" + prev2: 1,
            "t-1w=" + prev + "+" + word: 1,
            "w-1=" + context[j - 1]: 1,
            "w+1=" + context[j + 1]: 1,
            "w-1suf3=" + context[j - 1][-3:]: 1,
            "w+1suf3=" + context[j + 1][-3:]: 1,
        }
        if token[:1].isupper() and i > 0:
            feats["title"] = 1
        if "-" in token:
            feats["hyphen"] = 1
        return feats

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        blob = {"weights": self.weights, "tagdict": self.tagdict, "classes": self.classes}
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(blob, fh, sort_keys=True, separators=(",", ":"))

    @classmethod
    def load(cls, path=None) -> "PerceptronTagger":
        if path is None:
            text = resources.files("wikicite.data").joinpath("tagger_weights.json").read_text()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        blob = json.loads(text)
        tagger = cls()
        tagger.weights = blob["weights"]
        tagger.tagdict = blob["tagdict"]
        tagger.classes = blob["classes"]
        return tagger


def load_seed_corpus(path=None) -> list[list[tuple[str, str]]]:
    """The bundled word_TAG training sentences for the perceptron."""
    if path is None:
        text = resources.files("wikicite.data").joinpath("tagger_seed.txt").read_text()
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    sentences = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        pairs = []
        for item in line.split():
            word, _, tag = item.rpartition("_")
            pairs.append((word, tag))
        sentences.append(pairs)
    return sentences


_DEFAULT_TAGGER = None


def pos_tag(tokens: list[str]) -> list[str]:
    """Tag with the shipped perceptron, falling back to the rule tagger."""
    global _DEFAULT_TAGGER
    if _DEFAULT_TAGGER is None:
        try:
            _DEFAULT_TAGGER = PerceptronTagger.load()
        except (FileNotFoundError, KeyError, json.JSONDecodeError):
            _DEFAULT_TAGGER = RuleTagger()
    if not tokens:
        return []
    return _DEFAULT_TAGGER.tag(tokens)
