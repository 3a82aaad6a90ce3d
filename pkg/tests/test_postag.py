from wikicite.postag import (PerceptronTagger, RuleTagger, load_seed_corpus,
                             pos_tag)


class TestRuleTagger:
    def setup_method(self):
        self.tagger = RuleTagger()

    def test_canonical_sentence(self):
        assert self.tagger.tag(["The", "city", "was", "founded"]) == \
            ["DT", "NN", "VBD", "VBN"]

    def test_empty(self):
        assert self.tagger.tag([]) == []

    def test_numeric_token_with_period(self):
        assert self.tagger.tag(["1204."]) == ["CD"]

    def test_suffix_rules(self):
        assert self.tagger.tag(["quickly"]) == ["RB"]
        assert self.tagger.tag(["running"]) == ["VBG"]
        assert self.tagger.tag(["arguments"]) == ["NNS"]
        assert self.tagger.tag(["government"]) == ["NN"]
        assert self.tagger.tag(["famous"]) == ["JJ"]

    def test_ed_context(self):
        # simple past without an auxiliary, participle after be/have
        assert self.tagger.tag(["They", "walked"]) == ["PRP", "VBD"]
        assert self.tagger.tag(["It", "was", "walked"])[-1] == "VBN"
        assert self.tagger.tag(["has", "opened"])[-1] == "VBN"

    def test_midsentence_capital_is_proper(self):
        tags = self.tagger.tag(["in", "Paris", "today"])
        assert tags[1] == "NNP"

    def test_deterministic(self):
        tokens = "The results were published in a famous journal in 2003.".split()
        assert self.tagger.tag(tokens) == self.tagger.tag(tokens)


class TestPerceptronTagger:
    def test_shipped_weights_canonical_sentence(self):
        tagger = PerceptronTagger.load()
        assert tagger.tag(["The", "city", "was", "founded"]) == \
            ["DT", "NN", "VBD", "VBN"]

    def test_numbers_fixed(self):
        tagger = PerceptronTagger.load()
        assert tagger.tag(["1204."]) == ["CD"]
        assert tagger.tag(["in", "1987", "and", "2003."])[1] == "CD"

    def test_deterministic(self):
        tagger = PerceptronTagger.load()
        tokens = "Researchers published the results in a leading journal.".split()
        assert tagger.tag(tokens) == tagger.tag(tokens)

    def test_training_reaches_seed_corpus(self):
        corpus = load_seed_corpus()
        assert len(corpus) >= 60
        tagger = PerceptronTagger()
        tagger.train(corpus, epochs=6, seed=7)
        right = total = 0
        for sent in corpus:
            pred = tagger.tag([w for w, _ in sent])
            right += sum(t == p for (_, t), p in zip(sent, pred))
            total += len(sent)
        assert right / total > 0.97

    def test_save_load_roundtrip(self, tmp_path):
        corpus = load_seed_corpus()[:20]
        tagger = PerceptronTagger()
        tagger.train(corpus, epochs=4, seed=1)
        path = tmp_path / "weights.json"
        tagger.save(path)
        again = PerceptronTagger.load(path)
        tokens = ["The", "station", "closed", "in", "1966."]
        assert again.tag(tokens) == tagger.tag(tokens)

    def test_empty(self):
        assert PerceptronTagger.load().tag([]) == []


def test_pos_tag_module_default():
    assert pos_tag([]) == []
    assert pos_tag(["The", "city", "was", "founded"]) == ["DT", "NN", "VBD", "VBN"]
    # one tag per token, always
    tokens = "Unknown glorps frobbed the zax.".split()
    assert len(pos_tag(tokens)) == len(tokens)
