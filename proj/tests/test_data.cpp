#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mtl/data.hpp"

using namespace mtl;
using data::Sentence;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name, const std::string& content)
        : path("/tmp/" + name) {
        std::ofstream out(path, std::ios::trunc);
        out << content;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("conllu reader transcribes a two-token sentence") {
    TempFile f("mtl_two.conllu",
               "# sent_id = demo-1\n"
               "1\tThe\t_\tDET\t_\t_\t2\tdet\t_\t_\n"
               "2\tcat\t_\tNOUN\t_\t_\t0\troot\t_\t_\n"
               "\n");
    auto sents = data::read_conllu(f.path);
    REQUIRE(sents.size() == 1);
    const Sentence& s = sents[0];
    CHECK(s.id == "demo-1");
    CHECK(s.tokens == std::vector<std::string>{"The", "cat"});
    CHECK(s.upos == std::vector<std::string>{"DET", "NOUN"});
    CHECK(s.heads == std::vector<int>{2, 0});
    CHECK(s.deprels == std::vector<std::string>{"det", "root"});
    CHECK(!s.has_semtags());
}

TEST_CASE("conllu reader skips comments, ranges, and empty nodes") {
    TempFile f("mtl_skip.conllu",
               "# newdoc\n"
               "# comment\n"
               "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\n"
               "1\tdo\t_\tAUX\t_\t_\t0\troot\t_\t_\n"
               "1.1\tghost\t_\t_\t_\t_\t_\t_\t_\t_\n"
               "2\tnot\t_\tPART\t_\t_\t1\tadvmod\t_\t_\n"
               "\n");
    auto sents = data::read_conllu(f.path);
    REQUIRE(sents.size() == 1);
    CHECK(sents[0].tokens == std::vector<std::string>{"do", "not"});
}

TEST_CASE("conllu file with only comments yields an empty list") {
    TempFile f("mtl_comments.conllu", "# a\n# b\n");
    CHECK(data::read_conllu(f.path).empty());
}

TEST_CASE("conllu errors carry line numbers") {
    SUBCASE("non-integer head") {
        TempFile f("mtl_badhead.conllu", "1\tx\t_\tX\t_\t_\tzz\tdep\t_\t_\n\n");
        CHECK_THROWS_WITH_AS(data::read_conllu(f.path), "line 1: non-integer HEAD 'zz'",
                             ParseError);
    }
    SUBCASE("wrong column count") {
        TempFile f("mtl_badcols.conllu", "1\tx\tX\n\n");
        CHECK_THROWS_WITH_AS(data::read_conllu(f.path), "line 1: expected 10 columns, got 3",
                             ParseError);
    }
}

TEST_CASE("conllu round trip preserves sentence values, semtags included") {
    TempFile f("mtl_round.conllu",
               "# sent_id = r1\n"
               "1\tbirds\t_\tNOUN\t_\t_\t2\tnsubj\t_\tSemTag=CON\n"
               "2\tsing\t_\tVERB\t_\t_\t0\troot\t_\tSemTag=ENS\n"
               "\n"
               "# sent_id = r2\n"
               "1\thello\t_\tINTJ\t_\t_\t0\troot\t_\tSemTag=GRE\n"
               "\n");
    auto first = data::read_conllu(f.path);
    REQUIRE(first.size() == 2);
    CHECK(first[0].semtags == std::vector<std::string>{"CON", "ENS"});

    std::string out_path = "/tmp/mtl_round_out.conllu";
    data::write_conllu(out_path, first);
    auto second = data::read_conllu(out_path);
    CHECK(first == second);
    std::remove(out_path.c_str());
}

TEST_CASE("semtag tsv reader and round trip") {
    TempFile f("mtl_tags.tsv", "the\tDEF\ncat\tCON\n\nbirds\tCON\nsing\tENS\n\n");
    auto sents = data::read_semtag_tsv(f.path);
    REQUIRE(sents.size() == 2);
    CHECK(sents[0].tokens == std::vector<std::string>{"the", "cat"});
    CHECK(sents[0].semtags == std::vector<std::string>{"DEF", "CON"});

    std::string out_path = "/tmp/mtl_tags_out.tsv";
    data::write_semtag_tsv(out_path, sents);
    auto again = data::read_semtag_tsv(out_path);
    CHECK(sents == again);
    std::remove(out_path.c_str());
}

TEST_CASE("semtag tsv accepts the published tag inventory; unknown tags warn") {
    std::vector<std::string> tagset = {"DEF", "HAS", "COL", "QUC", "IST", "REL", "CON", "ALT",
                                       "DIS", "SUB", "ENS", "EPS", "EXG", "EXS", "NOW"};
    TempFile f("mtl_inv.tsv", "the\tDEF\nred\tCOL\ncat\tCON\nwalks\tENS\n\nodd\tZZZ\n\n");
    std::ostringstream warn;
    auto sents = data::read_semtag_tsv(f.path, &tagset, &warn);
    REQUIRE(sents.size() == 2);
    CHECK(sents[1].semtags[0] == "ZZZ");  // open world: kept
    CHECK(warn.str().find("ZZZ") != std::string::npos);
}

TEST_CASE("semtag tsv errors and empty input") {
    TempFile empty("mtl_empty.tsv", "");
    CHECK(data::read_semtag_tsv(empty.path).empty());
    TempFile bad("mtl_bad.tsv", "token-without-tab\n");
    CHECK_THROWS_WITH_AS(data::read_semtag_tsv(bad.path), "line 1: expected token<TAB>tag",
                         ParseError);
}

TEST_CASE("nli jsonl reader") {
    TempFile f("mtl_nli.jsonl",
               R"({"pairID": "p1", "sentence1": "A man walks.", "sentence2": "A person walks.", "gold_label": "entailment"})"
               "\n"
               R"({"pairID": "p2", "sentence1": "A man walks.", "sentence2": "Nobody moves.", "gold_label": "contradiction"})"
               "\n"
               R"({"pairID": "p3", "sentence1": "A man walks.", "sentence2": "A man is tall.", "gold_label": "-"})"
               "\n"
               R"({"pairID": "p4", "sentence1": "Dogs bark.", "sentence2": "Animals make noise.", "gold_label": "neutral"})"
               "\n");
    auto corpus = data::read_nli_jsonl(f.path);
    CHECK(corpus.instances.size() == 3);
    CHECK(corpus.dropped_no_consensus == 1);
    CHECK(corpus.instances[0].premise.tokens ==
          std::vector<std::string>{"A", "man", "walks", "."});
    CHECK(corpus.instances[0].label == "entailment");

    TempFile bad("mtl_nli_bad.jsonl", "{not json}\n");
    CHECK_THROWS_WITH_AS(data::read_nli_jsonl(bad.path), "line 1: malformed JSON", ParseError);
}

TEST_CASE("nli jsonl round trip keeps tokens and semtags") {
    data::NliInstance inst;
    inst.id = "x1";
    inst.label = "neutral";
    inst.premise.tokens = {"a", "cat", "sits"};
    inst.premise.semtags = {"DIS", "CON", "ENS"};
    inst.premise.id = "x1";
    inst.hypothesis.tokens = {"it", "rests"};
    inst.hypothesis.id = "x1";

    std::string path = "/tmp/mtl_nli_round.jsonl";
    data::write_nli_jsonl(path, {inst});
    auto corpus = data::read_nli_jsonl(path);
    REQUIRE(corpus.instances.size() == 1);
    CHECK(corpus.instances[0] == inst);
    std::remove(path.c_str());
}

TEST_CASE("tokenizer splits punctuation off words") {
    CHECK(data::tokenize("A man, walking.") ==
          std::vector<std::string>{"A", "man", ",", "walking", "."});
    CHECK(data::tokenize("don't stop") == std::vector<std::string>{"don", "'", "t", "stop"});
    CHECK(data::tokenize("  spaced   out  ") == std::vector<std::string>{"spaced", "out"});
}

TEST_CASE("vocabulary reserves pad/unk and freezes") {
    data::Vocabulary v;
    CHECK(v.size() == 2);
    int cat = v.add("cat");
    CHECK(cat == 2);
    CHECK(v.add("cat") == cat);
    v.freeze();
    CHECK(v.add("dog") == data::Vocabulary::kUnk);
    CHECK(v.id("dog") == data::Vocabulary::kUnk);
    CHECK(v.id("cat") == cat);
    CHECK(v.token(cat) == "cat");
}

TEST_CASE("tag vocab returns -1 for unknown tags once frozen") {
    data::TagVocab tv;
    int def = tv.add("DEF");
    tv.freeze();
    CHECK(tv.add("NEW") == -1);
    CHECK(tv.id("DEF") == def);
    CHECK(tv.id("NEW") == -1);
}

TEST_CASE("sentence layer-length invariant") {
    Sentence s;
    s.id = "bad";
    s.tokens = {"a", "b"};
    s.upos = {"X"};
    CHECK_THROWS_AS(s.validate(), ParseError);
    s.upos = {"X", "Y"};
    CHECK_NOTHROW(s.validate());
    s.heads = {0, 3};
    CHECK_THROWS_AS(s.validate(), ParseError);
}
