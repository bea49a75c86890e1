#include "mtl/toygen.hpp"

#include <array>

namespace mtl::toygen {

namespace {

struct Word {
    const char* form;
    const char* upos;
    const char* semtag;
};

const std::vector<Word> kDet = {{"the", "DET", "DEF"}, {"a", "DET", "DIS"}, {"another", "DET", "ALT"},
                                {"her", "DET", "HAS"}, {"my", "DET", "HAS"}};
const std::vector<Word> kNoun = {{"cat", "NOUN", "CON"},   {"dog", "NOUN", "CON"},
                                 {"bird", "NOUN", "CON"},  {"street", "NOUN", "CON"},
                                 {"hat", "NOUN", "CON"},   {"wall", "NOUN", "CON"},
                                 {"night", "NOUN", "CON"}, {"man", "NOUN", "CON"},
                                 {"woman", "NOUN", "CON"}, {"child", "NOUN", "CON"}};
const std::vector<Word> kAdj = {{"red", "ADJ", "COL"},  {"blue", "ADJ", "COL"},
                                {"open", "ADJ", "IST"}, {"old", "ADJ", "IST"},
                                {"tall", "ADJ", "IST"}, {"crimson", "ADJ", "COL"}};
const std::vector<Word> kVerbNow = {{"walks", "VERB", "ENS"},
                                    {"sings", "VERB", "ENS"},
                                    {"sits", "VERB", "ENS"},
                                    {"sleeps", "VERB", "ENS"},
                                    {"runs", "VERB", "ENS"}};
const std::vector<Word> kVerbPast = {{"walked", "VERB", "EPS"},
                                     {"sang", "VERB", "EPS"},
                                     {"slept", "VERB", "EPS"},
                                     {"ran", "VERB", "EPS"}};
const std::vector<Word> kVerbIng = {{"walking", "VERB", "EXG"},
                                    {"singing", "VERB", "EXG"},
                                    {"running", "VERB", "EXG"}};
const std::vector<Word> kAux = {{"is", "AUX", "NOW"}, {"was", "AUX", "EPS"}};
const std::vector<Word> kAdp = {{"in", "ADP", "REL"}, {"on", "ADP", "REL"}, {"at", "ADP", "REL"}};
const std::vector<Word> kNum = {{"two", "NUM", "QUC"}, {"three", "NUM", "QUC"}};
const std::vector<Word> kSub = {{"while", "SCONJ", "SUB"}, {"because", "SCONJ", "SUB"}};

const Word& pick(const std::vector<Word>& bank, Rng& rng) {
    return bank[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(bank.size())))];
}

void push(data::Sentence& s, const Word& w) {
    s.tokens.push_back(w.form);
    s.upos.push_back(w.upos);
    s.semtags.push_back(w.semtag);
}

}  // namespace

std::vector<std::string> toy_tagset() {
    return {"DEF", "HAS", "COL", "QUC", "IST", "REL", "CON", "ALT",
            "DIS", "SUB", "ENS", "EPS", "EXG", "EXS", "NOW"};
}

std::vector<data::Sentence> correlated_corpus(int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<data::Sentence> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        data::Sentence s;
        s.id = "toy-" + std::to_string(i + 1);
        switch (rng.uniform_int(0, 5)) {
            case 0:  // the red cat walks
                push(s, pick(kDet, rng));
                push(s, pick(kAdj, rng));
                push(s, pick(kNoun, rng));
                push(s, pick(kVerbNow, rng));
                break;
            case 1:  // a dog walked on the street
                push(s, pick(kDet, rng));
                push(s, pick(kNoun, rng));
                push(s, pick(kVerbPast, rng));
                push(s, pick(kAdp, rng));
                push(s, pick(kDet, rng));
                push(s, pick(kNoun, rng));
                break;
            case 2:  // the bird is singing
                push(s, pick(kDet, rng));
                push(s, pick(kNoun, rng));
                push(s, pick(kAux, rng));
                push(s, pick(kVerbIng, rng));
                break;
            case 3:  // two cats sleep at night
                push(s, pick(kNum, rng));
                push(s, pick(kNoun, rng));
                push(s, pick(kVerbNow, rng));
                push(s, pick(kAdp, rng));
                push(s, pick(kNoun, rng));
                break;
            default:  // the man sings while a child sleeps
                push(s, pick(kDet, rng));
                push(s, pick(kNoun, rng));
                push(s, pick(kVerbNow, rng));
                push(s, pick(kSub, rng));
                push(s, pick(kDet, rng));
                push(s, pick(kNoun, rng));
                push(s, pick(kVerbNow, rng));
                break;
        }
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<data::Sentence> with_upos_noise(const std::vector<data::Sentence>& corpus, Real rate,
                                            std::uint64_t seed) {
    static const std::array<const char*, 6> kTags = {"DET", "NOUN", "ADJ", "VERB", "ADP", "NUM"};
    Rng rng(seed);
    auto out = corpus;
    for (auto& s : out)
        for (auto& tag : s.upos)
            if (rng.bernoulli(rate)) {
                std::string flipped = tag;
                while (flipped == tag)
                    flipped = kTags[static_cast<std::size_t>(rng.uniform_int(0, 6))];
                tag = flipped;
            }
    return out;
}

std::vector<data::Sentence> semtag_only(const std::vector<data::Sentence>& corpus) {
    std::vector<data::Sentence> out;
    out.reserve(corpus.size());
    for (const auto& s : corpus) {
        data::Sentence t;
        t.id = s.id;
        t.tokens = s.tokens;
        t.semtags = s.semtags;
        out.push_back(std::move(t));
    }
    return out;
}

std::vector<data::Sentence> parse_corpus(int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<data::Sentence> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        data::Sentence s;
        s.id = "parse-" + std::to_string(i + 1);
        switch (rng.uniform_int(0, 3)) {
            case 0:  // DET NOUN VERB: det(2), nsubj(3), root
                push(s, pick(kDet, rng));
                push(s, pick(kNoun, rng));
                push(s, pick(kVerbNow, rng));
                s.heads = {2, 3, 0};
                s.deprels = {"det", "nsubj", "root"};
                break;
            case 1:  // DET NOUN VERB DET NOUN: det nsubj root det obj
                push(s, pick(kDet, rng));
                push(s, pick(kNoun, rng));
                push(s, pick(kVerbPast, rng));
                push(s, pick(kDet, rng));
                push(s, pick(kNoun, rng));
                s.heads = {2, 3, 0, 5, 3};
                s.deprels = {"det", "nsubj", "root", "det", "obj"};
                break;
            default:  // DET ADJ NOUN VERB ADP NOUN: det amod nsubj root case obl
                push(s, pick(kDet, rng));
                push(s, pick(kAdj, rng));
                push(s, pick(kNoun, rng));
                push(s, pick(kVerbNow, rng));
                push(s, pick(kAdp, rng));
                push(s, pick(kNoun, rng));
                s.heads = {3, 3, 4, 0, 6, 4};
                s.deprels = {"det", "amod", "nsubj", "root", "case", "obl"};
                break;
        }
        s.validate();
        out.push_back(std::move(s));
    }
    return out;
}

namespace {

data::Sentence tagged(const std::vector<Word>& words) {
    data::Sentence s;
    for (const auto& w : words) push(s, w);
    return s;
}

data::NliInstance make_pair(const std::string& id, const std::vector<Word>& premise,
                            const std::vector<Word>& hypothesis, const std::string& label) {
    data::NliInstance inst;
    inst.id = id;
    inst.premise = tagged(premise);
    inst.premise.id = id;
    inst.hypothesis = tagged(hypothesis);
    inst.hypothesis.id = id;
    inst.label = label;
    return inst;
}

}  // namespace

std::vector<data::NliInstance> nli_pairs() {
    const Word the{"the", "DET", "DEF"}, a{"a", "DET", "DIS"}, cat{"cat", "NOUN", "CON"},
        dog{"dog", "NOUN", "CON"}, bird{"bird", "NOUN", "CON"}, man{"man", "NOUN", "CON"},
        woman{"woman", "NOUN", "CON"}, is{"is", "AUX", "NOW"}, sleeping{"sleeping", "VERB", "EXG"},
        singing{"singing", "VERB", "EXG"}, running{"running", "VERB", "EXG"},
        walks{"walks", "VERB", "ENS"}, sleeps{"sleeps", "VERB", "ENS"}, sings{"sings", "VERB", "ENS"},
        old_{"old", "ADJ", "IST"}, tall{"tall", "ADJ", "IST"}, red{"red", "ADJ", "COL"},
        hat{"hat", "NOUN", "CON"}, wears{"wears", "VERB", "ENS"}, street{"street", "NOUN", "CON"},
        on{"on", "ADP", "REL"};
    return {
        make_pair("n1", {the, cat, is, sleeping}, {a, cat, sleeps}, "entailment"),
        make_pair("n2", {the, cat, is, sleeping}, {the, cat, is, running}, "contradiction"),
        make_pair("n3", {a, man, walks, on, the, street}, {the, man, is, tall}, "neutral"),
        make_pair("n4", {the, bird, is, singing}, {a, bird, sings}, "entailment"),
        make_pair("n5", {the, dog, is, running}, {the, dog, is, sleeping}, "contradiction"),
        make_pair("n6", {the, woman, wears, a, red, hat}, {the, woman, is, old_}, "neutral"),
        make_pair("n7", {the, old_, man, is, running}, {a, man, is, running}, "entailment"),
        make_pair("n8", {a, woman, sings}, {the, woman, is, sleeping}, "contradiction"),
    };
}

std::vector<data::NliInstance> nli_corpus(int count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<data::NliInstance> out;
    out.reserve(static_cast<std::size_t>(count));
    const Word is{"is", "AUX", "NOW"};
    for (int i = 0; i < count; ++i) {
        const Word& det1 = pick(kDet, rng);
        const Word& noun = pick(kNoun, rng);
        const Word& det2 = pick(kDet, rng);
        const Word& ving = pick(kVerbIng, rng);
        data::NliInstance inst;
        std::string id = "gen-" + std::to_string(i + 1);
        switch (rng.uniform_int(0, 3)) {
            case 0: {  // same activity -> entailment
                inst = make_pair(id, {det1, noun, is, ving}, {det2, noun, is, ving}, "entailment");
                break;
            }
            case 1: {  // different activity -> contradiction
                const Word* other = &pick(kVerbIng, rng);
                while (std::string(other->form) == ving.form) other = &pick(kVerbIng, rng);
                inst = make_pair(id, {det1, noun, is, ving}, {det2, noun, is, *other},
                                 "contradiction");
                break;
            }
            default: {  // unrelated attribute -> neutral
                const Word& adj = pick(kAdj, rng);
                inst = make_pair(id, {det1, noun, is, ving}, {det2, noun, is, adj}, "neutral");
                break;
            }
        }
        out.push_back(std::move(inst));
    }
    return out;
}

}  // namespace mtl::toygen
