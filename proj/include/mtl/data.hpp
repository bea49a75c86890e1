#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtl/error.hpp"

namespace mtl::data {

// One tokenized sentence with optional annotation layers. Every present
// layer has exactly one entry per token.
struct Sentence {
    std::string id;
    std::vector<std::string> tokens;
    std::vector<std::string> upos;
    std::vector<std::string> semtags;
    std::vector<int> heads;  // 0 = ROOT
    std::vector<std::string> deprels;

    int size() const { return static_cast<int>(tokens.size()); }
    bool has_upos() const { return !upos.empty(); }
    bool has_semtags() const { return !semtags.empty(); }
    bool has_heads() const { return !heads.empty(); }
    bool has_deprels() const { return !deprels.empty(); }
    void validate() const;

    bool operator==(const Sentence&) const = default;
};

struct NliInstance {
    std::string id;
    Sentence premise;
    Sentence hypothesis;
    std::string label;  // entailment | contradiction | neutral

    bool operator==(const NliInstance&) const = default;
};

inline const std::vector<std::string> kNliLabels = {"entailment", "contradiction", "neutral"};

// Token vocabulary with reserved PAD=0 and UNK=1. Lookups after freeze()
// map unseen tokens to UNK instead of growing.
class Vocabulary {
public:
    static constexpr int kPad = 0;
    static constexpr int kUnk = 1;

    Vocabulary();
    int add(const std::string& token);   // grows unless frozen; returns id (UNK when frozen+unseen)
    int id(const std::string& token) const;  // UNK for unseen
    const std::string& token(int id) const;
    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }
    int size() const { return static_cast<int>(id_to_token_.size()); }

private:
    std::map<std::string, int> token_to_id_;
    std::vector<std::string> id_to_token_;
    bool frozen_ = false;
};

// Closed label/tag inventory; unknown lookups return -1 once frozen.
class TagVocab {
public:
    int add(const std::string& tag);
    int id(const std::string& tag) const;  // -1 for unknown
    const std::string& tag(int id) const;
    void freeze() { frozen_ = true; }
    int size() const { return static_cast<int>(id_to_tag_.size()); }
    const std::vector<std::string>& tags() const { return id_to_tag_; }

private:
    std::map<std::string, int> tag_to_id_;
    std::vector<std::string> id_to_tag_;
    bool frozen_ = false;
};

// ---- readers / writers -------------------------------------------------------

// 10-column CoNLL-U. Comment lines, multiword ranges (ID with '-') and empty
// nodes (ID with '.') are skipped. Semantic tags round-trip through
// `SemTag=...` in the MISC column.
std::vector<Sentence> read_conllu(const std::string& path);
void write_conllu(const std::string& path, const std::vector<Sentence>& sentences);

// token<TAB>semtag lines with blank-line sentence breaks. When a tagset is
// given, unknown tags are admitted with a warning on `warn`.
std::vector<Sentence> read_semtag_tsv(const std::string& path,
                                      const std::vector<std::string>* tagset = nullptr,
                                      std::ostream* warn = nullptr);
void write_semtag_tsv(const std::string& path, const std::vector<Sentence>& sentences);

std::vector<std::string> read_tagset(const std::string& path);

struct NliCorpus {
    std::vector<NliInstance> instances;
    int dropped_no_consensus = 0;
};

// JSON lines with pairID / sentence1 / sentence2 / gold_label. Instances
// labeled "-" are dropped and counted. Optional tokens1/tokens2 and
// semtags1/semtags2 arrays override tokenization and attach tags.
NliCorpus read_nli_jsonl(const std::string& path);
void write_nli_jsonl(const std::string& path, const std::vector<NliInstance>& instances);

std::vector<std::string> tokenize(const std::string& text);

}  // namespace mtl::data
