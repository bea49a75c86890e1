#include "mtl/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <ostream>
#include <sstream>
#include <utility>

#include <json.hpp>

namespace mtl::data {

void Sentence::validate() const {
    auto n = tokens.size();
    if (n == 0) throw ParseError("sentence '" + id + "' has no tokens");
    if (!upos.empty() && upos.size() != n)
        throw ParseError("sentence '" + id + "': upos layer length mismatch");
    if (!semtags.empty() && semtags.size() != n)
        throw ParseError("sentence '" + id + "': semtag layer length mismatch");
    if (!heads.empty() && heads.size() != n)
        throw ParseError("sentence '" + id + "': head layer length mismatch");
    if (!deprels.empty() && deprels.size() != n)
        throw ParseError("sentence '" + id + "': deprel layer length mismatch");
    for (int h : heads)
        if (h < 0 || h > static_cast<int>(n))
            throw ParseError("sentence '" + id + "': head index " + std::to_string(h) +
                             " out of [0, " + std::to_string(n) + "]");
}

Vocabulary::Vocabulary() {
    id_to_token_ = {"<pad>", "<unk>"};
    token_to_id_ = {{"<pad>", kPad}, {"<unk>", kUnk}};
}

int Vocabulary::add(const std::string& token) {
    auto it = token_to_id_.find(token);
    if (it != token_to_id_.end()) return it->second;
    if (frozen_) return kUnk;
    int id = static_cast<int>(id_to_token_.size());
    id_to_token_.push_back(token);
    token_to_id_.emplace(token, id);
    return id;
}

int Vocabulary::id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(int id) const {
    if (id < 0 || id >= size()) throw ConfigError("vocabulary id out of range");
    return id_to_token_[static_cast<std::size_t>(id)];
}

int TagVocab::add(const std::string& tag) {
    auto it = tag_to_id_.find(tag);
    if (it != tag_to_id_.end()) return it->second;
    if (frozen_) return -1;
    int id = static_cast<int>(id_to_tag_.size());
    id_to_tag_.push_back(tag);
    tag_to_id_.emplace(tag, id);
    return id;
}

int TagVocab::id(const std::string& tag) const {
    auto it = tag_to_id_.find(tag);
    return it == tag_to_id_.end() ? -1 : it->second;
}

const std::string& TagVocab::tag(int id) const {
    if (id < 0 || id >= size()) throw ConfigError("tag id out of range");
    return id_to_tag_[static_cast<std::size_t>(id)];
}

// ---- conllu -------------------------------------------------------------------

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            cols.push_back(line.substr(start));
            break;
        }
        cols.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return cols;
}

std::string misc_semtag(const std::string& misc) {
    std::size_t pos = 0;
    while (pos < misc.size()) {
        std::size_t end = misc.find('|', pos);
        std::string item = misc.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
        if (item.rfind("SemTag=", 0) == 0) return item.substr(7);
        if (end == std::string::npos) break;
        pos = end + 1;
    }
    return "";
}

struct PendingSentence {
    Sentence s;
    int with_upos = 0, with_head = 0, with_deprel = 0, with_semtag = 0;

    void finish(std::vector<Sentence>& out, int line_no) {
        if (s.tokens.empty()) return;
        int n = s.size();
        auto check_layer = [&](int count, const char* what) {
            if (count != 0 && count != n)
                throw ParseError("line " + std::to_string(line_no) + ": sentence has " + what +
                                 " on some rows but not all");
        };
        check_layer(with_upos, "UPOS");
        check_layer(with_head, "HEAD");
        check_layer(with_deprel, "DEPREL");
        check_layer(with_semtag, "SemTag");
        if (with_upos == 0) s.upos.clear();
        if (with_head == 0) s.heads.clear();
        if (with_deprel == 0) s.deprels.clear();
        if (with_semtag == 0) s.semtags.clear();
        s.validate();
        out.push_back(std::move(s));
        *this = PendingSentence{};
    }
};

}  // namespace

std::vector<Sentence> read_conllu(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open conllu file: " + path);
    std::vector<Sentence> out;
    PendingSentence cur;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            cur.finish(out, line_no);
            continue;
        }
        if (line[0] == '#') {
            if (line.rfind("# sent_id =", 0) == 0) {
                std::string id = line.substr(11);
                std::size_t ws = id.find_first_not_of(' ');
                cur.s.id = ws == std::string::npos ? "" : id.substr(ws);
            }
            continue;
        }
        auto cols = split_tabs(line);
        if (cols.size() != 10)
            throw ParseError("line " + std::to_string(line_no) + ": expected 10 columns, got " +
                             std::to_string(cols.size()));
        const std::string& tok_id = cols[0];
        if (tok_id.find('-') != std::string::npos || tok_id.find('.') != std::string::npos)
            continue;  // multiword token ranges and empty nodes
        cur.s.tokens.push_back(cols[1]);
        if (cols[3] != "_") {
            cur.s.upos.push_back(cols[3]);
            ++cur.with_upos;
        } else {
            cur.s.upos.push_back("");
        }
        if (cols[6] != "_") {
            try {
                std::size_t used = 0;
                int head = std::stoi(cols[6], &used);
                if (used != cols[6].size() || head < 0) throw std::invalid_argument("head");
                cur.s.heads.push_back(head);
            } catch (const std::exception&) {
                throw ParseError("line " + std::to_string(line_no) + ": non-integer HEAD '" +
                                 cols[6] + "'");
            }
            ++cur.with_head;
        } else {
            cur.s.heads.push_back(0);
        }
        if (cols[7] != "_") {
            cur.s.deprels.push_back(cols[7]);
            ++cur.with_deprel;
        } else {
            cur.s.deprels.push_back("");
        }
        std::string semtag = misc_semtag(cols[9]);
        if (!semtag.empty()) ++cur.with_semtag;
        cur.s.semtags.push_back(semtag);
    }
    cur.finish(out, line_no + 1);
    return out;
}

void write_conllu(const std::string& path, const std::vector<Sentence>& sentences) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open conllu file for writing: " + path);
    for (const auto& s : sentences) {
        s.validate();
        if (!s.id.empty()) out << "# sent_id = " << s.id << '\n';
        for (int i = 0; i < s.size(); ++i) {
            std::string misc = "_";
            if (s.has_semtags()) misc = "SemTag=" + s.semtags[static_cast<std::size_t>(i)];
            out << (i + 1) << '\t' << s.tokens[static_cast<std::size_t>(i)] << "\t_\t"
                << (s.has_upos() ? s.upos[static_cast<std::size_t>(i)] : "_") << "\t_\t_\t"
                << (s.has_heads() ? std::to_string(s.heads[static_cast<std::size_t>(i)]) : "_")
                << '\t' << (s.has_deprels() ? s.deprels[static_cast<std::size_t>(i)] : "_")
                << "\t_\t" << misc << '\n';
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing conllu file: " + path);
}

// ---- semtag tsv ----------------------------------------------------------------

std::vector<Sentence> read_semtag_tsv(const std::string& path,
                                      const std::vector<std::string>* tagset, std::ostream* warn) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open semtag file: " + path);
    std::vector<Sentence> out;
    Sentence cur;
    std::string line;
    int line_no = 0;
    int sent_no = 0;
    auto finish = [&] {
        if (cur.tokens.empty()) return;
        cur.id = "s" + std::to_string(++sent_no);
        cur.validate();
        out.push_back(std::move(cur));
        cur = Sentence{};
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            finish();
            continue;
        }
        std::size_t tab = line.find('\t');
        if (tab == std::string::npos)
            throw ParseError("line " + std::to_string(line_no) + ": expected token<TAB>tag");
        std::string token = line.substr(0, tab);
        std::string tag = line.substr(tab + 1);
        if (tagset && std::find(tagset->begin(), tagset->end(), tag) == tagset->end() && warn)
            *warn << "warning: line " << line_no << ": tag '" << tag
                  << "' not in the declared tagset, keeping it\n";
        cur.tokens.push_back(std::move(token));
        cur.semtags.push_back(std::move(tag));
    }
    finish();
    return out;
}

void write_semtag_tsv(const std::string& path, const std::vector<Sentence>& sentences) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open semtag file for writing: " + path);
    for (const auto& s : sentences) {
        if (!s.has_semtags())
            throw IoError("cannot write sentence '" + s.id + "' without semtags to tsv");
        for (int i = 0; i < s.size(); ++i)
            out << s.tokens[static_cast<std::size_t>(i)] << '\t'
                << s.semtags[static_cast<std::size_t>(i)] << '\n';
        out << '\n';
    }
    if (!out) throw IoError("failed writing semtag file: " + path);
}

std::vector<std::string> read_tagset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open tagset file: " + path);
    std::vector<std::string> tags;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        // first whitespace-separated field; the rest is a description
        std::istringstream is(line);
        std::string tag;
        is >> tag;
        if (!tag.empty()) tags.push_back(tag);
    }
    return tags;
}

// ---- nli jsonl -----------------------------------------------------------------

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        unsigned char c = static_cast<unsigned char>(ch);
        if (std::isspace(c)) {
            if (!cur.empty()) out.push_back(std::exchange(cur, {}));
        } else if (std::isalnum(c) || c >= 0x80) {
            cur += ch;
        } else {
            if (!cur.empty()) out.push_back(std::exchange(cur, {}));
            out.emplace_back(1, ch);
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

NliCorpus read_nli_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open nli file: " + path);
    NliCorpus corpus;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw ParseError("line " + std::to_string(line_no) + ": malformed JSON");
        if (!j.contains("gold_label") || !j.contains("sentence1") || !j.contains("sentence2"))
            throw ParseError("line " + std::to_string(line_no) +
                             ": missing gold_label/sentence1/sentence2");
        std::string label = j["gold_label"].get<std::string>();
        if (label == "-") {
            ++corpus.dropped_no_consensus;
            continue;
        }
        if (std::find(kNliLabels.begin(), kNliLabels.end(), label) == kNliLabels.end())
            throw ParseError("line " + std::to_string(line_no) + ": unknown gold_label '" + label +
                             "'");
        NliInstance inst;
        inst.id = j.contains("pairID") ? j["pairID"].get<std::string>() : std::to_string(line_no);
        inst.label = label;
        auto fill = [&](Sentence& s, const char* text_key, const char* tok_key,
                        const char* tag_key) {
            if (j.contains(tok_key))
                s.tokens = j[tok_key].get<std::vector<std::string>>();
            else
                s.tokens = tokenize(j[text_key].get<std::string>());
            if (s.tokens.empty())
                throw ParseError("line " + std::to_string(line_no) + ": empty " +
                                 std::string(text_key));
            if (j.contains(tag_key)) {
                s.semtags = j[tag_key].get<std::vector<std::string>>();
                if (s.semtags.size() != s.tokens.size())
                    throw ParseError("line " + std::to_string(line_no) + ": " + tag_key +
                                     " length mismatch");
            }
            s.id = inst.id;
        };
        fill(inst.premise, "sentence1", "tokens1", "semtags1");
        fill(inst.hypothesis, "sentence2", "tokens2", "semtags2");
        corpus.instances.push_back(std::move(inst));
    }
    return corpus;
}

void write_nli_jsonl(const std::string& path, const std::vector<NliInstance>& instances) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open nli file for writing: " + path);
    for (const auto& inst : instances) {
        nlohmann::json j;
        j["pairID"] = inst.id;
        j["gold_label"] = inst.label;
        auto join = [](const std::vector<std::string>& toks) {
            std::string s;
            for (std::size_t i = 0; i < toks.size(); ++i) {
                if (i) s += ' ';
                s += toks[i];
            }
            return s;
        };
        j["sentence1"] = join(inst.premise.tokens);
        j["sentence2"] = join(inst.hypothesis.tokens);
        j["tokens1"] = inst.premise.tokens;
        j["tokens2"] = inst.hypothesis.tokens;
        if (inst.premise.has_semtags()) j["semtags1"] = inst.premise.semtags;
        if (inst.hypothesis.has_semtags()) j["semtags2"] = inst.hypothesis.semtags;
        out << j.dump() << '\n';
    }
    if (!out) throw IoError("failed writing nli file: " + path);
}

}  // namespace mtl::data
