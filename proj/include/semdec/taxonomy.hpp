#pragma once

#include "error.hpp"
#include "synset.hpp"
#include "text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

/**
 * @file taxonomy.hpp
 *
 * @brief Hypernym DAG with depth, least common subsumer and Wu-Palmer similarity.
 *
 * Depth is 1 + the length of the longest hypernym path to a root (roots have
 * depth 1); it is tabulated once when the taxonomy is built, so every query is
 * read-only. The least common subsumer is the deepest shared ancestor, each
 * node counting as its own ancestor, with ties going to the smaller id.
 */

namespace semdec {

enum class WupFormula {
    standard,     ///< 2 depth(lcs) / (depth(a) + depth(b)), in (0, 1].
    paper_literal ///< depth(lcs) / (depth(a) + depth(b)), in (0, 0.5].
};

inline WupFormula parse_wup_formula(std::string_view s) {
    if (s == "standard") {
        return WupFormula::standard;
    }
    if (s == "paper" || s == "paper_literal") {
        return WupFormula::paper_literal;
    }
    throw ConfigError("unknown Wu-Palmer formula '" + std::string(s) + "' (expected standard or paper)");
}

class Taxonomy {
public:
    struct Node {
        SynsetRef id;
        std::vector<std::string> lemmas;
        std::vector<std::size_t> hypernyms;
    };

    class Builder {
    public:
        /// Adds a node, or appends lemmas to an existing one.
        std::size_t add_node(const SynsetRef& id, const std::vector<std::string>& lemmas = {}) {
            auto [it, fresh] = index_.try_emplace(id, nodes_.size());
            if (fresh) {
                nodes_.push_back(Node{id, {}, {}});
            }
            auto& node = nodes_[it->second];
            for (const auto& l : lemmas) {
                if (std::find(node.lemmas.begin(), node.lemmas.end(), l) == node.lemmas.end()) {
                    node.lemmas.push_back(l);
                }
            }
            return it->second;
        }

        bool contains(const SynsetRef& id) const { return index_.count(id) > 0; }

        void add_edge(const SynsetRef& child, const SynsetRef& parent) {
            if (child == parent) {
                throw CycleError("self-edge on '" + child.str() + "'");
            }
            const auto c = add_node(child);
            const auto p = add_node(parent);
            auto& hyp = nodes_[c].hypernyms;
            if (std::find(hyp.begin(), hyp.end(), p) == hyp.end()) {
                hyp.push_back(p);
            }
        }

        void add_lemma_index(std::string lemma, const SynsetRef& id) {
            std::transform(lemma.begin(), lemma.end(), lemma.begin(), [](unsigned char c) { return std::tolower(c); });
            lemma_index_[lemma].push_back(id);
        }

        /// Validates acyclicity and tabulates depths.
        Taxonomy finish() && {
            Taxonomy t;
            t.nodes_ = std::move(nodes_);
            t.index_ = std::move(index_);
            t.lemma_index_ = std::move(lemma_index_);
            t.finalize();
            return t;
        }

    private:
        std::vector<Node> nodes_;
        std::unordered_map<SynsetRef, std::size_t> index_;
        std::unordered_map<std::string, std::vector<SynsetRef>> lemma_index_;
    };

    std::size_t size() const { return nodes_.size(); }
    std::size_t edge_count() const { return edges_; }
    bool empty() const { return nodes_.empty(); }

    bool contains(const SynsetRef& id) const { return index_.count(id) > 0; }
    bool contains(std::string_view id) const {
        return SynsetRef::valid(id) && contains(SynsetRef(std::string(id)));
    }

    /// Sorted by id.
    const std::vector<SynsetRef>& roots() const { return roots_; }

    const Node& node(const SynsetRef& id) const { return nodes_[locate(id)]; }

    /// Every node id in insertion order.
    std::vector<SynsetRef> ids() const {
        std::vector<SynsetRef> out;
        out.reserve(nodes_.size());
        for (const auto& n : nodes_) {
            out.push_back(n.id);
        }
        return out;
    }

    std::vector<SynsetRef> hypernyms(const SynsetRef& id) const {
        std::vector<SynsetRef> out;
        for (auto p : node(id).hypernyms) {
            out.push_back(nodes_[p].id);
        }
        return out;
    }

    const std::vector<std::string>& lemmas(const SynsetRef& id) const { return node(id).lemmas; }

    /// First lemma with underscores turned into spaces; the id itself when there are no lemmas.
    std::string display_name(const SynsetRef& id) const {
        const auto& l = lemmas(id);
        std::string out = l.empty() ? id.str() : l.front();
        std::replace(out.begin(), out.end(), '_', ' ');
        return out;
    }

    /// Synsets listed for a lemma in index.noun, in sense order, restricted to loaded nodes.
    std::vector<SynsetRef> lookup_lemma(const std::string& lemma) const {
        auto key = lemma;
        std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
        std::replace(key.begin(), key.end(), ' ', '_');
        const auto it = lemma_index_.find(key);
        return it == lemma_index_.end() ? std::vector<SynsetRef>{} : it->second;
    }

    std::size_t depth(const SynsetRef& id) const { return depth_[locate(id)]; }

    /// Every ancestor of id, including id itself, in unspecified order.
    std::vector<SynsetRef> ancestors(const SynsetRef& id) const {
        std::vector<SynsetRef> out;
        for (auto i : ancestor_indices(locate(id))) {
            out.push_back(nodes_[i].id);
        }
        return out;
    }

    SynsetRef lcs(const SynsetRef& a, const SynsetRef& b) const {
        const auto ia = locate(a);
        const auto ib = locate(b);
        std::vector<char> mark(nodes_.size(), 0);
        for (auto i : ancestor_indices(ia)) {
            mark[i] = 1;
        }
        std::optional<std::size_t> best;
        for (auto i : ancestor_indices(ib)) {
            if (!mark[i]) {
                continue;
            }
            if (!best || depth_[i] > depth_[*best] || (depth_[i] == depth_[*best] && nodes_[i].id < nodes_[*best].id)) {
                best = i;
            }
        }
        if (!best) {
            throw NoCommonAncestorError("'" + a.str() + "' and '" + b.str() + "' share no ancestor");
        }
        return nodes_[*best].id;
    }

    double wup(const SynsetRef& a, const SynsetRef& b, WupFormula formula = WupFormula::standard) const {
        const double shared = static_cast<double>(depth(lcs(a, b)));
        const double sum = static_cast<double>(depth(a) + depth(b));
        return (formula == WupFormula::standard ? 2.0 * shared : shared) / sum;
    }

private:
    std::size_t locate(const SynsetRef& id) const {
        const auto it = index_.find(id);
        if (it == index_.end()) {
            throw UnknownSynsetError("unknown synset '" + id.str() + "'");
        }
        return it->second;
    }

    std::vector<std::size_t> ancestor_indices(std::size_t start) const {
        std::vector<std::size_t> out{start};
        std::vector<char> seen(nodes_.size(), 0);
        seen[start] = 1;
        for (std::size_t k = 0; k < out.size(); ++k) {
            for (auto p : nodes_[out[k]].hypernyms) {
                if (!seen[p]) {
                    seen[p] = 1;
                    out.push_back(p);
                }
            }
        }
        return out;
    }

    void finalize() {
        const std::size_t n = nodes_.size();
        std::vector<std::vector<std::size_t>> children(n);
        std::vector<std::size_t> pending(n, 0);
        edges_ = 0;
        for (std::size_t i = 0; i < n; ++i) {
            pending[i] = nodes_[i].hypernyms.size();
            edges_ += pending[i];
            for (auto p : nodes_[i].hypernyms) {
                children[p].push_back(i);
            }
        }

        // Kahn's order from the roots downward; a parent is settled before any child.
        depth_.assign(n, 0);
        std::vector<std::size_t> queue;
        for (std::size_t i = 0; i < n; ++i) {
            if (pending[i] == 0) {
                queue.push_back(i);
                depth_[i] = 1;
                roots_.push_back(nodes_[i].id);
            }
        }
        for (std::size_t k = 0; k < queue.size(); ++k) {
            const auto u = queue[k];
            for (auto c : children[u]) {
                depth_[c] = std::max(depth_[c], depth_[u] + 1);
                if (--pending[c] == 0) {
                    queue.push_back(c);
                }
            }
        }
        std::sort(roots_.begin(), roots_.end());

        if (queue.size() != n) {
            throw CycleError("hypernym cycle detected: " + describe_cycle(pending));
        }
    }

    std::string describe_cycle(const std::vector<std::size_t>& pending) const {
        // Every unsettled node has an unsettled parent, so walking parents must revisit a node.
        std::size_t u = 0;
        while (pending[u] == 0) {
            ++u;
        }
        std::vector<std::size_t> pos(nodes_.size(), SIZE_MAX);
        std::vector<std::size_t> path;
        while (pos[u] == SIZE_MAX) {
            pos[u] = path.size();
            path.push_back(u);
            for (auto p : nodes_[u].hypernyms) {
                if (pending[p] != 0) {
                    u = p;
                    break;
                }
            }
        }
        std::string out;
        for (std::size_t k = pos[u]; k < path.size(); ++k) {
            out += nodes_[path[k]].id.str() + " -> ";
        }
        return out + nodes_[u].id.str();
    }

    std::vector<Node> nodes_;
    std::unordered_map<SynsetRef, std::size_t> index_;
    std::unordered_map<std::string, std::vector<SynsetRef>> lemma_index_;
    std::vector<std::size_t> depth_;
    std::vector<SynsetRef> roots_;
    std::size_t edges_ = 0;
};

// ---------------------------------------------------------------------------
// WordNet 3.x noun database
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_digits(std::string_view s, std::size_t n) {
    return s.size() == n && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

inline bool is_license_line(std::string_view line) { return line.size() >= 2 && line[0] == ' ' && line[1] == ' '; }

struct NounRecord {
    std::string offset;
    std::vector<std::string> words;
    std::vector<std::string> hypernym_offsets;
    std::size_t line = 0;
};

/**
 * synset_offset lex_filenum ss_type w_cnt (word lex_id){w_cnt} p_cnt
 * (pointer_symbol synset_offset pos source/target){p_cnt} [| gloss]
 *
 * w_cnt is two hex digits, p_cnt three decimal digits.
 */
inline NounRecord parse_noun_record(std::string_view line, std::size_t ln, const std::string& source) {
    const auto bar = line.find(" | ");
    const auto body = bar == std::string_view::npos ? line : line.substr(0, bar);
    const auto f = text::tokens(body);
    auto fail = [&](const std::string& why) -> MalformedRecordError {
        return MalformedRecordError(source + ": " + why, ln);
    };

    if (f.size() < 4) {
        throw fail("record has " + std::to_string(f.size()) + " fields, expected at least 4");
    }
    NounRecord rec;
    rec.line = ln;
    if (!is_digits(f[0], 8)) {
        throw fail("bad synset offset '" + std::string(f[0]) + "'");
    }
    rec.offset = std::string(f[0]);
    if (!is_digits(f[1], 2)) {
        throw fail("bad lex_filenum '" + std::string(f[1]) + "'");
    }
    if (f[2] != "n") {
        throw fail("ss_type '" + std::string(f[2]) + "' is not a noun");
    }
    const auto w_cnt = text::parse_int<std::size_t>(f[3], 16);
    if (!w_cnt || *w_cnt == 0) {
        throw fail("bad word count '" + std::string(f[3]) + "'");
    }

    std::size_t p = 4;
    if (f.size() < p + 2 * *w_cnt + 1) {
        throw fail("word list shorter than its count " + std::to_string(*w_cnt));
    }
    for (std::size_t w = 0; w < *w_cnt; ++w, p += 2) {
        rec.words.emplace_back(f[p]);
    }
    const auto p_cnt = text::parse_int<std::size_t>(f[p]);
    if (!p_cnt) {
        throw fail("bad pointer count '" + std::string(f[p]) + "'");
    }
    ++p;
    if (f.size() != p + 4 * *p_cnt) {
        throw fail("pointer count " + std::to_string(*p_cnt) + " implies " + std::to_string(p + 4 * *p_cnt) +
                   " fields, record has " + std::to_string(f.size()));
    }
    for (std::size_t k = 0; k < *p_cnt; ++k, p += 4) {
        const auto sym = f[p];
        const auto target = f[p + 1];
        const auto pos = f[p + 2];
        if (!is_digits(target, 8) || pos.size() != 1 || f[p + 3].size() != 4) {
            throw fail("malformed pointer " + std::to_string(k + 1));
        }
        if ((sym == "@" || sym == "@i") && pos == "n") {
            rec.hypernym_offsets.emplace_back(target);
        }
    }
    return rec;
}

} // namespace detail

/// index.noun: lemma pos synset_cnt p_cnt [ptr_symbol...] sense_cnt tagsense_cnt synset_offset...
inline void parse_index_noun(std::istream& in, Taxonomy::Builder& builder, const std::string& source) {
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        const auto sv = text::strip_cr(line);
        if (detail::is_license_line(sv) || text::trim(sv).empty()) {
            continue;
        }
        const auto f = text::tokens(sv);
        if (f.size() < 6 || f[1] != "n") {
            throw MalformedRecordError(source + ": malformed index entry", ln);
        }
        const auto synset_cnt = text::parse_int<std::size_t>(f[2]);
        const auto p_cnt = text::parse_int<std::size_t>(f[3]);
        if (!synset_cnt || !p_cnt || f.size() != 4 + *p_cnt + 2 + *synset_cnt) {
            throw MalformedRecordError(source + ": index entry field count does not match its counts", ln);
        }
        for (std::size_t k = f.size() - *synset_cnt; k < f.size(); ++k) {
            if (!detail::is_digits(f[k], 8)) {
                throw MalformedRecordError(source + ": bad synset offset '" + std::string(f[k]) + "'", ln);
            }
            const auto id = SynsetRef::from_offset(f[k]);
            if (builder.contains(id)) {
                builder.add_lemma_index(std::string(f[0]), id);
            }
        }
    }
}

/**
 * Builds the noun hypernym DAG from a WordNet 3.x data.noun file. Hypernym
 * ("@") and instance hypernym ("@i") pointers become edges; every other
 * pointer type is ignored. Lines starting with two spaces are the license
 * header. When index_noun is given its lemma -> synset lists are attached.
 */
inline Taxonomy parse_wordnet_noun(std::istream& data, const std::string& source = "<data.noun>",
                                   std::istream* index = nullptr, const std::string& index_source = "<index.noun>") {
    std::vector<detail::NounRecord> records;
    std::unordered_map<std::string, std::size_t> by_offset;
    std::string line;
    std::size_t ln = 0;
    while (std::getline(data, line)) {
        ++ln;
        const auto sv = text::strip_cr(line);
        if (detail::is_license_line(sv) || text::trim(sv).empty()) {
            continue;
        }
        auto rec = detail::parse_noun_record(sv, ln, source);
        if (!by_offset.emplace(rec.offset, records.size()).second) {
            throw MalformedRecordError(source + ": duplicate synset offset " + rec.offset, ln);
        }
        records.push_back(std::move(rec));
    }

    Taxonomy::Builder builder;
    for (const auto& r : records) {
        builder.add_node(SynsetRef::from_offset(r.offset), r.words);
    }
    for (const auto& r : records) {
        for (const auto& h : r.hypernym_offsets) {
            if (!by_offset.count(h)) {
                throw DanglingPointerError(source + ": synset " + r.offset + " (line " + std::to_string(r.line) +
                                           ") points to missing hypernym " + h);
            }
            builder.add_edge(SynsetRef::from_offset(r.offset), SynsetRef::from_offset(h));
        }
    }
    if (index) {
        parse_index_noun(*index, builder, index_source);
    }
    return std::move(builder).finish();
}

inline Taxonomy parse_wordnet_noun(const std::filesystem::path& data_noun,
                                   const std::optional<std::filesystem::path>& index_noun = std::nullopt) {
    std::ifstream data(data_noun, std::ios::binary);
    if (!data) {
        throw Error("cannot open " + data_noun.string());
    }
    if (index_noun) {
        std::ifstream index(*index_noun, std::ios::binary);
        if (!index) {
            throw Error("cannot open " + index_noun->string());
        }
        return parse_wordnet_noun(data, data_noun.string(), &index, index_noun->string());
    }
    return parse_wordnet_noun(data, data_noun.string());
}

// ---------------------------------------------------------------------------
// Toy edge lists
// ---------------------------------------------------------------------------

/**
 * `child<TAB>parent` rows; a single-field row declares a node on its own.
 * Blank lines and lines starting with '#' are skipped. The optional lemma
 * file has rows `id<TAB>lemma[<TAB>lemma...]` for nodes already declared.
 */
inline Taxonomy parse_edge_list(std::istream& edges, const std::string& source = "<edges>",
                                std::istream* lemmas = nullptr, const std::string& lemma_source = "<lemmas>") {
    Taxonomy::Builder builder;
    std::string line;
    std::size_t ln = 0;
    auto ref = [&](std::string_view s, const std::string& src) {
        const std::string id(text::trim(s));
        if (!SynsetRef::valid(id)) {
            throw ParseError(src + ": malformed node id '" + id + "'", ln);
        }
        return SynsetRef(id);
    };
    while (std::getline(edges, line)) {
        ++ln;
        const auto sv = text::trim(text::strip_cr(line));
        if (sv.empty() || sv.front() == '#') {
            continue;
        }
        const auto f = text::split(sv, '\t');
        if (f.size() == 1) {
            builder.add_node(ref(f[0], source));
        } else if (f.size() == 2) {
            builder.add_edge(ref(f[0], source), ref(f[1], source));
        } else {
            throw ParseError(source + ": expected child<TAB>parent", ln);
        }
    }
    if (lemmas) {
        ln = 0;
        while (std::getline(*lemmas, line)) {
            ++ln;
            const auto sv = text::trim(text::strip_cr(line));
            if (sv.empty() || sv.front() == '#') {
                continue;
            }
            const auto f = text::split(sv, '\t');
            const auto id = ref(f[0], lemma_source);
            if (!builder.contains(id)) {
                throw UnknownSynsetError(lemma_source + ": lemma row for unknown node '" + id.str() + "' (line " +
                                         std::to_string(ln) + ")");
            }
            std::vector<std::string> words;
            for (std::size_t k = 1; k < f.size(); ++k) {
                words.emplace_back(text::trim(f[k]));
                builder.add_lemma_index(words.back(), id);
            }
            builder.add_node(id, words);
        }
    }
    return std::move(builder).finish();
}

inline Taxonomy parse_edge_list(const std::filesystem::path& tsv,
                                const std::optional<std::filesystem::path>& lemma_tsv = std::nullopt) {
    std::ifstream in(tsv, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + tsv.string());
    }
    if (lemma_tsv) {
        std::ifstream lem(*lemma_tsv, std::ios::binary);
        if (!lem) {
            throw Error("cannot open " + lemma_tsv->string());
        }
        return parse_edge_list(in, tsv.string(), &lem, lemma_tsv->string());
    }
    return parse_edge_list(in, tsv.string());
}

} // namespace semdec
