#pragma once

#include "error.hpp"

#include <compare>
#include <cstddef>
#include <functional>
#include <ostream>
#include <string>
#include <string_view>

namespace semdec {

/**
 * Identifier of a taxonomy node.
 *
 * Either a WordNet noun id ("n" + 8-digit offset, e.g. n01443537) or a plain
 * token for toy taxonomies. Anything that starts with 'n' followed by a digit
 * is taken to be in WNID form and must then have exactly 8 digits. Plain
 * tokens are limited to [A-Za-z0-9_.:-].
 */
class SynsetRef {
public:
    SynsetRef() = default;

    explicit SynsetRef(std::string id) : id_(std::move(id)) {
        if (!valid(id_)) {
            throw ParseError("malformed synset id '" + id_ + "'");
        }
    }

    static SynsetRef from_offset(std::string_view offset) { return SynsetRef("n" + std::string(offset)); }

    static bool looks_like_wnid(std::string_view id) {
        return id.size() >= 2 && id[0] == 'n' && id[1] >= '0' && id[1] <= '9';
    }

    static bool valid(std::string_view id) {
        if (id.empty()) {
            return false;
        }
        if (looks_like_wnid(id)) {
            if (id.size() != 9) {
                return false;
            }
            for (std::size_t i = 1; i < id.size(); ++i) {
                if (id[i] < '0' || id[i] > '9') {
                    return false;
                }
            }
            return true;
        }
        for (char c : id) {
            const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_' ||
                            c == '.' || c == ':' || c == '-';
            if (!ok) {
                return false;
            }
        }
        return true;
    }

    const std::string& str() const { return id_; }
    bool empty() const { return id_.empty(); }
    bool is_wnid() const { return looks_like_wnid(id_); }

    friend auto operator<=>(const SynsetRef&, const SynsetRef&) = default;
    friend bool operator==(const SynsetRef&, const SynsetRef&) = default;

    friend std::ostream& operator<<(std::ostream& os, const SynsetRef& s) { return os << s.id_; }

private:
    std::string id_;
};

} // namespace semdec

template <>
struct std::hash<semdec::SynsetRef> {
    std::size_t operator()(const semdec::SynsetRef& s) const noexcept { return std::hash<std::string>{}(s.str()); }
};
