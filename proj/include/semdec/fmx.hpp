#pragma once

#include "error.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

/**
 * @file fmx.hpp
 *
 * @brief The FMX1 matrix container.
 *
 * Layout, all little-endian:
 *
 *     "FMX1" | uint32 H | H bytes of UTF-8 JSON | rows*cols float32, row-major
 *
 * The JSON header always carries "rows" and "cols"; everything else is owned
 * by the caller (ids, labels, model parameters, ...). Headers are written with
 * sorted keys so identical content gives identical bytes.
 */

namespace semdec::fmx {

inline constexpr std::string_view magic = "FMX1";

struct Container {
    nlohmann::json header = nlohmann::json::object();
    Eigen::MatrixXd data;
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace detail

inline std::string encode(const nlohmann::json& extra, const Eigen::MatrixXd& data) {
    nlohmann::json header = extra;
    header["rows"] = data.rows();
    header["cols"] = data.cols();
    const std::string text = header.dump();

    std::string out;
    out.reserve(8 + text.size() + static_cast<std::size_t>(data.size()) * 4);
    out.append(magic);
    detail::put_u32(out, static_cast<std::uint32_t>(text.size()));
    out.append(text);
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.cols(); ++c) {
            const double v = data(r, c);
            if (!std::isfinite(v)) {
                throw FormatError("non-finite value at (" + std::to_string(r) + ", " + std::to_string(c) + ")");
            }
            detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
        }
    }
    return out;
}

inline Container decode(std::string_view bytes, const std::string& source = "<memory>") {
    if (bytes.size() < 8 || bytes.substr(0, 4) != magic) {
        throw FormatError(source + ": bad magic, expected FMX1");
    }
    const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
    const std::uint32_t hlen = detail::get_u32(raw + 4);
    if (bytes.size() < 8 + static_cast<std::size_t>(hlen)) {
        throw FormatError(source + ": truncated header");
    }

    Container out;
    try {
        out.header = nlohmann::json::parse(bytes.substr(8, hlen));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(source + ": header is not valid JSON: " + e.what());
    }
    if (!out.header.is_object() || !out.header.contains("rows") || !out.header.contains("cols") ||
        !out.header["rows"].is_number_unsigned() || !out.header["cols"].is_number_unsigned()) {
        throw FormatError(source + ": header lacks non-negative integer rows/cols");
    }

    const auto rows = out.header["rows"].get<std::uint64_t>();
    const auto cols = out.header["cols"].get<std::uint64_t>();
    const std::size_t payload = bytes.size() - 8 - hlen;
    const std::uint64_t expected = rows * cols * 4;
    if (payload < expected) {
        throw FormatError(source + ": truncated payload, header says " + std::to_string(rows) + "x" +
                          std::to_string(cols) + " (" + std::to_string(expected) + " bytes) but found " +
                          std::to_string(payload));
    }
    if (payload > expected) {
        throw FormatError(source + ": dimension mismatch, " + std::to_string(payload - expected) +
                          " trailing bytes after a " + std::to_string(rows) + "x" + std::to_string(cols) + " payload");
    }

    out.data.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    const unsigned char* p = raw + 8 + hlen;
    for (std::uint64_t r = 0; r < rows; ++r) {
        for (std::uint64_t c = 0; c < cols; ++c, p += 4) {
            const float v = std::bit_cast<float>(detail::get_u32(p));
            if (!std::isfinite(v)) {
                throw FormatError(source + ": non-finite value at (" + std::to_string(r) + ", " + std::to_string(c) +
                                  ")");
            }
            out.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return out;
}

inline std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_bytes(const std::filesystem::path& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

inline Container read(const std::filesystem::path& path) { return decode(read_bytes(path), path.string()); }

inline void write(const std::filesystem::path& path, const nlohmann::json& header, const Eigen::MatrixXd& data) {
    write_bytes(path, encode(header, data));
}

} // namespace semdec::fmx
