// rclab/graph_io.hpp
//
// Edge-list text ("n m" header, then "u v" per line, 0-indexed) and a compact
// little-endian binary form:
//
//   "RCLG" | u32 version | u64 n | u64 m | m x (u32 u, u32 v)
//
// Both preserve edge order, so a round trip reproduces edge indices exactly.
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "rclab/graph.hpp"

namespace rclab {

class FormatError : public Error {
public:
    using Error::Error;
};

inline void write_edge_list(std::ostream& os, const Graph& g) {
    os << g.num_vertices() << ' ' << g.num_edges() << '\n';
    for (const auto& [u, v] : g.edge_list()) {
        os << u << ' ' << v << '\n';
    }
}

inline std::string to_edge_list(const Graph& g) {
    std::ostringstream os;
    write_edge_list(os, g);
    return os.str();
}

inline Graph read_edge_list(std::istream& is) {
    std::size_t n = 0;
    std::size_t m = 0;
    if (!(is >> n >> m)) {
        throw FormatError("edge list: missing 'n m' header");
    }
    std::vector<EdgeEnds> es;
    es.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::uint64_t u = 0;
        std::uint64_t v = 0;
        if (!(is >> u >> v)) {
            throw FormatError("edge list: expected " + std::to_string(m) + " edges, got " +
                              std::to_string(i));
        }
        if (u >= n || v >= n) {
            throw FormatError("edge list: endpoint out of range on edge " + std::to_string(i));
        }
        es.push_back({static_cast<Vertex>(u), static_cast<Vertex>(v)});
    }
    return Graph(n, std::move(es));
}

inline Graph from_edge_list(const std::string& text) {
    std::istringstream is(text);
    return read_edge_list(is);
}

namespace detail {

template <class T>
void put_le(std::ostream& os, T x) {
    std::array<char, sizeof(T)> buf{};
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf[i] = static_cast<char>((static_cast<std::uint64_t>(x) >> (8 * i)) & 0xff);
    }
    os.write(buf.data(), buf.size());
}

template <class T>
T get_le(std::istream& is) {
    std::array<unsigned char, sizeof(T)> buf{};
    if (!is.read(reinterpret_cast<char*>(buf.data()), buf.size())) {
        throw FormatError("binary graph: truncated input");
    }
    std::uint64_t x = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        x |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    }
    return static_cast<T>(x);
}

}  // namespace detail

inline constexpr std::uint32_t kBinaryGraphVersion = 1;

inline void write_binary(std::ostream& os, const Graph& g) {
    os.write("RCLG", 4);
    detail::put_le<std::uint32_t>(os, kBinaryGraphVersion);
    detail::put_le<std::uint64_t>(os, g.num_vertices());
    detail::put_le<std::uint64_t>(os, g.num_edges());
    for (const auto& [u, v] : g.edge_list()) {
        detail::put_le<std::uint32_t>(os, u);
        detail::put_le<std::uint32_t>(os, v);
    }
}

inline Graph read_binary(std::istream& is) {
    char magic[4] = {};
    if (!is.read(magic, 4) || std::memcmp(magic, "RCLG", 4) != 0) {
        throw FormatError("binary graph: bad magic");
    }
    const auto version = detail::get_le<std::uint32_t>(is);
    if (version != kBinaryGraphVersion) {
        throw FormatError("binary graph: unsupported version " + std::to_string(version));
    }
    const auto n = detail::get_le<std::uint64_t>(is);
    const auto m = detail::get_le<std::uint64_t>(is);
    std::vector<EdgeEnds> es;
    es.reserve(m);
    for (std::uint64_t i = 0; i < m; ++i) {
        const auto u = detail::get_le<std::uint32_t>(is);
        const auto v = detail::get_le<std::uint32_t>(is);
        if (u >= n || v >= n) {
            throw FormatError("binary graph: endpoint out of range");
        }
        es.push_back({u, v});
    }
    return Graph(n, std::move(es));
}

/// FNV-1a of the canonical text form, printed as 16 hex digits.
inline std::string graph_hash(const Graph& g) {
    const std::string text = to_edge_list(g);
    const auto h = fnv1a({reinterpret_cast<const unsigned char*>(text.data()), text.size()});
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

/// Loads by extension: ".bin" is binary, anything else edge-list text.
inline Graph load_graph(const std::string& path) {
    const bool bin = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
    std::ifstream in(path, bin ? std::ios::binary : std::ios::in);
    if (!in) {
        throw FormatError("cannot open graph file: " + path);
    }
    return bin ? read_binary(in) : read_edge_list(in);
}

inline void save_graph(const std::string& path, const Graph& g) {
    const bool bin = path.size() >= 4 && path.compare(path.size() - 4, 4, ".bin") == 0;
    std::ofstream out(path, bin ? std::ios::binary : std::ios::out);
    if (!out) {
        throw FormatError("cannot write graph file: " + path);
    }
    if (bin) {
        write_binary(out, g);
    } else {
        write_edge_list(out, g);
    }
}

}  // namespace rclab
