#pragma once

// HTPF field files:
//   "HTPF" | u16 version = 1 | u8 rank = d+1 | rank x u64 sizes (time first)
//   | rank x f64 periods | row-major f64 samples
// All integers and doubles little-endian. A stack is several records back to back.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "field.hpp"

namespace halfheat::htpf {

static_assert(std::endian::native == std::endian::little, "HTPF I/O assumes a little-endian host");

inline constexpr char kMagic[4] = {'H', 'T', 'P', 'F'};
inline constexpr std::uint16_t kVersion = 1;

namespace detail {
template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& is, const char* what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError(std::string("truncated HTPF ") + what);
    return v;
}
} // namespace detail

inline void write(std::ostream& os, const Field& u) {
    const Grid& g = u.grid();
    os.write(kMagic, 4);
    detail::put<std::uint16_t>(os, kVersion);
    detail::put<std::uint8_t>(os, static_cast<std::uint8_t>(g.dim() + 1));
    for (int a = 0; a <= g.dim(); ++a) detail::put<std::uint64_t>(os, g.extent(a));
    for (int a = 0; a <= g.dim(); ++a) detail::put<double>(os, g.period(a));
    os.write(reinterpret_cast<const char*>(u.raw().data()), static_cast<std::streamsize>(sizeof(double) * u.size()));
    if (!os) throw FormatError("failed writing HTPF record");
}

/// Reads one record. Returns false on clean end of stream.
inline bool read(std::istream& is, Field& out) {
    char magic[4];
    is.read(magic, 4);
    if (is.gcount() == 0 && is.eof()) return false;
    if (is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("bad HTPF magic");
    const auto version = detail::get<std::uint16_t>(is, "version");
    if (version != kVersion) throw FormatError("unsupported HTPF version " + std::to_string(version));
    const auto rank = detail::get<std::uint8_t>(is, "rank");
    if (rank < 2 || rank > 4) throw FormatError("HTPF rank must be 2..4");
    std::vector<std::uint64_t> sizes(rank);
    std::vector<double> periods(rank);
    for (auto& s : sizes) s = detail::get<std::uint64_t>(is, "sizes");
    for (auto& p : periods) p = detail::get<double>(is, "periods");
    std::vector<std::size_t> nx(sizes.begin() + 1, sizes.end());
    std::vector<double> lx(periods.begin() + 1, periods.end());
    Grid g;
    try {
        g = make_grid(rank - 1, sizes[0], nx, periods[0], lx);
    } catch (const ConfigError& e) {
        throw FormatError(std::string("invalid HTPF header: ") + e.what());
    }
    std::vector<double> data(g.size());
    is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(sizeof(double) * data.size()));
    if (static_cast<std::size_t>(is.gcount()) != sizeof(double) * data.size())
        throw FormatError("HTPF sample count does not match header sizes");
    out = Field(std::move(g), std::move(data));
    return true;
}

inline void write_file(const std::string& path, const Field& u) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    write(os, u);
}

inline Field read_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    Field u;
    if (!read(is, u)) throw FormatError("empty HTPF file " + path);
    if (is.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after HTPF record in " + path);
    return u;
}

inline void write_stack(const std::string& path, const std::vector<Field>& fields) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw FormatError("cannot open " + path + " for writing");
    for (const auto& f : fields) write(os, f);
}

inline std::vector<Field> read_stack(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw FormatError("cannot open " + path);
    std::vector<Field> out;
    Field u;
    while (read(is, u)) out.push_back(std::move(u));
    return out;
}

} // namespace halfheat::htpf
