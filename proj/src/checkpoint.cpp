#include "ksddpg/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>

#include "ksddpg/errors.hpp"

namespace ksddpg {

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
    unsigned char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char buf[8];
    is.read(reinterpret_cast<char*>(buf), 8);
    if (!is) throw ParseError("checkpoint: truncated integer field");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
}

} // namespace

void save_checkpoint(const std::string& path, const NamedMatrices& entries) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ConfigError("checkpoint: cannot open for write: " + path);
    os << kCheckpointMagic << "\n";
    write_u64(os, entries.size());
    for (const auto& [name, m] : entries) {
        write_u64(os, name.size());
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u64(os, m.rows());
        write_u64(os, m.cols());
        static_assert(sizeof(double) == 8);
        os.write(reinterpret_cast<const char*>(m.values().data()),
                 static_cast<std::streamsize>(m.size() * sizeof(double)));
    }
    if (!os) throw ConfigError("checkpoint: write failed: " + path);
}

NamedMatrices load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError("checkpoint: cannot open: " + path);
    std::string magic;
    std::getline(is, magic);
    if (magic != kCheckpointMagic) {
        throw VersionError("checkpoint: expected magic '" + std::string(kCheckpointMagic) +
                           "', got '" + magic + "'");
    }
    const std::uint64_t count = read_u64(is);
    NamedMatrices out;
    out.reserve(count);
    for (std::uint64_t e = 0; e < count; ++e) {
        const std::uint64_t name_len = read_u64(is);
        std::string name(name_len, '\0');
        is.read(name.data(), static_cast<std::streamsize>(name_len));
        const std::uint64_t rows = read_u64(is);
        const std::uint64_t cols = read_u64(is);
        Matrix m(rows, cols);
        is.read(reinterpret_cast<char*>(m.values().data()),
                static_cast<std::streamsize>(m.size() * sizeof(double)));
        if (!is) throw ParseError("checkpoint: truncated payload for '" + name + "'");
        out.emplace_back(std::move(name), std::move(m));
    }
    return out;
}

const Matrix& checkpoint_get(const NamedMatrices& entries, const std::string& name) {
    for (const auto& [n, m] : entries) {
        if (n == name) return m;
    }
    throw ConfigError("checkpoint: missing entry '" + name + "'");
}

} // namespace ksddpg
