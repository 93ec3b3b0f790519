#include "wakerom/io.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "wakerom/errors.hpp"

namespace wakerom {

namespace {

constexpr char kMatrixMagic[16] = "WAKEROM-MATRIX";  // zero-padded to 16
constexpr char kBundleMagic[16] = "WAKEROM-BUNDLE";
constexpr uint32_t kFormatVersion = 1;
constexpr uint32_t kDtypeFloat64 = 1;

void put_u32(std::ostream& os, uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& os, uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<char*>(b), 8);
}

uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
}

uint64_t get_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return v;
}

void put_payload(std::ostream& os, const Eigen::MatrixXd& m) {
    os.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(sizeof(double) * m.size()));
}

Eigen::MatrixXd get_payload(std::istream& is, uint64_t rows, uint64_t cols,
                            const std::string& path) {
    Eigen::MatrixXd m(static_cast<long>(rows), static_cast<long>(cols));
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!is) throw IoError("truncated payload in " + path);
    return m;
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

void write_matrix(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write(kMatrixMagic, 16);
    put_u32(os, kFormatVersion);
    put_u32(os, kDtypeFloat64);
    put_u64(os, static_cast<uint64_t>(m.rows()));
    put_u64(os, static_cast<uint64_t>(m.cols()));
    put_payload(os, m);
    if (!os) throw IoError("write failed for " + path);
}

Eigen::MatrixXd read_matrix(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[16];
    is.read(magic, 16);
    if (!is || std::memcmp(magic, kMatrixMagic, 16) != 0)
        throw IoError(path + " is not a matrix container");
    const uint32_t version = get_u32(is);
    if (version != kFormatVersion)
        throw IoError(path + ": unsupported container version " + std::to_string(version));
    const uint32_t dtype = get_u32(is);
    if (dtype != kDtypeFloat64) throw IoError(path + ": unsupported dtype");
    const uint64_t rows = get_u64(is);
    const uint64_t cols = get_u64(is);
    return get_payload(is, rows, cols, path);
}

void Bundle::set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : manifest) {
        if (k == key) {
            v = value;
            return;
        }
    }
    manifest.emplace_back(key, value);
}

const std::string* Bundle::find(const std::string& key) const {
    for (const auto& [k, v] : manifest)
        if (k == key) return &v;
    return nullptr;
}

void Bundle::add(const std::string& name, const Eigen::MatrixXd& m) {
    entries.emplace_back(name, m);
}

void Bundle::add(const std::string& name, const Eigen::VectorXd& v) {
    entries.emplace_back(name, Eigen::MatrixXd(v));
}

const Eigen::MatrixXd& Bundle::get(const std::string& name) const {
    for (const auto& [n, m] : entries)
        if (n == name) return m;
    throw IoError("bundle entry '" + name + "' not found");
}

bool Bundle::has(const std::string& name) const {
    for (const auto& [n, m] : entries)
        if (n == name) return true;
    return false;
}

void Bundle::write(const std::string& path) const {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    os.write(kBundleMagic, 16);
    put_u32(os, kFormatVersion);
    std::string mtext;
    for (const auto& [k, v] : manifest) mtext += k + " = " + v + "\n";
    put_u32(os, static_cast<uint32_t>(mtext.size()));
    os.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
    put_u32(os, static_cast<uint32_t>(entries.size()));
    for (const auto& [name, m] : entries) {
        put_u32(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u64(os, static_cast<uint64_t>(m.rows()));
        put_u64(os, static_cast<uint64_t>(m.cols()));
        put_payload(os, m);
    }
    if (!os) throw IoError("write failed for " + path);
}

Bundle Bundle::read(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    char magic[16];
    is.read(magic, 16);
    if (!is || std::memcmp(magic, kBundleMagic, 16) != 0)
        throw IoError(path + " is not a bundle container");
    const uint32_t version = get_u32(is);
    if (version != kFormatVersion)
        throw IoError(path + ": refusing version " + std::to_string(version) +
                      " (expected " + std::to_string(kFormatVersion) + ")");
    Bundle b;
    const uint32_t mlen = get_u32(is);
    std::string mtext(mlen, '\0');
    is.read(mtext.data(), mlen);
    size_t pos = 0;
    while (pos < mtext.size()) {
        size_t end = mtext.find('\n', pos);
        if (end == std::string::npos) end = mtext.size();
        const std::string line = mtext.substr(pos, end - pos);
        pos = end + 1;
        const size_t eq = line.find('=');
        if (eq != std::string::npos)
            b.manifest.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    const uint32_t count = get_u32(is);
    for (uint32_t e = 0; e < count; ++e) {
        const uint32_t nlen = get_u32(is);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        const uint64_t rows = get_u64(is);
        const uint64_t cols = get_u64(is);
        b.entries.emplace_back(name, get_payload(is, rows, cols, path));
    }
    return b;
}

void write_kv(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
    if (!os) throw IoError("write failed for " + path);
}

std::vector<std::pair<std::string, std::string>> read_kv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    while (std::getline(is, line)) {
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ": malformed line '" + line + "'");
        kv.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return kv;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open " + path + " for writing");
    for (size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
    os << "\n";
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
        os << "\n";
    }
    if (!os) throw IoError("write failed for " + path);
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

std::vector<char> read_file_bytes(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path);
    return std::vector<char>(std::istreambuf_iterator<char>(is),
                             std::istreambuf_iterator<char>());
}

} // namespace wakerom
