#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

namespace wakerom {

/// Single-matrix binary container: 16-byte magic, u32 version, u32 dtype
/// (1 = float64), u64 rows, u64 cols, then the column-major payload.
/// All integers little-endian.
void write_matrix(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(const std::string& path);

/// Named collection of matrices plus a plain-text manifest, in one versioned
/// binary file. Loading refuses version mismatches.
struct Bundle {
    std::vector<std::pair<std::string, std::string>> manifest;
    std::vector<std::pair<std::string, Eigen::MatrixXd>> entries;

    void set(const std::string& key, const std::string& value);
    const std::string* find(const std::string& key) const;
    void add(const std::string& name, const Eigen::MatrixXd& m);
    void add(const std::string& name, const Eigen::VectorXd& v);
    const Eigen::MatrixXd& get(const std::string& name) const;
    bool has(const std::string& name) const;

    void write(const std::string& path) const;
    static Bundle read(const std::string& path);
};

/// key = value lines; '#' starts a comment. Order preserved on write.
void write_kv(const std::string& path,
              const std::vector<std::pair<std::string, std::string>>& kv);
std::vector<std::pair<std::string, std::string>> read_kv(const std::string& path);

/// CSV helpers with fixed %.17g formatting so reruns are byte-identical.
std::string format_double(double v);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

bool file_exists(const std::string& path);
std::vector<char> read_file_bytes(const std::string& path);

} // namespace wakerom
