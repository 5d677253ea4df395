#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace demosync {

// Formats a double with 17 significant digits, enough for exact
// decimal round trips of IEEE-754 binary64.
std::string fmt_g17(double v);

std::string fmt_hex32(uint32_t v);

double parse_double(const std::string& s, const std::string& what);
long parse_long(const std::string& s, const std::string& what);

// Line-oriented "key value" / "key = value" files used for calibration
// files, scenario files, session headers and episode manifests. Keys may
// repeat; order is preserved.
struct KvFile {
    std::vector<std::pair<std::string, std::string>> entries;

    bool has(const std::string& key) const;
    // First value for key; throws Error(missing_code) if absent.
    const std::string& get(const std::string& key, const std::string& missing_code) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    std::vector<std::string> get_all(const std::string& key) const;

    double get_double(const std::string& key, const std::string& missing_code) const;
    double get_double_or(const std::string& key, double fallback) const;
    long get_long_or(const std::string& key, long fallback) const;

    void add(const std::string& key, const std::string& value);
    void add_double(const std::string& key, double value);
    void add_long(const std::string& key, long value);

    std::string serialize() const;

    static KvFile parse(const std::string& text);
    static KvFile load(const std::string& path);
    void save(const std::string& path) const;
};

// Splits "[a, b, c]" into trimmed element strings. Plain scalars come back
// as a single element.
std::vector<std::string> split_bracket_list(const std::string& value);

std::string read_file_bytes(const std::string& path);
void write_file_bytes(const std::string& path, const std::string& bytes);

uint32_t crc32_of(const void* data, size_t len);
uint32_t crc32_of(const std::string& bytes);

}  // namespace demosync
