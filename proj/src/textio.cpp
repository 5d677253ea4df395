#include "demosync/textio.hpp"

#include "demosync/error.hpp"

#include <zlib.h>

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace demosync {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

}  // namespace

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_hex32(uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", v);
    return buf;
}

double parse_double(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    char* end = nullptr;
    double v = std::strtod(t.c_str(), &end);
    if (t.empty() || end != t.c_str() + t.size())
        throw Error("ParseError", what + ": bad number '" + s + "'");
    return v;
}

long parse_long(const std::string& s, const std::string& what) {
    const std::string t = trim(s);
    char* end = nullptr;
    long v = std::strtol(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size())
        throw Error("ParseError", what + ": bad integer '" + s + "'");
    return v;
}

bool KvFile::has(const std::string& key) const {
    for (const auto& [k, v] : entries)
        if (k == key) return true;
    return false;
}

const std::string& KvFile::get(const std::string& key, const std::string& missing_code) const {
    for (const auto& [k, v] : entries)
        if (k == key) return v;
    throw Error(missing_code, "missing key '" + key + "'");
}

std::string KvFile::get_or(const std::string& key, const std::string& fallback) const {
    for (const auto& [k, v] : entries)
        if (k == key) return v;
    return fallback;
}

std::vector<std::string> KvFile::get_all(const std::string& key) const {
    std::vector<std::string> out;
    for (const auto& [k, v] : entries)
        if (k == key) out.push_back(v);
    return out;
}

double KvFile::get_double(const std::string& key, const std::string& missing_code) const {
    return parse_double(get(key, missing_code), key);
}

double KvFile::get_double_or(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    return parse_double(get(key, "ParseError"), key);
}

long KvFile::get_long_or(const std::string& key, long fallback) const {
    if (!has(key)) return fallback;
    return parse_long(get(key, "ParseError"), key);
}

void KvFile::add(const std::string& key, const std::string& value) {
    entries.emplace_back(key, value);
}

void KvFile::add_double(const std::string& key, double value) {
    entries.emplace_back(key, fmt_g17(value));
}

void KvFile::add_long(const std::string& key, long value) {
    entries.emplace_back(key, std::to_string(value));
}

std::string KvFile::serialize() const {
    std::string out;
    for (const auto& [k, v] : entries) {
        out += k;
        out += ' ';
        out += v;
        out += '\n';
    }
    return out;
}

KvFile KvFile::parse(const std::string& text) {
    KvFile kv;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        // Accept both "key value" and "key = value".
        size_t sp = t.find_first_of(" \t=");
        if (sp == std::string::npos) {
            kv.entries.emplace_back(t, "");
            continue;
        }
        std::string key = t.substr(0, sp);
        std::string rest = t.substr(sp);
        size_t vb = 0;
        while (vb < rest.size() &&
               (std::isspace(static_cast<unsigned char>(rest[vb])) || rest[vb] == '='))
            ++vb;
        kv.entries.emplace_back(key, trim(rest.substr(vb)));
    }
    return kv;
}

KvFile KvFile::load(const std::string& path) {
    return parse(read_file_bytes(path));
}

void KvFile::save(const std::string& path) const {
    write_file_bytes(path, serialize());
}

std::vector<std::string> split_bracket_list(const std::string& value) {
    std::string t = trim(value);
    if (!t.empty() && t.front() == '[') {
        if (t.back() != ']')
            throw Error("ParseError", "unterminated list '" + value + "'");
        t = t.substr(1, t.size() - 2);
    }
    std::vector<std::string> out;
    std::string cur;
    for (char c : t) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    std::string last = trim(cur);
    if (!last.empty() || !out.empty()) out.push_back(last);
    return out;
}

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("IoError", "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw Error("IoError", "read failed on " + path);
    return ss.str();
}

void write_file_bytes(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot create " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error("IoError", "write failed on " + path);
}

uint32_t crc32_of(const void* data, size_t len) {
    return static_cast<uint32_t>(
        ::crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(len)));
}

uint32_t crc32_of(const std::string& bytes) {
    return crc32_of(bytes.data(), bytes.size());
}

}  // namespace demosync
