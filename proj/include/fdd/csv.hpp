#pragma once

// Minimal RFC 4180 style CSV reading and writing. Lines starting with '#'
// before the header carry "key=value" metadata (run manifest hashes).

#include "fdd/core.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace fdd::csv {

/// Shortest representation that round-trips exactly.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string quote(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

class Writer {
public:
    explicit Writer(std::vector<std::string> header) : columns_(header.size()) {
        row(header);
    }

    void meta(const std::string& key, const std::string& value) {
        // Metadata must precede the header row.
        meta_ += "# " + key + "=" + value + "\n";
    }

    void row(const std::vector<std::string>& fields) {
        if (fields.size() != columns_) throw Error("csv: row width does not match header");
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) body_ += ',';
            body_ += quote(fields[i]);
        }
        body_ += '\n';
    }

    std::string str() const { return meta_ + body_; }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError("cannot write " + path);
        out << str();
        if (!out) throw StorageError("write failed: " + path);
    }

private:
    std::size_t columns_;
    std::string meta_;
    std::string body_;
};

struct Table {
    std::string source;
    std::map<std::string, std::string> meta;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_lines; // 1-based source line per row

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return i;
        }
        throw ConfigError(source, 1, "missing column '" + name + "'");
    }

    void require_columns(const std::vector<std::string>& expected) const {
        if (header != expected) {
            std::string want;
            for (const auto& c : expected) want += (want.empty() ? "" : ",") + c;
            throw ConfigError(source, 1, "expected header '" + want + "'");
        }
    }

    std::string meta_or(const std::string& key, const std::string& fallback = {}) const {
        auto it = meta.find(key);
        return it == meta.end() ? fallback : it->second;
    }
};

inline Table parse(std::string_view text, std::string source = "<csv>") {
    Table table;
    table.source = std::move(source);
    std::size_t line = 1;
    std::size_t pos = 0;
    bool have_header = false;

    while (pos < text.size()) {
        if (!have_header && text[pos] == '#') {
            auto end = text.find('\n', pos);
            if (end == std::string_view::npos) end = text.size();
            std::string_view entry = text.substr(pos + 1, end - pos - 1);
            while (!entry.empty() && entry.front() == ' ') entry.remove_prefix(1);
            if (!entry.empty() && entry.back() == '\r') entry.remove_suffix(1);
            auto eq = entry.find('=');
            if (eq != std::string_view::npos) {
                table.meta[std::string(entry.substr(0, eq))] = std::string(entry.substr(eq + 1));
            }
            pos = end + 1;
            ++line;
            continue;
        }

        std::vector<std::string> fields;
        std::string field;
        bool in_quotes = false;
        const std::size_t start_line = line;
        for (; pos < text.size(); ++pos) {
            char c = text[pos];
            if (in_quotes) {
                if (c == '"') {
                    if (pos + 1 < text.size() && text[pos + 1] == '"') {
                        field += '"';
                        ++pos;
                    } else {
                        in_quotes = false;
                    }
                } else {
                    if (c == '\n') ++line;
                    field += c;
                }
            } else if (c == '"') {
                in_quotes = true;
            } else if (c == ',') {
                fields.push_back(std::move(field));
                field.clear();
            } else if (c == '\n') {
                ++pos;
                ++line;
                break;
            } else if (c != '\r') {
                field += c;
            }
        }
        if (in_quotes) throw ConfigError(table.source, start_line, "unterminated quoted field");
        fields.push_back(std::move(field));
        if (fields.size() == 1 && fields[0].empty()) continue;

        if (!have_header) {
            for (auto& h : fields) {
                while (!h.empty() && h.front() == ' ') h.erase(h.begin());
            }
            table.header = std::move(fields);
            have_header = true;
        } else {
            if (fields.size() != table.header.size()) {
                throw ConfigError(table.source, start_line, "expected " + std::to_string(table.header.size()) +
                                                                " fields, got " + std::to_string(fields.size()));
            }
            table.rows.push_back(std::move(fields));
            table.row_lines.push_back(start_line);
        }
    }
    if (!have_header) throw ConfigError(table.source, 1, "missing header row");
    return table;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline Table load(const std::string& path) {
    return parse(read_file(path), path);
}

inline double to_double(const Table& t, std::size_t row, std::size_t col) {
    const std::string& s = t.rows[row][col];
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError(t.source, t.row_lines[row], "not a number in column '" + t.header[col] + "': '" + s + "'");
    }
    return v;
}

inline long long to_int(const Table& t, std::size_t row, std::size_t col) {
    const std::string& s = t.rows[row][col];
    long long v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        throw ConfigError(t.source, t.row_lines[row], "not an integer in column '" + t.header[col] + "': '" + s + "'");
    }
    return v;
}

inline bool to_bool(const Table& t, std::size_t row, std::size_t col) {
    const std::string& s = t.rows[row][col];
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    throw ConfigError(t.source, t.row_lines[row], "not a boolean in column '" + t.header[col] + "': '" + s + "'");
}

} // namespace fdd::csv
