#pragma once

// Minimal RFC-4180 CSV support: quoted fields, embedded commas/quotes/newlines
// on read; canonical CRLF output on write.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lawline/errors.hpp"

namespace lawline::csv {

struct Row {
    std::size_t line = 0; // 1-based line where the row starts
    std::vector<std::string> fields;
};

/// Parse a whole CSV document. Rows keep their starting line number so callers
/// can attach diagnostics.
inline std::vector<Row> parse(std::string_view text) {
    std::vector<Row> rows;
    std::size_t line = 1;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        Row row;
        row.line = line;
        bool row_done = false;
        while (!row_done) {
            std::string field;
            if (i < n && text[i] == '"') {
                ++i; // opening quote
                while (true) {
                    if (i >= n) throw IoError("csv: unterminated quoted field starting on line " +
                                              std::to_string(row.line));
                    char c = text[i++];
                    if (c == '"') {
                        if (i < n && text[i] == '"') {
                            field.push_back('"');
                            ++i;
                        } else {
                            break;
                        }
                    } else {
                        if (c == '\n') ++line;
                        field.push_back(c);
                    }
                }
            } else {
                while (i < n && text[i] != ',' && text[i] != '\n' && text[i] != '\r')
                    field.push_back(text[i++]);
            }
            row.fields.push_back(std::move(field));
            if (i >= n) {
                row_done = true;
            } else if (text[i] == ',') {
                ++i;
            } else if (text[i] == '\r' || text[i] == '\n') {
                if (text[i] == '\r' && i + 1 < n && text[i + 1] == '\n') ++i;
                ++i;
                ++line;
                row_done = true;
            }
        }
        // trailing newline produces no empty row
        if (!(i >= n && row.fields.size() == 1 && row.fields[0].empty())) rows.push_back(std::move(row));
    }
    return rows;
}

inline std::string escape(std::string_view field) {
    bool needs_quotes = false;
    for (char c : field)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') needs_quotes = true;
    if (!needs_quotes) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

inline std::string join_row(std::span<const std::string> fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out.push_back(',');
        out += escape(fields[i]);
    }
    out += "\r\n";
    return out;
}

class Writer {
public:
    void row(std::span<const std::string> fields) { out_ += join_row(fields); }
    void row(std::initializer_list<std::string> fields) {
        row(std::span<const std::string>(fields.begin(), fields.size()));
    }
    const std::string& str() const { return out_; }

private:
    std::string out_;
};

} // namespace lawline::csv
