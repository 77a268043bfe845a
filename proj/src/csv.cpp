#include "samlab/csv.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "samlab/errors.hpp"

namespace samlab::io {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string csv_escape(const std::string& field) {
    bool needs_quote = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quote) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

MetricsSink::MetricsSink(const std::string& path, const std::vector<std::string>& header)
    : path_(path), columns_(header.size()) {
    namespace fs = std::filesystem;
    bool write_header = !fs::exists(path) || fs::file_size(path) == 0;
    out_.open(path, std::ios::app);
    if (!out_) throw FormatError(path + ": cannot open for writing");
    if (write_header) write_row(header);
}

void MetricsSink::write_row(const std::vector<std::string>& fields) {
    if (fields.size() != columns_)
        throw StateError(path_ + ": row has " + std::to_string(fields.size()) + " fields, header has " +
                         std::to_string(columns_));
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(fields[i]);
    }
    out_ << '\n';
    flush();
}

void MetricsSink::flush() { out_.flush(); }

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError(path + ": cannot open");
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    char c;
    auto end_field = [&] {
        row.push_back(field);
        field.clear();
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(row);
        row.clear();
    };
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            end_field();
        } else if (c == '\n') {
            end_row();
        } else if (c != '\r') {
            field += c;
        }
    }
    if (!field.empty() || !row.empty()) end_row();
    return rows;
}

}  // namespace samlab::io
