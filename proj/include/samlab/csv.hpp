#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace samlab::io {

// Renders a double with 17 significant digits so a reader recovers the exact value.
std::string format_double(double v);

// RFC-4180-style field quoting.
std::string csv_escape(const std::string& field);

// Appendable CSV writer. Writes the header only when the file is new or empty;
// reopening appends rows without duplicating it.
class MetricsSink {
public:
    MetricsSink(const std::string& path, const std::vector<std::string>& header);

    void write_row(const std::vector<std::string>& fields);
    void flush();
    const std::string& path() const { return path_; }

private:
    std::string path_;
    std::size_t columns_;
    std::ofstream out_;
};

// Minimal RFC-4180 reader used by tests and round-trip checks.
std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace samlab::io
