#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gnnla::io {

/// "%.17g": shortest format that always round-trips a double.
std::string format_double(double v);

std::string read_text(const std::filesystem::path& path);
/// Writes the file atomically enough for our purposes (truncate + write), creating parents.
void write_text(const std::filesystem::path& path, std::string_view text);

/// FNV-1a 64-bit, rendered as 16 hex digits. Used for manifest content hashes.
std::string fnv1a_hex(std::string_view bytes);

/// Minimal CSV table: header plus rows of already formatted cells.
class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> header);
    void add_row(std::vector<std::string> cells);
    std::string str() const;
    void save(const std::filesystem::path& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

/// Parses a numeric CSV with a header line. Returns rows of doubles.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path,
                                                  std::vector<std::string>* header = nullptr);

/// Reads a vector from a file with one number per line or comma/whitespace separated values.
std::vector<double> read_vector(const std::filesystem::path& path);

} // namespace gnnla::io
