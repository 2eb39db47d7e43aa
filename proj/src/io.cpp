#include "gnnla/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gnnla/error.hpp"

namespace gnnla::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw Error("write failed: " + path.string());
}

std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvWriter::add_row(std::vector<std::string> cells) {
    if (cells.size() != header_.size()) throw Error("CsvWriter: row width does not match header");
    rows_.push_back(std::move(cells));
}

std::string CsvWriter::str() const {
    std::string out;
    auto emit = [&out](const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out += ',';
            out += cells[i];
        }
        out += '\n';
    };
    emit(header_);
    for (const auto& r : rows_) emit(r);
    return out;
}

void CsvWriter::save(const std::filesystem::path& path) const { write_text(path, str()); }

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

} // namespace

std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path,
                                                  std::vector<std::string>* header) {
    std::istringstream in(read_text(path));
    std::string line;
    std::vector<std::vector<double>> rows;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw Error(path.string() + ": empty csv");
    ++lineno;
    if (header) *header = split_csv_line(line);
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::vector<double> row;
        for (const auto& cell : split_csv_line(line)) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw Error(path.string() + ":" + std::to_string(lineno) + ": not a number: '" +
                            cell + "'");
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<double> read_vector(const std::filesystem::path& path) {
    std::string text = read_text(path);
    for (auto& c : text)
        if (c == ',' || c == ';') c = ' ';
    std::istringstream in(text);
    std::vector<double> v;
    std::string tok;
    while (in >> tok) {
        try {
            v.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw Error(path.string() + ": not a number: '" + tok + "'");
        }
    }
    return v;
}

} // namespace gnnla::io
