#pragma once

#include "json.hpp"

#include <cstddef>
#include <string>
#include <vector>

namespace fracdiff::io {

using Json = nlohmann::ordered_json;

/// Shortest representation that round-trips (locale independent).
std::string format_double(double v);

void write_text(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

/// Column-oriented CSV with a header row; all columns must share a length.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> columns;
    /// Column by header name; throws ConfigError if absent.
    const std::vector<double>& column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

/// Raw little-endian float64, row-major rows x cols, plus a JSON header that
/// records the layout and `meta`.
void write_flat_binary(const std::string& bin_path, const std::string& header_path, const double* data,
                       std::size_t rows, std::size_t cols, const Json& meta);

void write_json(const std::string& path, const Json& j);

std::string sha256_hex(const std::string& data);

}  // namespace fracdiff::io
