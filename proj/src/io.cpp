#include "fracdiff/io.hpp"

#include "fracdiff/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace fracdiff::io {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("io", "cannot open " + path + " for writing");
    out << content;
    if (!out) throw Error("io", "write failed for " + path);
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("io", "cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
    if (header.size() != columns.size()) throw ShapeError("csv: header and column counts differ");
    const std::size_t rows = columns.empty() ? 0 : columns[0].size();
    for (const auto& c : columns)
        if (c.size() != rows) throw ShapeError("csv: columns of different length");
    std::string s;
    for (std::size_t c = 0; c < header.size(); ++c) s += (c ? "," : "") + header[c];
    s += "\n";
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (c) s += ",";
            s += format_double(columns[c][r]);
        }
        s += "\n";
    }
    write_text(path, s);
}

const std::vector<double>& CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return columns[i];
    throw ConfigError("csv: missing column '" + name + "'");
}

CsvTable read_csv(const std::string& path) {
    std::istringstream in(read_text(path));
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("csv: " + path + " is empty");
    {
        std::istringstream hs(line);
        std::string cell;
        while (std::getline(hs, cell, ',')) {
            while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
            t.header.push_back(cell);
        }
    }
    t.columns.assign(t.header.size(), {});
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        std::istringstream ls(line);
        std::string cell;
        std::size_t c = 0;
        while (std::getline(ls, cell, ',')) {
            if (c >= t.header.size()) throw ConfigError("csv: too many fields at line " + std::to_string(lineno));
            try {
                std::size_t used = 0;
                t.columns[c].push_back(std::stod(cell, &used));
            } catch (const std::exception&) {
                throw ConfigError("csv: bad number '" + cell + "' at line " + std::to_string(lineno));
            }
            ++c;
        }
        if (c != t.header.size()) throw ConfigError("csv: too few fields at line " + std::to_string(lineno));
    }
    return t;
}

void write_flat_binary(const std::string& bin_path, const std::string& header_path, const double* data,
                       std::size_t rows, std::size_t cols, const Json& meta) {
    std::ofstream bin(bin_path, std::ios::binary);
    if (!bin) throw Error("io", "cannot open " + bin_path);
    bin.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(rows * cols * sizeof(double)));
    Json h;
    h["format"] = "float64-le-row-major";
    h["rows"] = rows;
    h["cols"] = cols;
    for (auto it = meta.begin(); it != meta.end(); ++it) h[it.key()] = it.value();
    write_json(header_path, h);
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

}  // namespace fracdiff::io
