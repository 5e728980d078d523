#pragma once

// Recursive comparison of two run directories. JSON files are compared
// after removing every "wall_time_s" member; all other files byte for byte.

#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <set>
#include <string>
#include <vector>

namespace fracdiff::testing {

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void strip_timing(nlohmann::ordered_json& j) {
    if (j.is_object()) {
        j.erase("wall_time_s");
        for (auto& [k, v] : j.items()) strip_timing(v);
    } else if (j.is_array()) {
        for (auto& v : j) strip_timing(v);
    }
}

inline std::set<std::string> relative_files(const std::filesystem::path& root) {
    std::set<std::string> out;
    if (!std::filesystem::exists(root)) return out;
    for (const auto& e : std::filesystem::recursive_directory_iterator(root))
        if (e.is_regular_file()) out.insert(std::filesystem::relative(e.path(), root).generic_string());
    return out;
}

/// Human-readable list of differences; empty when the trees match.
inline std::vector<std::string> compare_dirs(const std::filesystem::path& a, const std::filesystem::path& b) {
    std::vector<std::string> diffs;
    const auto fa = relative_files(a), fb = relative_files(b);
    for (const auto& f : fa)
        if (!fb.count(f)) diffs.push_back("only in first: " + f);
    for (const auto& f : fb)
        if (!fa.count(f)) diffs.push_back("only in second: " + f);
    for (const auto& f : fa) {
        if (!fb.count(f)) continue;
        std::string x = slurp(a / f), y = slurp(b / f);
        if (f.size() > 5 && f.substr(f.size() - 5) == ".json") {
            auto jx = nlohmann::ordered_json::parse(x, nullptr, false);
            auto jy = nlohmann::ordered_json::parse(y, nullptr, false);
            if (!jx.is_discarded() && !jy.is_discarded()) {
                strip_timing(jx);
                strip_timing(jy);
                x = jx.dump();
                y = jy.dump();
            }
        }
        if (x != y) diffs.push_back("content differs: " + f);
    }
    return diffs;
}

}  // namespace fracdiff::testing
