#pragma once

#include <cstddef>
#include <map>
#include <string>

#include <json.hpp>

namespace pointqa {

// Counters a builder accumulates; serialized into report.json.
struct BuildReport {
    std::map<std::string, std::size_t> counts;
    std::map<std::string, std::size_t> skipped;

    void count(const std::string& key, std::size_t n = 1) { counts[key] += n; }
    void skip(const std::string& reason, std::size_t n = 1) { skipped[reason] += n; }
    std::size_t get(const std::string& key) const {
        auto it = counts.find(key);
        return it == counts.end() ? 0 : it->second;
    }
    std::size_t skips(const std::string& reason) const {
        auto it = skipped.find(reason);
        return it == skipped.end() ? 0 : it->second;
    }

    nlohmann::json to_json() const { return {{"counts", counts}, {"skipped", skipped}}; }
};

}  // namespace pointqa
