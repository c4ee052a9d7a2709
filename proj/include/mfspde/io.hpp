#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace mfspde {

inline constexpr const char* kArtifactVersion = "0.1.0";

/// %.17g, so every double survives a text round trip.
std::string format_double(double v);

/// Header row plus numeric rows, comma separated, newline terminated.
std::string to_csv(const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& rows);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

/// Files of one command, held in memory and written together at the end.
/// The manifest lists each file's hash; bundle_hash covers the sorted
/// (name, hash) pairs and the hashed config echo, but not the timestamp.
class ResultBundle {
public:
    void add_text(const std::string& name, std::string content);
    void add_json(const std::string& name, const nlohmann::json& j);
    void add_csv(const std::string& name, const std::vector<std::string>& header,
                 const std::vector<std::vector<double>>& rows);

    const std::map<std::string, std::string>& files() const noexcept { return files_; }

    /// sha256 over "name:hash\n" lines in name order followed by hashed_config.
    std::string bundle_hash(const std::string& hashed_config) const;

    /// Writes every file and manifest.json into dir, creating it if needed.
    /// config_echo is stored verbatim; hashed_config enters the bundle hash.
    /// Returns the manifest.
    nlohmann::json write(const std::string& dir, const std::string& command,
                         const std::string& config_echo, const std::string& hashed_config) const;

private:
    std::map<std::string, std::string> files_;
};

/// Pretty JSON text with a trailing newline.
std::string json_text(const nlohmann::json& j);

/// ISO-8601 UTC timestamp of the current time.
std::string iso_timestamp();

}  // namespace mfspde
