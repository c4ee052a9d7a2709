#include "mfspde/io.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include "mfspde/errors.hpp"

namespace mfspde {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string to_csv(const std::vector<std::string>& header,
                   const std::vector<std::vector<double>>& rows) {
    std::string out;
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (k) out += ',';
        out += header[k];
    }
    out += '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size()) throw InvalidArgument("to_csv: row width does not match header");
        for (std::size_t k = 0; k < row.size(); ++k) {
            if (k) out += ',';
            out += format_double(row[k]);
        }
        out += '\n';
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int k = 0; k < len; ++k) {
        out += hex[digest[k] >> 4];
        out += hex[digest[k] & 0xf];
    }
    return out;
}

std::string json_text(const nlohmann::json& j) { return j.dump(2) + "\n"; }

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void ResultBundle::add_text(const std::string& name, std::string content) {
    if (name == "manifest.json") throw InvalidArgument("manifest.json is reserved");
    files_[name] = std::move(content);
}

void ResultBundle::add_json(const std::string& name, const nlohmann::json& j) {
    add_text(name, json_text(j));
}

void ResultBundle::add_csv(const std::string& name, const std::vector<std::string>& header,
                           const std::vector<std::vector<double>>& rows) {
    add_text(name, to_csv(header, rows));
}

std::string ResultBundle::bundle_hash(const std::string& hashed_config) const {
    std::string acc;
    for (const auto& [name, content] : files_) acc += name + ":" + sha256_hex(content) + "\n";
    acc += hashed_config;
    return sha256_hex(acc);
}

nlohmann::json ResultBundle::write(const std::string& dir, const std::string& command,
                                   const std::string& config_echo,
                                   const std::string& hashed_config) const {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());

    nlohmann::json manifest;
    manifest["version"] = kArtifactVersion;
    manifest["command"] = command;
    manifest["timestamp"] = iso_timestamp();
    manifest["config"] = config_echo;
    nlohmann::json hashes = nlohmann::json::object();
    for (const auto& [name, content] : files_) {
        hashes[name] = sha256_hex(content);
        std::ofstream out(fs::path(dir) / name, std::ios::binary);
        out << content;
        if (!out) throw Error("cannot write '" + (fs::path(dir) / name).string() + "'");
    }
    manifest["files"] = hashes;
    manifest["bundle_hash"] = bundle_hash(hashed_config);

    std::ofstream out(fs::path(dir) / "manifest.json", std::ios::binary);
    out << json_text(manifest);
    if (!out) throw Error("cannot write manifest in '" + dir + "'");
    return manifest;
}

}  // namespace mfspde
