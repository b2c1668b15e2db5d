#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "phenoseq/error.hpp"

namespace phenoseq {

// FNV-1a over the file bytes; cheap and stable, used to compare runs.
inline std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file for digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
        const std::streamsize n = in.gcount();
        for (std::streamsize i = 0; i < n; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ull;
        }
    }
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

// Provenance record written next to every command's outputs.
struct RunManifest {
    std::string command;
    std::vector<std::string> config_paths;
    std::map<std::string, std::uint64_t> seeds;
    std::map<std::string, std::string> input_digests;
    std::map<std::string, std::string> output_digests;
    std::string tool_version;
    double wall_seconds = 0.0;

    void add_input(const std::string& path) { input_digests[path] = file_digest(path); }
    void add_output(const std::string& path) { output_digests[path] = file_digest(path); }

    nlohmann::json to_json() const {
        return {{"command", command},
                {"config_paths", config_paths},
                {"seeds", seeds},
                {"inputs", input_digests},
                {"outputs", output_digests},
                {"tool_version", tool_version},
                {"wall_seconds", wall_seconds}};
    }
};

class WallTimer {
public:
    WallTimer() : start_(std::chrono::steady_clock::now()) {}
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

}  // namespace phenoseq
