#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

namespace testutil {

inline std::string fixture_path(const std::string& name) {
    return std::string(ECAC_FIXTURES_DIR) + "/" + name;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("missing file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

/// Golden prompt files store the prompt plus one trailing newline.
inline std::string golden(const std::string& name) {
    std::string text = read_file(fixture_path("golden/" + name));
    if (!text.empty() && text.back() == '\n') text.pop_back();
    return text;
}

/// Unique scratch directory under the build tree, removed on destruction.
struct TempDir {
    std::filesystem::path path;

    explicit TempDir(const std::string& tag) {
        static std::mt19937_64 rng(std::random_device{}());
        path = std::filesystem::temp_directory_path() /
               ("ecac_test_" + tag + "_" + std::to_string(rng()));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

} // namespace testutil
