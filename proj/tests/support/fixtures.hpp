#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "persona/instruments.hpp"
#include "persona/personas.hpp"
#include "persona/prompting.hpp"

namespace persona::testing {

inline std::filesystem::path data_dir() { return PERSONA_TEST_DATA_DIR; }
inline std::filesystem::path test_dir() { return PERSONA_TEST_DIR; }

struct Shipped {
    BankSet banks;
    PersonaCatalog personas;
    PromptRenderer renderer;

    Shipped()
        : banks(load_banks(data_dir())),
          personas(PersonaCatalog::load(data_dir() / "personas.json")),
          renderer(PromptTemplates::load(data_dir() / "templates"), personas, &banks) {}
};

// Loaded once per test binary.
inline const Shipped& shipped() {
    static const Shipped s;
    return s;
}

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

class TempDir {
public:
    TempDir() {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("persona-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace persona::testing
