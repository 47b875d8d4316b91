#pragma once

#include "mindos/foundation_model.hpp"
#include "mindos/kernel.hpp"

#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>

#ifndef MINDOS_FIXTURE_DIR
#error "MINDOS_FIXTURE_DIR must be defined"
#endif

namespace mindos::testkit {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(MINDOS_FIXTURE_DIR) / rel; }

inline std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct ScriptedModel {
    std::shared_ptr<ModelRegistry> registry;
    std::shared_ptr<ScriptedProvider> provider;
};

inline ScriptedModel scripted_model(const ScriptedScript& script, const std::string& model_id = "scripted") {
    ScriptedModel m{std::make_shared<ModelRegistry>(), std::make_shared<ScriptedProvider>(script)};
    m.registry->register_model(ModelDescriptor{model_id, ProviderKind::scripted, std::nullopt, true}, m.provider);
    return m;
}

inline ScriptedModel scripted_model_from(const std::string& script_fixture) {
    return scripted_model(parse_scripted_rules(read_file(fixture("scripts/" + script_fixture))));
}

class TempDir {
public:
    TempDir() {
        static std::mt19937_64 rng{std::random_device{}()};
        path_ = std::filesystem::temp_directory_path() / ("mindos-test-" + std::to_string(rng()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

// Random printable-ish UTF-8 with whitespace runs, used by property tests.
inline std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
    static const char* pieces[] = {"a", "B", "z", "Q", "7", " ", "  ", "\t", "\n", "é", "É", "Ж", "ж", "Σ",
                                   "σ", "東", "-", ".", "\xC2\xA0", "\xE3\x80\x80", "ß", "İ", "!", "_"};
    std::uniform_int_distribution<std::size_t> len(0, max_len);
    std::uniform_int_distribution<std::size_t> pick(0, std::size(pieces) - 1);
    std::string out;
    for (std::size_t i = 0, n = len(rng); i < n; ++i) out += pieces[pick(rng)];
    return out;
}

} // namespace mindos::testkit
