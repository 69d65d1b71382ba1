#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "etholabel/orchestrator.hpp"

namespace etholabel {

// Deterministic fixtures: a frame-directory session layout with stub JPEG
// frames, a stub video reference, and seeded gold labels guaranteed to cover
// all three classes (when seconds >= 3). Used by `mock-run` and the tests.

struct SyntheticSpec {
    std::string session_id;
    int seconds = 120;
    int fps = 5;
    std::uint64_t seed = 7;
};

// Minimal JPEG-framed byte stream carrying `tag` in a comment marker; content
// is opaque to the pipeline.
std::string stub_jpeg_bytes(const std::string& tag);

std::vector<BehaviorLabel> synthetic_gold(int seconds, std::uint64_t seed);

SessionInput make_synthetic_session(const std::filesystem::path& root, const SyntheticSpec& spec);

}  // namespace etholabel
