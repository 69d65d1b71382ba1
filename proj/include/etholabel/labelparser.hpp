#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "etholabel/core.hpp"

namespace etholabel {

// Repairs applied while coercing model output to exactly n labels.
enum class RepairKind : std::uint8_t { Truncated, PaddedUnknown, SynonymMapped };

struct Repair {
    RepairKind kind;
    int count = 0;      // Truncated / PaddedUnknown: how many labels
    std::string token;  // SynonymMapped: the raw token that was mapped

    bool operator==(const Repair&) const = default;
};

struct ParseOutcome {
    std::vector<BehaviorLabel> labels;  // length == requested n, always
    std::vector<Repair> repairs;
    bool clean = true;  // true iff repairs is empty
};

// Case/whitespace-insensitive single-token mapping. "exploring", "grooming"
// and both slash orders collapse into ExploringGrooming; unmapped -> Unknown.
BehaviorLabel normalize_label(std::string_view token);

// Total over arbitrary byte strings: takes the last bracketed list if any,
// otherwise scans the whole text for known label tokens in order of
// appearance, then truncates/pads to exactly n labels.
ParseOutcome parse_label_vector(std::string_view raw_text, int n);

// Canonical answer form: "[Freezing, Exploring/Grooming]". parse of this is
// always clean.
std::string canonical_label_vector(const std::vector<BehaviorLabel>& labels);

}  // namespace etholabel
