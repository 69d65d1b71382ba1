#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "etholabel/core.hpp"

namespace etholabel {

struct TextPart {
    std::string text;
    bool operator==(const TextPart&) const = default;
};

struct ImagePart {
    std::string bytes;  // raw image bytes, base64-encoded on the wire
    std::string mime;
    bool operator==(const ImagePart&) const = default;
};

// File reference; optional [start,end) clip span in seconds.
struct VideoPart {
    std::string path;
    std::optional<double> start_s;
    std::optional<double> end_s;
    bool operator==(const VideoPart&) const = default;
};

using RequestPart = std::variant<TextPart, ImagePart, VideoPart>;

struct ModelRequest {
    std::vector<RequestPart> parts;  // ordered
    Decoding decoding;
    int expected_label_count = 1;
    std::string model_id;
    std::string request_digest;  // digest of parts + decoding + model_id

    // Bookkeeping for mocks and checkpoints; never part of the digest.
    std::string target_session;
    std::optional<int> target_second;  // nullopt = whole video
};

struct ModelResponse {
    std::string raw_text;  // may be empty; downstream treats that as a parse failure
    long latency_ms = 0;
    std::string backend_id;
    bool from_cache = false;
    int retries = 0;
};

// Canonical digest over parts + decoding + model_id. Image parts hash their
// bytes, not the base64 form.
std::string compute_request_digest(const ModelRequest& request);

}  // namespace etholabel
