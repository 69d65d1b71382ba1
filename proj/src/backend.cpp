#include "etholabel/backend.hpp"

#include <charconv>
#include <condition_variable>
#include <cstdlib>
#include <random>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "etholabel/digest.hpp"
#include "etholabel/labelparser.hpp"
#include "etholabel/util.hpp"

namespace etholabel {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string base64_encode(std::string_view data) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve(((data.size() + 2) / 3) * 4);
    size_t i = 0;
    while (i + 3 <= data.size()) {
        std::uint32_t v = (std::uint8_t(data[i]) << 16) | (std::uint8_t(data[i + 1]) << 8) |
                          std::uint8_t(data[i + 2]);
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += alphabet[v & 63];
        i += 3;
    }
    size_t rem = data.size() - i;
    if (rem == 1) {
        std::uint32_t v = std::uint8_t(data[i]) << 16;
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += "==";
    } else if (rem == 2) {
        std::uint32_t v = (std::uint8_t(data[i]) << 16) | (std::uint8_t(data[i + 1]) << 8);
        out += alphabet[(v >> 18) & 63];
        out += alphabet[(v >> 12) & 63];
        out += alphabet[(v >> 6) & 63];
        out += '=';
    }
    return out;
}

std::uint64_t mix_key(std::uint64_t seed, const std::string& session, int second) {
    // FNV-1a over (seed, session, second); per-second streams stay identical
    // no matter the order requests arrive in.
    std::uint64_t h = 1469598103934665603ull ^ (seed * 0x9e3779b97f4a7c15ull);
    auto eat = [&h](std::uint8_t byte) {
        h ^= byte;
        h *= 1099511628211ull;
    };
    for (char c : session) eat(static_cast<std::uint8_t>(c));
    eat(0x1f);
    for (int i = 0; i < 4; ++i) eat(static_cast<std::uint8_t>((second + 1) >> (8 * i)));
    return h;
}

constexpr std::string_view kGarbageReply = "sure! the mouse seems calm";
constexpr std::string_view kGarbageToken = "the mouse seems calm";

}  // namespace

// ---------------------------------------------------------------------------
// HttpTransport
// ---------------------------------------------------------------------------

HttpOptions http_options_from_env(HttpOptions base) {
    if (base.endpoint.empty()) {
        if (const char* v = std::getenv("VLM_ENDPOINT")) base.endpoint = v;
    }
    if (base.api_key.empty()) {
        if (const char* v = std::getenv("VLM_API_KEY")) base.api_key = v;
    }
    if (base.model_id.empty()) {
        if (const char* v = std::getenv("VLM_MODEL_ID")) base.model_id = v;
    }
    return base;
}

HttpTransport::HttpTransport(HttpOptions options) : options_(std::move(options)) {
    std::string url = options_.endpoint;
    if (url.rfind("http://", 0) != 0) {
        if (url.rfind("https://", 0) == 0) {
            throw std::invalid_argument("https endpoints are not supported by this build: " + url);
        }
        throw std::invalid_argument("endpoint must start with http://: '" + url + "'");
    }
    std::string rest = url.substr(7);
    size_t slash = rest.find('/');
    std::string hostport = slash == std::string::npos ? rest : rest.substr(0, slash);
    path_ = slash == std::string::npos ? std::string() : rest.substr(slash);
    size_t colon = hostport.find(':');
    host_ = colon == std::string::npos ? hostport : hostport.substr(0, colon);
    if (colon != std::string::npos) {
        port_ = std::atoi(hostport.substr(colon + 1).c_str());
    }
    if (host_.empty() || port_ <= 0) {
        throw std::invalid_argument("cannot parse endpoint '" + url + "'");
    }
    if (path_.empty() || path_ == "/") path_ = "/v1/chat/completions";
}

std::string HttpTransport::wire_body(const ModelRequest& request, const std::string& model_id) {
    ordered_json body;
    body["model"] = model_id;
    body["temperature"] = request.decoding.temperature;
    body["max_tokens"] = request.decoding.max_output_tokens;
    ordered_json content = ordered_json::array();
    for (const RequestPart& part : request.parts) {
        if (const auto* text = std::get_if<TextPart>(&part)) {
            content.push_back({{"type", "text"}, {"text", text->text}});
        } else if (const auto* image = std::get_if<ImagePart>(&part)) {
            content.push_back(
                {{"type", "image_url"},
                 {"image_url",
                  {{"url", "data:" + image->mime + ";base64," + base64_encode(image->bytes)}}}});
        } else if (const auto* video = std::get_if<VideoPart>(&part)) {
            std::string url = "file://" + video->path;
            if (video->start_s && video->end_s) {
                url += "#t=" + format_double(*video->start_s) + "," + format_double(*video->end_s);
            }
            content.push_back({{"type", "video_url"}, {"video_url", {{"url", url}}}});
        }
    }
    body["messages"] = ordered_json::array();
    body["messages"].push_back({{"role", "user"}, {"content", content}});
    return body.dump();
}

Transport::Attempt HttpTransport::send_once(const ModelRequest& request) {
    Attempt attempt;
    httplib::Client client(host_, port_);
    client.set_read_timeout(options_.timeout_seconds, 0);
    client.set_write_timeout(options_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!options_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options_.api_key);
    }
    std::string body = wire_body(request, options_.model_id);
    auto result = client.Post(path_, headers, body, "application/json");
    if (!result) {
        attempt.transient = true;
        attempt.error = "connection failure: " + httplib::to_string(result.error());
        return attempt;
    }
    attempt.status = result->status;
    if (result->status >= 500 || result->status == 429) {
        attempt.transient = true;
        attempt.error = "status " + std::to_string(result->status);
        return attempt;
    }
    if (result->status != 200) {
        attempt.error = "status " + std::to_string(result->status) + ": " + result->body;
        return attempt;
    }
    attempt.ok = true;
    try {
        auto json = nlohmann::json::parse(result->body);
        auto& content = json.at("choices").at(0).at("message").at("content");
        attempt.text = content.is_string() ? content.get<std::string>() : std::string();
    } catch (const std::exception&) {
        // 200 with an unexpected body: empty reply, scored as a parse failure.
        attempt.text.clear();
    }
    return attempt;
}

std::string HttpTransport::backend_id() const {
    return options_.model_id + "@" + host_ + ":" + std::to_string(port_);
}

// ---------------------------------------------------------------------------
// MockTransport
// ---------------------------------------------------------------------------

MockScript MockScript::parse(const std::string& spec) {
    MockScript script;
    if (spec == "echo") {
        script.kind = Kind::Echo;
        return script;
    }
    auto parse_tail = [&spec](Kind kind) {
        MockScript s;
        s.kind = kind;
        size_t first = spec.find(':');
        size_t second = spec.find(':', first + 1);
        if (first == std::string::npos || second == std::string::npos) {
            throw std::invalid_argument("mock script '" + spec +
                                        "' must look like kind:<p>:<seed>");
        }
        s.p = std::stod(spec.substr(first + 1, second - first - 1));
        s.seed = std::stoull(spec.substr(second + 1));
        if (s.p < 0.0 || s.p > 1.0) {
            throw std::invalid_argument("mock probability must be in [0,1]");
        }
        return s;
    };
    if (spec.rfind("noisy:", 0) == 0) return parse_tail(Kind::Noisy);
    if (spec.rfind("malform:", 0) == 0) return parse_tail(Kind::Malform);
    throw std::invalid_argument("unknown mock script '" + spec +
                                "' (expected echo|noisy:<p>:<seed>|malform:<p>:<seed>)");
}

std::string MockScript::spec() const {
    switch (kind) {
        case Kind::Echo: return "echo";
        case Kind::Noisy: return "noisy:" + format_double(p) + ":" + std::to_string(seed);
        case Kind::Malform: return "malform:" + format_double(p) + ":" + std::to_string(seed);
    }
    return "echo";
}

MockTransport::MockTransport(MockScript script,
                             std::map<std::string, std::vector<BehaviorLabel>> gold)
    : script_(script), gold_(std::move(gold)) {}

std::string MockTransport::scripted_token(const std::string& session, int second) const {
    auto it = gold_.find(session);
    if (it == gold_.end() || second < 0 || second >= static_cast<int>(it->second.size())) {
        throw std::out_of_range("mock has no gold label for " + session + "@" +
                                std::to_string(second));
    }
    BehaviorLabel gold_label = it->second[static_cast<size_t>(second)];
    if (script_.kind == MockScript::Kind::Echo) return std::string(to_string(gold_label));

    std::mt19937_64 rng(mix_key(script_.seed, session, second));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    bool fire = unit(rng) < script_.p;
    if (!fire) return std::string(to_string(gold_label));

    if (script_.kind == MockScript::Kind::Malform) return std::string(kGarbageToken);

    // Noisy: a uniformly chosen different class.
    std::vector<BehaviorLabel> others;
    for (BehaviorLabel c : kGoldClasses) {
        if (c != gold_label) others.push_back(c);
    }
    std::uniform_int_distribution<size_t> pick(0, others.size() - 1);
    return std::string(to_string(others[pick(rng)]));
}

Transport::Attempt MockTransport::send_once(const ModelRequest& request) {
    total_entries_.fetch_add(1);
    int now = in_flight_.fetch_add(1) + 1;
    int seen = max_concurrent_.load();
    while (now > seen && !max_concurrent_.compare_exchange_weak(seen, now)) {
    }
    if (jitter_ms_ > 0) {
        std::mt19937_64 rng(mix_key(script_.seed ^ 0xabcdef, request.target_session,
                                    request.target_second.value_or(-1)));
        std::uniform_int_distribution<int> jitter(0, jitter_ms_);
        std::this_thread::sleep_for(std::chrono::milliseconds(jitter(rng)));
    }

    Attempt attempt;
    try {
        if (request.target_second.has_value()) {
            std::string token = scripted_token(request.target_session, *request.target_second);
            attempt.text = token == kGarbageToken ? std::string(kGarbageReply) : "[" + token + "]";
        } else {
            std::string joined;
            for (int t = 0; t < request.expected_label_count; ++t) {
                if (t > 0) joined += ", ";
                joined += scripted_token(request.target_session, t);
            }
            attempt.text = "[" + joined + "]";
        }
        attempt.ok = true;
        attempt.status = 200;
    } catch (const std::exception& e) {
        attempt.error = e.what();
    }
    in_flight_.fetch_sub(1);
    return attempt;
}

std::string MockTransport::backend_id() const { return "mock:" + script_.spec(); }

Transport::Attempt FailAfterTransport::send_once(const ModelRequest& request) {
    if (remaining_.fetch_sub(1) <= 0) {
        Attempt attempt;
        attempt.status = 503;
        attempt.error = "injected backend outage";
        return attempt;
    }
    return inner_->send_once(request);
}

// ---------------------------------------------------------------------------
// BackendClient
// ---------------------------------------------------------------------------

class BackendClient::Semaphore {
public:
    explicit Semaphore(int slots) : available_(slots) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [this] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

BackendClient::BackendClient(std::shared_ptr<Transport> transport, ClientOptions options)
    : transport_(std::move(transport)), options_(std::move(options)) {
    if (options_.concurrency_limit < 1) options_.concurrency_limit = 1;
    if (!options_.sleep_fn) {
        options_.sleep_fn = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
    slots_ = std::make_shared<Semaphore>(options_.concurrency_limit);
}

std::size_t estimate_payload_bytes(const ModelRequest& request) {
    std::size_t total = 256;
    for (const RequestPart& part : request.parts) {
        if (const auto* text = std::get_if<TextPart>(&part)) {
            total += text->text.size() + 64;
        } else if (const auto* image = std::get_if<ImagePart>(&part)) {
            total += ((image->bytes.size() + 2) / 3) * 4 + 96;
        } else if (const auto* video = std::get_if<VideoPart>(&part)) {
            total += video->path.size() + 128;
        }
    }
    return total;
}

std::filesystem::path BackendClient::cache_path(const std::string& digest) const {
    return std::filesystem::path(options_.cache_dir) / digest.substr(0, 2) / (digest + ".json");
}

std::optional<ModelResponse> BackendClient::cache_lookup(const std::string& digest) const {
    std::filesystem::path path = cache_path(digest);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    try {
        auto json = nlohmann::json::parse(read_file(path));
        ModelResponse response;
        response.raw_text = json.at("raw_text").get<std::string>();
        response.backend_id = json.value("backend_id", std::string());
        response.from_cache = true;
        response.latency_ms = 0;
        return response;
    } catch (const std::exception&) {
        return std::nullopt;  // corrupt entry behaves like a miss
    }
}

void BackendClient::cache_store(const std::string& digest, const ModelResponse& response) const {
    ordered_json entry;
    entry["request_digest"] = digest;
    entry["raw_text"] = response.raw_text;
    entry["backend_id"] = response.backend_id;
    entry["timestamp"] = utc_timestamp();
    write_file_atomic(cache_path(digest), entry.dump(2) + "\n");
}

ModelResponse BackendClient::send(const ModelRequest& request) {
    bool has_text = false;
    bool has_media = false;
    for (const RequestPart& part : request.parts) {
        if (std::holds_alternative<TextPart>(part)) has_text = true;
        else has_media = true;
    }
    if (!has_text || !has_media) {
        throw std::invalid_argument("a request needs at least one text and one media part");
    }
    if (request.expected_label_count < 1) {
        throw std::invalid_argument("expected_label_count must be at least 1");
    }

    std::string digest =
        request.request_digest.empty() ? compute_request_digest(request) : request.request_digest;

    const bool use_cache = !options_.no_cache && !options_.cache_dir.empty();
    if (use_cache) {
        if (auto hit = cache_lookup(digest)) return *hit;
    }

    std::size_t payload = estimate_payload_bytes(request);
    if (payload > options_.max_payload_bytes) {
        throw PayloadTooLarge("request payload ~" + std::to_string(payload) +
                              " bytes exceeds limit of " +
                              std::to_string(options_.max_payload_bytes));
    }

    slots_->acquire();
    struct SlotGuard {
        Semaphore* s;
        ~SlotGuard() { s->release(); }
    } guard{slots_.get()};

    auto started = std::chrono::steady_clock::now();
    Transport::Attempt attempt;
    int retries = 0;
    for (int try_index = 0;; ++try_index) {
        transport_calls_.fetch_add(1);
        attempt = transport_->send_once(request);
        if (attempt.ok) {
            retries = try_index;
            break;
        }
        if (!attempt.transient || try_index >= static_cast<int>(kRetryDelays.size())) {
            throw TransportError("backend request failed after " + std::to_string(try_index + 1) +
                                     " attempt(s): " + attempt.error,
                                 attempt.status);
        }
        options_.sleep_fn(kRetryDelays[static_cast<size_t>(try_index)]);
    }
    auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);

    ModelResponse response;
    response.raw_text = attempt.text;
    response.latency_ms = elapsed.count();
    response.backend_id = transport_->backend_id();
    response.from_cache = false;
    response.retries = retries;
    if (use_cache) cache_store(digest, response);
    return response;
}

}  // namespace etholabel
