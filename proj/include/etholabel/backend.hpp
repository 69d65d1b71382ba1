#pragma once

#include <atomic>
#include <chrono>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "etholabel/core.hpp"
#include "etholabel/request.hpp"

namespace etholabel {

struct TransportError : std::runtime_error {
    int status = 0;  // HTTP status, 0 for connection-level failures
    TransportError(std::string msg, int status_code)
        : std::runtime_error(std::move(msg)), status(status_code) {}
};

struct PayloadTooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// One raw exchange with a serving endpoint. Implementations throw
// TransportError; `transient` on the result of a failed attempt decides
// whether the client retries.
class Transport {
public:
    struct Attempt {
        bool ok = false;
        bool transient = false;  // retryable (5xx, timeout, connect failure)
        int status = 0;
        std::string text;
        std::string error;
    };

    virtual ~Transport() = default;
    virtual Attempt send_once(const ModelRequest& request) = 0;
    virtual std::string backend_id() const = 0;
};

// ---------------------------------------------------------------------------
// HTTP transport: chat-completion style JSON
// ---------------------------------------------------------------------------

struct HttpOptions {
    std::string endpoint;  // e.g. http://127.0.0.1:8000 or .../v1/chat/completions
    std::string model_id;
    std::string api_key;          // optional bearer token
    int timeout_seconds = 300;
};

// Reads VLM_ENDPOINT, VLM_API_KEY, VLM_MODEL_ID; explicit fields win.
HttpOptions http_options_from_env(HttpOptions base = {});

class HttpTransport final : public Transport {
public:
    explicit HttpTransport(HttpOptions options);
    Attempt send_once(const ModelRequest& request) override;
    std::string backend_id() const override;

    // The exact JSON body sent on the wire; exposed for tests.
    static std::string wire_body(const ModelRequest& request, const std::string& model_id);

private:
    HttpOptions options_;
    std::string host_;
    int port_ = 80;
    std::string path_;
};

// ---------------------------------------------------------------------------
// Scriptable mock transport
// ---------------------------------------------------------------------------

struct MockScript {
    enum class Kind { Echo, Noisy, Malform };
    Kind kind = Kind::Echo;
    double p = 0.0;
    std::uint64_t seed = 0;

    // "echo" | "noisy:<p>:<seed>" | "malform:<p>:<seed>"
    static MockScript parse(const std::string& spec);
    std::string spec() const;
};

// Deterministic oracle backend: responses are a pure function of
// (script, session_id, second_index), independent of request order.
class MockTransport final : public Transport {
public:
    MockTransport(MockScript script, std::map<std::string, std::vector<BehaviorLabel>> gold);

    Attempt send_once(const ModelRequest& request) override;
    std::string backend_id() const override;

    // Response text for one second under this script; exposed for tests.
    std::string scripted_token(const std::string& session, int second) const;

    long total_entries() const { return total_entries_.load(); }
    int max_concurrent() const { return max_concurrent_.load(); }

    // Widen the in-flight window (deterministic responses regardless).
    void set_jitter_ms(int jitter) { jitter_ms_ = jitter; }

private:
    MockScript script_;
    std::map<std::string, std::vector<BehaviorLabel>> gold_;
    std::atomic<long> total_entries_{0};
    std::atomic<int> in_flight_{0};
    std::atomic<int> max_concurrent_{0};
    int jitter_ms_ = 0;
};

// Test helper: succeeds for the first `limit` sends, then fails permanently.
class FailAfterTransport final : public Transport {
public:
    FailAfterTransport(std::shared_ptr<Transport> inner, long limit)
        : inner_(std::move(inner)), remaining_(limit) {}
    Attempt send_once(const ModelRequest& request) override;
    std::string backend_id() const override { return inner_->backend_id(); }

private:
    std::shared_ptr<Transport> inner_;
    std::atomic<long> remaining_;
};

// ---------------------------------------------------------------------------
// Client: cache + retries + in-flight limit
// ---------------------------------------------------------------------------

using SleepFn = std::function<void(std::chrono::milliseconds)>;

struct ClientOptions {
    std::string cache_dir;        // empty or no_cache=true disables the disk cache
    bool no_cache = false;
    int concurrency_limit = 4;
    std::size_t max_payload_bytes = 64ull << 20;
    SleepFn sleep_fn;             // injectable for tests; default really sleeps
};

// Retry schedule: one initial attempt plus up to 3 retries delayed 1 s, 2 s,
// 4 s, then TransportError.
inline constexpr std::array<std::chrono::milliseconds, 3> kRetryDelays = {
    std::chrono::milliseconds(1000), std::chrono::milliseconds(2000),
    std::chrono::milliseconds(4000)};

class BackendClient {
public:
    BackendClient(std::shared_ptr<Transport> transport, ClientOptions options);

    // Cache hit returns the stored text with from_cache=true and no
    // transport traffic. Throws PayloadTooLarge before sending and
    // TransportError once the retry budget is exhausted.
    ModelResponse send(const ModelRequest& request);

    long transport_calls() const { return transport_calls_.load(); }

private:
    std::optional<ModelResponse> cache_lookup(const std::string& digest) const;
    void cache_store(const std::string& digest, const ModelResponse& response) const;
    std::filesystem::path cache_path(const std::string& digest) const;

    std::shared_ptr<Transport> transport_;
    ClientOptions options_;
    std::atomic<long> transport_calls_{0};

    class Semaphore;
    std::shared_ptr<Semaphore> slots_;
};

// Estimated on-the-wire size of a request body.
std::size_t estimate_payload_bytes(const ModelRequest& request);

}  // namespace etholabel
