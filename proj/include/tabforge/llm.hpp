#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tabforge {

enum class RoleTag { Teacher, Target, Judge };

std::string_view to_string(RoleTag role);
RoleTag role_tag_from_string(std::string_view name);

struct ChatRequest {
    RoleTag role_tag = RoleTag::Teacher;
    std::string model;
    std::string system;
    std::string user;
    double temperature = 0.8;
    int max_tokens = 2048;
    std::optional<std::int64_t> sampling_seed;
    /// Which pipeline step issued the call ("table", "judge", ...). Used for
    /// logging and by offline responders; not part of the fingerprint.
    std::string purpose;
};

struct ChatResponse {
    std::string text;
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    bool from_cache = false;
};

struct BackendConfig {
    /// Full chat-completions URL, or "mock" for the offline responder.
    std::string endpoint = "mock";
    /// Environment variable holding the API key. Empty means no auth header.
    std::string api_key_env;
    std::string model = "mock-model";
    double temperature = 0.8;
    int max_tokens = 2048;
    std::size_t max_in_flight = 4;
    /// 0 disables rate limiting.
    std::size_t requests_per_minute = 0;
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{500};
    std::chrono::seconds timeout{120};
};

enum class LlmErrc { ProviderError, RetriesExhausted, AuthMissing, InvalidRequest };

std::string_view to_string(LlmErrc code);

class LlmError : public std::runtime_error {
public:
    LlmError(LlmErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    LlmErrc code() const { return code_; }

private:
    LlmErrc code_;
};

/// One slot of a batch result: either a response or the error that item hit.
struct ChatOutcome {
    std::optional<ChatResponse> response;
    LlmErrc error_code = LlmErrc::ProviderError;
    std::string error;

    bool ok() const { return response.has_value(); }
};

/// SHA-256 over the canonical JSON of (model, system, user, temperature,
/// sampling_seed).
std::string fingerprint(const ChatRequest& req);

class ChatBackend {
public:
    virtual ~ChatBackend() = default;

    virtual ChatResponse complete(const ChatRequest& req) = 0;

    /// Runs up to max_in_flight() requests at once. Results come back in
    /// input order; a failing item never aborts the others.
    virtual std::vector<ChatOutcome> complete_batch(const std::vector<ChatRequest>& reqs);

    virtual std::size_t max_in_flight() const { return 1; }
};

/// A backend bound to one role's model and sampling settings.
struct RoleClient {
    std::shared_ptr<ChatBackend> backend;
    RoleTag role = RoleTag::Teacher;
    std::string model;
    double temperature = 0.8;
    int max_tokens = 2048;

    ChatRequest request(std::string user, std::string purpose,
                        std::optional<std::int64_t> seed = std::nullopt) const;
};

/// Sliding-window limiter: at most `per_minute` acquisitions in any 60 s
/// window. Clock and sleep are injectable for tests.
class RateLimiter {
public:
    using Clock = std::function<std::chrono::steady_clock::time_point()>;
    using Sleep = std::function<void(std::chrono::steady_clock::duration)>;

    explicit RateLimiter(std::size_t per_minute, Clock clock = {}, Sleep sleep = {});

    void acquire();
    /// Timestamps of past acquisitions still inside the window.
    std::vector<std::chrono::steady_clock::time_point> recent() const;

private:
    std::size_t per_minute_;
    Clock clock_;
    Sleep sleep_;
    mutable std::mutex mu_;
    std::deque<std::chrono::steady_clock::time_point> stamps_;
};

/// OpenAI-compatible chat-completions over HTTP(S).
class HttpBackend : public ChatBackend {
public:
    using Sleep = std::function<void(std::chrono::milliseconds)>;

    explicit HttpBackend(BackendConfig cfg, Sleep sleep = {});
    ~HttpBackend() override;

    ChatResponse complete(const ChatRequest& req) override;
    std::size_t max_in_flight() const override { return cfg_.max_in_flight; }

    std::uint64_t attempts() const { return attempts_; }

private:
    BackendConfig cfg_;
    Sleep sleep_;
    RateLimiter limiter_;
    std::mutex slots_mu_;
    std::condition_variable slots_cv_;
    std::size_t busy_ = 0;
    std::atomic<std::uint64_t> attempts_{0};
};

/// Offline backend. Replies come from a FIFO of queued texts first, then
/// from the responder function. Counts calls and peak concurrency.
class ScriptedBackend : public ChatBackend {
public:
    using Responder = std::function<std::string(const ChatRequest&)>;

    explicit ScriptedBackend(Responder responder = {}, std::size_t max_in_flight = 1);

    void queue(std::string reply);
    void set_latency(std::chrono::milliseconds latency) { latency_ = latency; }

    ChatResponse complete(const ChatRequest& req) override;
    std::size_t max_in_flight() const override { return max_in_flight_; }

    std::uint64_t calls() const { return calls_; }
    std::size_t peak_in_flight() const { return peak_; }
    void reset_counters();

private:
    Responder responder_;
    std::size_t max_in_flight_;
    std::chrono::milliseconds latency_{0};
    std::mutex mu_;
    std::deque<std::string> queued_;
    std::atomic<std::uint64_t> calls_{0};
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> peak_{0};
};

/// Content-addressed cache in front of another backend. Entries live at
/// `<dir>/<first 2 hex>/<fingerprint>.json`; concurrent identical requests
/// share a single inner call.
class CachingBackend : public ChatBackend {
public:
    CachingBackend(std::shared_ptr<ChatBackend> inner, std::filesystem::path dir);

    ChatResponse complete(const ChatRequest& req) override;
    std::size_t max_in_flight() const override { return inner_->max_in_flight(); }

    std::uint64_t hits() const { return hits_; }
    std::uint64_t misses() const { return misses_; }
    std::filesystem::path entry_path(const ChatRequest& req) const;

private:
    std::optional<ChatResponse> load(const ChatRequest& req, const std::filesystem::path& path) const;

    std::shared_ptr<ChatBackend> inner_;
    std::filesystem::path dir_;
    std::mutex mu_;
    std::map<std::string, std::shared_future<ChatResponse>> pending_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

}  // namespace tabforge
