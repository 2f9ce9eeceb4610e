#include "httplib.h"

#include "tabforge/llm.hpp"

#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "json.hpp"
#include "tabforge/hashing.hpp"
#include "text_util.hpp"

namespace tabforge {

using nlohmann::json;

std::string_view to_string(RoleTag role) {
    switch (role) {
        case RoleTag::Teacher: return "teacher";
        case RoleTag::Target: return "target";
        case RoleTag::Judge: return "judge";
    }
    return "teacher";
}

RoleTag role_tag_from_string(std::string_view name) {
    const auto lower = detail::to_lower(name);
    if (lower == "teacher") return RoleTag::Teacher;
    if (lower == "target") return RoleTag::Target;
    if (lower == "judge") return RoleTag::Judge;
    throw LlmError(LlmErrc::InvalidRequest, fmt::format("unknown role '{}'", name));
}

std::string_view to_string(LlmErrc code) {
    switch (code) {
        case LlmErrc::ProviderError: return "ProviderError";
        case LlmErrc::RetriesExhausted: return "RetriesExhausted";
        case LlmErrc::AuthMissing: return "AuthMissing";
        case LlmErrc::InvalidRequest: return "InvalidRequest";
    }
    return "ProviderError";
}

namespace {

json request_key(const ChatRequest& req) {
    json key = {{"model", req.model},
                {"system", req.system},
                {"user", req.user},
                {"temperature", req.temperature},
                {"sampling_seed", nullptr}};
    if (req.sampling_seed) key["sampling_seed"] = *req.sampling_seed;
    return key;
}

void check_request(const ChatRequest& req) {
    if (req.user.empty()) throw LlmError(LlmErrc::InvalidRequest, "chat request has an empty user message");
    if (!(req.temperature >= 0.0)) throw LlmError(LlmErrc::InvalidRequest, "temperature must be >= 0");
}

}  // namespace

std::string fingerprint(const ChatRequest& req) {
    // nlohmann objects keep keys sorted, so dump() is canonical.
    return sha256_hex(request_key(req).dump());
}

std::vector<ChatOutcome> ChatBackend::complete_batch(const std::vector<ChatRequest>& reqs) {
    std::vector<ChatOutcome> out(reqs.size());
    auto run_one = [&](std::size_t i) {
        try {
            out[i].response = complete(reqs[i]);
        } catch (const LlmError& e) {
            out[i].error_code = e.code();
            out[i].error = e.what();
        } catch (const std::exception& e) {
            out[i].error_code = LlmErrc::ProviderError;
            out[i].error = e.what();
        }
    };
    const std::size_t workers = std::min(std::max<std::size_t>(1, max_in_flight()), reqs.size());
    if (workers <= 1) {
        for (std::size_t i = 0; i < reqs.size(); ++i) run_one(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < reqs.size(); i = next++) run_one(i);
        });
    }
    for (auto& t : pool) t.join();
    return out;
}

ChatRequest RoleClient::request(std::string user, std::string purpose, std::optional<std::int64_t> seed) const {
    ChatRequest req;
    req.role_tag = role;
    req.model = model;
    req.user = std::move(user);
    req.temperature = temperature;
    req.max_tokens = max_tokens;
    req.sampling_seed = seed;
    req.purpose = std::move(purpose);
    return req;
}

// ---------------------------------------------------------------- rate limit

RateLimiter::RateLimiter(std::size_t per_minute, Clock clock, Sleep sleep)
    : per_minute_(per_minute), clock_(std::move(clock)), sleep_(std::move(sleep)) {
    if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
    if (!sleep_) sleep_ = [](std::chrono::steady_clock::duration d) { std::this_thread::sleep_for(d); };
}

void RateLimiter::acquire() {
    if (per_minute_ == 0) return;
    constexpr auto kWindow = std::chrono::seconds(60);
    while (true) {
        std::chrono::steady_clock::duration wait{};
        {
            std::lock_guard lock(mu_);
            const auto now = clock_();
            while (!stamps_.empty() && now - stamps_.front() >= kWindow) stamps_.pop_front();
            if (stamps_.size() < per_minute_) {
                stamps_.push_back(now);
                return;
            }
            wait = stamps_.front() + kWindow - now;
        }
        sleep_(wait);
    }
}

std::vector<std::chrono::steady_clock::time_point> RateLimiter::recent() const {
    std::lock_guard lock(mu_);
    return {stamps_.begin(), stamps_.end()};
}

// ---------------------------------------------------------------- http

namespace {

struct Endpoint {
    std::string base;  // scheme://host[:port]
    std::string path;
};

Endpoint split_endpoint(const std::string& url) {
    static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
    std::smatch m;
    if (!std::regex_match(url, m, re)) {
        throw LlmError(LlmErrc::InvalidRequest, fmt::format("endpoint '{}' is not an http(s) URL", url));
    }
    return {m[1].str(), m[2].matched ? m[2].str() : "/v1/chat/completions"};
}

bool transient_status(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpBackend::HttpBackend(BackendConfig cfg, Sleep sleep)
    : cfg_(std::move(cfg)), sleep_(std::move(sleep)), limiter_(cfg_.requests_per_minute) {
    if (cfg_.max_in_flight == 0) throw LlmError(LlmErrc::InvalidRequest, "max_in_flight must be >= 1");
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    split_endpoint(cfg_.endpoint);
}

HttpBackend::~HttpBackend() = default;

ChatResponse HttpBackend::complete(const ChatRequest& req) {
    check_request(req);
    std::string key;
    if (!cfg_.api_key_env.empty()) {
        const char* value = std::getenv(cfg_.api_key_env.c_str());
        if (value == nullptr || *value == '\0') {
            throw LlmError(LlmErrc::AuthMissing, fmt::format("environment variable {} is not set", cfg_.api_key_env));
        }
        key = value;
    }

    json body = {{"model", req.model.empty() ? cfg_.model : req.model},
                 {"temperature", req.temperature},
                 {"max_tokens", req.max_tokens}};
    json messages = json::array();
    if (!req.system.empty()) messages.push_back({{"role", "system"}, {"content", req.system}});
    messages.push_back({{"role", "user"}, {"content", req.user}});
    body["messages"] = std::move(messages);
    if (req.sampling_seed) body["seed"] = *req.sampling_seed;
    const std::string payload = body.dump();

    const Endpoint ep = split_endpoint(cfg_.endpoint);
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);

    // Bound concurrent requests across all callers of this backend.
    {
        std::unique_lock lock(slots_mu_);
        slots_cv_.wait(lock, [&] { return busy_ < cfg_.max_in_flight; });
        ++busy_;
    }
    struct Release {
        HttpBackend* self;
        ~Release() {
            {
                std::lock_guard lock(self->slots_mu_);
                --self->busy_;
            }
            self->slots_cv_.notify_one();
        }
    } release{this};

    std::string last_problem;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
        if (attempt > 0) {
            const auto delay = cfg_.backoff_base * (1LL << std::min(attempt - 1, 20));
            spdlog::warn("{} call retry {}/{} after {} ms: {}", req.purpose, attempt, cfg_.max_retries, delay.count(),
                         last_problem);
            sleep_(delay);
        }
        limiter_.acquire();
        ++attempts_;

        httplib::Client client(ep.base);
        client.set_connection_timeout(cfg_.timeout);
        client.set_read_timeout(cfg_.timeout);
        client.set_write_timeout(cfg_.timeout);
        auto res = client.Post(ep.path, headers, payload, "application/json");
        if (!res) {
            last_problem = fmt::format("transport error: {}", httplib::to_string(res.error()));
            continue;
        }
        if (transient_status(res->status)) {
            last_problem = fmt::format("HTTP {}", res->status);
            continue;
        }
        if (res->status != 200) {
            throw LlmError(LlmErrc::ProviderError,
                           fmt::format("HTTP {}: {}", res->status, res->body.substr(0, 300)));
        }
        try {
            const json reply = json::parse(res->body);
            ChatResponse out;
            out.text = reply.at("choices").at(0).at("message").at("content").get<std::string>();
            if (reply.contains("usage")) {
                out.prompt_tokens = reply["usage"].value("prompt_tokens", 0ULL);
                out.completion_tokens = reply["usage"].value("completion_tokens", 0ULL);
            }
            return out;
        } catch (const json::exception& e) {
            throw LlmError(LlmErrc::ProviderError, fmt::format("unexpected response body: {}", e.what()));
        }
    }
    throw LlmError(LlmErrc::RetriesExhausted,
                   fmt::format("{} attempts failed, last: {}", cfg_.max_retries + 1, last_problem));
}

// ---------------------------------------------------------------- scripted

ScriptedBackend::ScriptedBackend(Responder responder, std::size_t max_in_flight)
    : responder_(std::move(responder)), max_in_flight_(std::max<std::size_t>(1, max_in_flight)) {}

void ScriptedBackend::queue(std::string reply) {
    std::lock_guard lock(mu_);
    queued_.push_back(std::move(reply));
}

void ScriptedBackend::reset_counters() {
    calls_ = 0;
    peak_ = 0;
}

ChatResponse ScriptedBackend::complete(const ChatRequest& req) {
    check_request(req);
    ++calls_;
    const std::size_t now = ++in_flight_;
    std::size_t peak = peak_.load();
    while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
    }
    struct Leave {
        std::atomic<std::size_t>& n;
        ~Leave() { --n; }
    } leave{in_flight_};
    if (latency_.count() > 0) std::this_thread::sleep_for(latency_);

    std::optional<std::string> reply;
    {
        std::lock_guard lock(mu_);
        if (!queued_.empty()) {
            reply = std::move(queued_.front());
            queued_.pop_front();
        }
    }
    if (!reply) {
        if (!responder_) throw LlmError(LlmErrc::ProviderError, "scripted backend has no reply left");
        reply = responder_(req);
    }
    ChatResponse out;
    out.text = std::move(*reply);
    out.prompt_tokens = detail::count_words(req.system) + detail::count_words(req.user);
    out.completion_tokens = detail::count_words(out.text);
    return out;
}

// ---------------------------------------------------------------- cache

CachingBackend::CachingBackend(std::shared_ptr<ChatBackend> inner, std::filesystem::path dir)
    : inner_(std::move(inner)), dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path CachingBackend::entry_path(const ChatRequest& req) const {
    const std::string fp = fingerprint(req);
    return dir_ / fp.substr(0, 2) / (fp + ".json");
}

std::optional<ChatResponse> CachingBackend::load(const ChatRequest& req, const std::filesystem::path& path) const {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    try {
        const json entry = json::parse(in);
        // Guard against a hash collision or a hand-edited file.
        if (entry.at("request") != request_key(req)) return std::nullopt;
        const json& r = entry.at("response");
        ChatResponse out;
        out.text = r.at("text").get<std::string>();
        out.prompt_tokens = r.value("prompt_tokens", 0ULL);
        out.completion_tokens = r.value("completion_tokens", 0ULL);
        out.from_cache = true;
        return out;
    } catch (const json::exception& e) {
        spdlog::warn("ignoring unreadable cache entry {}: {}", path.string(), e.what());
        return std::nullopt;
    }
}

ChatResponse CachingBackend::complete(const ChatRequest& req) {
    check_request(req);
    const std::string fp = fingerprint(req);
    const auto path = entry_path(req);

    std::promise<ChatResponse> promise;
    {
        std::unique_lock lock(mu_);
        if (auto hit = load(req, path)) {
            ++hits_;
            return *hit;
        }
        if (auto it = pending_.find(fp); it != pending_.end()) {
            auto shared = it->second;
            lock.unlock();
            ChatResponse out = shared.get();
            ++hits_;
            out.from_cache = true;
            return out;
        }
        pending_.emplace(fp, promise.get_future().share());
    }
    ++misses_;

    auto finish = [&] {
        std::lock_guard lock(mu_);
        pending_.erase(fp);
    };
    try {
        ChatResponse out = inner_->complete(req);
        out.from_cache = false;
        json entry = {{"fingerprint", fp},
                      {"request", request_key(req)},
                      {"response",
                       {{"text", out.text},
                        {"prompt_tokens", out.prompt_tokens},
                        {"completion_tokens", out.completion_tokens}}}};
        std::filesystem::create_directories(path.parent_path());
        auto tmp = path;
        tmp += fmt::format(".tmp{}", std::hash<std::thread::id>{}(std::this_thread::get_id()));
        {
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            os << entry.dump(1) << '\n';
            if (!os) throw LlmError(LlmErrc::ProviderError, fmt::format("cannot write cache entry {}", tmp.string()));
        }
        std::filesystem::rename(tmp, path);
        promise.set_value(out);
        finish();
        return out;
    } catch (...) {
        promise.set_exception(std::current_exception());
        finish();
        throw;
    }
}

}  // namespace tabforge
