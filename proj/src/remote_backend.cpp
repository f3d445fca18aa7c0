#include <cstdlib>
#include <semaphore>

#include <nlohmann/json.hpp>

#include "iocregex/generation.hpp"

#ifdef IOCREGEX_WITH_REMOTE
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#endif

namespace iocregex {

#ifdef IOCREGEX_WITH_REMOTE

namespace {

constexpr std::ptrdiff_t kMaxInFlight = 256;

class RemoteBackend final : public GeneratorBackend {
public:
    explicit RemoteBackend(RemoteConfig config)
        : config_(std::move(config)), slots_(std::clamp<std::ptrdiff_t>(config_.max_in_flight, 1, kMaxInFlight)) {
        const auto scheme = config_.endpoint.find("://");
        if (scheme == std::string::npos) throw std::runtime_error("remote endpoint must include a scheme: " + config_.endpoint);
        const auto path = config_.endpoint.find('/', scheme + 3);
        origin_ = config_.endpoint.substr(0, path);
        prefix_ = path == std::string::npos ? std::string{} : config_.endpoint.substr(path);
        while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }

    std::string_view kind() const override { return "remote_llm"; }

    std::string propose(const GenerationRequest& request) const override {
        const char* key = std::getenv(config_.api_key_env.c_str());
        if (key == nullptr || *key == '\0') throw BackendError("environment variable " + config_.api_key_env + " is not set");

        nlohmann::json body = {
            {"model", config_.model},
            {"temperature", config_.temperature},
            {"seed", request.seed % 2147483647ULL},
            {"messages",
             {{{"role", "system"}, {"content", "You write regular expressions for threat hunting."}},
              {{"role", "user"}, {"content", request.prompt}}}},
        };

        slots_.acquire();
        struct Release {
            std::counting_semaphore<kMaxInFlight>& s;
            ~Release() { s.release(); }
        } release{slots_};

        httplib::Client client(origin_);
        client.set_connection_timeout(config_.timeout_seconds);
        client.set_read_timeout(config_.timeout_seconds);
        client.set_bearer_token_auth(key);
        auto res = client.Post(prefix_ + "/chat/completions", body.dump(), "application/json");
        if (!res) throw BackendError("request failed: " + httplib::to_string(res.error()));
        if (res->status != 200) throw BackendError("HTTP " + std::to_string(res->status));
        try {
            auto reply = nlohmann::json::parse(res->body);
            auto content = reply.at("choices").at(0).at("message").at("content").get<std::string>();
            auto pattern = extract_pattern(content);
            if (pattern.empty()) throw BackendError("empty completion");
            return pattern;
        } catch (const nlohmann::json::exception& e) {
            throw BackendError(std::string("malformed completion: ") + e.what());
        }
    }

private:
    RemoteConfig config_;
    std::string origin_;
    std::string prefix_;
    mutable std::counting_semaphore<kMaxInFlight> slots_;
};

}  // namespace

std::unique_ptr<GeneratorBackend> make_remote_backend(const RemoteConfig& config) {
    return std::make_unique<RemoteBackend>(config);
}

#else

std::unique_ptr<GeneratorBackend> make_remote_backend(const RemoteConfig&) {
    throw std::runtime_error("this build has no remote backend (IOCREGEX_WITH_REMOTE=OFF)");
}

#endif

}  // namespace iocregex
