#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <json.hpp>

#include "ideaspace/errors.hpp"
#include "ideaspace/generator.hpp"
#include "ideaspace/random.hpp"

namespace ideaspace {

struct HttpEndpoint {
    std::string base_url = "http://127.0.0.1:8000";  // scheme://host:port
    std::string path = "/generate";
    std::string adapter;                  // sent as "adapter"; empty omits the field
    std::string response_field = "text";  // JSON field holding the completion
    double timeout_s = 30.0;
    int max_attempts = 3;
    double backoff_initial_s = 0.25;  // doubles each retry
    double backoff_jitter = 0.5;      // fraction of the delay added at random
};

// POSTs {"prompt", "temperature", "seed"?, "adapter"?} as JSON and reads the
// completion from response_field. Timeouts, non-2xx statuses and malformed
// bodies are retried with exponential backoff; the final failure surfaces as
// TransportError carrying the attempt count.
class HttpBackend final : public GeneratorBackend {
public:
    explicit HttpBackend(HttpEndpoint endpoint) : ep_(std::move(endpoint)), jitter_rng_(fnv1a64(ep_.base_url)) {
        if (ep_.max_attempts < 1) throw ContractViolation("max_attempts must be >= 1");
        if (!(ep_.timeout_s > 0.0)) throw ContractViolation("timeout must be positive");
    }

    const HttpEndpoint& endpoint() const noexcept { return ep_; }

    std::string id() const override { return "http:" + ep_.base_url + ep_.path + (ep_.adapter.empty() ? "" : "#" + ep_.adapter); }

    std::string generate(const std::string& prompt, double temperature,
                         std::optional<std::uint64_t> seed) const override {
        nlohmann::json req{{"prompt", prompt}, {"temperature", temperature}};
        if (seed) req["seed"] = *seed;
        if (!ep_.adapter.empty()) req["adapter"] = ep_.adapter;
        const std::string body = req.dump();

        std::string last_error;
        bool last_timed_out = false;
        for (int attempt = 1; attempt <= ep_.max_attempts; ++attempt) {
            if (attempt > 1) std::this_thread::sleep_for(backoff(attempt - 1));
            httplib::Client cli(ep_.base_url);
            const auto usec = static_cast<std::int64_t>(ep_.timeout_s * 1e6);
            cli.set_connection_timeout(std::chrono::microseconds(usec));
            cli.set_read_timeout(std::chrono::microseconds(usec));
            cli.set_write_timeout(std::chrono::microseconds(usec));

            auto res = cli.Post(ep_.path, body, "application/json");
            if (!res) {
                last_timed_out = res.error() == httplib::Error::Read || res.error() == httplib::Error::Write ||
                                 res.error() == httplib::Error::ConnectionTimeout;
                last_error = last_timed_out ? "timed out after " + std::to_string(ep_.timeout_s) + " s"
                                            : "request failed: " + httplib::to_string(res.error());
                continue;
            }
            last_timed_out = false;
            if (res->status < 200 || res->status >= 300) {
                last_error = "status " + std::to_string(res->status);
                continue;
            }
            try {
                const auto j = nlohmann::json::parse(res->body);
                if (!j.is_object() || !j.contains(ep_.response_field) || !j[ep_.response_field].is_string()) {
                    last_error = "response lacks string field \"" + ep_.response_field + "\"";
                    continue;
                }
                return j[ep_.response_field].get<std::string>();
            } catch (const nlohmann::json::parse_error&) {
                last_error = "malformed JSON response";
            }
        }
        throw TransportError(ep_.base_url + ep_.path + ": " + last_error, ep_.max_attempts, last_timed_out);
    }

private:
    std::chrono::microseconds backoff(int retry) const {
        double jitter = 0.0;
        {
            std::lock_guard lock(jitter_mu_);
            jitter = jitter_rng_.uniform();
        }
        const double delay = ep_.backoff_initial_s * std::pow(2.0, retry - 1) * (1.0 + ep_.backoff_jitter * jitter);
        return std::chrono::microseconds(static_cast<std::int64_t>(delay * 1e6));
    }

    HttpEndpoint ep_;
    mutable std::mutex jitter_mu_;
    mutable Rng jitter_rng_;
};

}  // namespace ideaspace
