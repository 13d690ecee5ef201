#include "longmab/http_client.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "longmab/errors.hpp"

namespace longmab {

namespace {

bool retryable_status(int status) { return status == 429 || status >= 500; }

double jitter_unit() {
  thread_local std::mt19937_64 rng{std::random_device{}()};
  return std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
}

}  // namespace

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry, double unit) {
  const double nominal = static_cast<double>(policy.base_delay.count()) *
                         std::pow(policy.factor, static_cast<double>(std::max(retry, 1) - 1));
  const double jittered = nominal * (1.0 + policy.jitter * std::clamp(unit, -1.0, 1.0));
  const double capped = std::min(jittered, static_cast<double>(policy.cap.count()));
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(std::max(capped, 0.0))));
}

InFlightLimiter::InFlightLimiter(std::size_t limit) : available_(std::max<std::size_t>(limit, 1)) {}

void InFlightLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return available_ > 0; });
  --available_;
}

void InFlightLimiter::release() {
  {
    std::lock_guard lock(mu_);
    ++available_;
  }
  cv_.notify_one();
}

HttpJsonClient::HttpJsonClient(HttpClientOptions options)
    : options_(std::move(options)), limiter_(options_.max_in_flight) {
  const std::string& url = options_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("API base URL needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (path_prefix_.size() >= 3 && path_prefix_.compare(path_prefix_.size() - 3, 3, "/v1") == 0) {
    path_prefix_.resize(path_prefix_.size() - 3);
  }
}

nlohmann::json HttpJsonClient::post_json(const std::string& path, const nlohmann::json& body) {
  const std::string full_path = path_prefix_ + path;
  const std::string payload = body.dump();
  const int max_attempts = std::max(options_.retry.max_retries, 0) + 1;

  int last_status = 0;
  std::string last_error;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(backoff_delay(options_.retry, attempt - 1, jitter_unit()));
    }

    httplib::Result result{nullptr, httplib::Error::Unknown};
    {
      InFlightLimiter::Guard guard(limiter_);
      httplib::Client client(scheme_host_port_);
      const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
      const auto usecs =
          std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
      client.set_connection_timeout(secs.count(), usecs.count());
      client.set_read_timeout(secs.count(), usecs.count());
      client.set_write_timeout(secs.count(), usecs.count());
      httplib::Headers headers;
      if (!options_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + options_.api_key);
      }
      result = client.Post(full_path, headers, payload, "application/json");
    }

    if (!result) {
      last_status = 0;
      last_error = httplib::to_string(result.error());
      spdlog::warn("POST {} attempt {}/{} failed: {}", full_path, attempt, max_attempts,
                   last_error);
      continue;
    }
    last_status = result->status;
    if (last_status >= 200 && last_status < 300) {
      try {
        return nlohmann::json::parse(result->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw ProtocolError("POST " + full_path + ": response body is not JSON: " + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(last_status);
    if (!retryable_status(last_status)) {
      throw RequestError("POST " + full_path + " rejected with " + last_error, attempt,
                         last_status);
    }
    spdlog::warn("POST {} attempt {}/{} got {}", full_path, attempt, max_attempts, last_error);
  }
  throw RequestError("POST " + full_path + " failed: " + last_error, max_attempts, last_status);
}

}  // namespace longmab
