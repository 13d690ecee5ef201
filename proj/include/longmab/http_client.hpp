#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <mutex>
#include <string>

#include <json.hpp>

namespace longmab {

struct RetryPolicy {
  /// Retries after the first attempt; total attempts = max_retries + 1.
  int max_retries = 4;
  std::chrono::milliseconds base_delay{500};
  double factor = 2.0;
  /// Relative jitter; 0.2 spreads each delay over [0.8, 1.2] of nominal.
  double jitter = 0.2;
  std::chrono::milliseconds cap{30000};
};

/// Delay before retry number `retry` (1-based). `unit` in [-1, 1] picks the
/// jitter offset.
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int retry, double unit);

/// Counting gate on outstanding requests, shared by every caller of a client.
class InFlightLimiter {
 public:
  explicit InFlightLimiter(std::size_t limit);

  void acquire();
  void release();

  class Guard {
   public:
    explicit Guard(InFlightLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
    ~Guard() { limiter_.release(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    InFlightLimiter& limiter_;
  };

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t available_;
};

struct HttpClientOptions {
  /// scheme://host[:port][/prefix]; a trailing "/v1" is folded into the
  /// endpoint paths.
  std::string base_url;
  std::string api_key;
  std::chrono::milliseconds timeout{60000};
  RetryPolicy retry;
  std::size_t max_in_flight = 4;
};

/// JSON-over-HTTP POST with bearer auth, bounded concurrency and retry on
/// transport failures, 429 and 5xx. Safe to share across threads.
class HttpJsonClient {
 public:
  explicit HttpJsonClient(HttpClientOptions options);

  /// Throws RequestError when the request fails for good and ProtocolError
  /// when a 2xx body is not JSON.
  nlohmann::json post_json(const std::string& path, const nlohmann::json& body);

  const HttpClientOptions& options() const { return options_; }

 private:
  HttpClientOptions options_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  InFlightLimiter limiter_;
};

}  // namespace longmab
