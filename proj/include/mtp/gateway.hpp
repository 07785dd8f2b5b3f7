#pragma once
// Uniform access to chat, vision-chat, and embedding backends: retries, rate
// limiting, content-addressed response caching, and a scripted mock for
// offline runs. Remote backends speak the OpenAI-compatible wire protocol.

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mtp {

enum class RequestKind { Chat, VisionChat, Embedding };

struct ChatMessage {
  std::string role;     // system | user | assistant
  std::string content;  // text part
  std::optional<std::string> image_data_url;  // vision-chat attachment
};

struct RequestParams {
  double temperature = 0.0;  // deterministic decoding unless overridden
  int max_tokens = 1024;
  std::optional<int> seed;
};

struct ModelRequest {
  RequestKind kind = RequestKind::Chat;
  std::string model_id;
  std::vector<ChatMessage> messages;  // Chat / VisionChat
  std::vector<std::string> input;     // Embedding
  RequestParams params;
};

// Digest of (kind, model_id, payload, params); keys the response cache.
std::string request_fingerprint(const ModelRequest& req);

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

class ModelBackend {
 public:
  virtual ~ModelBackend() = default;
  virtual std::string complete(const ModelRequest& req) = 0;
  virtual std::vector<std::vector<double>> embed(const ModelRequest& req) = 0;
  virtual std::string name() const = 0;
};

// Scripted backend: ordered first-match-wins rules against the concatenated
// message text, plus a deterministic embedding table with hash fallback.
struct MockRule {
  enum class Kind { Substring, MatchAll, Regex };
  Kind kind = Kind::Substring;
  std::string pattern;                // Substring / Regex
  std::vector<std::string> patterns;  // MatchAll
  std::string response;
  std::string error;  // "transport" or "config" to script a failure
};

class MockBackend : public ModelBackend {
 public:
  MockBackend() = default;
  static std::shared_ptr<MockBackend> from_file(const std::string& path);

  void add_rule(MockRule rule);
  void set_default_response(std::string text);
  void set_embedding_dim(int dim);
  void set_embedding_vector(const std::string& text, std::vector<double> vec);
  void set_latency_ms(int ms);  // makes in-flight overlap observable

  std::string complete(const ModelRequest& req) override;
  std::vector<std::vector<double>> embed(const ModelRequest& req) override;
  std::string name() const override { return "mock"; }

  int call_count() const { return calls_.load(); }
  int max_in_flight() const { return max_in_flight_.load(); }

 private:
  void enter();
  void leave();
  std::vector<double> vector_for(const std::string& text) const;

  std::vector<MockRule> rules_;
  std::optional<std::string> default_response_;
  int embedding_dim_ = 8;
  std::vector<std::pair<std::string, std::vector<double>>> embedding_table_;
  int latency_ms_ = 0;
  std::atomic<int> calls_{0};
  std::atomic<int> in_flight_{0};
  std::atomic<int> max_in_flight_{0};
};

// Remote OpenAI-compatible backend over HTTP(S). Bearer token read from the
// named environment variable at construction; empty name = no auth header.
struct HttpBackendConfig {
  std::string base_url;        // scheme://host[:port][/prefix]
  std::string credential_env;  // env var holding the token
  int timeout_s = 120;
};

class HttpBackend : public ModelBackend {
 public:
  explicit HttpBackend(HttpBackendConfig config);
  ~HttpBackend() override;

  std::string complete(const ModelRequest& req) override;
  std::vector<std::vector<double>> embed(const ModelRequest& req) override;
  std::string name() const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Content-addressed disk cache. Entry file = one JSON metadata line + raw
// value bytes; written to a temp name and renamed so readers never see a
// partial entry. Empty directory disables caching.
class ResponseCache {
 public:
  explicit ResponseCache(std::string dir);

  bool enabled() const { return !dir_.empty(); }
  std::optional<std::string> get(const std::string& key) const;
  void put(const std::string& key, const std::string& value,
           const std::string& backend_name, bool reproducible) const;

 private:
  std::string dir_;
};

// In-flight cap plus a capacity-one token bucket (requests_per_second <= 0
// disables the rate limit, max_in_flight <= 0 disables the cap).
class RateLimiter {
 public:
  RateLimiter(int max_in_flight, double requests_per_second);

  void acquire();
  void release();

  class Guard {
   public:
    explicit Guard(RateLimiter& limiter) : limiter_(limiter) { limiter_.acquire(); }
    ~Guard() { limiter_.release(); }
    Guard(const Guard&) = delete;
    Guard& operator=(const Guard&) = delete;

   private:
    RateLimiter& limiter_;
  };

 private:
  int max_in_flight_;
  double rate_;
  int in_flight_ = 0;
  std::chrono::steady_clock::time_point next_slot_;
  std::mutex mu_;
  std::condition_variable cv_;
};

struct GatewayOptions {
  int max_attempts = 3;
  double backoff_initial_ms = 100.0;
  double backoff_factor = 2.0;
  int max_in_flight = 4;
  double requests_per_second = 0.0;  // 0 = unlimited
  bool reproducible = false;         // zeroes cache metadata timestamps
};

class ModelGateway {
 public:
  ModelGateway(std::shared_ptr<ModelBackend> backend, std::string cache_dir,
               GatewayOptions options = {});

  std::string complete(const ModelRequest& req);
  // One unit-norm vector per text, order preserved, cached per text.
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts,
                                         const std::string& model_id);

  std::uint64_t cache_hits() const { return cache_hits_.load(); }
  std::uint64_t backend_calls() const { return backend_calls_.load(); }
  const GatewayOptions& options() const { return options_; }

 private:
  std::string call_with_retries(const ModelRequest& req);
  std::vector<std::vector<double>> embed_with_retries(const ModelRequest& req);

  std::shared_ptr<ModelBackend> backend_;
  ResponseCache cache_;
  GatewayOptions options_;
  RateLimiter limiter_;
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> backend_calls_{0};
};

// A gateway bound to one model id; what pipeline stages hold.
struct ModelHandle {
  ModelGateway* gateway = nullptr;
  std::string model_id;
  RequestParams params;

  std::string chat(std::vector<ChatMessage> messages) const;
  std::string vision_chat(std::vector<ChatMessage> messages) const;
  std::vector<std::vector<double>> embed(const std::vector<std::string>& texts) const;
};

}  // namespace mtp
