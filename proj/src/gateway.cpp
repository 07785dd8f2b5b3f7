#include "mtp/gateway.hpp"

#include <json.hpp>

#include <unistd.h>

#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include "mtp/error.hpp"
#include "mtp/hash.hpp"

namespace mtp {
namespace {

using nlohmann::json;

const char* kind_name(RequestKind kind) {
  switch (kind) {
    case RequestKind::Chat: return "chat";
    case RequestKind::VisionChat: return "vision_chat";
    case RequestKind::Embedding: return "embedding";
  }
  return "chat";
}

json request_to_json(const ModelRequest& req) {
  json j;
  j["kind"] = kind_name(req.kind);
  j["model_id"] = req.model_id;
  if (req.kind == RequestKind::Embedding) {
    j["input"] = req.input;
  } else {
    j["messages"] = json::array();
    for (const ChatMessage& m : req.messages) {
      json jm{{"role", m.role}, {"content", m.content}};
      if (m.image_data_url) jm["image"] = *m.image_data_url;
      j["messages"].push_back(std::move(jm));
    }
  }
  j["params"]["temperature"] = req.params.temperature;
  j["params"]["max_tokens"] = req.params.max_tokens;
  if (req.params.seed) j["params"]["seed"] = *req.params.seed;
  return j;
}

std::string joined_prompt(const ModelRequest& req) {
  std::string out;
  for (const ChatMessage& m : req.messages) {
    if (!out.empty()) out += '\n';
    out += m.content;
  }
  return out;
}

std::string iso_utc_now() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string request_fingerprint(const ModelRequest& req) {
  return sha256_hex(request_to_json(req).dump());
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw input_error("cosine_similarity: dimension mismatch (" +
                      std::to_string(a.size()) + " vs " + std::to_string(b.size()) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0)
    throw input_error("cosine_similarity: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

// ---- MockBackend ----

std::shared_ptr<MockBackend> MockBackend::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open mock fixture '" + path + "'");
  json v;
  try {
    v = json::parse(in);
  } catch (const json::parse_error& e) {
    throw parse_error("mock fixture '" + path + "': " + e.what());
  }
  auto mock = std::make_shared<MockBackend>();
  if (auto it = v.find("rules"); it != v.end()) {
    if (!it->is_array()) throw input_error("mock fixture: 'rules' must be an array");
    for (const json& jr : *it) {
      MockRule rule;
      int selectors = 0;
      if (auto m = jr.find("match"); m != jr.end()) {
        rule.kind = MockRule::Kind::Substring;
        rule.pattern = m->get<std::string>();
        ++selectors;
      }
      if (auto m = jr.find("match_all"); m != jr.end()) {
        rule.kind = MockRule::Kind::MatchAll;
        rule.patterns = m->get<std::vector<std::string>>();
        ++selectors;
      }
      if (auto m = jr.find("regex"); m != jr.end()) {
        rule.kind = MockRule::Kind::Regex;
        rule.pattern = m->get<std::string>();
        ++selectors;
      }
      if (selectors != 1)
        throw input_error("mock fixture: each rule needs exactly one of match/match_all/regex");
      if (auto r = jr.find("response"); r != jr.end())
        rule.response = r->get<std::string>();
      if (auto e = jr.find("error"); e != jr.end()) {
        rule.error = e->get<std::string>();
        if (rule.error != "transport" && rule.error != "config")
          throw input_error("mock fixture: rule error must be 'transport' or 'config'");
      }
      mock->add_rule(std::move(rule));
    }
  }
  if (auto it = v.find("default_response"); it != v.end())
    mock->set_default_response(it->get<std::string>());
  if (auto it = v.find("embedding"); it != v.end()) {
    if (auto d = it->find("dim"); d != it->end())
      mock->set_embedding_dim(d->get<int>());
    if (auto vecs = it->find("vectors"); vecs != it->end())
      for (auto e = vecs->begin(); e != vecs->end(); ++e)
        mock->set_embedding_vector(e.key(), e->get<std::vector<double>>());
  }
  return mock;
}

void MockBackend::add_rule(MockRule rule) { rules_.push_back(std::move(rule)); }
void MockBackend::set_default_response(std::string text) {
  default_response_ = std::move(text);
}
void MockBackend::set_embedding_dim(int dim) {
  if (dim <= 0) throw input_error("embedding dim must be positive");
  embedding_dim_ = dim;
}
void MockBackend::set_embedding_vector(const std::string& text, std::vector<double> vec) {
  embedding_table_.emplace_back(text, std::move(vec));
}
void MockBackend::set_latency_ms(int ms) { latency_ms_ = ms; }

void MockBackend::enter() {
  calls_.fetch_add(1);
  int now = in_flight_.fetch_add(1) + 1;
  int seen = max_in_flight_.load();
  while (now > seen && !max_in_flight_.compare_exchange_weak(seen, now)) {
  }
  if (latency_ms_ > 0)
    std::this_thread::sleep_for(std::chrono::milliseconds(latency_ms_));
}

void MockBackend::leave() { in_flight_.fetch_sub(1); }

std::string MockBackend::complete(const ModelRequest& req) {
  enter();
  struct Leave {
    MockBackend* self;
    ~Leave() { self->leave(); }
  } on_exit{this};

  const std::string prompt = joined_prompt(req);
  for (const MockRule& rule : rules_) {
    bool hit = false;
    switch (rule.kind) {
      case MockRule::Kind::Substring:
        hit = prompt.find(rule.pattern) != std::string::npos;
        break;
      case MockRule::Kind::MatchAll:
        hit = true;
        for (const std::string& p : rule.patterns)
          if (prompt.find(p) == std::string::npos) hit = false;
        break;
      case MockRule::Kind::Regex:
        hit = std::regex_search(prompt, std::regex(rule.pattern));
        break;
    }
    if (!hit) continue;
    if (rule.error == "transport") throw transport_error("mock: scripted transport failure");
    if (rule.error == "config") throw config_error("mock: scripted configuration failure");
    return rule.response;
  }
  if (default_response_) return *default_response_;
  throw config_error("mock: no rule matched and no default response set");
}

std::vector<double> MockBackend::vector_for(const std::string& text) const {
  for (const auto& [key, vec] : embedding_table_)
    if (key == text) return vec;
  // hash fallback: deterministic pseudo-random direction per text
  std::vector<double> vec(static_cast<std::size_t>(embedding_dim_));
  std::uint64_t state = fnv1a64(text);
  for (double& x : vec) {
    state = splitmix64(state);
    x = unit_double(state) * 2.0 - 1.0;
  }
  return vec;
}

std::vector<std::vector<double>> MockBackend::embed(const ModelRequest& req) {
  enter();
  struct Leave {
    MockBackend* self;
    ~Leave() { self->leave(); }
  } on_exit{this};

  std::vector<std::vector<double>> out;
  out.reserve(req.input.size());
  for (const std::string& text : req.input) out.push_back(vector_for(text));
  return out;
}

// ---- ResponseCache ----

ResponseCache::ResponseCache(std::string dir) : dir_(std::move(dir)) {
  if (!dir_.empty()) std::filesystem::create_directories(dir_);
}

std::optional<std::string> ResponseCache::get(const std::string& key) const {
  if (dir_.empty()) return std::nullopt;
  std::ifstream in(std::filesystem::path(dir_) / key, std::ios::binary);
  if (!in) return std::nullopt;
  std::string meta_line;
  if (!std::getline(in, meta_line)) return std::nullopt;
  try {
    json meta = json::parse(meta_line);
    if (!meta.is_object()) return std::nullopt;
  } catch (const json::parse_error&) {
    return std::nullopt;  // unreadable entry counts as a miss
  }
  std::ostringstream rest;
  rest << in.rdbuf();
  return rest.str();
}

void ResponseCache::put(const std::string& key, const std::string& value,
                        const std::string& backend_name, bool reproducible) const {
  if (dir_.empty()) return;
  json meta;
  meta["backend"] = backend_name;
  meta["created_at"] = reproducible ? "1970-01-01T00:00:00Z" : iso_utc_now();
  static std::atomic<std::uint64_t> counter{0};
  std::filesystem::path final_path = std::filesystem::path(dir_) / key;
  std::filesystem::path tmp_path =
      final_path.string() + ".tmp." + std::to_string(::getpid()) + "." +
      std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write cache entry '" + tmp_path.string() + "'");
    out << meta.dump() << '\n' << value;
    if (!out) throw io_error("cache write failed for '" + tmp_path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp_path, final_path, ec);
  if (ec) {
    std::filesystem::remove(tmp_path);
    throw io_error("cache rename failed: " + ec.message());
  }
}

// ---- RateLimiter ----

RateLimiter::RateLimiter(int max_in_flight, double requests_per_second)
    : max_in_flight_(max_in_flight),
      rate_(requests_per_second),
      next_slot_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  std::unique_lock lock(mu_);
  if (max_in_flight_ > 0)
    cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
  ++in_flight_;
  if (rate_ > 0.0) {
    auto now = std::chrono::steady_clock::now();
    auto slot = next_slot_ < now ? now : next_slot_;
    next_slot_ = slot + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(1.0 / rate_));
    lock.unlock();
    std::this_thread::sleep_until(slot);
  }
}

void RateLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

// ---- ModelGateway ----

ModelGateway::ModelGateway(std::shared_ptr<ModelBackend> backend, std::string cache_dir,
                           GatewayOptions options)
    : backend_(std::move(backend)),
      cache_(std::move(cache_dir)),
      options_(options),
      limiter_(options.max_in_flight, options.requests_per_second) {}

namespace {

// Retries only transport failures; anything else propagates immediately.
template <typename Fn>
auto with_retries(int max_attempts, double initial_ms, double factor, Fn&& fn) {
  double delay_ms = initial_ms;
  for (int attempt = 1;; ++attempt) {
    try {
      return fn();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::Transport || attempt >= max_attempts)
        throw;
      std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(delay_ms));
      delay_ms *= factor;
    }
  }
}

}  // namespace

std::string ModelGateway::call_with_retries(const ModelRequest& req) {
  return with_retries(options_.max_attempts, options_.backoff_initial_ms,
                      options_.backoff_factor, [&] {
                        RateLimiter::Guard guard(limiter_);
                        backend_calls_.fetch_add(1);
                        return backend_->complete(req);
                      });
}

std::vector<std::vector<double>> ModelGateway::embed_with_retries(const ModelRequest& req) {
  return with_retries(options_.max_attempts, options_.backoff_initial_ms,
                      options_.backoff_factor, [&] {
                        RateLimiter::Guard guard(limiter_);
                        backend_calls_.fetch_add(1);
                        return backend_->embed(req);
                      });
}

std::string ModelGateway::complete(const ModelRequest& req) {
  if (!backend_) throw config_error("no model backend configured");
  const std::string key = request_fingerprint(req);
  if (auto hit = cache_.get(key)) {
    cache_hits_.fetch_add(1);
    return *hit;
  }
  std::string value = call_with_retries(req);
  cache_.put(key, value, backend_->name(), options_.reproducible);
  return value;
}

std::vector<std::vector<double>> ModelGateway::embed(const std::vector<std::string>& texts,
                                                     const std::string& model_id) {
  if (!backend_) throw config_error("no model backend configured");
  if (texts.empty()) throw input_error("embed: empty text list");

  auto text_key = [&](const std::string& text) {
    ModelRequest one;
    one.kind = RequestKind::Embedding;
    one.model_id = model_id;
    one.input = {text};
    return request_fingerprint(one);
  };

  std::vector<std::vector<double>> out(texts.size());
  std::vector<std::size_t> misses;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (auto hit = cache_.get(text_key(texts[i]))) {
      cache_hits_.fetch_add(1);
      out[i] = json::parse(*hit).get<std::vector<double>>();
    } else {
      misses.push_back(i);
    }
  }
  if (!misses.empty()) {
    ModelRequest req;
    req.kind = RequestKind::Embedding;
    req.model_id = model_id;
    for (std::size_t i : misses) req.input.push_back(texts[i]);
    auto vectors = embed_with_retries(req);
    if (vectors.size() != misses.size())
      throw transport_error("backend returned " + std::to_string(vectors.size()) +
                            " embeddings for " + std::to_string(misses.size()) + " texts");
    for (std::size_t k = 0; k < misses.size(); ++k) {
      std::vector<double>& vec = vectors[k];
      double norm = 0.0;
      for (double x : vec) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 0.0)
        for (double& x : vec) x /= norm;
      cache_.put(text_key(texts[misses[k]]), json(vec).dump(), backend_->name(),
                 options_.reproducible);
      out[misses[k]] = std::move(vec);
    }
  }
  return out;
}

// ---- ModelHandle ----

std::string ModelHandle::chat(std::vector<ChatMessage> messages) const {
  if (!gateway) throw config_error("no chat backend configured");
  ModelRequest req;
  req.kind = RequestKind::Chat;
  req.model_id = model_id;
  req.messages = std::move(messages);
  req.params = params;
  return gateway->complete(req);
}

std::string ModelHandle::vision_chat(std::vector<ChatMessage> messages) const {
  if (!gateway) throw config_error("no vision backend configured");
  ModelRequest req;
  req.kind = RequestKind::VisionChat;
  req.model_id = model_id;
  req.messages = std::move(messages);
  req.params = params;
  return gateway->complete(req);
}

std::vector<std::vector<double>> ModelHandle::embed(
    const std::vector<std::string>& texts) const {
  if (!gateway) throw config_error("no embedding backend configured");
  return gateway->embed(texts, model_id);
}

}  // namespace mtp
