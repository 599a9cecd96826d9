#pragma once

// Chat-completion access behind a content-addressed replay cache.
//
// Every request is hashed (SHA-256 over model, system text, messages,
// temperature and sample index). A hit in the cache is served without
// touching the provider, so a warm cache makes whole pipeline runs
// reproducible offline.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <unordered_map>
#include <vector>

#include "gtexpand/model.hpp"

namespace gtexpand {

class ProviderError : public Error {
 public:
  using Error::Error;
};

/// Raised by the replay provider when a request is not in the cache.
class ReplayMissError : public ProviderError {
 public:
  using ProviderError::ProviderError;
};

struct ChatMessage {
  std::string role;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct ChatRequest {
  std::string model;
  std::string system;
  std::vector<ChatMessage> messages;
  double temperature = 0.0;
  int sample_index = 0;

  // Accounting tags. Not part of the hash.
  std::string step;
  std::string element;

  /// Hex SHA-256 of the canonical serialization of the hashed fields.
  std::string hash() const;
  std::string canonical() const;
};

struct ProviderReply {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual ProviderReply send(const ChatRequest& request) = 0;
  virtual std::string name() const = 0;
};

struct RetryPolicy {
  int attempts = 5;
  std::chrono::milliseconds initial_backoff{1000};
  double multiplier = 2.0;
};

/// OpenAI-style /chat/completions over HTTP(S).
class OpenAiProvider : public Provider {
 public:
  struct Config {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    std::chrono::seconds timeout{120};
    RetryPolicy retry;
  };
  using Sleeper = std::function<void(std::chrono::milliseconds)>;

  explicit OpenAiProvider(Config config, Sleeper sleeper = {});

  /// Reads OPENAI_API_KEY and, if set, OPENAI_BASE_URL.
  static Config config_from_env();

  ProviderReply send(const ChatRequest& request) override;
  std::string name() const override { return "openai"; }

 private:
  Config config_;
  Sleeper sleeper_;
  std::string scheme_host_;
  std::string path_;
};

/// Scripted responses for tests and offline demos.
///
/// A script is a JSON array of rules. Each rule may constrain the request's
/// `step` and `element` tags and list substrings (`contains`) that must all
/// occur in the final user message. The first matching rule answers.
class MockProvider : public Provider {
 public:
  using Responder = std::function<std::optional<std::string>(const ChatRequest&)>;

  struct Rule {
    std::optional<std::string> step;
    std::optional<std::string> element;
    std::vector<std::string> contains;
    std::string response;
  };

  explicit MockProvider(Responder responder);
  explicit MockProvider(std::vector<Rule> rules);
  static std::shared_ptr<MockProvider> from_file(const std::filesystem::path& script);

  ProviderReply send(const ChatRequest& request) override;
  std::string name() const override { return "mock"; }
  std::size_t calls() const { return calls_; }

 private:
  Responder responder_;
  std::atomic<std::size_t> calls_{0};
};

/// Strict replay: every send is a cache miss by construction.
class ReplayProvider : public Provider {
 public:
  ProviderReply send(const ChatRequest& request) override;
  std::string name() const override { return "replay"; }
};

struct LlmExchange {
  std::string request_hash;
  ChatRequest request;
  std::string response_text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  std::string model;
  std::string timestamp;
};

/// Newline-delimited LlmExchange records, loaded at open and appended to as
/// new exchanges arrive. Without a path the cache is memory-only.
class ExchangeCache {
 public:
  ExchangeCache() = default;
  explicit ExchangeCache(std::filesystem::path path);

  std::optional<LlmExchange> find(const std::string& hash) const;
  void append(const LlmExchange& exchange);
  std::vector<LlmExchange> all() const;
  std::size_t size() const;

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mutex_;
  std::vector<LlmExchange> order_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Gateway {
 public:
  Gateway(std::shared_ptr<Provider> provider, std::shared_ptr<ExchangeCache> cache,
          std::size_t max_in_flight = 4);

  /// Cached text if present, otherwise the provider's reply (then cached).
  std::string complete(const ChatRequest& request);

  std::size_t provider_calls() const { return provider_calls_; }
  const ExchangeCache& cache() const { return *cache_; }

 private:
  std::shared_ptr<Provider> provider_;
  std::shared_ptr<ExchangeCache> cache_;
  std::counting_semaphore<1024> slots_;
  std::mutex mutex_;
  std::map<std::string, std::shared_future<std::string>> in_flight_;
  std::atomic<std::size_t> provider_calls_{0};
};

/// "openai", "replay" or "mock:SCRIPT.json".
std::shared_ptr<Provider> make_provider(const std::string& spec);

// ---------------------------------------------------------------------------
// Cost accounting

struct CostRates {
  double prompt_per_token = 0.0;
  double completion_per_token = 0.0;
};

struct CostCell {
  std::int64_t calls = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  double cost = 0.0;

  CostCell& operator+=(const CostCell& o);
};

struct CostReport {
  /// Keyed by (step, element). Steps: zoom_in, zoom_out, judge; elements:
  /// aspect, opinion. Always holds all six cells.
  std::map<std::pair<std::string, std::string>, CostCell> cells;
  /// Exchanges whose tags fall outside the step x element grid.
  CostCell other;

  CostCell element_total(const std::string& element) const;
  CostCell total() const;
  std::string table() const;
};

CostReport cost_report(const ExchangeCache& cache, const CostRates& rates);

}  // namespace gtexpand
