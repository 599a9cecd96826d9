#include "gtexpand/llm_gateway.hpp"

#include <fcntl.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace gtexpand {

using ojson = nlohmann::ordered_json;

namespace {

std::string sha256_hex(const std::string& data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return os.str();
}

std::string utc_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::int64_t rough_tokens(const std::string& s) {
  std::istringstream is(s);
  std::int64_t n = 0;
  for (std::string w; is >> w;) ++n;
  return n;
}

ojson request_json(const ChatRequest& r) {
  ojson j;
  j["model"] = r.model;
  j["system"] = r.system;
  j["messages"] = ojson::array();
  for (const auto& m : r.messages) j["messages"].push_back({{"role", m.role}, {"content", m.content}});
  j["temperature"] = r.temperature;
  j["sample_index"] = r.sample_index;
  return j;
}

ojson exchange_json(const LlmExchange& e) {
  ojson j;
  j["request_hash"] = e.request_hash;
  j["request"] = request_json(e.request);
  j["response_text"] = e.response_text;
  j["prompt_tokens"] = e.prompt_tokens;
  j["completion_tokens"] = e.completion_tokens;
  j["model"] = e.model;
  j["timestamp"] = e.timestamp;
  j["step"] = e.request.step;
  j["element"] = e.request.element;
  return j;
}

LlmExchange exchange_from_json(const ojson& j) {
  LlmExchange e;
  const auto& r = j.at("request");
  e.request.model = r.at("model").get<std::string>();
  e.request.system = r.at("system").get<std::string>();
  for (const auto& m : r.at("messages")) {
    e.request.messages.push_back({m.at("role").get<std::string>(), m.at("content").get<std::string>()});
  }
  e.request.temperature = r.at("temperature").get<double>();
  e.request.sample_index = r.at("sample_index").get<int>();
  e.request.step = j.value("step", "");
  e.request.element = j.value("element", "");
  e.request_hash = j.at("request_hash").get<std::string>();
  e.response_text = j.at("response_text").get<std::string>();
  e.prompt_tokens = j.value("prompt_tokens", std::int64_t{0});
  e.completion_tokens = j.value("completion_tokens", std::int64_t{0});
  e.model = j.value("model", e.request.model);
  e.timestamp = j.value("timestamp", "");
  return e;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string ChatRequest::canonical() const { return request_json(*this).dump(); }

std::string ChatRequest::hash() const { return sha256_hex(canonical()); }

// ---------------------------------------------------------------------------

OpenAiProvider::OpenAiProvider(Config config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  const auto& url = config_.base_url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("base url needs a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_.empty() && path_.back() == '/') path_.pop_back();
  path_ += "/chat/completions";
}

OpenAiProvider::Config OpenAiProvider::config_from_env() {
  Config c;
  if (const char* key = std::getenv("OPENAI_API_KEY")) c.api_key = key;
  if (const char* base = std::getenv("OPENAI_BASE_URL")) c.base_url = base;
  return c;
}

ProviderReply OpenAiProvider::send(const ChatRequest& request) {
  ojson body;
  body["model"] = request.model;
  body["messages"] = ojson::array();
  if (!request.system.empty()) body["messages"].push_back({{"role", "system"}, {"content", request.system}});
  for (const auto& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  body["temperature"] = request.temperature;
  const std::string payload = body.dump();

  httplib::Client client(scheme_host_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  std::string last_error;
  auto backoff = config_.retry.initial_backoff;
  for (int attempt = 1; attempt <= config_.retry.attempts; ++attempt) {
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else if (res->status != 200) {
      throw ProviderError("HTTP " + std::to_string(res->status) + " from " + scheme_host_ + path_ +
                          ": " + res->body.substr(0, 300));
    } else {
      try {
        auto j = nlohmann::json::parse(res->body);
        ProviderReply reply;
        reply.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
          reply.prompt_tokens = j["usage"].value("prompt_tokens", std::int64_t{0});
          reply.completion_tokens = j["usage"].value("completion_tokens", std::int64_t{0});
        }
        return reply;
      } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("malformed completion response: ") + e.what());
      }
    }
    if (attempt < config_.retry.attempts) {
      sleeper_(backoff);
      backoff = std::chrono::milliseconds(
          static_cast<std::int64_t>(static_cast<double>(backoff.count()) * config_.retry.multiplier));
    }
  }
  throw ProviderError("giving up after " + std::to_string(config_.retry.attempts) +
                      " attempts: " + last_error);
}

// ---------------------------------------------------------------------------

MockProvider::MockProvider(Responder responder) : responder_(std::move(responder)) {}

MockProvider::MockProvider(std::vector<Rule> rules) {
  responder_ = [rules = std::move(rules)](const ChatRequest& r) -> std::optional<std::string> {
    const std::string last_user =
        r.messages.empty() ? std::string() : r.messages.back().content;
    for (const auto& rule : rules) {
      if (rule.step && *rule.step != r.step) continue;
      if (rule.element && *rule.element != r.element) continue;
      bool all = true;
      for (const auto& needle : rule.contains) {
        if (last_user.find(needle) == std::string::npos) {
          all = false;
          break;
        }
      }
      if (all) return rule.response;
    }
    return std::nullopt;
  };
}

std::shared_ptr<MockProvider> MockProvider::from_file(const std::filesystem::path& script) {
  std::ifstream in(script);
  if (!in) throw Error("cannot open mock script " + script.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(script.string() + ": " + e.what());
  }
  std::vector<Rule> rules;
  for (const auto& r : j) {
    Rule rule;
    if (r.contains("step")) rule.step = r["step"].get<std::string>();
    if (r.contains("element")) rule.element = r["element"].get<std::string>();
    if (r.contains("contains")) {
      if (r["contains"].is_string()) {
        rule.contains.push_back(r["contains"].get<std::string>());
      } else {
        rule.contains = r["contains"].get<std::vector<std::string>>();
      }
    }
    rule.response = r.at("response").get<std::string>();
    rules.push_back(std::move(rule));
  }
  return std::make_shared<MockProvider>(std::move(rules));
}

ProviderReply MockProvider::send(const ChatRequest& request) {
  ++calls_;
  auto text = responder_(request);
  if (!text) {
    throw ProviderError("mock provider has no scripted response for " + request.step + "/" +
                        request.element + " request " + request.hash().substr(0, 12));
  }
  ProviderReply reply;
  reply.text = *text;
  reply.prompt_tokens = rough_tokens(request.system);
  for (const auto& m : request.messages) reply.prompt_tokens += rough_tokens(m.content);
  reply.completion_tokens = rough_tokens(reply.text);
  return reply;
}

ProviderReply ReplayProvider::send(const ChatRequest& request) {
  throw ReplayMissError("strict replay: request " + request.hash() + " (" + request.step + "/" +
                        request.element + ") is not in the cache");
}

std::shared_ptr<Provider> make_provider(const std::string& spec) {
  if (spec == "openai") return std::make_shared<OpenAiProvider>(OpenAiProvider::config_from_env());
  if (spec == "replay") return std::make_shared<ReplayProvider>();
  if (spec.rfind("mock:", 0) == 0) return MockProvider::from_file(spec.substr(5));
  throw Error("unknown provider '" + spec + "' (expected openai, replay or mock:SCRIPT)");
}

// ---------------------------------------------------------------------------

ExchangeCache::ExchangeCache(std::filesystem::path path) : path_(std::move(path)) {
  std::ifstream in(*path_);
  if (!in) return;  // created on first append
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    ojson j;
    try {
      j = ojson::parse(line);
    } catch (const nlohmann::json::exception&) {
      // A torn final line from an interrupted writer is dropped.
      if (in.peek() == EOF) break;
      throw ParseError(path_->string() + ": malformed cache record", lineno);
    }
    try {
      LlmExchange e = exchange_from_json(j);
      if (!index_.count(e.request_hash)) {
        index_[e.request_hash] = order_.size();
        order_.push_back(std::move(e));
      }
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path_->string() + ": " + e.what(), lineno);
    }
  }
}

std::optional<LlmExchange> ExchangeCache::find(const std::string& hash) const {
  std::lock_guard lock(mutex_);
  auto it = index_.find(hash);
  if (it == index_.end()) return std::nullopt;
  return order_[it->second];
}

void ExchangeCache::append(const LlmExchange& exchange) {
  std::lock_guard lock(mutex_);
  if (index_.count(exchange.request_hash)) return;
  if (path_) {
    const std::string line = exchange_json(exchange).dump() + "\n";
    int fd = ::open(path_->c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw Error("cannot open cache " + path_->string() + ": " + std::strerror(errno));
    // One write per record keeps concurrent appenders from interleaving.
    ssize_t n = ::write(fd, line.data(), line.size());
    ::close(fd);
    if (n != static_cast<ssize_t>(line.size())) throw Error("short write to cache " + path_->string());
  }
  index_[exchange.request_hash] = order_.size();
  order_.push_back(exchange);
}

std::vector<LlmExchange> ExchangeCache::all() const {
  std::lock_guard lock(mutex_);
  return order_;
}

std::size_t ExchangeCache::size() const {
  std::lock_guard lock(mutex_);
  return order_.size();
}

// ---------------------------------------------------------------------------

Gateway::Gateway(std::shared_ptr<Provider> provider, std::shared_ptr<ExchangeCache> cache,
                 std::size_t max_in_flight)
    : provider_(std::move(provider)),
      cache_(cache ? std::move(cache) : std::make_shared<ExchangeCache>()),
      slots_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(max_in_flight, 1, 1024))) {}

std::string Gateway::complete(const ChatRequest& request) {
  const std::string hash = request.hash();
  std::promise<std::string> promise;
  std::shared_future<std::string> pending;
  {
    std::lock_guard lock(mutex_);
    if (auto hit = cache_->find(hash)) return hit->response_text;
    if (auto it = in_flight_.find(hash); it != in_flight_.end()) {
      pending = it->second;
    } else {
      in_flight_.emplace(hash, promise.get_future().share());
    }
  }
  // Identical request already on the wire; wait for its answer.
  if (pending.valid()) return pending.get();

  auto finish = [&] {
    std::lock_guard lock(mutex_);
    in_flight_.erase(hash);
  };

  try {
    slots_.acquire();
    ProviderReply reply;
    try {
      ++provider_calls_;
      reply = provider_->send(request);
    } catch (...) {
      slots_.release();
      throw;
    }
    slots_.release();

    LlmExchange e;
    e.request_hash = hash;
    e.request = request;
    e.response_text = reply.text;
    e.prompt_tokens = reply.prompt_tokens;
    e.completion_tokens = reply.completion_tokens;
    e.model = request.model;
    e.timestamp = utc_now();
    cache_->append(e);
    promise.set_value(reply.text);
    finish();
    return reply.text;
  } catch (...) {
    promise.set_exception(std::current_exception());
    finish();
    throw;
  }
}

// ---------------------------------------------------------------------------

CostCell& CostCell::operator+=(const CostCell& o) {
  calls += o.calls;
  prompt_tokens += o.prompt_tokens;
  completion_tokens += o.completion_tokens;
  cost += o.cost;
  return *this;
}

CostCell CostReport::element_total(const std::string& element) const {
  CostCell sum;
  for (const auto& [key, cell] : cells) {
    if (key.second == element) sum += cell;
  }
  return sum;
}

CostCell CostReport::total() const {
  CostCell sum = other;
  for (const auto& [key, cell] : cells) sum += cell;
  return sum;
}

std::string CostReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(14) << "step" << std::right << std::setw(12) << "A tokens"
     << std::setw(12) << "A cost" << std::setw(12) << "O tokens" << std::setw(12) << "O cost" << "\n";
  auto row = [&](const std::string& label, const CostCell& a, const CostCell& o) {
    os << std::left << std::setw(14) << label << std::right << std::setw(12)
       << a.prompt_tokens + a.completion_tokens << std::setw(12) << std::fixed
       << std::setprecision(4) << a.cost << std::setw(12) << o.prompt_tokens + o.completion_tokens
       << std::setw(12) << o.cost << "\n";
  };
  for (const std::string step : {"zoom_in", "zoom_out", "judge"}) {
    row(step, cells.at({step, "aspect"}), cells.at({step, "opinion"}));
  }
  row("sum element", element_total("aspect"), element_total("opinion"));
  os << std::left << std::setw(14) << "sum dataset" << std::right << std::setw(12)
     << total().prompt_tokens + total().completion_tokens << std::setw(12) << std::fixed
     << std::setprecision(4) << total().cost << "\n";
  return os.str();
}

CostReport cost_report(const ExchangeCache& cache, const CostRates& rates) {
  CostReport report;
  for (const std::string step : {"zoom_in", "zoom_out", "judge"}) {
    for (const std::string element : {"aspect", "opinion"}) report.cells[{step, element}] = {};
  }
  for (const auto& e : cache.all()) {
    CostCell c;
    c.calls = 1;
    c.prompt_tokens = e.prompt_tokens;
    c.completion_tokens = e.completion_tokens;
    c.cost = static_cast<double>(e.prompt_tokens) * rates.prompt_per_token +
             static_cast<double>(e.completion_tokens) * rates.completion_per_token;
    auto it = report.cells.find({e.request.step, e.request.element});
    if (it != report.cells.end()) {
      it->second += c;
    } else {
      report.other += c;
    }
  }
  return report;
}

}  // namespace gtexpand
