#include "gtexpand/annotation.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <random>

#include <httplib.h>

namespace gtexpand {

namespace {

using ojson = nlohmann::ordered_json;

Task make_task(const std::string& example_id, const std::string& sentence, const Quadruple& q, TaskMode mode) {
  return Task{prediction_item_id(example_id, q), sentence,          q.aspect.text(),
              q.category.value(),                std::string(to_string(q.sentiment)), q.opinion.text(),
              mode};
}

// Unbiased draw from [0, bound) using raw engine output only.
std::uint64_t draw_below(std::mt19937_64& eng, std::uint64_t bound) {
  const std::uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    const std::uint64_t r = eng();
    if (r >= threshold) return r % bound;
  }
}

void reply_json(httplib::Response& res, const ojson& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& what) {
  reply_json(res, ojson{{"error", what}}, status);
}

Judgment parse_judgment(const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("judgment must be an object");
  if (!j.contains("rater_id") || !j["rater_id"].is_string() || j["rater_id"].get<std::string>().empty()) {
    throw ParseError("judgment needs a non-empty string rater_id");
  }
  if (!j.contains("item_id") || !j["item_id"].is_string()) throw ParseError("judgment needs a string item_id");
  if (!j.contains("label") || !j["label"].is_number_integer()) throw ParseError("judgment label must be 0 or 1");
  const int label = j["label"].get<int>();
  if (label != 0 && label != 1) throw ParseError("judgment label must be 0 or 1");
  return {j["rater_id"].get<std::string>(), j["item_id"].get<std::string>(), label};
}

// Applies one log record to `state`. Torn or foreign lines are skipped.
void replay(const std::string& line, std::map<std::string, std::map<std::string, int>>& state) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception&) {
    return;
  }
  if (!j.is_object() || !j.contains("rater_id") || !j.contains("item_id")) return;
  const auto rater = j["rater_id"].get<std::string>();
  const auto item = j["item_id"].get<std::string>();
  if (j.value("deleted", false)) {
    auto it = state.find(rater);
    if (it != state.end()) it->second.erase(item);
    return;
  }
  if (j.contains("label") && j["label"].is_number_integer()) state[rater][item] = j["label"].get<int>();
}

}  // namespace

std::string_view to_string(TaskMode m) { return m == TaskMode::kValidity ? "validity" : "prediction"; }

TaskMode parse_task_mode(std::string_view raw) {
  if (raw == "validity") return TaskMode::kValidity;
  if (raw == "prediction") return TaskMode::kPrediction;
  throw ParseError("unknown task mode '" + std::string(raw) + "'");
}

ojson Task::to_json() const {
  ojson j;
  j["item_id"] = item_id;
  j["sentence"] = sentence;
  j["quadruple"] = ojson{{"aspect", aspect}, {"category", category}, {"sentiment", sentiment}, {"opinion", opinion}};
  j["mode"] = to_string(mode);
  return j;
}

Task Task::from_json(const nlohmann::json& j) {
  const auto& q = j.at("quadruple");
  return Task{j.at("item_id").get<std::string>(),   j.at("sentence").get<std::string>(),
              q.at("aspect").get<std::string>(),    q.at("category").get<std::string>(),
              q.at("sentiment").get<std::string>(), q.at("opinion").get<std::string>(),
              parse_task_mode(j.at("mode").get<std::string>())};
}

std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  if (k >= n) return idx;
  std::mt19937_64 eng(seed);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(draw_below(eng, n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<Task> export_validity_tasks(const Dataset& expanded, std::size_t sample_size, std::uint64_t seed) {
  std::vector<Task> tasks;
  std::set<std::string> seen;
  for (std::size_t i : sample_indices(expanded.examples.size(), sample_size, seed)) {
    const auto& ex = expanded.examples[i];
    for (const auto& g : ex.groups) {
      for (const auto& v : g.variants()) {
        if (v.quadruple == g.original()) continue;
        Task t = make_task(ex.id, ex.sentence, v.quadruple, TaskMode::kValidity);
        if (seen.insert(t.item_id).second) tasks.push_back(std::move(t));
      }
    }
  }
  return tasks;
}

std::vector<Task> export_prediction_tasks(const Dataset& gt, const RunSet& run, std::size_t sample_size,
                                          std::uint64_t seed) {
  for (const auto& [id, _] : run.predictions) {
    if (!gt.find(id)) throw Error("run '" + run.run_id + "' has example id '" + id + "' unknown to the GT");
  }
  std::vector<Task> tasks;
  for (std::size_t i : sample_indices(gt.examples.size(), sample_size, seed)) {
    const auto& ex = gt.examples[i];
    auto it = run.predictions.find(ex.id);
    if (it == run.predictions.end()) continue;
    for (const auto& q : it->second.quads) tasks.push_back(make_task(ex.id, ex.sentence, q, TaskMode::kPrediction));
  }
  return tasks;
}

void write_tasks(const std::vector<Task>& tasks, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& t : tasks) out << t.to_json().dump() << '\n';
}

std::vector<Task> read_tasks(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Task> tasks;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Task t = Task::from_json(nlohmann::json::parse(line));
      if (!ids.insert(t.item_id).second) throw ParseError("duplicate item_id '" + t.item_id + "'");
      tasks.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ": " + e.what(), line_no);
    }
  }
  return tasks;
}

// ---------------------------------------------------------------------------

JudgmentStore::JudgmentStore(std::filesystem::path log, std::set<std::string> items)
    : log_(std::move(log)), items_(std::move(items)) {
  std::ifstream in(log_, std::ios::binary);
  for (std::string line; std::getline(in, line);) replay(line, state_);
}

void JudgmentStore::append(const ojson& record) {
  std::ofstream out(log_, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to " + log_.string());
  out << record.dump() + "\n";
  out.flush();
  if (!out) throw Error("write failed: " + log_.string());
}

void JudgmentStore::submit(const Judgment& j) {
  if (!items_.count(j.item_id)) throw ParseError("unknown item_id '" + j.item_id + "'");
  std::lock_guard lock(mutex_);
  append(ojson{{"rater_id", j.rater_id}, {"item_id", j.item_id}, {"label", j.label}});
  state_[j.rater_id][j.item_id] = j.label;
}

bool JudgmentStore::retract(const std::string& rater_id, const std::string& item_id) {
  std::lock_guard lock(mutex_);
  auto it = state_.find(rater_id);
  if (it == state_.end() || !it->second.count(item_id)) return false;
  append(ojson{{"rater_id", rater_id}, {"item_id", item_id}, {"deleted", true}});
  it->second.erase(item_id);
  return true;
}

std::map<std::string, int> JudgmentStore::labels_of(const std::string& rater_id) const {
  std::lock_guard lock(mutex_);
  auto it = state_.find(rater_id);
  return it == state_.end() ? std::map<std::string, int>{} : it->second;
}

std::map<std::string, std::map<std::string, int>> JudgmentStore::all() const {
  std::lock_guard lock(mutex_);
  return state_;
}

std::vector<JudgmentVector> load_judgments(const std::vector<std::filesystem::path>& logs) {
  std::map<std::string, std::map<std::string, int>> state;
  for (const auto& p : logs) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error("cannot open judgments " + p.string());
    for (std::string line; std::getline(in, line);) replay(line, state);
  }
  std::vector<JudgmentVector> out;
  for (auto& [rater, labels] : state) {
    if (!labels.empty()) out.push_back({rater, std::move(labels)});
  }
  return out;
}

// ---------------------------------------------------------------------------

AnnotationServer::AnnotationServer(std::vector<Task> tasks, std::filesystem::path judgment_log,
                                   std::optional<std::filesystem::path> static_dir)
    : tasks_(std::move(tasks)), server_(std::make_unique<httplib::Server>()) {
  std::set<std::string> items;
  for (const auto& t : tasks_) items.insert(t.item_id);
  store_ = std::make_unique<JudgmentStore>(std::move(judgment_log), std::move(items));
  if (static_dir && !server_->set_mount_point("/", static_dir->string())) {
    throw Error("static directory not found: " + static_dir->string());
  }
  routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

void AnnotationServer::routes() {
  server_->Get("/tasks", [this](const httplib::Request&, httplib::Response& res) {
    auto arr = ojson::array();
    for (const auto& t : tasks_) arr.push_back(t.to_json());
    reply_json(res, arr);
  });

  server_->Post("/judgments", [this](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
      return reply_error(res, 400, std::string("malformed JSON: ") + e.what());
    }
    std::vector<Judgment> batch;
    try {
      if (body.is_array()) {
        for (const auto& j : body) batch.push_back(parse_judgment(j));
      } else {
        batch.push_back(parse_judgment(body));
      }
      for (const auto& j : batch) {
        if (!store_->knows(j.item_id)) throw ParseError("unknown item_id '" + j.item_id + "'");
      }
      for (const auto& j : batch) store_->submit(j);
    } catch (const ParseError& e) {
      return reply_error(res, 400, e.what());
    } catch (const Error& e) {
      return reply_error(res, 500, e.what());
    }
    reply_json(res, ojson{{"accepted", batch.size()}});
  });

  server_->Delete("/judgments", [this](const httplib::Request& req, httplib::Response& res) {
    std::string rater = req.get_param_value("rater_id"), item = req.get_param_value("item_id");
    if (!req.body.empty()) {
      try {
        auto j = nlohmann::json::parse(req.body);
        rater = j.value("rater_id", rater);
        item = j.value("item_id", item);
      } catch (const nlohmann::json::exception& e) {
        return reply_error(res, 400, std::string("malformed JSON: ") + e.what());
      }
    }
    if (rater.empty() || item.empty()) return reply_error(res, 400, "rater_id and item_id are required");
    try {
      if (!store_->retract(rater, item)) return reply_error(res, 404, "no judgment to retract");
    } catch (const Error& e) {
      return reply_error(res, 500, e.what());
    }
    reply_json(res, ojson{{"retracted", 1}});
  });

  server_->Get("/judgments", [this](const httplib::Request& req, httplib::Response& res) {
    const auto rater = req.get_param_value("rater_id");
    if (rater.empty()) return reply_error(res, 400, "rater_id is required");
    auto arr = ojson::array();
    for (const auto& [item, label] : store_->labels_of(rater)) {
      arr.push_back(ojson{{"rater_id", rater}, {"item_id", item}, {"label", label}});
    }
    reply_json(res, arr);
  });

  server_->Get("/progress", [this](const httplib::Request& req, httplib::Response& res) {
    const auto rater = req.get_param_value("rater_id");
    if (!rater.empty()) {
      return reply_json(res, ojson{{"rater_id", rater}, {"done", store_->labels_of(rater).size()}, {"total", tasks_.size()}});
    }
    ojson raters = ojson::object();
    for (const auto& [r, labels] : store_->all()) raters[r] = labels.size();
    reply_json(res, ojson{{"total", tasks_.size()}, {"raters", raters}});
  });
}

int AnnotationServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int p = server_->bind_to_any_port(host);
    if (p < 0) throw Error("cannot bind " + host);
    return p;
  }
  if (!server_->bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void AnnotationServer::serve() { server_->listen_after_bind(); }

void AnnotationServer::stop() {
  if (server_) server_->stop();
}

}  // namespace gtexpand
