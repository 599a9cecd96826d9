#pragma once

// Human-study tooling: seeded task export, an append-only judgment log, and
// the HTTP server the browser UI talks to.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtexpand/agreement.hpp"
#include "gtexpand/model.hpp"

namespace httplib {
class Server;
}

namespace gtexpand {

enum class TaskMode { kValidity, kPrediction };
std::string_view to_string(TaskMode m);
TaskMode parse_task_mode(std::string_view raw);

struct Task {
  std::string item_id;
  std::string sentence;
  std::string aspect, category, sentiment, opinion;
  TaskMode mode;

  nlohmann::ordered_json to_json() const;
  static Task from_json(const nlohmann::json& j);
};

/// `k` distinct indices from [0, n), ascending. Partial Fisher-Yates over
/// mt19937_64 with rejection sampling, so the draw is identical on every
/// platform for a given seed. k >= n returns all indices.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, std::uint64_t seed);

/// Validity tasks: every generated (non-original) variant of the sampled
/// examples.
std::vector<Task> export_validity_tasks(const Dataset& expanded, std::size_t sample_size, std::uint64_t seed);

/// Prediction tasks: every predicted quadruple of the sampled examples.
std::vector<Task> export_prediction_tasks(const Dataset& gt, const RunSet& run, std::size_t sample_size,
                                          std::uint64_t seed);

void write_tasks(const std::vector<Task>& tasks, const std::filesystem::path& path);
std::vector<Task> read_tasks(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct Judgment {
  std::string rater_id;
  std::string item_id;
  int label = 0;
};

/// Append-only judgment log. The latest record per (rater, item) wins; a
/// retraction appends a tombstone.
class JudgmentStore {
 public:
  JudgmentStore(std::filesystem::path log, std::set<std::string> items);

  void submit(const Judgment& j);
  /// False if there was nothing to retract.
  bool retract(const std::string& rater_id, const std::string& item_id);

  std::map<std::string, int> labels_of(const std::string& rater_id) const;
  std::map<std::string, std::map<std::string, int>> all() const;
  std::size_t item_count() const { return items_.size(); }
  bool knows(const std::string& item_id) const { return items_.count(item_id) > 0; }

 private:
  void append(const nlohmann::ordered_json& record);

  std::filesystem::path log_;
  std::set<std::string> items_;
  mutable std::mutex mutex_;
  std::map<std::string, std::map<std::string, int>> state_;
};

/// Replays judgment logs (later files override earlier ones) into one vector
/// per rater, sorted by rater id.
std::vector<JudgmentVector> load_judgments(const std::vector<std::filesystem::path>& logs);

// ---------------------------------------------------------------------------

class AnnotationServer {
 public:
  AnnotationServer(std::vector<Task> tasks, std::filesystem::path judgment_log,
                   std::optional<std::filesystem::path> static_dir = std::nullopt);
  ~AnnotationServer();

  /// Binds and returns the port (an ephemeral one when `port` is 0).
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void serve();
  void stop();

  JudgmentStore& store() { return *store_; }

 private:
  void routes();

  std::vector<Task> tasks_;
  std::unique_ptr<JudgmentStore> store_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace gtexpand
