#include "gtexpand/predictor.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace gtexpand {

PredictResult predict_run(Gateway& gateway, const PromptTemplate& tmpl, const Dataset& dataset,
                          const ElementOrder& order, const std::vector<Shot>& shots,
                          const PredictConfig& config) {
  const std::size_t n = dataset.examples.size();
  std::vector<std::string> outputs(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;

  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        auto req = render_prediction(tmpl, dataset.examples[i].sentence, order, shots, {config.model, 0.0, 0});
        outputs[i] = gateway.complete(req);
      } catch (...) {
        std::lock_guard lock(m);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::max<std::size_t>(1, std::min(config.workers, n)); ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);

  PredictResult out;
  out.run.run_id = order.code();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& id = dataset.examples[i].id;
    out.records.push_back({id, outputs[i]});
    auto parsed = parse_tagged(outputs[i], order, *dataset.taxonomy);
    if (parsed.unparseable) {
      out.diagnostics.push_back(id + ": " + parsed.diagnostics.front());
    }
    out.run.predictions[id] = PredictionSet{std::move(parsed.quads), parsed.malformed};
  }
  return out;
}

}  // namespace gtexpand
