// gtexpand: expand GT sets, predict, score, ensemble, measure agreement and
// serve annotation tasks.

#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "gtexpand/agreement.hpp"
#include "gtexpand/annotation.hpp"
#include "gtexpand/corpus_io.hpp"
#include "gtexpand/ensembler.hpp"
#include "gtexpand/evaluator.hpp"
#include "gtexpand/expander.hpp"
#include "gtexpand/llm_gateway.hpp"
#include "gtexpand/predictor.hpp"
#include "gtexpand/reporter.hpp"

namespace fs = std::filesystem;
using namespace gtexpand;

namespace {

std::shared_ptr<ExchangeCache> open_cache(const std::string& path) {
  return path.empty() ? std::make_shared<ExchangeCache>() : std::make_shared<ExchangeCache>(path);
}

// An expanded GT file starts with '{'; anything else is read as dataset lines.
Dataset load_gt(const std::string& path, const std::string& taxonomy, const std::string& name) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  char c = 0;
  while (in.get(c) && std::isspace(static_cast<unsigned char>(c))) {
  }
  if (c == '{') return read_expanded(fs::path(path));
  return read_dataset(path, Taxonomy::resolve(taxonomy), name);
}

std::vector<ElementOrder> parse_orders(const std::string& spec) {
  if (spec == "all") return all_orders();
  std::vector<ElementOrder> out;
  std::stringstream ss(spec);
  for (std::string code; std::getline(ss, code, ',');) out.emplace_back(code);
  return out;
}

AnnotationServer* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ground-truth expansion and multi-answer evaluation for sentiment quadruples"};
  app.require_subcommand(1);

  // expand
  std::string ds_path, taxonomy = "restaurant", ds_name, provider = "openai", cache_path, out_path, assets;
  std::string steps = "zoom_in,zoom_out";
  ExpansionConfig xcfg;
  bool no_judge = false;
  std::size_t in_flight = 4;
  auto* expand = app.add_subcommand("expand", "Expand every GT quadruple of a dataset");
  expand->add_option("--dataset", ds_path, "Dataset lines (SENTENCE####[[a,c,s,o],...])")->required();
  expand->add_option("--taxonomy", taxonomy, "restaurant, laptop, or a label file");
  expand->add_option("--name", ds_name, "Dataset name used in example ids (default: file stem)");
  expand->add_option("--provider", provider, "openai, replay or mock:SCRIPT.json");
  expand->add_option("--cache", cache_path, "Exchange cache (NDJSON)");
  expand->add_option("--out", out_path, "Expanded GT output")->required();
  expand->add_option("--model", xcfg.model);
  expand->add_option("--temperature", xcfg.temperature);
  expand->add_option("--samples", xcfg.samples_per_step);
  expand->add_option("--steps", steps, "Comma list of zoom_in, zoom_out");
  expand->add_flag("--no-judge", no_judge);
  expand->add_option("--workers", xcfg.workers, "Examples expanded in parallel");
  expand->add_option("--max-in-flight", in_flight, "Concurrent provider requests");
  expand->add_option("--assets", assets, "Prompt asset directory");

  // predict
  std::string shots_path, order_spec = "AOSC", out_dir;
  PredictConfig pcfg;
  auto* predict = app.add_subcommand("predict", "Run 20-shot prediction under one or all element orders");
  predict->add_option("--dataset", ds_path)->required();
  predict->add_option("--taxonomy", taxonomy);
  predict->add_option("--name", ds_name);
  predict->add_option("--shots", shots_path, "20 shots in dataset-line form")->required();
  predict->add_option("--order", order_spec, "AOSC-style code, a comma list, or 'all'");
  predict->add_option("--provider", provider);
  predict->add_option("--cache", cache_path);
  predict->add_option("--out-dir", out_dir)->required();
  predict->add_option("--model", pcfg.model);
  predict->add_option("--workers", pcfg.workers);
  predict->add_option("--assets", assets);

  // eval
  std::string run_path, gt_path, view = "ours";
  bool as_json = false;
  auto* eval = app.add_subcommand("eval", "Score a run against a GT view");
  eval->add_option("--run", run_path)->required();
  eval->add_option("--gt", gt_path, "Expanded GT or dataset lines")->required();
  eval->add_option("--view", view, "orig, zoom_in, zoom_out or ours");
  eval->add_option("--order", order_spec, "Element order the run was prompted with");
  eval->add_option("--taxonomy", taxonomy, "Taxonomy when --gt holds dataset lines");
  eval->add_option("--name", ds_name);
  eval->add_flag("--json", as_json);

  // ensemble
  std::vector<std::string> run_paths;
  std::string ranking_path, select_gt;
  std::size_t top_k = 5, threshold = 3;
  auto* ens = app.add_subcommand("ensemble", "Vote across the top-ranked runs");
  ens->add_option("--runs", run_paths)->required();
  auto* rank_opt = ens->add_option("--ranking", ranking_path, "Run ids best first, one per line");
  auto* sel_opt = ens->add_option("--select-gt", select_gt, "Rank runs by F1 against this GT instead");
  rank_opt->excludes(sel_opt);
  ens->add_option("--top", top_k);
  ens->add_option("--threshold", threshold);
  ens->add_option("--out", out_path)->required();
  ens->add_option("--taxonomy", taxonomy);
  ens->add_option("--view", view, "View of --select-gt used for ranking");

  // agree
  std::vector<std::string> judgment_paths;
  auto* agree = app.add_subcommand("agree", "Agreement between human raters and each GT view");
  agree->add_option("--judgments", judgment_paths)->required();
  agree->add_option("--run", run_path)->required();
  agree->add_option("--gt", gt_path, "Expanded GT")->required();
  agree->add_option("--order", order_spec);

  // stats
  auto* stats = app.add_subcommand("stats", "Per-step term deltas and word-count statistics");
  stats->add_option("--gt", gt_path)->required();
  stats->add_flag("--json", as_json);

  // annotate
  std::size_t sample_size = 80;
  std::uint64_t seed = 42;
  std::string tasks_path, judgments_log, static_dir, host = "127.0.0.1";
  int port = 8080;
  auto* annotate = app.add_subcommand("annotate", "Human-study task files and server");
  annotate->require_subcommand(1);
  auto* exp = annotate->add_subcommand("export", "Sample examples into a task file");
  exp->add_option("--gt", gt_path)->required();
  exp->add_option("--run", run_path, "Prediction run; without it, validity tasks over expanded variants");
  exp->add_option("--order", order_spec);
  exp->add_option("--sample-size", sample_size);
  exp->add_option("--seed", seed);
  exp->add_option("--out", out_path)->required();
  auto* serve = annotate->add_subcommand("serve", "Serve tasks and collect judgments over HTTP");
  serve->add_option("--tasks", tasks_path)->required();
  serve->add_option("--judgments", judgments_log, "Judgment log (default: TASKS.judgments.jsonl)");
  serve->add_option("--port", port);
  serve->add_option("--host", host);
  serve->add_option("--static", static_dir, "Directory of UI assets mounted at /");

  // cost
  CostRates rates;
  auto* cost = app.add_subcommand("cost", "Token and cost totals per step and element");
  cost->add_option("--cache", cache_path)->required();
  cost->add_option("--prompt-rate", rates.prompt_per_token, "Cost per prompt token");
  cost->add_option("--completion-rate", rates.completion_per_token, "Cost per completion token");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*expand) {
      xcfg.judge_enabled = !no_judge;
      xcfg.zoom_in = xcfg.zoom_out = false;
      std::stringstream ss(steps);
      for (std::string s; std::getline(ss, s, ',');) {
        if (s == "zoom_in") xcfg.zoom_in = true;
        else if (s == "zoom_out") xcfg.zoom_out = true;
        else if (!s.empty()) throw Error("unknown step '" + s + "' in --steps");
      }
      auto tax = Taxonomy::resolve(taxonomy);
      Dataset ds = read_dataset(ds_path, tax, ds_name);
      auto lib = PromptLibrary::load(assets.empty() ? PromptLibrary::default_asset_dir() : fs::path(assets),
                                     tax->name() == "laptop" ? "laptop" : "restaurant");
      Gateway gw(make_provider(provider), open_cache(cache_path), in_flight);
      Expander ex(gw, lib, xcfg);
      auto out = ex.expand_dataset(ds);
      write_expanded(out, fs::path(out_path));
      std::cerr << "expanded " << out.examples.size() << " examples; provider calls: " << gw.provider_calls()
                << "\n";
    } else if (*predict) {
      auto tax = Taxonomy::resolve(taxonomy);
      Dataset ds = read_dataset(ds_path, tax, ds_name);
      auto shots = read_shots(shots_path, *tax);
      auto lib = PromptLibrary::load(assets.empty() ? PromptLibrary::default_asset_dir() : fs::path(assets),
                                     tax->name() == "laptop" ? "laptop" : "restaurant");
      Gateway gw(make_provider(provider), open_cache(cache_path), pcfg.workers);
      for (const auto& order : parse_orders(order_spec)) {
        auto r = predict_run(gw, lib.predict(), ds, order, shots, pcfg);
        write_run_records(r.records, fs::path(out_dir) / (order.code() + ".jsonl"));
        std::cerr << order.code() << ": " << r.records.size() << " records, " << r.diagnostics.size()
                  << " unparseable\n";
      }
    } else if (*eval) {
      Dataset gt = ablation_view(load_gt(gt_path, taxonomy, ds_name), parse_view(view));
      auto rr = read_runset(run_path, ElementOrder(order_spec), *gt.taxonomy);
      for (const auto& d : rr.diagnostics) std::cerr << "unparseable: " << d << "\n";
      auto report = score_corpus(rr.run, gt);
      if (as_json) {
        auto j = report.to_json();
        j["view"] = view;
        j["unparseable"] = rr.diagnostics.size();
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << report.table();
        std::cout << "view = " << view << "  unparseable = " << rr.diagnostics.size() << "  missing = "
                  << report.missing << "\n";
        std::cout << "F1 = " << std::fixed << std::setprecision(4) << report.f1 << "\n";
      }
    } else if (*ens) {
      auto tax = Taxonomy::resolve(taxonomy);
      std::vector<RunSet> runs;
      for (const auto& p : run_paths) runs.push_back(read_runset(p, ElementOrder(order_spec), *tax).run);
      std::vector<std::string> ranking;
      if (!ranking_path.empty()) {
        ranking = read_ranking(ranking_path);
      } else if (!select_gt.empty()) {
        ranking = rank_by_score(runs, ablation_view(load_gt(select_gt, taxonomy, ""), parse_view(view)));
      } else {
        throw Error("ensemble needs --ranking or --select-gt");
      }
      auto out = ensemble(runs, ranking, top_k, threshold, fs::path(out_path).stem().string());
      write_runset(out, ElementOrder("AOSC"), fs::path(out_path));
      std::cerr << "top " << top_k << ":";
      for (std::size_t i = 0; i < top_k; ++i) std::cerr << " " << ranking[i];
      std::cerr << "\n";
    } else if (*agree) {
      Dataset gt = read_expanded(fs::path(gt_path));
      auto rr = read_runset(run_path, ElementOrder(order_spec), *gt.taxonomy);
      std::vector<fs::path> logs(judgment_paths.begin(), judgment_paths.end());
      auto humans = load_judgments(logs);
      std::cout << agreement_table(humans, rr.run, gt).table();
    } else if (*stats) {
      Dataset gt = read_expanded(fs::path(gt_path));
      auto deltas = step_deltas(gt);
      auto orig = word_count_stats(ablation_view(gt, View::kOrig));
      auto ours = word_count_stats(gt);
      if (as_json) {
        nlohmann::ordered_json j;
        j["step_deltas"] = to_json(deltas);
        j["word_counts"] = {{"orig", to_json(orig)}, {"ours", to_json(ours)}};
        std::cout << j.dump(2) << "\n";
      } else {
        std::cout << step_delta_table(deltas) << "\n" << word_count_table(orig, ours);
      }
    } else if (*exp) {
      Dataset gt = load_gt(gt_path, taxonomy, "");
      std::vector<Task> tasks;
      if (!run_path.empty()) {
        auto rr = read_runset(run_path, ElementOrder(order_spec), *gt.taxonomy);
        tasks = export_prediction_tasks(gt, rr.run, sample_size, seed);
      } else {
        tasks = export_validity_tasks(gt, sample_size, seed);
      }
      write_tasks(tasks, out_path);
      std::cerr << "wrote " << tasks.size() << " tasks\n";
    } else if (*serve) {
      auto tasks = read_tasks(tasks_path);
      if (judgments_log.empty()) judgments_log = tasks_path + ".judgments.jsonl";
      AnnotationServer server(std::move(tasks), judgments_log,
                              static_dir.empty() ? std::nullopt : std::optional<fs::path>(static_dir));
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving on http://" << host << ":" << bound << "\n";
      server.serve();
      g_server = nullptr;
    } else if (*cost) {
      ExchangeCache cache{fs::path(cache_path)};
      std::cout << cost_report(cache, rates).table();
    }
  } catch (const std::exception& e) {
    std::cerr << "gtexpand: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
