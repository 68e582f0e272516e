// qidn: train, evaluate and inspect query-based triple extractors.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "qidn/corpus.hpp"
#include "qidn/error.hpp"
#include "qidn/evaluation.hpp"
#include "qidn/log.hpp"
#include "qidn/synthetic.hpp"
#include "qidn/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qidn;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;

// Flags that may override the config file. Unset optionals leave the config alone.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> num_queries;
  std::optional<double> dropout;
  std::optional<std::string> mask_mode;
  std::optional<std::string> eval_mode;

  void attach(CLI::App* cmd) {
    cmd->add_option("--seed", seed, "override config seed");
    cmd->add_option("--epochs", epochs, "override config epochs");
    cmd->add_option("--threads", threads, "override config threads");
    cmd->add_option("--batch-size", batch_size, "override config batch_size");
    cmd->add_option("--num-queries", num_queries, "override model.num_queries");
    cmd->add_option("--dropout", dropout, "override config dropout");
    cmd->add_option("--mask-mode", mask_mode, "override model.mask_mode");
    cmd->add_option("--eval-mode", eval_mode, "override eval_mode (strict|partial)");
  }

  void apply(TrainConfig& c) const {
    if (seed) c.seed = *seed;
    if (epochs) c.epochs = *epochs;
    if (threads) c.threads = *threads;
    if (batch_size) c.batch_size = *batch_size;
    if (num_queries) c.model.num_queries = *num_queries;
    if (dropout) c.dropout = *dropout;
    if (mask_mode) c.model.mask_mode = decoder::mask_mode_from_string(*mask_mode);
    if (eval_mode) c.eval_mode = *eval_mode;
    c.validate();
  }
};

TrainConfig resolve_config(const std::string& path, const Overrides& overrides) {
  TrainConfig c = path.empty() ? TrainConfig{} : load_train_config(path);
  overrides.apply(c);
  return c;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

void echo_run(const fs::path& dir, const std::string& command, const json& resolved) {
  fs::create_directories(dir);
  write_text(dir / "run.json", json{{"command", command}, {"resolved", resolved}}.dump(2) + "\n");
}

std::optional<corpus::LabelSet> labels_for(const std::string& explicit_path, const std::string& corpus_path) {
  if (!explicit_path.empty()) return corpus::load_labels(explicit_path);
  return corpus::load_sibling_labels(corpus_path);
}

std::vector<std::size_t> parse_grid(const std::string& text) {
  std::vector<std::size_t> grid;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const long value = std::stol(item, &used);
      if (used != item.size() || value <= 0) throw std::invalid_argument(item);
      grid.push_back(static_cast<std::size_t>(value));
    } catch (const std::exception&) {
      throw ConfigError("--grid expects comma-separated positive integers, got '" + item + "'");
    }
  }
  if (grid.empty()) throw ConfigError("--grid is empty");
  return grid;
}

// Predictions come either from a checkpoint or from a corpus-format file.
struct PredictionSource {
  std::string checkpoint;
  std::string predictions;
  std::size_t threads = 1;

  void attach(CLI::App* cmd) {
    cmd->add_option("--checkpoint", checkpoint, "trained checkpoint");
    cmd->add_option("--predictions", predictions, "predictions in corpus JSONL format");
    cmd->add_option("--threads", threads, "prediction worker threads")->check(CLI::PositiveNumber);
  }

  // Returns the predictions and whether the label space has entity types.
  std::pair<evaluation::TripleSets, bool> load(const std::vector<corpus::Sentence>& gold) const {
    if (checkpoint.empty() == predictions.empty()) {
      throw ConfigError("exactly one of --checkpoint or --predictions is required");
    }
    bool typed = false;
    for (const auto& s : gold) {
      for (const auto& e : s.entities) typed = typed || !e.type.empty();
    }
    if (!checkpoint.empty()) {
      const auto ck = training::load_checkpoint(checkpoint);
      return {training::predict_all(*ck.model, gold, threads), ck.model->typed_entities()};
    }
    const auto pred = corpus::load_corpus(predictions);
    if (pred.size() != gold.size()) {
      throw DataError("predictions file has " + std::to_string(pred.size()) + " sentences, gold has " +
                      std::to_string(gold.size()));
    }
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i].tokens != gold[i].tokens) {
        throw DataError("prediction sentence " + std::to_string(i + 1) + " does not match the gold tokens");
      }
    }
    return {evaluation::gold_triples(pred), typed};
  }
};

void save_predictions(const fs::path& path, const std::vector<corpus::Sentence>& gold,
                      const evaluation::TripleSets& predicted) {
  std::vector<corpus::Sentence> out;
  for (std::size_t i = 0; i < gold.size(); ++i) out.push_back({gold[i].tokens, {}, predicted[i]});
  corpus::save_corpus(path.string(), out, "predicted");
}

int run(int argc, char** argv) {
  CLI::App app{"Query-based joint entity and relation extraction"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log progress to stderr");

  // synth
  auto* synth = app.add_subcommand("synth", "generate the synthetic corpus with train/dev/test splits");
  std::string synth_out;
  std::size_t synth_train = 200, synth_dev = 50, synth_test = 50;
  std::uint64_t synth_seed = 7;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--train-sentences", synth_train, "training sentences")->check(CLI::PositiveNumber);
  synth->add_option("--dev-sentences", synth_dev, "dev sentences")->check(CLI::PositiveNumber);
  synth->add_option("--test-sentences", synth_test, "test sentences")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "generator seed");

  // train
  auto* train = app.add_subcommand("train", "train a model and keep the best dev checkpoint");
  std::string config_path, train_path, dev_path, out_dir, labels_path;
  Overrides train_overrides;
  train->add_option("--config", config_path, "JSON config (defaults apply to missing keys)")->check(CLI::ExistingFile);
  train->add_option("--train", train_path, "training corpus JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--dev", dev_path, "dev corpus JSONL")->required()->check(CLI::ExistingFile);
  train->add_option("--labels", labels_path, "labels.json (default: next to --train)")->check(CLI::ExistingFile);
  train->add_option("--out", out_dir, "output directory")->required();
  train_overrides.attach(train);

  // eval
  auto* eval = app.add_subcommand("eval", "micro P/R/F1 on a test corpus");
  std::string test_path, eval_mode = "strict", eval_out;
  PredictionSource eval_source;
  eval_source.attach(eval);
  eval->add_option("--test", test_path, "gold corpus JSONL")->required()->check(CLI::ExistingFile);
  eval->add_option("--mode", eval_mode, "strict or partial")->check(CLI::IsMember({"strict", "partial"}));
  eval->add_option("--out", eval_out, "directory for report.json, report.txt, predictions.jsonl");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "overlap-pattern, triple-count and error breakdowns");
  std::string analyze_test, analyze_out;
  PredictionSource analyze_source;
  analyze_source.attach(analyze);
  analyze->add_option("--test", analyze_test, "gold corpus JSONL")->required()->check(CLI::ExistingFile);
  analyze->add_option("--out", analyze_out, "directory for analysis.json and analysis.txt");

  // export-embeddings
  auto* exporter = app.add_subcommand("export-embeddings", "2-D PCA coordinates of relation embeddings");
  std::string export_checkpoint, export_out;
  std::size_t export_min_count = 1;
  exporter->add_option("--checkpoint", export_checkpoint, "trained checkpoint")->required()->check(CLI::ExistingFile);
  exporter->add_option("--min-count", export_min_count, "drop relation types seen fewer times in training");
  exporter->add_option("--out", export_out, "output JSON file (default: stdout)");

  // grad-check
  auto* gradcheck = app.add_subcommand("grad-check", "finite-difference gradient report for a tiny model");
  std::string gc_config, gc_out;
  std::size_t gc_seeds = 1;
  double gc_step = 5e-3, gc_tolerance = 1e-4;
  Overrides gc_overrides;
  gradcheck->add_option("--config", gc_config, "JSON config")->check(CLI::ExistingFile);
  gradcheck->add_option("--seeds", gc_seeds, "number of consecutive seeds to check")->check(CLI::PositiveNumber);
  gradcheck->add_option("--step", gc_step, "finite-difference step relative to each tensor's rms (five-point stencil)");
  gradcheck->add_option("--tolerance", gc_tolerance, "maximum allowed relative error");
  gradcheck->add_option("--out", gc_out, "output JSON report (default: stdout)");
  gc_overrides.attach(gradcheck);

  // sweep-queries
  auto* sweep = app.add_subcommand("sweep-queries", "dev F1 over a grid of query counts");
  std::string sw_config, sw_train, sw_dev, sw_labels, sw_out, sw_grid = "10,15,20,30,50,100";
  Overrides sw_overrides;
  sweep->add_option("--config", sw_config, "JSON config")->check(CLI::ExistingFile);
  sweep->add_option("--train", sw_train, "training corpus JSONL")->required()->check(CLI::ExistingFile);
  sweep->add_option("--dev", sw_dev, "dev corpus JSONL")->required()->check(CLI::ExistingFile);
  sweep->add_option("--labels", sw_labels, "labels.json (default: next to --train)")->check(CLI::ExistingFile);
  sweep->add_option("--grid", sw_grid, "comma-separated query counts");
  sweep->add_option("--out", sw_out, "directory for sweep.json and sweep.txt");
  sw_overrides.attach(sweep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }
  log::set_level(verbose ? log::Level::info : log::Level::warn);

  if (*synth) {
    const fs::path dir(synth_out);
    fs::create_directories(dir);
    const auto all = corpus::generate_synthetic({synth_train + synth_dev + synth_test, synth_seed});
    const auto split = [&](std::size_t begin, std::size_t count) {
      return std::vector<corpus::Sentence>(all.begin() + static_cast<std::ptrdiff_t>(begin),
                                           all.begin() + static_cast<std::ptrdiff_t>(begin + count));
    };
    corpus::save_corpus((dir / "train.jsonl").string(), split(0, synth_train));
    corpus::save_corpus((dir / "dev.jsonl").string(), split(synth_train, synth_dev));
    corpus::save_corpus((dir / "test.jsonl").string(), split(synth_train + synth_dev, synth_test));
    corpus::save_labels((dir / "labels.json").string(), corpus::synthetic_labels());
    echo_run(dir, "synth",
             {{"train_sentences", synth_train}, {"dev_sentences", synth_dev}, {"test_sentences", synth_test},
              {"seed", synth_seed}});
    std::cout << "wrote " << all.size() << " sentences to " << dir.string() << "\n";
    return 0;
  }

  if (*train) {
    const TrainConfig config = resolve_config(config_path, train_overrides);
    const auto train_set = corpus::load_corpus(train_path);
    const auto dev_set = corpus::load_corpus(dev_path);
    training::TrainOptions options;
    options.out_dir = out_dir;
    const auto result = training::train(config, train_set, dev_set, labels_for(labels_path, train_path), options);
    std::cout << "best dev F1 " << result.best_dev_f1 << " at epoch " << result.best_epoch << "\n";
    std::cout << "checkpoint: " << (fs::path(out_dir) / "checkpoint").string() << "\n";
    return 0;
  }

  if (*eval) {
    const auto gold = corpus::load_corpus(test_path);
    const auto mode = evaluation::match_mode_from_string(eval_mode);
    const auto [predicted, typed] = eval_source.load(gold);
    const auto report = evaluation::evaluate(predicted, gold, mode, typed);
    std::printf("mode %s  P %.4f  R %.4f  F1 %.4f\n", evaluation::to_string(mode), report.counts.precision(),
                report.counts.recall(), report.counts.f1());
    if (!eval_out.empty()) {
      const fs::path dir(eval_out);
      echo_run(dir, "eval",
               {{"test", test_path}, {"mode", eval_mode}, {"checkpoint", eval_source.checkpoint},
                {"predictions", eval_source.predictions}});
      write_text(dir / "report.json", report.to_json().dump(2) + "\n");
      write_text(dir / "report.txt", report.to_text());
      save_predictions(dir / "predictions.jsonl", gold, predicted);
    }
    return 0;
  }

  if (*analyze) {
    const auto gold = corpus::load_corpus(analyze_test);
    const auto [predicted, typed] = analyze_source.load(gold);
    json out;
    std::string text;
    for (auto mode : {evaluation::MatchMode::strict, evaluation::MatchMode::partial}) {
      const auto report = evaluation::evaluate(predicted, gold, mode, typed);
      out[evaluation::to_string(mode)] = report.to_json();
      text += report.to_text() + "\n";
    }
    std::cout << text;
    if (!analyze_out.empty()) {
      const fs::path dir(analyze_out);
      echo_run(dir, "analyze",
               {{"test", analyze_test}, {"checkpoint", analyze_source.checkpoint},
                {"predictions", analyze_source.predictions}});
      write_text(dir / "analysis.json", out.dump(2) + "\n");
      write_text(dir / "analysis.txt", text);
    }
    return 0;
  }

  if (*exporter) {
    const auto ck = training::load_checkpoint(export_checkpoint);
    const auto& r = ck.model->discriminator().relation_embeddings();
    std::vector<std::vector<double>> rows;
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < r.rows(); ++k) {
      rows.emplace_back(r.values().begin() + static_cast<std::ptrdiff_t>(k * r.cols()),
                        r.values().begin() + static_cast<std::ptrdiff_t>((k + 1) * r.cols()));
      labels.push_back(ck.model->vocab().relation_label(k + 1));
    }
    const auto points = evaluation::export_relation_topology(rows, labels, ck.relation_counts, export_min_count);
    const std::string text = evaluation::to_json(points).dump(2) + "\n";
    if (export_out.empty()) {
      std::cout << text;
    } else {
      const fs::path path(export_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_text(path, text);
    }
    return 0;
  }

  if (*gradcheck) {
    const TrainConfig config = resolve_config(gc_config, gc_overrides);
    json report = {{"config", to_json(config)}, {"step", gc_step}, {"tolerance", gc_tolerance},
                   {"seeds", json::array()}};
    bool ok = true;
    for (std::size_t k = 0; k < gc_seeds; ++k) {
      const std::uint64_t seed = config.seed + k;
      const auto r = training::grad_check(config, seed, gc_step);
      json entries = json::array();
      for (const auto& e : r.entries) {
        entries.push_back({{"name", e.name}, {"elements", e.elements}, {"max_abs_error", e.max_abs_error},
                           {"max_rel_error", e.max_rel_error}, {"step", e.step}, {"worst_index", e.worst_index}, {"refined", e.refined},
                           {"worst_analytic", e.worst_analytic}, {"worst_numeric", e.worst_numeric}});
      }
      ok = ok && r.max_rel_error() < gc_tolerance;
      report["seeds"].push_back(
          {{"seed", seed}, {"loss", r.loss}, {"max_rel_error", r.max_rel_error()}, {"parameters", entries}});
      std::fprintf(stderr, "seed %llu  max relative error %.3e\n", static_cast<unsigned long long>(seed),
                   r.max_rel_error());
    }
    report["passed"] = ok;
    if (gc_out.empty()) {
      std::cout << report.dump(2) << "\n";
    } else {
      const fs::path path(gc_out);
      if (path.has_parent_path()) fs::create_directories(path.parent_path());
      write_text(path, report.dump(2) + "\n");
    }
    if (!ok) {
      std::cerr << "grad-check: relative error above tolerance " << gc_tolerance << "\n";
      return kExitNumeric;
    }
    return 0;
  }

  if (*sweep) {
    const TrainConfig config = resolve_config(sw_config, sw_overrides);
    const auto grid = parse_grid(sw_grid);
    const auto train_set = corpus::load_corpus(sw_train);
    const auto dev_set = corpus::load_corpus(sw_dev);
    const auto rows = training::sweep_queries(config, train_set, dev_set, labels_for(sw_labels, sw_train), grid);
    const std::string table = training::sweep_table(rows);
    std::cout << table;
    if (!sw_out.empty()) {
      const fs::path dir(sw_out);
      echo_run(dir, "sweep-queries", {{"config", to_json(config)}, {"grid", grid}});
      write_text(dir / "sweep.json", training::to_json(rows).dump(2) + "\n");
      write_text(dir / "sweep.txt", table);
    }
    return 0;
  }
  return kExitUsage;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
