#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "qidn/error.hpp"
#include "qidn/log.hpp"
#include "qidn/training.hpp"

namespace qidn::training {

namespace {

void check_query_capacity(const std::vector<corpus::Sentence>& sentences, std::size_t num_queries,
                          const char* which) {
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (sentences[i].triples.size() > num_queries) {
      throw ConfigError(std::string(which) + " sentence " + std::to_string(i + 1) + " has " +
                        std::to_string(sentences[i].triples.size()) + " triples but model.num_queries is " +
                        std::to_string(num_queries) + "; increase model.num_queries");
    }
  }
}

void dump_batch(const std::string& out_dir, const std::vector<corpus::Sentence>& train_set,
                const std::vector<std::size_t>& indices) {
  std::vector<corpus::Sentence> batch;
  for (auto i : indices) batch.push_back(train_set[i]);
  if (out_dir.empty()) {
    for (const auto& s : batch) log::error("offending sentence: " + corpus::sentence_to_json(s).dump());
    return;
  }
  const std::string path = (std::filesystem::path(out_dir) / "nonfinite_batch.jsonl").string();
  corpus::save_corpus(path, batch);
  log::error("offending batch written to " + path);
}

}  // namespace

TrainResult train(const TrainConfig& config, const std::vector<corpus::Sentence>& train_set,
                  const std::vector<corpus::Sentence>& dev_set, const std::optional<corpus::LabelSet>& labels,
                  const TrainOptions& options) {
  config.validate();
  if (train_set.empty()) throw DataError("training corpus is empty");
  if (dev_set.empty()) throw DataError("dev corpus is empty");
  if (labels) {
    corpus::check_labels(train_set, *labels);
    corpus::check_labels(dev_set, *labels);
  }
  check_query_capacity(train_set, config.model.num_queries, "training");
  check_query_capacity(dev_set, config.model.num_queries, "dev");

  corpus::Vocab vocab = corpus::build_vocab(train_set, config.model.min_count, labels);
  const auto counts = corpus::relation_counts(train_set);
  const auto examples = prepare_examples(train_set, vocab);
  for (const auto& s : dev_set) {
    for (const auto& t : s.triples) {
      vocab.relation_id(t.relation);
      vocab.entity_type_id(t.subject.type);
      vocab.entity_type_id(t.object.type);
    }
  }

  TrainResult result;
  result.model = std::make_unique<QidnModel>(config.model, std::move(vocab), config.seed);
  QidnModel& model = *result.model;
  auto& params = model.params().params();

  const std::size_t steps_per_epoch = (examples.size() + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  const auto warmup = static_cast<std::size_t>(std::llround(config.warmup_fraction * static_cast<double>(total_steps)));
  AdamW optimizer(params, config.weight_decay);
  std::mt19937_64 shuffle_rng(derive_seed(config.seed, 2));
  std::mt19937_64 dropout_rng(derive_seed(config.seed, 3));
  const num::DropoutContext dropout{config.dropout, &dropout_rng};
  const LossWeights weights{config.weight_tri, config.weight_ins, config.weight_cls};
  const auto mode = evaluation::match_mode_from_string(config.eval_mode);

  std::ofstream metrics;
  std::string checkpoint_path;
  if (!options.out_dir.empty()) {
    std::filesystem::create_directories(options.out_dir);
    const std::filesystem::path dir(options.out_dir);
    std::ofstream(dir / "config.json") << to_json(config).dump(2) << "\n";
    metrics.open(dir / "metrics.jsonl", std::ios::trunc);
    if (!metrics) throw DataError("cannot write " + (dir / "metrics.jsonl").string());
    checkpoint_path = (dir / "checkpoint").string();
  }

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::vector<double>> best;
  double best_f1 = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    EpochRecord record;
    record.epoch = epoch;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<std::size_t> indices(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                       order.begin() + static_cast<std::ptrdiff_t>(end));
      std::vector<const Example*> batch;
      for (auto i : indices) batch.push_back(&examples[i]);

      model.params().zero_grad();
      LossBreakdown loss;
      try {
        num::Tape tape;
        num::Tape::Scope scope(&tape);
        loss = batch_loss(model, batch, dropout, weights);
        tape.backward(loss.total);
      } catch (const NumericError& e) {
        dump_batch(options.out_dir, train_set, indices);
        throw NumericError(std::string("non-finite value during training at epoch ") + std::to_string(epoch) +
                           ": " + e.what());
      }
      if (config.max_grad_norm > 0.0) clip_grad_norm(params, config.max_grad_norm);
      const std::size_t step = optimizer.steps();
      const double lr_enc = learning_rate(config.lr_encoder, step, warmup, total_steps);
      const double lr_other = learning_rate(config.lr_other, step, warmup, total_steps);
      optimizer.step([&](num::ParamGroup g) { return g == num::ParamGroup::encoder ? lr_enc : lr_other; });

      record.train_loss += loss.total.item();
      record.l_tri += loss.tri;
      record.l_ins += loss.ins;
      record.l_cls += loss.cls;
      ++batches;
    }
    record.train_loss /= static_cast<double>(batches);
    record.l_tri /= static_cast<double>(batches);
    record.l_ins /= static_cast<double>(batches);
    record.l_cls /= static_cast<double>(batches);

    const auto predictions = predict_all(model, dev_set, config.threads);
    const auto c = evaluation::match_counts(predictions, evaluation::gold_triples(dev_set), mode);
    record.dev_p = c.precision();
    record.dev_r = c.recall();
    record.dev_f1 = c.f1();
    result.history.push_back(record);

    if (record.dev_f1 > best_f1) {
      best_f1 = record.dev_f1;
      result.best_epoch = epoch;
      best = model.snapshot();
      if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, model, config, epoch, result.history, counts);
    }
    if (metrics.is_open()) metrics << record.to_json().dump() << "\n" << std::flush;
    log::info("epoch " + std::to_string(epoch) + " loss " + std::to_string(record.train_loss) + " dev_f1 " +
              std::to_string(record.dev_f1));
    if (options.on_epoch) options.on_epoch(record);
  }

  if (!best.empty()) model.restore(best);
  result.best_dev_f1 = std::max(best_f1, 0.0);
  return result;
}

}  // namespace qidn::training
