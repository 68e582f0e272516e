#include <cstdio>
#include <exception>
#include <random>
#include <thread>

#include "qidn/error.hpp"
#include "qidn/training.hpp"

namespace qidn::training {

num::GradCheckReport model_grad_check(QidnModel& model, const std::vector<corpus::Sentence>& batch,
                                      const LossWeights& weights, double relative_step) {
  const auto examples = prepare_examples(batch, model.vocab());
  std::vector<const Example*> pointers;
  for (const auto& e : examples) pointers.push_back(&e);
  std::vector<Matching> matchings;
  {
    num::NoGrad no_grad;
    batch_loss(model, pointers, num::DropoutContext{}, weights, &matchings);
  }
  auto loss_fn = [&] { return batch_loss(model, pointers, num::DropoutContext{}, weights, &matchings).total; };
  return num::finite_difference_check(loss_fn, model.params().params(), relative_step, num::Stencil::five_point, 1e-5);
}

std::vector<corpus::Sentence> grad_check_batch(std::uint64_t seed, std::size_t max_tokens) {
  std::mt19937_64 rng(derive_seed(seed, 4));
  auto uniform = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  const char* relations[] = {"r0", "r1", "r2"};
  const char* types[] = {"A", "B"};
  std::vector<corpus::Sentence> batch(3);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    auto& sentence = batch[s];
    const std::size_t n = uniform(6, max_tokens);
    for (std::size_t i = 0; i < n; ++i) sentence.tokens.push_back("w" + std::to_string(uniform(0, 7)));
    const std::size_t triples = uniform(1, 2);
    for (std::size_t k = 0; k < triples; ++k) {
      const std::size_t a = uniform(0, n - 1), b = uniform(0, n - 1);
      corpus::Entity sub{a, std::min(n - 1, a + uniform(0, 1)), types[uniform(0, 1)]};
      corpus::Entity obj{b, std::min(n - 1, b + uniform(0, 1)), types[uniform(0, 1)]};
      // The first two sentences share a relation so the instance loss has a positive pair.
      const std::size_t r = (s < 2 && k == 0) ? 0 : uniform(0, 2);
      sentence.triples.push_back({sub, obj, relations[r]});
    }
    corpus::dedupe_triples(sentence.triples);
    for (const auto& t : sentence.triples) {
      sentence.entities.push_back(t.subject);
      sentence.entities.push_back(t.object);
    }
  }
  return batch;
}

num::GradCheckReport grad_check(const TrainConfig& config, std::uint64_t seed, double relative_step) {
  config.validate();
  if (config.dropout > 0.0) {
    throw ConfigError("grad-check needs dropout 0: a stochastic forward pass has no single gradient");
  }
  if (config.model.dim > 16 || config.model.num_queries > 4) {
    throw ConfigError("grad-check is limited to model.dim <= 16 and model.num_queries <= 4");
  }
  const auto batch = grad_check_batch(seed, 10);
  const corpus::LabelSet labels{{"A", "B"}, {"r0", "r1", "r2"}};
  QidnModel model(config.model, corpus::build_vocab(batch, 1, labels), seed);
  return model_grad_check(model, batch, {config.weight_tri, config.weight_ins, config.weight_cls}, relative_step);
}

std::vector<SweepRow> sweep_queries(const TrainConfig& config, const std::vector<corpus::Sentence>& train_set,
                                    const std::vector<corpus::Sentence>& dev_set,
                                    const std::optional<corpus::LabelSet>& labels,
                                    const std::vector<std::size_t>& grid) {
  if (grid.empty()) throw ConfigError("sweep grid is empty");
  std::vector<SweepRow> rows(grid.size());
  auto run = [&](std::size_t k) {
    TrainConfig c = config;
    c.model.num_queries = grid[k];
    c.threads = 1;
    const TrainResult r = train(c, train_set, dev_set, labels);
    const EpochRecord& best = r.history.at(r.best_epoch - 1);
    rows[k] = {grid[k], r.best_epoch, best.dev_p, best.dev_r, best.dev_f1};
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(config.threads, grid.size()));
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    auto body = [&, w] {
      try {
        for (std::size_t k = w; k < grid.size(); k += workers) run(k);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (workers == 1) {
      body();
    } else {
      pool.emplace_back(body);
    }
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

nlohmann::json to_json(const std::vector<SweepRow>& rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    out.push_back({{"num_queries", r.num_queries},
                   {"best_epoch", r.best_epoch},
                   {"dev_p", r.dev_p},
                   {"dev_r", r.dev_r},
                   {"dev_f1", r.dev_f1}});
  }
  return out;
}

std::string sweep_table(const std::vector<SweepRow>& rows) {
  std::string out = "    M  best_epoch    dev_P    dev_R   dev_F1\n";
  char line[96];
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%5zu  %10zu  %7.4f  %7.4f  %7.4f\n", r.num_queries, r.best_epoch, r.dev_p,
                  r.dev_r, r.dev_f1);
    out += line;
  }
  return out;
}

}  // namespace qidn::training
