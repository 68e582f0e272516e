#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qidn/config.hpp"
#include "qidn/evaluation.hpp"
#include "qidn/matching.hpp"
#include "qidn/model.hpp"
#include "qidn/numerics/gradcheck.hpp"

namespace qidn::training {

// ---- losses

// Matched query sigma(g): -log P^t(type g) - sum_delta log P^delta(pos_delta g)
// (- entity-type terms when present). Unmatched query: -log P^t(null) only.
// Summed over all M queries.
Tensor triple_loss(const heads::HeadOutputs& outputs, const Matching& matching, const std::vector<GoldTriple>& gold);

struct Example {
  std::vector<std::size_t> token_ids;
  std::vector<GoldTriple> gold;
};

std::vector<Example> prepare_examples(const std::vector<corpus::Sentence>& sentences, const corpus::Vocab& vocab);

struct LossWeights {
  double tri = 1.0;
  double ins = 1.0;
  double cls = 1.0;
};

struct LossBreakdown {
  Tensor total;  // tri * L_tri + ins * L_ins + cls * L_cls
  double tri = 0.0;
  double ins = 0.0;
  double cls = 0.0;
  std::size_t instances = 0;
};

// L_tri is summed per sentence and averaged over the batch. L_ins and L_cls
// are computed once over the matched instances pooled across the batch. A
// component with weight 0 is still reported but contributes no gradient.
// When `matchings` is non-null and empty it receives the matchings used; when
// non-empty those matchings are reused instead of recomputed.
LossBreakdown batch_loss(const QidnModel& model, const std::vector<const Example*>& batch,
                         const num::DropoutContext& dropout, const LossWeights& weights,
                         std::vector<Matching>* matchings = nullptr);

// ---- inference

// Argmax decoding of head outputs: null-type queries, spans with left > right,
// and duplicates are dropped. Entity types come from the entity-type heads
// (argmax over real types) when present.
std::vector<corpus::Triple> decode_triples(const heads::HeadOutputs& outputs, const corpus::Vocab& vocab);

std::vector<corpus::Triple> predict(const QidnModel& model, const corpus::Sentence& sentence);
// Sentences are split over `threads` workers; the result order is the input order.
evaluation::TripleSets predict_all(const QidnModel& model, const std::vector<corpus::Sentence>& sentences,
                                   std::size_t threads = 1);

// ---- optimization

// Linear warmup from 0 to peak over `warmup` updates, then linear decay to 0 at
// `total`.
double learning_rate(double peak, std::size_t step, std::size_t warmup, std::size_t total);

// Adam with decoupled weight decay. Parameters whose name ends in ".bias" or
// ".gain" are not decayed.
class AdamW {
 public:
  AdamW(std::vector<num::NamedParam>& params, double weight_decay, double beta1 = 0.9, double beta2 = 0.999,
        double eps = 1e-8);

  // lr_for_group maps a parameter group to its current learning rate.
  void step(const std::function<double(num::ParamGroup)>& lr_for_group);
  std::size_t steps() const { return steps_; }

 private:
  std::vector<num::NamedParam>& params_;
  double weight_decay_, beta1_, beta2_, eps_;
  std::vector<std::vector<double>> m_, v_;
  std::vector<bool> decay_;
  std::size_t steps_ = 0;
};

// Rescales all gradients so that their global L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::vector<num::NamedParam>& params, double max_norm);

// ---- training loop

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double l_tri = 0.0;
  double l_ins = 0.0;
  double l_cls = 0.0;
  double dev_p = 0.0;
  double dev_r = 0.0;
  double dev_f1 = 0.0;

  nlohmann::json to_json() const;
  static EpochRecord from_json(const nlohmann::json& j);
};

struct TrainOptions {
  std::string out_dir;  // empty: no files are written
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  std::unique_ptr<QidnModel> model;  // parameters of the best dev epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_dev_f1 = 0.0;
};

// Shuffled mini-batches, AdamW with two parameter groups, best-dev-F1
// retention. When out_dir is set, writes checkpoint (best epoch, JSON),
// metrics.jsonl and config.json there. Deterministic for a fixed config.
TrainResult train(const TrainConfig& config, const std::vector<corpus::Sentence>& train_set,
                  const std::vector<corpus::Sentence>& dev_set, const std::optional<corpus::LabelSet>& labels,
                  const TrainOptions& options = {});

// ---- checkpoints

struct Checkpoint {
  TrainConfig config;
  std::size_t epoch = 0;
  std::vector<EpochRecord> history;
  std::map<std::string, std::size_t> relation_counts;
  std::unique_ptr<QidnModel> model;
};

inline constexpr int kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const QidnModel& model, const TrainConfig& config, std::size_t epoch,
                     const std::vector<EpochRecord>& history,
                     const std::map<std::string, std::size_t>& relation_counts);
Checkpoint load_checkpoint(const std::string& path);

// ---- diagnostics

// Finite-difference check of batch_loss over every parameter with dropout off.
// The matching is held fixed at its value for the unperturbed parameters.
num::GradCheckReport model_grad_check(QidnModel& model, const std::vector<corpus::Sentence>& batch,
                                      const LossWeights& weights, double relative_step = 5e-3);

// Three seeded sentences of at most max_tokens tokens over relation types
// {r0, r1, r2} and entity types {A, B}.
std::vector<corpus::Sentence> grad_check_batch(std::uint64_t seed, std::size_t max_tokens);

// Builds a model from config.model and `seed` and checks it on
// grad_check_batch(seed, 10). Requires dropout 0, dim <= 16 and <= 4 queries.
num::GradCheckReport grad_check(const TrainConfig& config, std::uint64_t seed, double relative_step = 5e-3);

struct SweepRow {
  std::size_t num_queries = 0;
  std::size_t best_epoch = 0;
  double dev_p = 0.0;
  double dev_r = 0.0;
  double dev_f1 = 0.0;
};

// Trains one model per grid value; runs are spread over config.threads workers.
std::vector<SweepRow> sweep_queries(const TrainConfig& config, const std::vector<corpus::Sentence>& train_set,
                                    const std::vector<corpus::Sentence>& dev_set,
                                    const std::optional<corpus::LabelSet>& labels,
                                    const std::vector<std::size_t>& grid);
nlohmann::json to_json(const std::vector<SweepRow>& rows);
std::string sweep_table(const std::vector<SweepRow>& rows);

}  // namespace qidn::training
