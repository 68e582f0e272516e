// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// With arguments, only the listed criterion numbers run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "eval_suite.hpp"
#include "qidn/decoder.hpp"
#include "qidn/discriminator.hpp"
#include "qidn/evaluation.hpp"
#include "qidn/heads.hpp"
#include "qidn/log.hpp"
#include "qidn/numerics/ops.hpp"
#include "qidn/synthetic.hpp"
#include "qidn/training.hpp"

namespace {

using namespace qidn;
using num::Tensor;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---- 1

Outcome gradient_oracle() {
  TrainConfig c;
  c.model.dim = 16;
  c.model.num_queries = 4;
  c.model.decoder_layers = 2;
  c.model.heads = 2;
  c.model.ffn_dim = 32;
  c.dropout = 0.0;
  bool pass = true;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto start = Clock::now();
    const auto report = training::grad_check(c, seed);
    const double secs = seconds_since(start);
    const double err = report.max_rel_error();
    pass = pass && err < 1e-4 && secs < 60.0;
    detail << " seed " << seed << ": " << fmt("%.2e", err) << " in " << fmt("%.0f", secs) << "s;";
  }
  return {pass, "max relative error < 1e-4 and < 60 s per seed." + detail.str()};
}

// ---- 2

double brute_force_cost(const training::CostMatrix& cost) {
  const std::size_t n = cost.size(), m = n == 0 ? 0 : cost[0].size();
  double best = n == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  std::vector<std::size_t> cols(n);
  std::vector<bool> used(m, false);
  std::function<void(std::size_t, double)> rec = [&](std::size_t row, double acc) {
    if (row == n) {
      best = std::min(best, acc);
      return;
    }
    for (std::size_t col = 0; col < m; ++col) {
      if (used[col]) continue;
      used[col] = true;
      rec(row + 1, acc + cost[row][col]);
      used[col] = false;
    }
  };
  if (n > 0) rec(0, 0.0);
  return best;
}

Outcome matching_oracle() {
  std::mt19937_64 rng(12345);
  std::uniform_int_distribution<std::size_t> dim(1, 7);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  const auto start = Clock::now();
  std::size_t mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = dim(rng);
    const std::size_t n = std::uniform_int_distribution<std::size_t>(0, m)(rng);
    training::CostMatrix cost(n, std::vector<double>(m));
    for (auto& row : cost) {
      for (auto& x : row) x = trial % 2 ? std::floor(u(rng) / 10.0) : u(rng);
    }
    // Both sums are taken in row order, so exact equality is meaningful.
    if (training::hungarian(cost).cost != brute_force_cost(cost)) ++mismatches;
  }
  const double secs = seconds_since(start);
  return {mismatches == 0 && secs < 10.0,
          "1000 matrices, " + std::to_string(mismatches) + " cost mismatches, " + fmt("%.2f", secs) + " s"};
}

// ---- 3

Tensor basis_rows(std::size_t count, std::size_t d, std::size_t offset = 0) {
  std::vector<double> v(count * d, 0.0);
  for (std::size_t i = 0; i < count; ++i) v[i * d + offset + i] = 1.0;
  return Tensor::matrix(count, d, std::move(v));
}

Outcome loss_identities() {
  const std::vector<std::size_t> three{1, 1, 2}, one{1};
  const double ins = discriminator::instance_instance_loss(basis_rows(3, 3), three).item();
  double worst_cls = 0.0;
  for (std::size_t k : {2u, 3u, 4u, 7u}) {
    const double cls = discriminator::instance_type_loss(basis_rows(1, k + 1), one, basis_rows(k, k + 1, 1)).item();
    worst_cls = std::max(worst_cls, std::abs(cls - std::log(static_cast<double>(k))));
  }
  heads::HeadOutputs out;
  out.type_probs = Tensor::matrix(1, 3, {0.25, 0.5, 0.25});
  for (std::size_t b = 0; b < heads::kNumBoundaries; ++b) {
    out.boundary.probs[b] = Tensor::matrix(1, 2, {0.5, 0.5});
    out.boundary.logits[b] = out.boundary.probs[b];
    out.boundary.queries[b] = Tensor::zeros({1, 2});
  }
  const std::vector<training::GoldTriple> gold{{1, {0, 1, 0, 1}, 0, 0}};
  const double tri = training::triple_loss(out, {{0}, {}}, gold).item();
  const double e_ins = std::abs(ins - 2.0 * std::log(2.0));
  const double e_tri = std::abs(tri - 5.0 * std::log(2.0));
  return {e_ins < 1e-9 && worst_cls < 1e-9 && e_tri < 1e-9,
          "|L_ins - 2 log 2| = " + fmt("%.1e", e_ins) + ", max |L_cls - log K| = " + fmt("%.1e", worst_cls) +
              ", |L_tri - 5 log 2| = " + fmt("%.1e", e_tri)};
}

// ---- 4

std::size_t argmax_row(const Tensor& t, std::size_t r) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < t.cols(); ++c) {
    if (t(r, c) > t(r, best)) best = c;
  }
  return best;
}

Outcome head_signatures() {
  std::size_t bad_rows = 0, bad_logits = 0, argmax_changes = 0, rows = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    num::ParamStore store;
    std::mt19937_64 rng(seed);
    heads::PredictionHeads h({16, 5, 3}, store, rng);
    std::uniform_int_distribution<std::size_t> len(1, 30), queries(1, 12);
    const Tensor q_rel = num::normal_init({queries(rng), 16}, 0.0, 2.0, rng);
    const Tensor q_ent = num::normal_init({q_rel.rows(), 16}, 0.0, 2.0, rng);
    const Tensor tokens = num::normal_init({len(rng), 16}, 0.0, 2.0, rng);
    const auto out = h(q_rel, q_ent, tokens);
    auto check_rows = [&](const Tensor& p) {
      for (std::size_t r = 0; r < p.rows(); ++r) {
        double total = 0.0;
        for (std::size_t c = 0; c < p.cols(); ++c) total += p(r, c);
        ++rows;
        if (std::abs(total - 1.0) > 1e-9) ++bad_rows;
      }
    };
    check_rows(out.type_probs);
    for (std::size_t b = 0; b < heads::kNumBoundaries; ++b) {
      check_rows(out.boundary.probs[b]);
      for (double v : out.boundary.logits[b].values()) {
        if (v < -1.0 - 1e-12 || v > 1.0 + 1e-12) ++bad_logits;
      }
    }
    for (double factor : {1e-4, 0.3, 3.0, 1e5}) {
      const auto a = h.boundary_probs(num::scale(q_ent, factor), tokens);
      const auto b = h.boundary_probs(q_ent, num::scale(tokens, factor));
      for (std::size_t d = 0; d < heads::kNumBoundaries; ++d) {
        for (std::size_t r = 0; r < q_ent.rows(); ++r) {
          const std::size_t base = argmax_row(out.boundary.probs[d], r);
          if (argmax_row(a.probs[d], r) != base || argmax_row(b.probs[d], r) != base) ++argmax_changes;
        }
      }
    }
  }
  return {bad_rows == 0 && bad_logits == 0 && argmax_changes == 0,
          std::to_string(rows) + " rows checked over 50 seeds; " + std::to_string(bad_rows) + " off-sum rows, " +
              std::to_string(bad_logits) + " out-of-range logits, " + std::to_string(argmax_changes) +
              " argmax changes under scaling"};
}

// ---- 5

Outcome mask_soundness() {
  using decoder::MaskMode;
  std::size_t leaks = 0;
  for (MaskMode mode : {MaskMode::full, MaskMode::no_ent_to_rel, MaskMode::no_rel_to_ent, MaskMode::no_cross}) {
    num::ParamStore store;
    std::mt19937_64 rng(21);
    decoder::Decoder dec({16, 3, 4, 32, mode}, store, rng);
    const std::size_t m = 5;
    const Tensor rel = num::normal_init({m, 16}, 0.0, 1.0, rng);
    const Tensor ent = num::normal_init({m, 16}, 0.0, 1.0, rng);
    const Tensor spans = num::normal_init({9, 16}, 0.0, 1.0, rng);
    decoder::AttentionTrace trace;
    dec(rel, ent, spans, {}, &trace);
    const num::Mask mask = decoder::branch_mask(m, mode);
    for (const auto& layer : trace.self_attention) {
      for (const auto& w : layer) {
        for (std::size_t i = 0; i < 2 * m; ++i) {
          for (std::size_t j = 0; j < 2 * m; ++j) {
            if (!mask.allowed(i, j) && w(i, j) != 0.0) ++leaks;
          }
        }
      }
    }
  }
  // First-layer gradient of Q_r with respect to Q_e under no_cross.
  num::ParamStore store;
  std::mt19937_64 rng(22);
  decoder::Decoder dec({16, 1, 4, 32, decoder::MaskMode::no_cross}, store, rng);
  const Tensor rel = num::normal_init({5, 16}, 0.0, 1.0, rng);
  Tensor ent = num::normal_init({5, 16}, 0.0, 1.0, rng);
  ent.set_requires_grad(true);
  const Tensor spans = num::normal_init({9, 16}, 0.0, 1.0, rng);
  const Tensor probe = num::normal_init({5, 16}, 0.0, 1.0, rng);
  double worst = 0.0;
  {
    num::Tape tape;
    num::Tape::Scope scope(&tape);
    auto [q_rel, q_ent] = dec(rel, ent, spans, {});
    tape.backward(num::sum(num::mul(q_rel, probe)));
  }
  for (double g : ent.grad()) worst = std::max(worst, std::abs(g));
  return {leaks == 0 && worst <= 1e-12, "4 modes x 3 layers x 4 heads: " + std::to_string(leaks) +
                                            " nonzero masked weights; no_cross max |dQ_r/dQ_e| = " + fmt("%.1e", worst)};
}

// ---- 6

struct Split {
  std::vector<corpus::Sentence> train, dev;
};

// The layout of `qidn synth` with its defaults: 200 train, then 50 dev.
Split synthetic_split() {
  const auto all = corpus::generate_synthetic({300, 7});
  return {{all.begin(), all.begin() + 200}, {all.begin() + 200, all.begin() + 250}};
}

TrainConfig overfit_config(std::uint64_t seed) {
  TrainConfig c;
  c.model.dim = 64;
  c.model.num_queries = 10;
  c.model.decoder_layers = 3;
  c.lr_encoder = 1e-3;
  c.lr_other = 1e-3;
  c.epochs = 60;
  c.dropout = 0.1;
  c.batch_size = 8;
  c.seed = seed;
  return c;
}

Outcome end_to_end_overfit() {
  const Split data = synthetic_split();
  bool pass = true;
  std::ostringstream detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    double f1[2] = {0.0, 0.0};
    for (int ablate = 0; ablate < 2; ++ablate) {
      TrainConfig c = overfit_config(seed);
      if (ablate) c.weight_ins = c.weight_cls = 0.0;
      const auto start = Clock::now();
      const auto r = training::train(c, data.train, data.dev, corpus::synthetic_labels());
      const double secs = seconds_since(start);
      f1[ablate] = r.best_dev_f1;
      const bool learned = r.history.size() >= 20 && r.history[19].train_loss < r.history[0].train_loss;
      pass = pass && secs < 900.0 && learned;
      detail << " seed " << seed << (ablate ? " ablated " : " full ") << fmt("%.3f", r.best_dev_f1) << " ("
             << fmt("%.0f", secs) << "s, epoch " << r.best_epoch << ");";
    }
    pass = pass && f1[0] >= 0.99 && f1[1] >= 0.95 && f1[1] <= f1[0];
  }
  return {pass, "dev F1 >= 0.99 full, >= 0.95 without L_ins and L_cls, ablation never better." + detail.str()};
}

// ---- 7

Outcome evaluation_oracle() {
  const auto s = test::eval_suite();
  auto same = [](const evaluation::ErrorCounts& got, const test::ExpectedErrors& want) {
    return got.ece && got.ele && *got.ece == want.ece && *got.ele == want.ele && got.rce == want.rce &&
           got.pce == want.pce && got.ple == want.ple;
  };
  const auto strict = evaluation::evaluate(s.predicted, s.gold, evaluation::MatchMode::strict, true);
  const auto partial = evaluation::evaluate(s.predicted, s.gold, evaluation::MatchMode::partial, true);
  const bool suite_ok = strict.counts == s.strict && partial.counts == s.partial && same(strict.errors, s.strict_errors) &&
                        same(partial.errors, s.partial_errors) && strict.by_pattern == s.strict_patterns &&
                        strict.by_bucket == s.strict_buckets;

  std::mt19937_64 rng(77);
  std::uniform_int_distribution<std::size_t> pos(0, 14);
  std::size_t violations = 0;
  const auto base = test::eval_suite();
  for (int trial = 0; trial < 100; ++trial) {
    evaluation::TripleSets pred = evaluation::gold_triples(base.gold);
    for (auto& sentence : pred) {
      for (auto& t : sentence) {
        switch (rng() % 5) {
          case 0: t.subject.start = t.subject.start > 0 && rng() % 2 ? t.subject.start - 1 : t.subject.start; break;
          case 1: t.object.start = std::min(t.object.end, t.object.start + 1); break;
          case 2: t.relation = "born_in"; break;
          case 3: t.object.type = "ORG"; break;
          default: break;
        }
      }
      if (rng() % 3 == 0 && !sentence.empty()) sentence.pop_back();
      if (rng() % 3 == 0) {
        std::size_t a = pos(rng), b = pos(rng);
        if (a > b) std::swap(a, b);
        sentence.push_back(test::tri(test::ent(a, b, "PER"), "lives_in", test::ent(b, b, "LOC")));
      }
    }
    const auto gold = evaluation::gold_triples(base.gold);
    if (evaluation::partial_match_f1(pred, gold).f1 < evaluation::strict_match_f1(pred, gold).f1) ++violations;
  }
  return {suite_ok && violations == 0,
          std::string("10-sentence suite ") + (suite_ok ? "matches" : "DIFFERS from") +
              " hand counts (strict F1 22/35, partial 24/35); " + std::to_string(violations) +
              " of 100 perturbations with partial < strict"};
}

// ---- 8

Outcome sweep_harness() {
  const Split data = synthetic_split();
  TrainConfig c = overfit_config(1);
  c.epochs = 2;
  const std::vector<std::size_t> grid{10, 15, 20, 30, 50, 100};
  const auto start = Clock::now();
  const auto rows = training::sweep_queries(c, data.train, data.dev, corpus::synthetic_labels(), grid);
  const double secs = seconds_since(start);
  bool ok = rows.size() == grid.size();
  for (std::size_t i = 0; ok && i < rows.size(); ++i) {
    const auto& r = rows[i];
    ok = r.num_queries == grid[i] && r.best_epoch >= 1 && r.best_epoch <= c.epochs && r.dev_f1 >= 0.0 &&
         r.dev_f1 <= 1.0 && r.dev_p >= 0.0 && r.dev_p <= 1.0 && r.dev_r >= 0.0 && r.dev_r <= 1.0;
  }
  const std::string table = training::sweep_table(rows);
  const auto lines = static_cast<std::size_t>(std::count(table.begin(), table.end(), '\n'));
  ok = ok && lines >= rows.size() + 1 && training::to_json(rows).size() == rows.size();
  for (std::size_t m : grid) ok = ok && table.find(std::to_string(m)) != std::string::npos;
  return {ok, "grid {10,15,20,30,50,100} at 2 epochs: " + std::to_string(rows.size()) + " rows, " +
                  std::to_string(lines) + " table lines, " + fmt("%.0f", secs) + " s"};
}

// ---- 9

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  const Split data = synthetic_split();
  TrainConfig c = overfit_config(5);
  c.model.dim = 32;
  c.epochs = 4;
  const auto root = std::filesystem::temp_directory_path() / "qidn_acceptance_determinism";
  std::filesystem::remove_all(root);
  std::string logs[2], checkpoints[2];
  for (int run = 0; run < 2; ++run) {
    const auto dir = root / ("run" + std::to_string(run));
    training::train(c, data.train, data.dev, corpus::synthetic_labels(), {dir.string(), {}});
    logs[run] = slurp(dir / "metrics.jsonl");
    checkpoints[run] = slurp(dir / "checkpoint");
  }
  const bool same = !logs[0].empty() && logs[0] == logs[1] && checkpoints[0] == checkpoints[1];
  return {same, "two seeded runs (dropout 0.1, 4 epochs): metric logs " +
                    std::string(logs[0] == logs[1] ? "bit-identical" : "DIFFER") + ", checkpoints " +
                    (checkpoints[0] == checkpoints[1] ? "bit-identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  log::set_level(log::Level::warn);
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria{
      {"gradient oracle", gradient_oracle},   {"matching oracle", matching_oracle},
      {"loss identities", loss_identities},   {"head signatures", head_signatures},
      {"mask soundness", mask_soundness},     {"end-to-end overfit", end_to_end_overfit},
      {"evaluation oracle", evaluation_oracle}, {"query-count sweep harness", sweep_harness},
      {"determinism", determinism}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int number = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", number, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
