#include <algorithm>

#include "qidn/error.hpp"
#include "qidn/numerics/ops.hpp"
#include "qidn/training.hpp"

namespace qidn::training {

Tensor triple_loss(const heads::HeadOutputs& out, const Matching& matching, const std::vector<GoldTriple>& gold) {
  const std::size_t m = out.type_probs.rows();
  if (matching.sigma.size() != gold.size()) throw ConfigError("matching does not cover every gold triple");
  std::vector<std::size_t> type_target(m, corpus::Vocab::kNull);
  std::vector<bool> seen(m, false);
  for (std::size_t g = 0; g < gold.size(); ++g) {
    const std::size_t q = matching.sigma[g];
    if (q >= m || seen[q]) throw ConfigError("matching is not an injective map into the queries");
    seen[q] = true;
    type_target[q] = gold[g].relation;
  }

  std::vector<num::Index2> type_entries;
  for (std::size_t i = 0; i < m; ++i) type_entries.push_back({i, type_target[i]});
  std::vector<Tensor> terms{num::sum(num::log_clamped(num::pick(out.type_probs, type_entries)))};

  if (!gold.empty()) {
    auto matched_term = [&](const Tensor& probs, auto column_of) {
      std::vector<num::Index2> entries;
      for (std::size_t g = 0; g < gold.size(); ++g) entries.push_back({matching.sigma[g], column_of(gold[g])});
      terms.push_back(num::sum(num::log_clamped(num::pick(probs, entries))));
    };
    for (std::size_t b = 0; b < heads::kNumBoundaries; ++b) {
      matched_term(out.boundary.probs[b], [b](const GoldTriple& t) { return t.boundary[b]; });
    }
    if (out.subject_type_probs) {
      matched_term(*out.subject_type_probs, [](const GoldTriple& t) { return t.subject_type; });
      matched_term(*out.object_type_probs, [](const GoldTriple& t) { return t.object_type; });
    }
  }
  return num::scale(num::add_n(terms), -1.0);
}

std::vector<Example> prepare_examples(const std::vector<corpus::Sentence>& sentences, const corpus::Vocab& vocab) {
  std::vector<Example> out;
  out.reserve(sentences.size());
  for (const auto& s : sentences) out.push_back({vocab.encode(s.tokens), encode_gold(s, vocab)});
  return out;
}

LossBreakdown batch_loss(const QidnModel& model, const std::vector<const Example*>& batch,
                         const num::DropoutContext& dropout, const LossWeights& weights,
                         std::vector<Matching>* matchings) {
  if (batch.empty()) throw ConfigError("batch_loss needs a nonempty batch");
  const bool reuse = matchings != nullptr && !matchings->empty();
  if (reuse && matchings->size() != batch.size()) throw ConfigError("stored matchings do not match the batch");

  std::vector<Tensor> tri_terms;
  std::vector<Tensor> instance_parts;
  std::vector<std::size_t> labels;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const Example& ex = *batch[s];
    const ForwardPass fp = model.forward(ex.token_ids, dropout);
    Matching matching = reuse ? (*matchings)[s] : match_queries(fp.heads, ex.gold);
    tri_terms.push_back(triple_loss(fp.heads, matching, ex.gold));
    if (!ex.gold.empty()) {
      std::array<Tensor, heads::kNumBoundaries> boundary;
      for (std::size_t b = 0; b < heads::kNumBoundaries; ++b) {
        boundary[b] = num::gather_rows(fp.heads.boundary.queries[b], matching.sigma);
      }
      instance_parts.push_back(model.discriminator().aggregate(num::gather_rows(fp.q_rel, matching.sigma), boundary));
      for (const auto& g : ex.gold) labels.push_back(g.relation);
    }
    if (matchings != nullptr && !reuse) matchings->push_back(std::move(matching));
  }

  LossBreakdown out;
  const Tensor l_tri = num::scale(num::add_n(tri_terms), 1.0 / static_cast<double>(batch.size()));
  std::vector<Tensor> total{num::scale(l_tri, weights.tri)};
  out.tri = l_tri.item();
  out.instances = labels.size();
  if (!instance_parts.empty()) {
    const Tensor pooled = num::concat_rows(instance_parts);
    const auto& relations = model.discriminator().relation_embeddings();
    auto contrastive = [&](double weight, auto loss_fn) {
      if (weight == 0.0) {
        num::NoGrad no_grad;
        return loss_fn().item();
      }
      const Tensor loss = loss_fn();
      total.push_back(num::scale(loss, weight));
      return loss.item();
    };
    out.ins = contrastive(weights.ins, [&] { return discriminator::instance_instance_loss(pooled, labels); });
    out.cls = contrastive(weights.cls,
                          [&] { return discriminator::instance_type_loss(pooled, labels, relations); });
  }
  out.total = num::add_n(total);
  return out;
}

}  // namespace qidn::training
