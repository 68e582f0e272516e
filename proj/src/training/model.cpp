#include "qidn/model.hpp"

#include <algorithm>
#include <random>

#include "qidn/error.hpp"

namespace qidn::training {

QidnModel::QidnModel(const ModelConfig& config, corpus::Vocab vocab, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)) {
  std::mt19937_64 rng(derive_seed(seed, 1));
  auto tokens = std::make_unique<encoder::BiLstmEncoder>(
      encoder::BiLstmOptions{vocab_.num_tokens(), config.dim, config.lstm_layers}, store_, rng);
  encoder::SpanRepresenter spans({config.dim, config.max_span_len, config.length_dim}, store_, rng);
  encoder_ = std::make_unique<encoder::SentenceEncoder>(std::move(tokens), std::move(spans));
  queries_ = decoder::make_query_bank(store_, config.num_queries, config.dim, rng);
  decoder_ = std::make_unique<decoder::Decoder>(
      decoder::DecoderOptions{config.dim, config.decoder_layers, config.heads, config.ffn_dim, config.mask_mode},
      store_, rng);
  heads_ = std::make_unique<heads::PredictionHeads>(
      heads::HeadOptions{config.dim, vocab_.num_relations(), vocab_.num_entity_types()}, store_, rng);
  discriminator_ =
      std::make_unique<discriminator::InstanceDiscriminator>(config.dim, vocab_.num_relations(), store_, rng);
}

ForwardPass QidnModel::forward(const std::vector<std::size_t>& token_ids, const num::DropoutContext& dropout,
                               decoder::AttentionTrace* trace) const {
  ForwardPass out;
  out.encoded = (*encoder_)(token_ids, dropout);
  const auto [rel0, ent0] = decoder::project_queries(queries_);
  std::tie(out.q_rel, out.q_ent) = (*decoder_)(rel0, ent0, out.encoded.spans, dropout, trace);
  out.heads = (*heads_)(out.q_rel, out.q_ent, out.encoded.tokens);
  return out;
}

std::vector<std::vector<double>> QidnModel::snapshot() const {
  std::vector<std::vector<double>> out;
  out.reserve(store_.params().size());
  for (const auto& p : store_.params()) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

void QidnModel::restore(const std::vector<std::vector<double>>& values) {
  auto& params = store_.params();
  if (values.size() != params.size()) throw ConfigError("parameter snapshot does not match the model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].tensor.mutable_values();
    if (values[i].size() != dst.size()) throw ConfigError("parameter snapshot size mismatch for " + params[i].name);
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace qidn::training
