#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "qidn/config.hpp"
#include "qidn/corpus.hpp"
#include "qidn/decoder.hpp"
#include "qidn/discriminator.hpp"
#include "qidn/encoder.hpp"
#include "qidn/heads.hpp"

namespace qidn::training {

using num::Tensor;

struct ForwardPass {
  encoder::EncoderOutput encoded;
  Tensor q_rel;  // [M, d]
  Tensor q_ent;  // [M, d]
  heads::HeadOutputs heads;
};

// Encoder, decoder, heads and discriminator over one vocabulary. Parameters are
// created in a fixed order from a seed derived from `seed`, so two models built
// from the same arguments are identical.
class QidnModel {
 public:
  QidnModel(const ModelConfig& config, corpus::Vocab vocab, std::uint64_t seed);
  QidnModel(const QidnModel&) = delete;
  QidnModel& operator=(const QidnModel&) = delete;

  ForwardPass forward(const std::vector<std::size_t>& token_ids, const num::DropoutContext& dropout,
                      decoder::AttentionTrace* trace = nullptr) const;

  const ModelConfig& config() const { return config_; }
  const corpus::Vocab& vocab() const { return vocab_; }
  num::ParamStore& params() { return store_; }
  const num::ParamStore& params() const { return store_; }
  decoder::Decoder& decoder() { return *decoder_; }
  const heads::PredictionHeads& heads() const { return *heads_; }
  const discriminator::InstanceDiscriminator& discriminator() const { return *discriminator_; }
  bool typed_entities() const { return heads_->has_entity_types(); }

  // Parameter values in store order.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& values);

 private:
  ModelConfig config_;
  corpus::Vocab vocab_;
  num::ParamStore store_;
  std::unique_ptr<encoder::SentenceEncoder> encoder_;
  decoder::QueryBank queries_;
  std::unique_ptr<decoder::Decoder> decoder_;
  std::unique_ptr<heads::PredictionHeads> heads_;
  std::unique_ptr<discriminator::InstanceDiscriminator> discriminator_;
};

}  // namespace qidn::training
