#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include <json.hpp>

#include "qidn/decoder.hpp"

namespace qidn {

// Every key has a default; see README for the table. from_json rejects keys it
// does not know so typos surface as errors.
struct ModelConfig {
  std::size_t dim = 64;
  std::size_t lstm_layers = 3;
  std::size_t max_span_len = 8;
  std::size_t length_dim = 16;
  std::size_t num_queries = 15;
  std::size_t decoder_layers = 5;
  std::size_t heads = 8;
  std::size_t ffn_dim = 128;
  decoder::MaskMode mask_mode = decoder::MaskMode::full;
  std::size_t min_count = 1;
};

struct TrainConfig {
  ModelConfig model;
  std::size_t batch_size = 8;
  double lr_encoder = 1e-5;  // token embeddings (the pre-trained slot)
  double lr_other = 3e-5;
  double warmup_fraction = 0.1;
  double weight_decay = 0.01;
  double max_grad_norm = 0.0;  // 0 disables clipping
  std::size_t epochs = 100;
  double dropout = 0.1;
  std::uint64_t seed = 42;
  double weight_tri = 1.0;
  double weight_ins = 1.0;
  double weight_cls = 1.0;
  std::size_t threads = 1;
  std::string eval_mode = "strict";

  void validate() const;
};

nlohmann::json to_json(const ModelConfig& config);
nlohmann::json to_json(const TrainConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
// Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig load_train_config(const std::string& path);

// Subsystem seeds derived from the single configured seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace qidn
