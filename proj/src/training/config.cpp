#include "qidn/config.hpp"

#include <fstream>
#include <set>

#include "qidn/error.hpp"

namespace qidn {

using nlohmann::json;

namespace {

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const char* section) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw ConfigError(std::string("unknown ") + section + " config key '" + it.key() + "'");
  }
}

}  // namespace

json to_json(const ModelConfig& c) {
  return {{"dim", c.dim},
          {"lstm_layers", c.lstm_layers},
          {"max_span_len", c.max_span_len},
          {"length_dim", c.length_dim},
          {"num_queries", c.num_queries},
          {"decoder_layers", c.decoder_layers},
          {"heads", c.heads},
          {"ffn_dim", c.ffn_dim},
          {"mask_mode", decoder::to_string(c.mask_mode)},
          {"min_count", c.min_count}};
}

json to_json(const TrainConfig& c) {
  return {{"model", to_json(c.model)},
          {"batch_size", c.batch_size},
          {"lr_encoder", c.lr_encoder},
          {"lr_other", c.lr_other},
          {"warmup_fraction", c.warmup_fraction},
          {"weight_decay", c.weight_decay},
          {"max_grad_norm", c.max_grad_norm},
          {"epochs", c.epochs},
          {"dropout", c.dropout},
          {"seed", c.seed},
          {"weight_tri", c.weight_tri},
          {"weight_ins", c.weight_ins},
          {"weight_cls", c.weight_cls},
          {"threads", c.threads},
          {"eval_mode", c.eval_mode}};
}

ModelConfig model_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model config must be a JSON object");
  reject_unknown(j,
                 {"dim", "lstm_layers", "max_span_len", "length_dim", "num_queries", "decoder_layers", "heads",
                  "ffn_dim", "mask_mode", "min_count"},
                 "model");
  ModelConfig c;
  read(j, "dim", c.dim);
  read(j, "lstm_layers", c.lstm_layers);
  read(j, "max_span_len", c.max_span_len);
  read(j, "length_dim", c.length_dim);
  read(j, "num_queries", c.num_queries);
  read(j, "decoder_layers", c.decoder_layers);
  read(j, "heads", c.heads);
  read(j, "ffn_dim", c.ffn_dim);
  read(j, "min_count", c.min_count);
  if (j.contains("mask_mode")) {
    std::string mode;
    read(j, "mask_mode", mode);
    c.mask_mode = decoder::mask_mode_from_string(mode);
  }
  return c;
}

TrainConfig train_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  reject_unknown(j,
                 {"model", "batch_size", "lr_encoder", "lr_other", "warmup_fraction", "weight_decay", "max_grad_norm",
                  "epochs", "dropout", "seed", "weight_tri", "weight_ins", "weight_cls", "threads", "eval_mode"},
                 "training");
  TrainConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  read(j, "batch_size", c.batch_size);
  read(j, "lr_encoder", c.lr_encoder);
  read(j, "lr_other", c.lr_other);
  read(j, "warmup_fraction", c.warmup_fraction);
  read(j, "weight_decay", c.weight_decay);
  read(j, "max_grad_norm", c.max_grad_norm);
  read(j, "epochs", c.epochs);
  read(j, "dropout", c.dropout);
  read(j, "seed", c.seed);
  read(j, "weight_tri", c.weight_tri);
  read(j, "weight_ins", c.weight_ins);
  read(j, "weight_cls", c.weight_cls);
  read(j, "threads", c.threads);
  read(j, "eval_mode", c.eval_mode);
  c.validate();
  return c;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": malformed JSON (" + e.what() + ")");
  }
  return train_config_from_json(j);
}

void TrainConfig::validate() const {
  if (model.dim == 0 || model.dim % 2 != 0) throw ConfigError("model.dim must be a positive even number");
  if (model.heads == 0 || model.dim % model.heads != 0) throw ConfigError("model.dim must be divisible by model.heads");
  if (model.num_queries == 0) throw ConfigError("model.num_queries must be >= 1");
  if (model.decoder_layers == 0) throw ConfigError("model.decoder_layers must be >= 1");
  if (model.lstm_layers == 0) throw ConfigError("model.lstm_layers must be >= 1");
  if (model.max_span_len == 0) throw ConfigError("model.max_span_len must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(lr_encoder > 0.0) || !(lr_other > 0.0)) throw ConfigError("learning rates must be > 0");
  if (warmup_fraction < 0.0 || warmup_fraction > 1.0) throw ConfigError("warmup_fraction must lie in [0, 1]");
  if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("dropout must lie in [0, 1)");
  if (threads == 0) throw ConfigError("threads must be >= 1");
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (max_grad_norm < 0.0) throw ConfigError("max_grad_norm must be >= 0 (0 disables clipping)");
  if (weight_tri < 0.0 || weight_ins < 0.0 || weight_cls < 0.0) throw ConfigError("loss weights must be >= 0");
  if (weight_tri + weight_ins + weight_cls <= 0.0) throw ConfigError("at least one loss weight must be > 0");
  if (eval_mode != "strict" && eval_mode != "partial") throw ConfigError("eval_mode must be 'strict' or 'partial'");
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 over (seed, stream)
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace qidn
