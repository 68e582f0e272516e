#include <fstream>

#include "qidn/error.hpp"
#include "qidn/training.hpp"

namespace qidn::training {

using nlohmann::json;

json EpochRecord::to_json() const {
  return {{"epoch", epoch},   {"train_loss", train_loss}, {"L_tri", l_tri}, {"L_ins", l_ins},
          {"L_cls", l_cls},   {"dev_p", dev_p},           {"dev_r", dev_r}, {"dev_f1", dev_f1}};
}

EpochRecord EpochRecord::from_json(const json& j) {
  EpochRecord r;
  r.epoch = j.at("epoch").get<std::size_t>();
  r.train_loss = j.at("train_loss").get<double>();
  r.l_tri = j.at("L_tri").get<double>();
  r.l_ins = j.at("L_ins").get<double>();
  r.l_cls = j.at("L_cls").get<double>();
  r.dev_p = j.at("dev_p").get<double>();
  r.dev_r = j.at("dev_r").get<double>();
  r.dev_f1 = j.at("dev_f1").get<double>();
  return r;
}

void save_checkpoint(const std::string& path, const QidnModel& model, const TrainConfig& config, std::size_t epoch,
                     const std::vector<EpochRecord>& history,
                     const std::map<std::string, std::size_t>& relation_counts) {
  json j;
  j["version"] = kCheckpointVersion;
  j["config"] = to_json(config);
  j["vocab"] = model.vocab().to_json();
  j["epoch"] = epoch;
  j["seed"] = config.seed;
  j["history"] = json::array();
  for (const auto& r : history) j["history"].push_back(r.to_json());
  j["relation_counts"] = relation_counts;
  json params = json::object();
  for (const auto& p : model.params().params()) {
    params[p.name] = {{"shape", p.tensor.shape()},
                      {"data", std::vector<double>(p.tensor.values().begin(), p.tensor.values().end())}};
  }
  j["params"] = std::move(params);

  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw DataError("cannot write checkpoint " + path);
    out << j.dump();
    if (!out) throw DataError("failed writing checkpoint " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw DataError("cannot move checkpoint into place at " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(path + ": malformed checkpoint (" + e.what() + ")");
  }
  try {
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw DataError(path + ": unsupported checkpoint version " + j.at("version").dump());
    }
    Checkpoint ck;
    ck.config = train_config_from_json(j.at("config"));
    ck.epoch = j.at("epoch").get<std::size_t>();
    for (const auto& r : j.at("history")) ck.history.push_back(EpochRecord::from_json(r));
    ck.relation_counts = j.at("relation_counts").get<std::map<std::string, std::size_t>>();
    ck.model = std::make_unique<QidnModel>(ck.config.model, corpus::Vocab::from_json(j.at("vocab")), ck.config.seed);
    const json& params = j.at("params");
    auto& store = ck.model->params().params();
    if (params.size() != store.size()) throw DataError(path + ": checkpoint parameters do not match the model");
    for (auto& p : store) {
      if (!params.contains(p.name)) throw DataError(path + ": checkpoint lacks parameter " + p.name);
      const auto& entry = params.at(p.name);
      if (entry.at("shape").get<num::Shape>() != p.tensor.shape()) {
        throw DataError(path + ": shape mismatch for parameter " + p.name);
      }
      const auto data = entry.at("data").get<std::vector<double>>();
      auto dst = p.tensor.mutable_values();
      if (data.size() != dst.size()) throw DataError(path + ": size mismatch for parameter " + p.name);
      std::copy(data.begin(), data.end(), dst.begin());
    }
    return ck;
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed checkpoint (" + e.what() + ")");
  }
}

}  // namespace qidn::training
