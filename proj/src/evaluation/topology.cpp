#include <Eigen/Dense>
#include <cmath>

#include "qidn/error.hpp"
#include "qidn/evaluation.hpp"
#include "qidn/log.hpp"

namespace qidn::evaluation {

std::vector<TopologyPoint> export_relation_topology(const std::vector<std::vector<double>>& embeddings,
                                                    const std::vector<std::string>& labels,
                                                    const std::map<std::string, std::size_t>& counts,
                                                    std::size_t min_count) {
  if (embeddings.size() != labels.size()) throw ConfigError("topology: one label per embedding row is required");
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = counts.find(labels[i]);
    const std::size_t count = it == counts.end() ? 0 : it->second;
    if (count >= min_count) kept.push_back(i);
  }
  if (kept.size() < 2) {
    throw DataError("topology needs at least 2 relation types with frequency >= " + std::to_string(min_count) +
                    ", found " + std::to_string(kept.size()));
  }
  const std::size_t n = kept.size();
  const std::size_t d = embeddings[kept[0]].size();
  if (d == 0) throw ConfigError("topology: embeddings are empty");

  Eigen::MatrixXd x(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = embeddings[kept[r]];
    if (row.size() != d) throw ConfigError("topology: embedding rows differ in width");
    for (std::size_t c = 0; c < d; ++c) x(r, c) = row[c];
    const double norm = x.row(r).norm();
    if (norm == 0.0) throw NumericError("topology: relation embedding '" + labels[kept[r]] + "' has zero norm");
    x.row(r) /= norm;
  }
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n);

  std::vector<TopologyPoint> points(n);
  for (std::size_t r = 0; r < n; ++r) points[r].label = labels[kept[r]];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("topology: eigendecomposition failed");
  const Eigen::VectorXd& values = solver.eigenvalues();  // ascending
  if (values(d - 1) <= 1e-12) {
    log::warn("topology: relation embeddings have zero variance; emitting all-zero coordinates");
    return points;
  }
  for (std::size_t k = 0; k < 2 && k < d; ++k) {
    Eigen::VectorXd axis = solver.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - k));
    Eigen::Index top = 0;
    axis.cwiseAbs().maxCoeff(&top);
    if (axis(top) < 0.0) axis = -axis;
    const Eigen::VectorXd proj = centered * axis;
    for (std::size_t r = 0; r < n; ++r) (k == 0 ? points[r].x : points[r].y) = proj(static_cast<Eigen::Index>(r));
  }
  return points;
}

nlohmann::json to_json(const std::vector<TopologyPoint>& points) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : points) out.push_back({{"label", p.label}, {"x", p.x}, {"y", p.y}});
  return out;
}

}  // namespace qidn::evaluation
