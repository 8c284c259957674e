#include "weaksep/marginal_fpca.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace weaksep {
namespace {

int rank_above(const Eigen::VectorXd& ev, double rel_tol) {
  if (ev.size() == 0) return 0;
  double thresh = rel_tol * std::max(ev(0), 0.0);
  int r = 0;
  while (r < ev.size() && ev(r) > thresh) ++r;
  return r;
}

// One side of the weighted eigenproblem. `label` is "lambda" or "gamma".
void decompose_side(const Eigen::MatrixXd& cov, const GridAxis& axis,
                    const std::string& label, Eigen::VectorXd& eigenvalues,
                    Eigen::MatrixXd& vectors,
                    std::vector<std::string>& warnings) {
  const int m = axis.size();
  if (cov.rows() != m || cov.cols() != m)
    throw Error("eigendecompose_marginals: covariance size does not match axis");
  Eigen::VectorXd sqrt_w = axis.weights.array().sqrt();
  Eigen::MatrixXd a =
      sqrt_w.asDiagonal() * (0.5 * (cov + cov.transpose())) * sqrt_w.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(a);
  if (solver.info() != Eigen::Success)
    throw Error("eigendecompose_marginals: eigensolver failed (" + label + ")");

  // Eigen returns ascending order; flip to descending.
  eigenvalues = solver.eigenvalues().reverse();
  vectors.resize(m, m);
  for (int j = 0; j < m; ++j)
    vectors.col(j) = solver.eigenvectors().col(m - 1 - j).cwiseQuotient(sqrt_w);

  double lead = std::max(eigenvalues(0), 0.0);
  for (int j = 0; j < m; ++j) {
    if (eigenvalues(j) < -1e-12 * lead - 1e-300)
      throw Error("eigendecompose_marginals: non-PSD input, " + label + "[" +
                  std::to_string(j + 1) + "] = " + std::to_string(eigenvalues(j)));
    if (eigenvalues(j) < 0.0) eigenvalues(j) = 0.0;
  }

  // Sign convention: largest-magnitude coordinate positive, first on ties.
  for (int j = 0; j < m; ++j) {
    int arg = 0;
    double best = std::abs(vectors(0, j));
    for (int i = 1; i < m; ++i) {
      double v = std::abs(vectors(i, j));
      if (v > best) {
        best = v;
        arg = i;
      }
    }
    if (vectors(arg, j) < 0.0) vectors.col(j) = -vectors.col(j);
  }

  int retained = rank_above(eigenvalues, 1e-12);
  for (int j = 0; j + 1 < retained; ++j) {
    if (eigenvalues(j) - eigenvalues(j + 1) < 1e-8 * lead)
      warnings.push_back("near-degenerate eigengap (Condition 2): " + label +
                         "[" + std::to_string(j + 1) + "] vs " + label + "[" +
                         std::to_string(j + 2) + "]");
  }
}

}  // namespace

int MarginalEigenSystem::rank_s(double rel_tol) const {
  return rank_above(lambda, rel_tol);
}

int MarginalEigenSystem::rank_t(double rel_tol) const {
  return rank_above(gamma, rel_tol);
}

std::pair<Eigen::MatrixXd, Eigen::MatrixXd> marginal_covariances(
    const CenteredDataset& data) {
  const int S = data.n_s(), T = data.n_t();
  Eigen::MatrixXd c_s = Eigen::MatrixXd::Zero(S, S);
  Eigen::MatrixXd c_t = Eigen::MatrixXd::Zero(T, T);
  for (int i = 0; i < data.n; ++i) {
    Eigen::MatrixXd r = data.residual(i);
    c_s.noalias() += r * data.t_axis.weights.asDiagonal() * r.transpose();
    c_t.noalias() += r.transpose() * data.s_axis.weights.asDiagonal() * r;
  }
  c_s /= static_cast<double>(data.n);
  c_t /= static_cast<double>(data.n);
  c_s = 0.5 * (c_s + c_s.transpose()).eval();
  c_t = 0.5 * (c_t + c_t.transpose()).eval();
  return {std::move(c_s), std::move(c_t)};
}

MarginalEigenSystem eigendecompose_marginals(const Eigen::MatrixXd& c_s,
                                             const Eigen::MatrixXd& c_t,
                                             const GridAxis& s_axis,
                                             const GridAxis& t_axis) {
  MarginalEigenSystem eig;
  eig.s_axis = s_axis;
  eig.t_axis = t_axis;
  decompose_side(c_s, s_axis, "lambda", eig.lambda, eig.psi, eig.warnings);
  decompose_side(c_t, t_axis, "gamma", eig.gamma, eig.phi, eig.warnings);
  return eig;
}

ScoreArray marginal_scores(const CenteredDataset& data,
                           const MarginalEigenSystem& eig, int p, int k) {
  if (p < 1 || p > eig.p_max() || k < 1 || k > eig.k_max())
    throw Error("marginal_scores: requested (P, K) out of range");
  ScoreArray scores;
  scores.n = data.n;
  scores.p = p;
  scores.k = k;
  scores.chi.resize(static_cast<std::size_t>(data.n) * p * k);
  scores.eta = Eigen::MatrixXd::Zero(p, k);

  Eigen::MatrixXd basis_s =
      eig.s_axis.weights.asDiagonal() * eig.psi.leftCols(p);  // S x P
  Eigen::MatrixXd basis_t =
      eig.t_axis.weights.asDiagonal() * eig.phi.leftCols(k);  // T x K
  for (int i = 0; i < data.n; ++i) {
    Eigen::Map<RowMat> chi_i(scores.chi.data() +
                                 static_cast<std::size_t>(i) * p * k,
                             p, k);
    chi_i.noalias() = basis_s.transpose() * data.residual(i) * basis_t;
    scores.eta += chi_i.cwiseProduct(chi_i);
  }
  scores.eta /= static_cast<double>(data.n);
  return scores;
}

FveReport fve(const MarginalEigenSystem& eig, const ScoreArray& full_scores,
              int p, int k) {
  if (p < 0 || k < 0 || p > full_scores.p || k > full_scores.k)
    throw Error("fve: requested (P, K) outside the computed score array");
  FveReport report;
  report.p = p;
  report.k = k;

  const int js = std::min(eig.rank_s(), full_scores.p);
  const int ks = std::min(eig.rank_t(), full_scores.k);
  double den = full_scores.eta.topLeftCorner(js, ks).sum();
  double num = (p == 0 || k == 0)
                   ? 0.0
                   : full_scores.eta.topLeftCorner(p, k).sum();
  report.fve_joint = den > 0.0 ? std::min(1.0, num / den) : 0.0;

  double den_s = eig.lambda.head(eig.rank_s()).sum();
  double den_t = eig.gamma.head(eig.rank_t()).sum();
  report.fve_s =
      den_s > 0.0 ? std::min(1.0, eig.lambda.head(p).sum() / den_s) : 0.0;
  report.fve_t =
      den_t > 0.0 ? std::min(1.0, eig.gamma.head(k).sum() / den_t) : 0.0;
  return report;
}

PkSelection select_pk(const MarginalEigenSystem& eig,
                      const ScoreArray& full_scores) {
  auto smallest_marginal = [&](const Eigen::VectorXd& ev, int rank,
                               double threshold) {
    double total = ev.head(rank).sum();
    if (total <= 0.0) return 1;
    double cum = 0.0;
    for (int j = 0; j < rank; ++j) {
      cum += ev(j);
      if (cum / total >= threshold) return j + 1;
    }
    return rank;
  };

  const int rank_s = std::min(eig.rank_s(), full_scores.p);
  const int rank_t = std::min(eig.rank_t(), full_scores.k);
  for (double threshold : {0.90, 0.95}) {
    int p = smallest_marginal(eig.lambda, rank_s, threshold);
    int k = smallest_marginal(eig.gamma, rank_t, threshold);
    if (threshold == 0.95 || fve(eig, full_scores, p, k).fve_joint >= 0.90)
      return {p, k, threshold};
  }
  throw Error("select_pk: unreachable");
}

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

std::string eigensystem_to_json(const MarginalEigenSystem& eig) {
  nlohmann::json j;
  j["lambda"] = vector_to_json(eig.lambda);
  j["gamma"] = vector_to_json(eig.gamma);
  j["psi"] = matrix_to_json(eig.psi);
  j["phi"] = matrix_to_json(eig.phi);
  j["s_points"] = vector_to_json(eig.s_axis.points);
  j["t_points"] = vector_to_json(eig.t_axis.points);
  j["warnings"] = eig.warnings;
  return j.dump(2) + "\n";
}

std::string fve_report_to_json(const FveReport& report,
                               const MarginalEigenSystem& eig) {
  nlohmann::json j;
  j["P"] = report.p;
  j["K"] = report.k;
  j["fve_joint"] = report.fve_joint;
  j["fve_S"] = report.fve_s;
  j["fve_T"] = report.fve_t;
  j["marginal_threshold"] = report.marginal_threshold;
  j["eigensystem"] = nlohmann::json::parse(eigensystem_to_json(eig));
  return j.dump(2) + "\n";
}

}  // namespace weaksep
