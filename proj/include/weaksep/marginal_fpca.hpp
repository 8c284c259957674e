#pragma once

#include <string>
#include <utility>
#include <vector>

#include "weaksep/grid.hpp"

namespace weaksep {

/// Marginal eigenvalues and eigenvectors, descending, weighted-orthonormal
/// under the axis quadrature inner products.
struct MarginalEigenSystem {
  Eigen::VectorXd lambda;  // spatial eigenvalues, clipped at zero
  Eigen::VectorXd gamma;   // temporal eigenvalues
  Eigen::MatrixXd psi;     // |S| x P_max, column j is psi_{j+1}
  Eigen::MatrixXd phi;     // |T| x K_max
  GridAxis s_axis;
  GridAxis t_axis;
  std::vector<std::string> warnings;

  int p_max() const { return static_cast<int>(psi.cols()); }
  int k_max() const { return static_cast<int>(phi.cols()); }
  /// Number of components with eigenvalue > rel_tol * leading.
  int rank_s(double rel_tol = 1e-12) const;
  int rank_t(double rel_tol = 1e-12) const;
};

/// Estimated marginal projection scores chi[i][j][k] and their second
/// moments eta(j,k) = mean_i chi^2.
struct ScoreArray {
  int n = 0, p = 0, k = 0;
  std::vector<double> chi;  // n x P x K row-major
  Eigen::MatrixXd eta;      // P x K

  double at(int i, int j, int kk) const {
    return chi[(static_cast<std::size_t>(i) * p + j) * k + kk];
  }
  Eigen::Map<const RowMat> subject(int i) const {
    return Eigen::Map<const RowMat>(
        chi.data() + static_cast<std::size_t>(i) * p * k, p, k);
  }
};

struct FveReport {
  double fve_joint = 0.0;
  double fve_s = 0.0;
  double fve_t = 0.0;
  int p = 0, k = 0;
  /// Marginal threshold used by the selection rule (0.90 or 0.95); 0 when
  /// the report was not produced by the selection procedure.
  double marginal_threshold = 0.0;
};

struct PkSelection {
  int p = 0, k = 0;
  double marginal_threshold = 0.0;
};

/// Estimated marginal covariances with the opposite axis' quadrature
/// weights absorbed: C_S = (1/n) sum_i R_i W_T R_i^T and symmetrically.
std::pair<Eigen::MatrixXd, Eigen::MatrixXd> marginal_covariances(
    const CenteredDataset& data);

/// Solves the weighted eigenproblems on W^{1/2} C W^{1/2} and maps back, so
/// eigenvector columns are orthonormal in the quadrature inner product.
/// Sign convention: largest-magnitude coordinate positive (first on ties).
/// Eigenvalues within -1e-12*leading are clipped to zero; anything more
/// negative is an error. Near-degenerate retained gaps (< 1e-8*leading)
/// produce a "Condition 2" warning on the result.
MarginalEigenSystem eigendecompose_marginals(const Eigen::MatrixXd& c_s,
                                             const Eigen::MatrixXd& c_t,
                                             const GridAxis& s_axis,
                                             const GridAxis& t_axis);

/// chi[i][j][k] = <R_i, psi_j x phi_k>_W as a weighted double contraction.
ScoreArray marginal_scores(const CenteredDataset& data,
                           const MarginalEigenSystem& eig, int p, int k);

/// Fractions of variance explained at (p, k). Denominators use all
/// components with eigenvalue > 1e-12 * leading.
FveReport fve(const MarginalEigenSystem& eig, const ScoreArray& full_scores,
              int p, int k);

/// Smallest (P, K) with marginal FVE >= 90%; accepted if the joint FVE is
/// >= 90%, otherwise re-selected at 95% marginal and accepted as is.
PkSelection select_pk(const MarginalEigenSystem& eig,
                      const ScoreArray& full_scores);

std::string eigensystem_to_json(const MarginalEigenSystem& eig);

/// CLI payload for the fve command: chosen (P, K), fractions, thresholds
/// and the eigensystem.
std::string fve_report_to_json(const FveReport& report,
                               const MarginalEigenSystem& eig);

}  // namespace weaksep
