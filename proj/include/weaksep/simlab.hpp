#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "weaksep/grid.hpp"
#include "weaksep/rng.hpp"
#include "weaksep/weaksep_test.hpp"

namespace weaksep {

/// Synthetic product basis: 8 spatial and 8 temporal functions on a shared
/// 20-point grid over [0, 1], orthonormal under trapezoidal weights.
struct SimBasis {
  GridAxis grid;
  Eigen::MatrixXd psi;  // 20 x 8
  Eigen::MatrixXd phi;  // 20 x 8
};

/// Raw trigonometric columns before orthonormalization:
/// odd j -> -sqrt(2) cos(pi (j+1) s), even j -> sqrt(2) sin(pi j s).
Eigen::MatrixXd trig_psi_raw(const Eigen::VectorXd& grid);

/// First 3 order-4 B-splines on the clamped knot vector {0,0,0,0,0.5,1,1,1,1},
/// evaluated by the Cox-de Boor recursion.
Eigen::MatrixXd bspline_columns(const Eigen::VectorXd& grid);

/// Sequential Gram-Schmidt under the axis quadrature inner product,
/// preserving column order and leading directions.
Eigen::MatrixXd gram_schmidt(const Eigen::MatrixXd& columns, const GridAxis& axis);

SimBasis make_sim_basis();

enum class VVariant { v1, v2 };

/// Score-variance matrix V(j,k) = var(chi_jk) with row sums lambda_j and
/// column sums gamma_k. V1 is the rank-1 outer product; V2 is rank 2 with
/// rows 1-2 and rows 3-8 proportional within each group.
struct VMatrix {
  VVariant variant = VVariant::v1;
  Eigen::MatrixXd v;        // 8 x 8, entrywise nonnegative
  Eigen::VectorXd lambda;   // length 8
  Eigen::VectorXd gamma;    // length 8
};

VMatrix build_v(VVariant variant);

struct OffDiagonalSpec {
  enum class Kind { h0, single, triple };
  Kind kind = Kind::h0;
  double value = 0.0;  // cov(chi_12, chi_21) for Kind::single

  static OffDiagonalSpec h0() { return {}; }
  static OffDiagonalSpec single(double v) {
    return {Kind::single, v};
  }
  static OffDiagonalSpec triple() { return {Kind::triple, 0.0}; }
  std::string label() const;
};

/// 64 x 64 score covariance: diagonal vec(V) in (j,k) row-major order plus
/// the requested symmetric off-diagonal entries. Triple places
/// cov(chi_12,chi_21), cov(chi_11,chi_22), cov(chi_13,chi_31) at a common
/// fraction of their single-pair maxima. Errors when not positive definite.
Eigen::MatrixXd assemble_sigma(const VMatrix& v, const OffDiagonalSpec& spec);

/// Largest admissible signal keeping Sigma positive definite, by bisection
/// with a Cholesky test (tolerance 1e-9, returned as sup*(1 - 1e-6)).
/// Kind::single returns the covariance value; Kind::triple the common
/// fraction of the per-pair maxima.
double max_pd_cov(const VMatrix& v, OffDiagonalSpec::Kind pairs);

enum class ScoreDistribution { normal, t6 };

/// n x 64 score draws: Cholesky factor times Box-Muller normals; the t6
/// variant divides each subject's vector by sqrt(u/4) with u ~ chi^2_6, so
/// the covariance stays Sigma.
Eigen::MatrixXd sample_scores(const Eigen::MatrixXd& sigma,
                              ScoreDistribution dist, int n, Rng& rng);

/// X_i = Psi * mat(chi_i) * Phi^T on the simulation grid.
MultiwayDataset synthesize_surfaces(const Eigen::MatrixXd& scores,
                                    const SimBasis& basis);

struct PkRule {
  bool auto_fve = true;
  int p = 0, k = 0;
  std::string label() const;
};

struct SimulationScenario {
  VVariant variant = VVariant::v1;
  ScoreDistribution dist = ScoreDistribution::normal;
  int n = 100;
  OffDiagonalSpec off_diag;
  int trials = 200;
  std::uint64_t seed = kDefaultSeed;
  std::string method = "chi2";  // "chi2" or "bootstrap"
  PkRule pk_rule;
  int bootstrap_b = 1000;
  double alpha = 0.05;
};

struct RejectionCell {
  SimulationScenario scenario;
  double rate = 0.0;
  int trials = 0;
};

using RejectionTable = std::vector<RejectionCell>;

/// Runs one scenario cell: per trial, synthesize scores and surfaces on the
/// substream (seed, trial), run the test, reject when p < alpha. Trials run
/// in parallel; any trial failure aborts the cell. The trial data stream
/// depends only on (seed, trial) and the generator inputs, so cells that
/// differ only in the PK rule or method share simulated datasets.
RejectionCell run_scenario(const SimulationScenario& scenario);

/// Scenario grids: arrays are accepted for n, off_diagonal and pk_rules and
/// expanded into cells (rows = n x off-diagonal, columns = PK rules).
std::vector<SimulationScenario> scenarios_from_json(const std::string& text);

/// CSV layout mirroring the rejection tables: one row per
/// (variant, distribution, method, n, off-diagonal), one rate column per
/// PK rule.
std::string rejection_table_to_csv(const RejectionTable& table);
RejectionTable rejection_table_from_csv(const std::string& text);

}  // namespace weaksep
