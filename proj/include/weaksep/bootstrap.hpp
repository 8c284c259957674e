#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "weaksep/grid.hpp"
#include "weaksep/marginal_fpca.hpp"
#include "weaksep/weaksep_test.hpp"

namespace weaksep {

struct BootstrapConfig {
  int b = 1000;                      // replicate count
  std::uint64_t seed = kDefaultSeed;
  int p = 0, k = 0;                  // (P_n, K_n) frozen from the original sample
  std::string dump_path;             // optional CSV dump of the S* sample
};

/// Returns candidate if <candidate, reference>_W >= 0, else its negation
/// (ties keep the candidate), which minimizes ||candidate - reference||_W.
Eigen::VectorXd align_sign(const Eigen::VectorXd& candidate,
                           const Eigen::VectorXd& reference,
                           const GridAxis& axis);

struct BootstrapResult {
  double p_value = 1.0;
  std::vector<double> s_star;  // one statistic per replicate, replicate order
};

/// Index draw for one replicate attempt; overridable for tests. The default
/// draws n subjects with replacement from the stream (seed, replicate + attempt*B).
using Resampler = std::function<std::vector<int>(
    std::uint64_t seed, int replicate, int attempt, int n)>;

/// Non-studentized empirical bootstrap: each replicate resamples subjects
/// with replacement, recomputes the marginal eigensystem with signs aligned
/// to the original, and evaluates S* = sum over ordered quadruples of
/// (T_n* - T_n)^2. The p-value is the proportion of replicates with
/// S* strictly larger than S_n. Deterministic given (data, cfg); replicates
/// run in parallel on independent substreams. A rank-collapsed resample is
/// retried on the next substream, at most 10 times.
BootstrapResult bootstrap_pvalue(const MultiwayDataset& data,
                                 const MarginalEigenSystem& original_eig,
                                 const TnVector& original_tn, double s_n,
                                 const BootstrapConfig& cfg,
                                 const Resampler& resampler = {});

}  // namespace weaksep
