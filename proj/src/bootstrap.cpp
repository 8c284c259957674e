#include "weaksep/bootstrap.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>

#include "weaksep/parallel.hpp"
#include "weaksep/rng.hpp"

namespace weaksep {
namespace {

std::vector<int> default_resample(std::uint64_t seed, int replicate, int attempt,
                                  int b, int n) {
  Rng rng(seed, static_cast<std::uint64_t>(replicate) +
                    static_cast<std::uint64_t>(attempt) * b);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i)
    idx[i] = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(n)));
  return idx;
}

}  // namespace

Eigen::VectorXd align_sign(const Eigen::VectorXd& candidate,
                           const Eigen::VectorXd& reference,
                           const GridAxis& axis) {
  if (candidate.size() != reference.size())
    throw Error("align_sign: length mismatch");
  return axis.inner(candidate, reference) >= 0.0 ? candidate
                                                 : Eigen::VectorXd(-candidate);
}

BootstrapResult bootstrap_pvalue(const MultiwayDataset& data,
                                 const MarginalEigenSystem& original_eig,
                                 const TnVector& original_tn, double s_n,
                                 const BootstrapConfig& cfg,
                                 const Resampler& resampler) {
  if (cfg.b < 1) throw Error("bootstrap_pvalue: B must be >= 1");
  if (cfg.p != original_tn.p || cfg.k != original_tn.k)
    throw Error("bootstrap_pvalue: (P, K) does not match the original T_n");
  const int n = data.n;
  const int p = cfg.p, k = cfg.k;
  const int S = data.n_s(), T = data.n_t();

  BootstrapResult result;
  result.s_star.assign(cfg.b, 0.0);

  parallel_for(0, cfg.b, [&](int rep) {
    for (int attempt = 0;; ++attempt) {
      if (attempt > 10)
        throw Error("bootstrap_pvalue: replicate " + std::to_string(rep) +
                    " degenerate after 10 retries");
      std::vector<int> idx =
          resampler ? resampler(cfg.seed, rep, attempt, n)
                    : default_resample(cfg.seed, rep, attempt, cfg.b, n);
      if (static_cast<int>(idx.size()) != n)
        throw Error("bootstrap_pvalue: resampler returned wrong count");

      std::vector<double> vals(data.values.size());
      for (int i = 0; i < n; ++i) {
        const double* src =
            data.values.data() + static_cast<std::size_t>(idx[i]) * S * T;
        std::copy(src, src + static_cast<std::size_t>(S) * T,
                  vals.data() + static_cast<std::size_t>(i) * S * T);
      }
      MultiwayDataset star(data.s_axis, data.t_axis, n, std::move(vals),
                           data.s_factors);

      try {
        CenteredDataset centered = center(star);
        auto [c_s, c_t] = marginal_covariances(centered);
        MarginalEigenSystem eig =
            eigendecompose_marginals(c_s, c_t, star.s_axis, star.t_axis);
        // Rank collapse: the tested components must stay identifiable.
        if (eig.rank_s() < p || eig.rank_t() < k) continue;
        for (int j = 0; j < p; ++j)
          eig.psi.col(j) =
              align_sign(eig.psi.col(j), original_eig.psi.col(j), star.s_axis);
        for (int kk = 0; kk < k; ++kk)
          eig.phi.col(kk) =
              align_sign(eig.phi.col(kk), original_eig.phi.col(kk), star.t_axis);
        ScoreArray scores = marginal_scores(centered, eig, p, k);
        TnVector tn_star = tn_vector(scores, p, k);
        result.s_star[rep] = (tn_star.values - original_tn.values).squaredNorm();
        return;
      } catch (const Error&) {
        continue;  // degenerate resample, retry on the next substream
      }
    }
  });

  int larger = 0;
  for (double s : result.s_star)
    if (s > s_n) ++larger;
  result.p_value = static_cast<double>(larger) / cfg.b;

  if (!cfg.dump_path.empty()) {
    std::ofstream out(cfg.dump_path, std::ios::trunc);
    if (!out) throw Error("cannot write file: " + cfg.dump_path);
    out << "replicate,s_star\n" << std::setprecision(17);
    for (int rep = 0; rep < cfg.b; ++rep)
      out << rep << ',' << result.s_star[rep] << '\n';
  }
  return result;
}

}  // namespace weaksep
