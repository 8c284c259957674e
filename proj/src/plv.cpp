#include "weaksep/plv.hpp"

#include <cmath>

namespace weaksep {

PhaseTensor::PhaseTensor(GridAxis s, GridAxis t, int trials,
                         std::vector<double> vals)
    : s_axis(std::move(s)),
      t_axis(std::move(t)),
      n_trials(trials),
      phases(std::move(vals)) {
  if (n_trials < 1) throw Error("PhaseTensor: need at least one trial");
  const std::size_t expected = static_cast<std::size_t>(n_trials) * n_s() * n_t();
  if (phases.size() != expected)
    throw Error("PhaseTensor: tensor size does not match n_T*|S|*|T|");
  for (double v : phases)
    if (!std::isfinite(v)) throw Error("PhaseTensor: non-finite phase");
}

Eigen::Map<const RowMat> PhaseTensor::trial(int k) const {
  return Eigen::Map<const RowMat>(
      phases.data() + static_cast<std::size_t>(k) * n_s() * n_t(), n_s(), n_t());
}

RowMat compute_plv(const PhaseTensor& p1, const PhaseTensor& p2) {
  if (p1.n_trials != p2.n_trials || p1.n_s() != p2.n_s() || p1.n_t() != p2.n_t())
    throw Error("compute_plv: phase tensor shapes do not match");
  const int S = p1.n_s(), T = p1.n_t(), nt = p1.n_trials;
  RowMat re = RowMat::Zero(S, T), im = RowMat::Zero(S, T);
  for (int k = 0; k < nt; ++k) {
    RowMat diff = p1.trial(k) - p2.trial(k);
    re += diff.array().cos().matrix();
    im += diff.array().sin().matrix();
  }
  RowMat plv(S, T);
  for (int s = 0; s < S; ++s)
    for (int t = 0; t < T; ++t) {
      double v = std::hypot(re(s, t), im(s, t)) / nt;
      plv(s, t) = std::min(1.0, std::max(0.0, v));
    }
  return plv;
}

MultiwayDataset plv_dataset(const PhaseTensor& p1, const PhaseTensor& p2) {
  RowMat plv = compute_plv(p1, p2);
  std::vector<double> vals(plv.data(), plv.data() + plv.size());
  return MultiwayDataset(p1.s_axis, p1.t_axis, 1, std::move(vals));
}

MultiwayDataset stack_surfaces(const std::vector<MultiwayDataset>& subjects) {
  if (subjects.empty()) throw Error("stack_surfaces: nothing to stack");
  const auto& first = subjects.front();
  std::vector<double> vals;
  int n = 0;
  for (const auto& d : subjects) {
    if (d.n_s() != first.n_s() || d.n_t() != first.n_t())
      throw Error("stack_surfaces: grid shapes do not match");
    vals.insert(vals.end(), d.values.begin(), d.values.end());
    n += d.n;
  }
  return MultiwayDataset(first.s_axis, first.t_axis, n, std::move(vals));
}

}  // namespace weaksep
