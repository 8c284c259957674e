#pragma once

#include <vector>

#include "weaksep/grid.hpp"

namespace weaksep {

/// Per-trial phases in radians on a frequency x time grid,
/// laid out [trial][s][t] row-major.
struct PhaseTensor {
  GridAxis s_axis;
  GridAxis t_axis;
  int n_trials = 0;
  std::vector<double> phases;

  PhaseTensor() = default;
  PhaseTensor(GridAxis s, GridAxis t, int trials, std::vector<double> vals);

  int n_s() const { return s_axis.size(); }
  int n_t() const { return t_axis.size(); }
  Eigen::Map<const RowMat> trial(int k) const;
};

/// Phase locking value surface: entrywise modulus of the trial-averaged
/// unit phase-difference vectors. Every output lies in [0, 1].
RowMat compute_plv(const PhaseTensor& p1, const PhaseTensor& p2);

/// PLV surface wrapped as a one-subject dataset on the phase tensors' grid.
MultiwayDataset plv_dataset(const PhaseTensor& p1, const PhaseTensor& p2);

/// Stacks per-subject PLV surfaces (matching grids) into one dataset.
MultiwayDataset stack_surfaces(const std::vector<MultiwayDataset>& subjects);

}  // namespace weaksep
