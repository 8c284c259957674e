#pragma once

#include <Eigen/Core>
#include <vector>

#include "weaksep/util.hpp"

namespace weaksep {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One observation axis: strictly increasing grid coordinates plus positive
/// quadrature weights of the same length (>= 2 points).
struct GridAxis {
  Eigen::VectorXd points;
  Eigen::VectorXd weights;

  GridAxis() = default;
  GridAxis(Eigen::VectorXd pts, Eigen::VectorXd w);

  /// Trapezoidal weights on the given grid (endpoints half-weighted).
  static GridAxis trapezoid(Eigen::VectorXd pts);

  /// m evenly spaced points on [0, 1] with trapezoidal weights.
  static GridAxis uniform01(int m);

  int size() const { return static_cast<int>(points.size()); }

  /// Quadrature inner product <f, g> = sum_i w_i f_i g_i, compensated
  /// summation so constants integrate exactly.
  double inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const;
  double norm(const Eigen::VectorXd& f) const;
};

/// n subjects observed on a common spatial x temporal grid.
/// values laid out [subject][s][t] row-major; all entries finite.
struct MultiwayDataset {
  GridAxis s_axis;
  GridAxis t_axis;
  int n = 0;
  std::vector<double> values;
  /// Nonempty when the spatial axis is a vectorized product of factor axes
  /// (row-major flattening; s_axis.points are then 0..|S|-1 placeholders).
  std::vector<GridAxis> s_factors;

  MultiwayDataset() = default;
  MultiwayDataset(GridAxis s, GridAxis t, int n_subjects,
                  std::vector<double> vals, std::vector<GridAxis> factors = {});

  int n_s() const { return s_axis.size(); }
  int n_t() const { return t_axis.size(); }

  Eigen::Map<const RowMat> subject(int i) const;
  double value(int i, int s, int t) const {
    return values[static_cast<std::size_t>(i) * n_s() * n_t() +
                  static_cast<std::size_t>(s) * n_t() + t];
  }

  /// Row-major multi-index of a vectorized spatial position.
  std::vector<int> multi_index(int flat) const;
  int flat_index(const std::vector<int>& idx) const;
};

/// Pointwise mean surface and per-subject residuals; residual columns sum
/// to zero over subjects by construction.
struct CenteredDataset {
  GridAxis s_axis;
  GridAxis t_axis;
  int n = 0;
  RowMat mean_surface;
  std::vector<double> residuals;

  int n_s() const { return s_axis.size(); }
  int n_t() const { return t_axis.size(); }
  Eigen::Map<const RowMat> residual(int i) const;
};

/// Subtracts the pointwise sample mean. Requires n >= 2.
CenteredDataset center(const MultiwayDataset& data);

/// Flattens a multi-factor spatial grid row-major. Weights multiply across
/// factor axes; values must already be laid out [subject][factor grid
/// row-major][t].
MultiwayDataset vectorize_spatial(const std::vector<GridAxis>& factors,
                                  const GridAxis& t_axis, int n,
                                  std::vector<double> values);

}  // namespace weaksep
