#include "weaksep/grid.hpp"

#include <cmath>

namespace weaksep {
namespace {

void validate_points(const Eigen::VectorXd& pts) {
  if (pts.size() < 2) throw Error("GridAxis: need at least 2 grid points");
  for (Eigen::Index i = 0; i < pts.size(); ++i) {
    if (!std::isfinite(pts(i))) throw Error("GridAxis: non-finite grid point");
    if (i > 0 && !(pts(i) > pts(i - 1)))
      throw Error("GridAxis: points must be strictly increasing");
  }
}

}  // namespace

GridAxis::GridAxis(Eigen::VectorXd pts, Eigen::VectorXd w)
    : points(std::move(pts)), weights(std::move(w)) {
  validate_points(points);
  if (weights.size() != points.size())
    throw Error("GridAxis: weights length must match points");
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    if (!(weights(i) > 0.0)) throw Error("GridAxis: weights must be positive");
}

GridAxis GridAxis::trapezoid(Eigen::VectorXd pts) {
  validate_points(pts);
  const Eigen::Index m = pts.size();
  Eigen::VectorXd w(m);
  // Snap to a common spacing when the grid is uniform, so the weight sum
  // telescopes exactly to the span.
  double h = (pts(m - 1) - pts(0)) / static_cast<double>(m - 1);
  bool uniform = true;
  for (Eigen::Index i = 0; i + 1 < m; ++i) {
    if (std::abs((pts(i + 1) - pts(i)) - h) > 1e-12 * std::abs(h)) {
      uniform = false;
      break;
    }
  }
  if (uniform) {
    w.setConstant(h);
    // Endpoint weights absorb the rounding of (m-2)*h so the weight sum is
    // the axis span exactly; the FMA recovers the product's residual.
    double span = pts(m - 1) - pts(0);
    double prod = static_cast<double>(m - 2) * h;
    double prod_err = std::fma(static_cast<double>(m - 2), h, -prod);
    double end = 0.5 * ((span - prod) - prod_err);
    w(0) = end;
    w(m - 1) = end;
  } else {
    w(0) = 0.5 * (pts(1) - pts(0));
    for (Eigen::Index i = 1; i + 1 < m; ++i) w(i) = 0.5 * (pts(i + 1) - pts(i - 1));
    w(m - 1) = 0.5 * (pts(m - 1) - pts(m - 2));
  }
  return GridAxis(std::move(pts), std::move(w));
}

GridAxis GridAxis::uniform01(int m) {
  if (m < 2) throw Error("GridAxis: need at least 2 grid points");
  Eigen::VectorXd pts(m);
  for (int i = 0; i < m; ++i)
    pts(i) = static_cast<double>(i) / static_cast<double>(m - 1);
  return trapezoid(std::move(pts));
}

double GridAxis::inner(const Eigen::VectorXd& f, const Eigen::VectorXd& g) const {
  if (f.size() != points.size() || g.size() != points.size())
    throw Error("GridAxis::inner: length mismatch");
  NeumaierSum acc;
  for (Eigen::Index i = 0; i < points.size(); ++i) acc.add(weights(i) * f(i) * g(i));
  return acc.value();
}

double GridAxis::norm(const Eigen::VectorXd& f) const {
  return std::sqrt(inner(f, f));
}

MultiwayDataset::MultiwayDataset(GridAxis s, GridAxis t, int n_subjects,
                                 std::vector<double> vals,
                                 std::vector<GridAxis> factors)
    : s_axis(std::move(s)),
      t_axis(std::move(t)),
      n(n_subjects),
      values(std::move(vals)),
      s_factors(std::move(factors)) {
  if (n < 1) throw Error("MultiwayDataset: need at least one subject");
  const std::size_t expected =
      static_cast<std::size_t>(n) * n_s() * n_t();
  if (values.size() != expected)
    throw Error("MultiwayDataset: tensor size " + std::to_string(values.size()) +
                " does not match n*|S|*|T| = " + std::to_string(expected));
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i]))
      throw Error("MultiwayDataset: non-finite value at flat index " +
                  std::to_string(i));
  if (!s_factors.empty()) {
    long prod = 1;
    for (const auto& f : s_factors) prod *= f.size();
    if (prod != n_s())
      throw Error("MultiwayDataset: spatial factors do not multiply to |S|");
  }
}

Eigen::Map<const RowMat> MultiwayDataset::subject(int i) const {
  return Eigen::Map<const RowMat>(
      values.data() + static_cast<std::size_t>(i) * n_s() * n_t(), n_s(), n_t());
}

std::vector<int> MultiwayDataset::multi_index(int flat) const {
  if (s_factors.empty()) return {flat};
  std::vector<int> idx(s_factors.size());
  for (std::size_t d = s_factors.size(); d-- > 0;) {
    idx[d] = flat % s_factors[d].size();
    flat /= s_factors[d].size();
  }
  return idx;
}

int MultiwayDataset::flat_index(const std::vector<int>& idx) const {
  if (s_factors.empty()) {
    if (idx.size() != 1) throw Error("flat_index: axis is not a product");
    return idx[0];
  }
  if (idx.size() != s_factors.size())
    throw Error("flat_index: index rank mismatch");
  int flat = 0;
  for (std::size_t d = 0; d < s_factors.size(); ++d) {
    if (idx[d] < 0 || idx[d] >= s_factors[d].size())
      throw Error("flat_index: index out of range");
    flat = flat * s_factors[d].size() + idx[d];
  }
  return flat;
}

Eigen::Map<const RowMat> CenteredDataset::residual(int i) const {
  return Eigen::Map<const RowMat>(
      residuals.data() + static_cast<std::size_t>(i) * n_s() * n_t(), n_s(), n_t());
}

CenteredDataset center(const MultiwayDataset& data) {
  if (data.n < 2) throw Error("center: need at least two subjects");
  const int S = data.n_s(), T = data.n_t();
  CenteredDataset out;
  out.s_axis = data.s_axis;
  out.t_axis = data.t_axis;
  out.n = data.n;
  out.mean_surface = RowMat::Zero(S, T);
  for (int i = 0; i < data.n; ++i) out.mean_surface += data.subject(i);
  out.mean_surface /= static_cast<double>(data.n);
  out.residuals.resize(data.values.size());
  for (int i = 0; i < data.n; ++i) {
    Eigen::Map<RowMat> r(out.residuals.data() +
                             static_cast<std::size_t>(i) * S * T,
                         S, T);
    r = data.subject(i) - out.mean_surface;
  }
  return out;
}

MultiwayDataset vectorize_spatial(const std::vector<GridAxis>& factors,
                                  const GridAxis& t_axis, int n,
                                  std::vector<double> values) {
  if (factors.empty()) throw Error("vectorize_spatial: no factor axes");
  if (factors.size() > 3)
    throw Error("vectorize_spatial: at most 3 factor axes supported");
  long total = 1;
  for (const auto& f : factors) total *= f.size();
  Eigen::VectorXd pts(total), w(total);
  for (long flat = 0; flat < total; ++flat) {
    pts(flat) = static_cast<double>(flat);
    double prod = 1.0;
    long rem = flat;
    for (std::size_t d = factors.size(); d-- > 0;) {
      prod *= factors[d].weights(rem % factors[d].size());
      rem /= factors[d].size();
    }
    w(flat) = prod;
  }
  return MultiwayDataset(GridAxis(std::move(pts), std::move(w)), t_axis, n,
                         std::move(values), factors);
}

}  // namespace weaksep
