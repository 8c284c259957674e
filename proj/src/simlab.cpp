#include "weaksep/simlab.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include <json.hpp>

#include "weaksep/parallel.hpp"
#include "weaksep/util.hpp"

namespace weaksep {
namespace {

using nlohmann::json;

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Index of score (j, k) in the stacked 64-vector, 1-based inputs.
int sigma_index(int j, int k) { return (j - 1) * 8 + (k - 1); }

bool is_pd(const Eigen::MatrixXd& sigma) {
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  return llt.info() == Eigen::Success;
}

Eigen::MatrixXd diagonal_sigma(const VMatrix& v) {
  Eigen::VectorXd diag(64);
  for (int j = 1; j <= 8; ++j)
    for (int k = 1; k <= 8; ++k) diag(sigma_index(j, k)) = v.v(j - 1, k - 1);
  return diag.asDiagonal();
}

// The three alternative pairs: (1,2)-(2,1), (1,1)-(2,2), (1,3)-(3,1).
const std::array<std::array<int, 4>, 3> kTriplePairs = {
    {{1, 2, 2, 1}, {1, 1, 2, 2}, {1, 3, 3, 1}}};

double bisect_max(const std::function<bool(double)>& pd, double hi) {
  if (hi <= 0.0) return 0.0;
  double lo = 0.0;
  if (!pd(lo)) return 0.0;
  while (hi - lo > 1e-9) {
    double mid = 0.5 * (lo + hi);
    (pd(mid) ? lo : hi) = mid;
  }
  return lo * (1.0 - 1e-6);
}

double max_single_pair(const VMatrix& v, const std::array<int, 4>& pair) {
  const Eigen::MatrixXd base = diagonal_sigma(v);
  const int a = sigma_index(pair[0], pair[1]);
  const int b = sigma_index(pair[2], pair[3]);
  double bound = std::sqrt(base(a, a) * base(b, b));
  if (bound <= 0.0) return 0.0;
  auto pd = [&](double c) {
    Eigen::MatrixXd sigma = base;
    sigma(a, b) = sigma(b, a) = c;
    return is_pd(sigma);
  };
  return bisect_max(pd, bound * (1.0 + 1e-3));
}

}  // namespace

Eigen::MatrixXd trig_psi_raw(const Eigen::VectorXd& grid) {
  const double sqrt2 = std::sqrt(2.0);
  Eigen::MatrixXd cols(grid.size(), 8);
  for (int j = 1; j <= 8; ++j)
    for (Eigen::Index i = 0; i < grid.size(); ++i)
      cols(i, j - 1) = (j % 2 == 1)
                           ? -sqrt2 * std::cos(M_PI * (j + 1) * grid(i))
                           : sqrt2 * std::sin(M_PI * j * grid(i));
  return cols;
}

Eigen::MatrixXd bspline_columns(const Eigen::VectorXd& grid) {
  // Order 4 on the clamped knot vector for interior knot 0.5.
  const std::vector<double> knots = {0, 0, 0, 0, 0.5, 1, 1, 1, 1};
  const int order = 4;
  const int nb = static_cast<int>(knots.size()) - order;  // 5 basis functions
  const double right = knots.back();

  Eigen::MatrixXd all(grid.size(), nb);
  std::vector<double> b(knots.size() - 1);
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    const double x = grid(g);
    for (std::size_t i = 0; i + 1 < knots.size(); ++i) {
      bool inside = knots[i] <= x && x < knots[i + 1];
      // The last nonempty interval includes its right endpoint.
      if (x == right && knots[i] < knots[i + 1] && knots[i + 1] == right)
        inside = true;
      b[i] = inside ? 1.0 : 0.0;
    }
    for (int d = 1; d < order; ++d) {
      for (std::size_t i = 0; i + d + 1 < knots.size(); ++i) {
        double left = 0.0, rgt = 0.0;
        if (knots[i + d] > knots[i])
          left = (x - knots[i]) / (knots[i + d] - knots[i]) * b[i];
        if (knots[i + d + 1] > knots[i + 1])
          rgt = (knots[i + d + 1] - x) / (knots[i + d + 1] - knots[i + 1]) *
                b[i + 1];
        b[i] = left + rgt;
      }
    }
    for (int i = 0; i < nb; ++i) all(g, i) = b[i];
  }

  // Partition of unity across all five, checked before truncating to three.
  for (Eigen::Index g = 0; g < grid.size(); ++g) {
    double sum = all.row(g).sum();
    if (std::abs(sum - 1.0) > 1e-12)
      throw Error("bspline_columns: partition of unity violated at grid point " +
                  std::to_string(g));
  }
  return all.leftCols(3);
}

Eigen::MatrixXd gram_schmidt(const Eigen::MatrixXd& columns, const GridAxis& axis) {
  if (columns.rows() != axis.size())
    throw Error("gram_schmidt: column length does not match axis");
  Eigen::MatrixXd q = columns;
  for (int j = 0; j < q.cols(); ++j) {
    double original = axis.norm(q.col(j));
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i < j; ++i)
        q.col(j) -= axis.inner(q.col(i), q.col(j)) * q.col(i);
    double nrm = axis.norm(q.col(j));
    if (!(nrm > 1e-10 * std::max(original, 1.0)))
      throw Error("gram_schmidt: rank deficiency at column " + std::to_string(j + 1));
    q.col(j) /= nrm;
  }
  return q;
}

SimBasis make_sim_basis() {
  SimBasis basis;
  basis.grid = GridAxis::uniform01(20);
  Eigen::MatrixXd trig = trig_psi_raw(basis.grid.points);
  basis.psi = gram_schmidt(trig, basis.grid);
  Eigen::MatrixXd phi_cols(20, 8);
  phi_cols.leftCols(3) = bspline_columns(basis.grid.points);
  phi_cols.rightCols(5) = trig.leftCols(5);
  basis.phi = gram_schmidt(phi_cols, basis.grid);
  return basis;
}

VMatrix build_v(VVariant variant) {
  VMatrix out;
  out.variant = variant;
  out.lambda.resize(8);
  out.gamma.resize(8);
  double den_l = 0.0, den_g = 0.0;
  for (int j = 1; j <= 8; ++j) {
    den_l += std::exp(1.2 * j);
    den_g += std::exp(1.6 * j);
  }
  for (int j = 1; j <= 8; ++j) {
    out.lambda(j - 1) = std::exp(1.2 * (9 - j)) / den_l;
    out.gamma(j - 1) = std::exp(1.6 * (9 - j)) / den_g;
  }

  if (variant == VVariant::v1) {
    out.v = out.lambda * out.gamma.transpose();
    return out;
  }

  // Rank-2 variant: rows 1-2 carry a common direction u, rows 3-8 the
  // complementary direction w forced by the column sums. u is pinned so the
  // largest admissible cov(chi_12, chi_21) equals 0.11, with u_1 just inside
  // the w >= 0 feasibility boundary and the remaining mass spread along gamma.
  const double target_cov = 0.11;
  const double l12 = out.lambda(0) + out.lambda(1);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(8);
  u(0) = 0.999 * out.gamma(0) / l12;
  u(1) = target_cov * target_cov / (out.lambda(0) * out.lambda(1) * u(0));
  double tail = 1.0 - u(0) - u(1);
  double tail_gamma = out.gamma.tail(6).sum();
  for (int k = 2; k < 8; ++k) u(k) = tail * out.gamma(k) / tail_gamma;
  Eigen::VectorXd w = (out.gamma - l12 * u) / (1.0 - l12);

  for (int k = 0; k < 8; ++k) {
    if (u(k) < 0.0)
      throw Error("build_v: V2 direction entry u[" + std::to_string(k + 1) +
                  "] is negative");
    if (w(k) < 0.0)
      throw Error("build_v: V2 direction entry w[" + std::to_string(k + 1) +
                  "] is negative");
  }
  out.v.resize(8, 8);
  for (int j = 0; j < 8; ++j)
    out.v.row(j) = out.lambda(j) * (j < 2 ? u : w).transpose();

  for (int k = 0; k < 8; ++k) {
    double col = out.v.col(k).sum();
    if (std::abs(col - out.gamma(k)) > 1e-12)
      throw Error("build_v: V2 column sum mismatch");
  }
  return out;
}

std::string OffDiagonalSpec::label() const {
  switch (kind) {
    case Kind::h0:
      return "H0";
    case Kind::triple:
      return "triple";
    case Kind::single:
      return "single:" + format_double(value);
  }
  return "H0";
}

Eigen::MatrixXd assemble_sigma(const VMatrix& v, const OffDiagonalSpec& spec) {
  Eigen::MatrixXd sigma = diagonal_sigma(v);
  switch (spec.kind) {
    case OffDiagonalSpec::Kind::h0:
      break;
    case OffDiagonalSpec::Kind::single: {
      int a = sigma_index(1, 2), b = sigma_index(2, 1);
      sigma(a, b) = sigma(b, a) = spec.value;
      break;
    }
    case OffDiagonalSpec::Kind::triple: {
      double fraction = max_pd_cov(v, OffDiagonalSpec::Kind::triple);
      for (const auto& pair : kTriplePairs) {
        int a = sigma_index(pair[0], pair[1]);
        int b = sigma_index(pair[2], pair[3]);
        double c = fraction * max_single_pair(v, pair);
        sigma(a, b) = sigma(b, a) = c;
      }
      break;
    }
  }
  if (!is_pd(sigma)) throw Error("assemble_sigma: Sigma not PD");
  return sigma;
}

double max_pd_cov(const VMatrix& v, OffDiagonalSpec::Kind pairs) {
  if (pairs == OffDiagonalSpec::Kind::single)
    return max_single_pair(v, kTriplePairs[0]);
  if (pairs != OffDiagonalSpec::Kind::triple)
    throw Error("max_pd_cov: pairs must be single or triple");

  std::array<double, 3> singles;
  for (int i = 0; i < 3; ++i) singles[i] = max_single_pair(v, kTriplePairs[i]);
  const Eigen::MatrixXd base = diagonal_sigma(v);
  auto pd = [&](double f) {
    Eigen::MatrixXd sigma = base;
    for (int i = 0; i < 3; ++i) {
      int a = sigma_index(kTriplePairs[i][0], kTriplePairs[i][1]);
      int b = sigma_index(kTriplePairs[i][2], kTriplePairs[i][3]);
      sigma(a, b) = sigma(b, a) = f * singles[i];
    }
    return is_pd(sigma);
  };
  return bisect_max(pd, 2.0);
}

Eigen::MatrixXd sample_scores(const Eigen::MatrixXd& sigma,
                              ScoreDistribution dist, int n, Rng& rng) {
  if (sigma.rows() != sigma.cols()) throw Error("sample_scores: Sigma not square");
  const int dim = static_cast<int>(sigma.rows());
  Eigen::MatrixXd l;
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() == Eigen::Success) {
    l = llt.matrixL();
  } else {
    // PSD fallback: pivoted factorization with negative pivots clipped.
    Eigen::LDLT<Eigen::MatrixXd> ldlt(sigma);
    if (ldlt.info() != Eigen::Success)
      throw Error("sample_scores: Sigma factorization failed");
    Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0).cwiseSqrt();
    l = ldlt.transpositionsP().transpose() *
        Eigen::MatrixXd(Eigen::MatrixXd(ldlt.matrixL()) * d.asDiagonal());
  }

  // Per subject: dim normals for the Gaussian vector, then (t6 only) six
  // more for the scale mixture.
  Eigen::MatrixXd scores(n, dim);
  Eigen::VectorXd z(dim);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < dim; ++d) z(d) = rng.next_normal();
    Eigen::VectorXd x = l * z;
    if (dist == ScoreDistribution::t6) {
      double u = 0.0;
      for (int d = 0; d < 6; ++d) {
        double g = rng.next_normal();
        u += g * g;
      }
      x /= std::sqrt(u / 4.0);  // v - 2 = 4 keeps the covariance at Sigma
    }
    scores.row(i) = x.transpose();
  }
  return scores;
}

MultiwayDataset synthesize_surfaces(const Eigen::MatrixXd& scores,
                                    const SimBasis& basis) {
  if (scores.cols() != basis.psi.cols() * basis.phi.cols())
    throw Error("synthesize_surfaces: scores must have J*K columns");
  const int n = static_cast<int>(scores.rows());
  const int J = static_cast<int>(basis.psi.cols());
  const int K = static_cast<int>(basis.phi.cols());
  const int S = static_cast<int>(basis.psi.rows());
  const int T = static_cast<int>(basis.phi.rows());
  std::vector<double> values(static_cast<std::size_t>(n) * S * T);
  Eigen::MatrixXd chi(J, K);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < J; ++j)
      for (int k = 0; k < K; ++k) chi(j, k) = scores(i, j * K + k);
    Eigen::Map<RowMat> x(values.data() + static_cast<std::size_t>(i) * S * T, S, T);
    x.noalias() = basis.psi * chi * basis.phi.transpose();
  }
  return MultiwayDataset(basis.grid, basis.grid, n, std::move(values));
}

std::string PkRule::label() const {
  return auto_fve ? "FVE" : std::to_string(p) + "x" + std::to_string(k);
}

RejectionCell run_scenario(const SimulationScenario& scenario) {
  if (scenario.n < 3) throw Error("run_scenario: need n >= 3");
  if (scenario.trials < 1) throw Error("run_scenario: need trials >= 1");
  SimBasis basis = make_sim_basis();
  VMatrix v = build_v(scenario.variant);
  Eigen::MatrixXd sigma = assemble_sigma(v, scenario.off_diag);

  std::vector<char> reject(scenario.trials, 0);
  parallel_for(0, scenario.trials, [&](int trial) {
    std::uint64_t trial_seed = Rng::derive(scenario.seed, trial);
    Rng rng(trial_seed, 0);
    Eigen::MatrixXd scores = sample_scores(sigma, scenario.dist, scenario.n, rng);
    MultiwayDataset data = synthesize_surfaces(scores, basis);

    TestOptions options;
    options.method = scenario.method;
    if (!scenario.pk_rule.auto_fve)
      options.pk = std::make_pair(scenario.pk_rule.p, scenario.pk_rule.k);
    options.bootstrap_b = scenario.bootstrap_b;
    options.seed = Rng::derive(trial_seed, 1);
    TestResult result = run_test(data, options);
    reject[trial] = result.p_value < scenario.alpha ? 1 : 0;
  });

  RejectionCell cell;
  cell.scenario = scenario;
  cell.trials = scenario.trials;
  int count = 0;
  for (char r : reject) count += r;
  cell.rate = static_cast<double>(count) / scenario.trials;
  return cell;
}

namespace {

VVariant parse_variant(const std::string& s) {
  if (s == "V1" || s == "v1") return VVariant::v1;
  if (s == "V2" || s == "v2") return VVariant::v2;
  throw Error("scenario: unknown variant '" + s + "'");
}

ScoreDistribution parse_distribution(const std::string& s) {
  if (s == "normal") return ScoreDistribution::normal;
  if (s == "t6" || s == "t") return ScoreDistribution::t6;
  throw Error("scenario: unknown distribution '" + s + "'");
}

OffDiagonalSpec parse_off_diag(const json& j, const VMatrix& v) {
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "H0" || s == "h0") return OffDiagonalSpec::h0();
    if (s == "triple") return OffDiagonalSpec::triple();
    if (s.rfind("single:", 0) == 0)
      return OffDiagonalSpec::single(std::stod(s.substr(7)));
    throw Error("scenario: unknown off_diagonal '" + s + "'");
  }
  if (j.is_object() && j.contains("single")) {
    const json& val = j["single"];
    if (val.is_number()) return OffDiagonalSpec::single(val.get<double>());
    if (val.is_string()) {
      std::string s = val.get<std::string>();
      double maximum = max_pd_cov(v, OffDiagonalSpec::Kind::single);
      if (s == "max") return OffDiagonalSpec::single(maximum);
      if (s == "half-max") return OffDiagonalSpec::single(0.5 * maximum);
      throw Error("scenario: single value must be a number, 'max' or 'half-max'");
    }
  }
  throw Error("scenario: off_diagonal must be 'H0', 'triple' or {\"single\": x}");
}

PkRule parse_pk_rule(const json& j) {
  PkRule rule;
  if (j.is_string()) {
    std::string s = j.get<std::string>();
    if (s == "FVE" || s == "fve") return rule;
    auto x = s.find('x');
    if (x != std::string::npos) {
      rule.auto_fve = false;
      rule.p = std::stoi(s.substr(0, x));
      rule.k = std::stoi(s.substr(x + 1));
      return rule;
    }
    throw Error("scenario: unknown pk rule '" + s + "'");
  }
  if (j.is_array() && j.size() == 2) {
    rule.auto_fve = false;
    rule.p = j[0].get<int>();
    rule.k = j[1].get<int>();
    return rule;
  }
  throw Error("scenario: pk rule must be \"FVE\" or [P, K]");
}

}  // namespace

std::vector<SimulationScenario> scenarios_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(std::string("scenario JSON parse error: ") + e.what());
  }
  if (!j.is_object()) throw Error("scenario: top level must be an object");

  SimulationScenario base;
  base.variant = parse_variant(j.value("variant", "V1"));
  base.dist = parse_distribution(j.value("distribution", "normal"));
  base.trials = j.value("trials", 200);
  base.seed = j.value("seed", static_cast<std::uint64_t>(kDefaultSeed));
  base.method = j.value("method", std::string("chi2"));
  base.bootstrap_b = j.value("B", 1000);
  base.alpha = j.value("alpha", 0.05);
  if (base.method != "chi2" && base.method != "bootstrap")
    throw Error("scenario: method must be 'chi2' or 'bootstrap'");

  VMatrix v = build_v(base.variant);

  std::vector<int> ns;
  if (!j.contains("n")) throw Error("scenario: field 'n' is required");
  if (j["n"].is_array())
    for (const auto& e : j["n"]) ns.push_back(e.get<int>());
  else
    ns.push_back(j["n"].get<int>());

  std::vector<OffDiagonalSpec> offs;
  if (j.contains("off_diagonal")) {
    if (j["off_diagonal"].is_array())
      for (const auto& e : j["off_diagonal"]) offs.push_back(parse_off_diag(e, v));
    else
      offs.push_back(parse_off_diag(j["off_diagonal"], v));
  } else {
    offs.push_back(OffDiagonalSpec::h0());
  }

  std::vector<PkRule> rules;
  if (j.contains("pk_rules")) {
    if (j["pk_rules"].is_array() &&
        !(j["pk_rules"].size() == 2 && j["pk_rules"][0].is_number())) {
      for (const auto& e : j["pk_rules"]) rules.push_back(parse_pk_rule(e));
    } else {
      rules.push_back(parse_pk_rule(j["pk_rules"]));
    }
  } else {
    rules.push_back(PkRule{});
  }

  std::vector<SimulationScenario> cells;
  for (int n : ns)
    for (const auto& off : offs)
      for (const auto& rule : rules) {
        SimulationScenario s = base;
        s.n = n;
        s.off_diag = off;
        s.pk_rule = rule;
        cells.push_back(s);
      }
  return cells;
}

std::string rejection_table_to_csv(const RejectionTable& table) {
  std::vector<std::string> rules;
  std::vector<std::string> row_order;
  std::map<std::string, std::map<std::string, double>> rows;
  std::map<std::string, std::string> row_prefix;

  for (const auto& cell : table) {
    const auto& s = cell.scenario;
    std::ostringstream prefix;
    prefix << (s.variant == VVariant::v1 ? "V1" : "V2") << ','
           << (s.dist == ScoreDistribution::normal ? "normal" : "t6") << ','
           << s.method << ',' << s.n << ',' << s.off_diag.label() << ','
           << cell.trials;
    std::string key = prefix.str();
    std::string rule = s.pk_rule.label();
    if (std::find(rules.begin(), rules.end(), rule) == rules.end())
      rules.push_back(rule);
    if (!rows.count(key)) row_order.push_back(key);
    rows[key][rule] = cell.rate;
    row_prefix[key] = key;
  }

  std::ostringstream out;
  out << "variant,distribution,method,n,off_diagonal,trials";
  for (const auto& r : rules) out << ',' << r;
  out << '\n';
  char buf[64];
  for (const auto& key : row_order) {
    out << key;
    for (const auto& r : rules) {
      out << ',';
      auto it = rows[key].find(r);
      if (it != rows[key].end()) {
        std::snprintf(buf, sizeof(buf), "%.10g", it->second);
        out << buf;
      }
    }
    out << '\n';
  }
  return out.str();
}

RejectionTable rejection_table_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("rejection table CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header;
  {
    std::istringstream hs(line);
    std::string field;
    while (std::getline(hs, field, ',')) header.push_back(field);
  }
  if (header.size() < 7 || header[0] != "variant" || header[4] != "off_diagonal")
    throw Error("rejection table CSV: unexpected header");

  RejectionTable table;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    // "single:" labels contain no commas, so a plain split is safe.
    if (fields.size() < 6)
      throw Error("rejection table CSV: line " + std::to_string(line_no) +
                  ": too few fields");
    SimulationScenario s;
    s.variant = parse_variant(fields[0]);
    s.dist = parse_distribution(fields[1]);
    s.method = fields[2];
    s.n = std::stoi(fields[3]);
    s.off_diag = parse_off_diag(json(fields[4]), build_v(s.variant));
    s.trials = std::stoi(fields[5]);
    for (std::size_t c = 6; c < fields.size() && c < header.size(); ++c) {
      if (fields[c].empty()) continue;
      RejectionCell cell;
      cell.scenario = s;
      cell.scenario.pk_rule = parse_pk_rule(json(header[c]));
      cell.trials = s.trials;
      cell.rate = std::stod(fields[c]);
      table.push_back(cell);
    }
  }
  return table;
}

}  // namespace weaksep
