#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>

#include "weaksep/plv.hpp"
#include "weaksep/rng.hpp"

using namespace weaksep;

namespace {

PhaseTensor make_tensor(int trials, int s, int t,
                        const std::function<double(int, int, int)>& f) {
  std::vector<double> phases(static_cast<std::size_t>(trials) * s * t);
  for (int k = 0; k < trials; ++k)
    for (int si = 0; si < s; ++si)
      for (int ti = 0; ti < t; ++ti)
        phases[(static_cast<std::size_t>(k) * s + si) * t + ti] = f(k, si, ti);
  return PhaseTensor(GridAxis::uniform01(s), GridAxis::uniform01(t), trials,
                     std::move(phases));
}

}  // namespace

TEST_CASE("identical phase tensors give PLV 1 everywhere") {
  auto f = [](int k, int s, int t) { return 0.3 * k + 0.1 * s - 0.2 * t; };
  PhaseTensor a = make_tensor(3, 4, 5, f), b = make_tensor(3, 4, 5, f);
  RowMat plv = compute_plv(a, b);
  for (int s = 0; s < 4; ++s)
    for (int t = 0; t < 5; ++t) CHECK(plv(s, t) == doctest::Approx(1.0));
}

TEST_CASE("opposing phase differences cancel") {
  // two trials with differences 0 and pi
  PhaseTensor a = make_tensor(2, 2, 2, [](int k, int, int) { return k * M_PI; });
  PhaseTensor b = make_tensor(2, 2, 2, [](int, int, int) { return 0.0; });
  RowMat plv = compute_plv(a, b);
  CHECK(plv.maxCoeff() < 1e-15);

  // four trials at the quarter roots of unity
  PhaseTensor c =
      make_tensor(4, 2, 2, [](int k, int, int) { return k * M_PI / 2.0; });
  PhaseTensor d = make_tensor(4, 2, 2, [](int, int, int) { return 0.0; });
  RowMat plv4 = compute_plv(c, d);
  CHECK(plv4.maxCoeff() < 1e-15);
}

TEST_CASE("range and constant-phase invariance") {
  Rng rng(3);
  auto noise = [&rng](int, int, int) { return 10.0 * rng.next_double() - 5.0; };
  PhaseTensor a = make_tensor(7, 5, 4, noise);
  PhaseTensor b = make_tensor(7, 5, 4, noise);
  RowMat plv = compute_plv(a, b);
  CHECK(plv.minCoeff() >= 0.0);
  CHECK(plv.maxCoeff() <= 1.0);

  auto shift = [](const PhaseTensor& t, double c) {
    PhaseTensor out = t;
    for (auto& v : out.phases) v += c;
    return out;
  };
  RowMat shifted = compute_plv(shift(a, 1.234), shift(b, 1.234));
  CHECK((shifted - plv).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("shape mismatch is an error") {
  auto zero = [](int, int, int) { return 0.0; };
  PhaseTensor a = make_tensor(2, 3, 4, zero);
  PhaseTensor b = make_tensor(2, 4, 3, zero);
  CHECK_THROWS_WITH_AS(compute_plv(a, b), doctest::Contains("shapes"), Error);
}

TEST_CASE("plv_dataset wraps one subject; stacking collects subjects") {
  auto f = [](int k, int s, int t) { return 0.05 * (k + s + t); };
  PhaseTensor a = make_tensor(3, 4, 4, f), b = make_tensor(3, 4, 4, f);
  MultiwayDataset one = plv_dataset(a, b);
  CHECK(one.n == 1);
  CHECK(one.n_s() == 4);
  MultiwayDataset stacked = stack_surfaces({one, one, one});
  CHECK(stacked.n == 3);
  CHECK(stacked.value(2, 1, 1) == one.value(0, 1, 1));
}
