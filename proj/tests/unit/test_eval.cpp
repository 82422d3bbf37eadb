#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "metava/eval/metrics.hpp"
#include "metava/util/rng.hpp"

using namespace metava;
using namespace metava::eval;

namespace {

double brute_auc(const std::vector<double>& s, const std::vector<int>& y) {
  double wins = 0, ties = 0, p = 0, n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] == 1) ++p; else ++n;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      if (s[i] > s[j]) ++wins;
      else if (s[i] == s[j]) ++ties;
    }
  }
  return (wins + 0.5 * ties) / (p * n);
}

struct Enumerated {
  double ap = 0;
  double threshold = 0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

// Scans every distinct score as a threshold independently.
Enumerated enumerate(const std::vector<double>& s, const std::vector<int>& y) {
  std::set<double> th(s.begin(), s.end());
  std::vector<double> desc(th.rbegin(), th.rend());
  const double P = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double N = static_cast<double>(y.size()) - P;
  Enumerated e;
  double prev_r = 0;
  long long best = -1;
  for (double t : desc) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (s[i] >= t) (y[i] == 1 ? tp : fp)++;
    const double r = tp / P;
    e.ap += (r - prev_r) * (static_cast<double>(tp) / static_cast<double>(tp + fp));
    prev_r = r;
    if (N > 0) {
      // TPR * TNR compared exactly as tp * tn (P and N are fixed).
      const long long g = static_cast<long long>(tp) * (static_cast<long long>(N) - static_cast<long long>(fp));
      if (g >= best) {
        best = g;
        e.threshold = t;
        e.tp = tp;
        e.fp = fp;
        e.tn = static_cast<std::size_t>(N) - fp;
        e.fn = static_cast<std::size_t>(P) - tp;
      }
    }
  }
  return e;
}

// CDF of Student's t by Simpson integration of the density.
double t_cdf_reference(double t, double nu) {
  const double c = std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) / std::sqrt(nu * M_PI);
  auto f = [&](double x) { return c * std::pow(1 + x * x / nu, -(nu + 1) / 2); };
  const double a = std::min(t, 0.0), b = std::max(t, 0.0);
  const int n = 200000;
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * f(a + i * h);
  const double area = s * h / 3;
  return t < 0 ? 0.5 - area : 0.5 + area;
}

}  // namespace

TEST_CASE("roc auc examples") {
  const std::vector<double> s{0.9, 0.8, 0.3, 0.1};
  CHECK(roc_auc(s, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(roc_auc(s, std::vector<int>{1, 0, 1, 0}) == 0.75);
  CHECK(brute_auc(s, {1, 0, 1, 0}) == 0.75);
  CHECK(roc_auc(std::vector<double>{0.4, 0.4, 0.4}, std::vector<int>{1, 0, 1}) == 0.5);
  CHECK_THROWS_AS(roc_auc(s, std::vector<int>{1, 1, 1, 1}), std::invalid_argument);
}

TEST_CASE("roc auc equals brute-force pair counting") {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.below(60);
    std::vector<double> s(n);
    std::vector<int> y(n);
    const bool coarse = trial % 2 == 0;
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = coarse ? static_cast<double>(rng.below(5)) / 4 : rng.uniform();
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    const double auc = roc_auc(s, y);
    CHECK(auc == brute_auc(s, y));
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3 * s[i]) - 7;
    CHECK(roc_auc(t, y) == auc);
  }
}

TEST_CASE("average precision and g-mean match enumeration") {
  CHECK(pr_auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
  CHECK(pr_auc(std::vector<double>{0.9, 0.1}, std::vector<int>{0, 1}) == 0.5);
  CHECK(pr_auc(std::vector<double>{0.3, 0.7, 0.1}, std::vector<int>{1, 1, 1}) == 1.0);
  CHECK_THROWS_AS(pr_auc(std::vector<double>{0.3}, std::vector<int>{0}), std::invalid_argument);

  const auto r = gmean_threshold_metrics(std::vector<double>{0.9, 0.8, 0.3, 0.1},
                                         std::vector<int>{1, 1, 0, 0});
  CHECK(r.threshold == 0.8);
  CHECK(r.f1 == 1.0);
  CHECK(r.accuracy == 1.0);

  Rng rng(2);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 2 + rng.below(25);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(rng.below(8)) / 8;
      y[i] = static_cast<int>(rng.below(2));
    }
    y[0] = 1;
    y[1] = 0;
    const auto e = enumerate(s, y);
    CHECK(pr_auc(s, y) == doctest::Approx(e.ap).epsilon(1e-12));
    const auto m = gmean_threshold_metrics(s, y);
    CHECK(m.threshold == e.threshold);
    CHECK(m.tp == e.tp);
    CHECK(m.fp == e.fp);
    CHECK(m.tn == e.tn);
    CHECK(m.fn == e.fn);
    CHECK(m.tp + m.fn == static_cast<std::size_t>(std::count(y.begin(), y.end(), 1)));
    const double prec = m.tp + m.fp ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
    const double rec = static_cast<double>(m.tp) / (m.tp + m.fn);
    CHECK(m.f1 == doctest::Approx(prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0));
    CHECK(m.accuracy == doctest::Approx(static_cast<double>(m.tp + m.tn) / n));
  }

  // Anti-ranked scores: the best split keeps one class perfectly.
  const auto anti = gmean_threshold_metrics(std::vector<double>{0.1, 0.2, 0.8, 0.9},
                                            std::vector<int>{1, 1, 0, 0});
  CHECK(anti.gmean <= 0.5 + 1e-12);
  CHECK(anti.tp + anti.fn == 2);
  CHECK(anti.tn + anti.fp == 2);
}

TEST_CASE("paired t-test") {
  const std::vector<double> a{1, 2, 3};
  CHECK(paired_t_test_one_sided(a, a) == 0.5);
  CHECK(paired_t_test_one_sided(std::vector<double>{1, 2, 3}, std::vector<double>{2, 3, 4}) == 0.0);
  CHECK(paired_t_test_one_sided(std::vector<double>{3, 4, 5}, std::vector<double>{2, 3, 4}) == 1.0);

  const std::vector<double> x{0.2, 0.5, 0.1, 0.4, 0.3};
  const std::vector<double> y{0.5, 0.4, 0.6, 0.7, 0.35};
  // Independent statistic: d = x - y.
  double md = 0;
  for (int i = 0; i < 5; ++i) md += (x[i] - y[i]) / 5;
  double ss = 0;
  for (int i = 0; i < 5; ++i) ss += std::pow(x[i] - y[i] - md, 2);
  const double t = md / (std::sqrt(ss / 4) / std::sqrt(5.0));
  CHECK(paired_t_test_one_sided(x, y) == doctest::Approx(t_cdf_reference(t, 4)).epsilon(1e-6));
  CHECK(paired_t_test_one_sided(y, x) == doctest::Approx(1 - t_cdf_reference(t, 4)).epsilon(1e-6));
  CHECK_THROWS(paired_t_test_one_sided(std::vector<double>{1}, std::vector<double>{2}));
}

TEST_CASE("loss histogram") {
  const auto h = loss_histogram(std::vector<double>{1, 2, 4});
  std::vector<std::size_t> expected(10, 0);
  expected[2] = expected[5] = expected[9] = 1;
  CHECK(h == expected);
  const auto same = loss_histogram(std::vector<double>{0.3, 0.3, 0.3, 0.3});
  CHECK(same[9] == 4);
  const auto tenths = loss_histogram(std::vector<double>{0.1, 0.2, 0.3, 0.7, 1.0});
  CHECK(tenths == std::vector<std::size_t>{0, 1, 1, 1, 0, 0, 0, 1, 0, 1});
  const auto global = loss_histogram(std::vector<double>{1, 2}, 0.1, 4.0);
  CHECK(global[2] == 1);
  CHECK(global[5] == 1);
  CHECK_THROWS(loss_histogram(std::vector<double>{}));
}
