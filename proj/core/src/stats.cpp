#include "rtrace/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "rtrace/error.hpp"

namespace rtrace::stats {

double mean(std::span<const double> x) {
  if (x.empty()) throw Error(Errc::EmptyInput, "mean of no values");
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_variance(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double sample_sd(std::span<const double> x) { return std::sqrt(sample_variance(x)); }

double quantile(std::span<const double> x, double q) {
  if (x.empty()) throw Error(Errc::EmptyInput, "quantile of no values");
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  const double h = (static_cast<double>(s.size()) - 1.0) * std::clamp(q, 0.0, 1.0);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::LengthMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  const double mx = mean(x);
  const double my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::DegenerateInput, "constant input to correlation");
  return sxy / std::sqrt(sxx * syy);
}

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::LengthMismatch, std::to_string(x.size()) + " vs " + std::to_string(y.size()));
  auto rx = average_ranks(x);
  auto ry = average_ranks(y);
  return pearson(rx, ry);
}

namespace {

bool constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double d) { return d == v.front(); });
}

}  // namespace

RankCorrelation rank_correlation(std::span<const double> cs, std::span<const int> agreement,
                                 const BootstrapOptions& options) {
  if (cs.size() != agreement.size())
    throw Error(Errc::LengthMismatch, std::to_string(cs.size()) + " vs " + std::to_string(agreement.size()));
  if (cs.size() < 3) throw Error(Errc::DegenerateInput, "rank correlation needs at least 3 pairs");
  std::vector<double> agree(agreement.begin(), agreement.end());
  if (constant(cs)) throw Error(Errc::DegenerateInput, "cs values are constant");
  if (constant(agree)) throw Error(Errc::DegenerateInput, "agreement values are constant");

  RankCorrelation out;
  out.rho = spearman(cs, agree);
  out.resamples = options.resamples;
  out.seed = options.seed;
  out.ci_low = out.ci_high = out.rho;
  if (options.resamples <= 0) return out;

  std::mt19937_64 rng(options.seed);
  const std::size_t n = cs.size();
  std::vector<double> bx(n), by(n), rhos;
  rhos.reserve(static_cast<std::size_t>(options.resamples));
  // Bounded so pathological inputs (one discordant point) cannot spin forever.
  const int max_draws = options.resamples * 100;
  for (int draw = 0; draw < max_draws && static_cast<int>(rhos.size()) < options.resamples; ++draw) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t k = uniform_index(rng, n);
      bx[i] = cs[k];
      by[i] = agree[k];
    }
    if (constant(bx) || constant(by)) continue;
    rhos.push_back(spearman(bx, by));
  }
  if (rhos.empty()) return out;
  const double alpha = (1.0 - options.confidence) / 2.0;
  out.ci_low = std::min(quantile(rhos, alpha), out.rho);
  out.ci_high = std::max(quantile(rhos, 1.0 - alpha), out.rho);
  return out;
}

WelchResult welch_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw Error(Errc::TooFewSamples, "welch_test needs n >= 2 per group, got " + std::to_string(a.size()) + " and " +
                                         std::to_string(b.size()));
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a);
  const double mb = mean(b);
  const double va = sample_variance(a);
  const double vb = sample_variance(b);
  if (va == 0.0 && vb == 0.0) throw Error(Errc::ZeroVariance, "both groups are constant");

  WelchResult r;
  const double se2 = va / na + vb / nb;
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
  r.p = student_t_two_sided_p(r.t, r.df);
  const double pooled = std::sqrt(((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0));
  r.cohens_d = (ma - mb) / pooled;
  return r;
}

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(t)) return 0.0;
  if (t == 0.0) return 1.0;
  const double x = df / (df + t * t);
  return std::clamp(incomplete_beta(df / 2.0, 0.5, x), 0.0, 1.0);
}

double otsu_threshold(std::span<const double> values, int bins) {
  if (values.size() < 2) throw Error(Errc::DegenerateInput, "otsu needs at least two values");
  if (bins < 2) throw Error(Errc::PreconditionFailed, "otsu needs at least two bins");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw Error(Errc::DegenerateInput, "otsu on constant input");

  const double width = (hi - lo) / bins;
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  for (double v : values) {
    auto k = static_cast<long long>(std::floor((v - lo) / width));
    k = std::clamp<long long>(k, 0, bins - 1);
    hist[static_cast<std::size_t>(k)] += 1.0;
  }
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int k = 0; k < bins; ++k) sum_all += hist[k] * (lo + (k + 0.5) * width);

  std::vector<double> between(static_cast<std::size_t>(bins - 1), 0.0);
  double w0 = 0.0, sum0 = 0.0;
  for (int k = 0; k < bins - 1; ++k) {
    w0 += hist[k];
    sum0 += hist[k] * (lo + (k + 0.5) * width);
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    between[k] = (w0 / total) * (w1 / total) * (m0 - m1) * (m0 - m1);
  }
  const double best = *std::max_element(between.begin(), between.end());
  const double tol = best * 1e-12;
  int first = -1, last = -1;
  for (int k = 0; k < bins - 1; ++k) {
    if (between[k] >= best - tol) {
      if (first < 0) first = k;
      last = k;
    }
  }
  const double t_first = lo + (first + 1) * width;
  const double t_last = lo + (last + 1) * width;
  return (t_first + t_last) / 2.0;
}

}  // namespace rtrace::stats
