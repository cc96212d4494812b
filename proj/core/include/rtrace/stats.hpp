#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rtrace::stats {

double mean(std::span<const double> x);
/// Sample variance (n - 1 denominator); 0 for n < 2.
double sample_variance(std::span<const double> x);
double sample_sd(std::span<const double> x);

/// Linear-interpolation quantile (Hyndman-Fan type 7) of unsorted data.
double quantile(std::span<const double> x, double q);

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(std::span<const double> x);
double pearson(std::span<const double> x, std::span<const double> y);
/// Pearson correlation of average ranks. Errors: LengthMismatch, DegenerateInput.
double spearman(std::span<const double> x, std::span<const double> y);

struct RankCorrelation {
  double rho = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  int resamples = 0;
  std::uint64_t seed = 0;
};

struct BootstrapOptions {
  int resamples = 1000;
  std::uint64_t seed = 20240901;
  double confidence = 0.95;
};

/// Spearman rho of cs against binary agreement with a seeded percentile
/// bootstrap CI. Resamples where either side is constant are redrawn.
/// Errors: LengthMismatch, DegenerateInput (n < 3 or a constant side).
RankCorrelation rank_correlation(std::span<const double> cs, std::span<const int> agreement,
                                 const BootstrapOptions& options = {});

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
  double cohens_d = 0.0;  // pooled-SD standardized mean difference
};

/// Errors: TooFewSamples (a group with n < 2), ZeroVariance (both groups constant).
WelchResult welch_test(std::span<const double> a, std::span<const double> b);

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
double incomplete_beta(double a, double b, double x);
/// Two-sided p-value of Student's t with `df` degrees of freedom.
double student_t_two_sided_p(double t, double df);

/// 2-class threshold maximizing between-class variance over a `bins`-bin
/// histogram spanning [min, max] of the data. When several bins tie, the
/// threshold sits at the middle of the tied run. Errors: DegenerateInput.
double otsu_threshold(std::span<const double> values, int bins = 1000);

/// Deterministic uniform index in [0, n) from a 64-bit generator (rejection sampling).
template <typename Rng>
std::size_t uniform_index(Rng& rng, std::size_t n) {
  const std::uint64_t bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  for (;;) {
    const std::uint64_t r = rng();
    if (r < limit) return static_cast<std::size_t>(r % bound);
  }
}

}  // namespace rtrace::stats
