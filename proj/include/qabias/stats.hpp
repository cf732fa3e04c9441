#pragma once

#include <span>
#include <vector>

namespace qabias::stats {

[[nodiscard]] double mean(std::span<const double> x);
/// Median; for an even count the mean of the two central values.
[[nodiscard]] double median(std::span<const double> x);
/// Sample variance (n-1 denominator). Zero for fewer than two values.
[[nodiscard]] double variance(std::span<const double> x);
[[nodiscard]] double stddev(std::span<const double> x);
[[nodiscard]] double pearson(std::span<const double> x, std::span<const double> y);

/// P(X >= x) for X ~ chi-squared(dof).
[[nodiscard]] double chi2_sf(double x, double dof);
/// P(X >= k) for X ~ Binomial(n, p).
[[nodiscard]] double binomial_upper_tail(long k, long n, double p);
/// Two-sided binomial test p-value (sum of outcomes no more likely than k).
[[nodiscard]] double binomial_two_sided(long k, long n, double p);

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};
[[nodiscard]] KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

}  // namespace qabias::stats
