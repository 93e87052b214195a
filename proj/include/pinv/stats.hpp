#pragma once

#include <span>
#include <vector>

namespace pinv {

double normal_cdf(double x);
/// Inverse of the standard normal CDF (Acklam's rational approximation
/// refined by one Newton step).
double normal_quantile(double p);

double mean(std::span<const double> x);
double variance(std::span<const double> x);  // unbiased
double median(std::vector<double> x);

/// Smallest order statistic x_(k) with k/n >= p; p = 0 returns the minimum.
double upper_quantile(std::vector<double> x, double p);

/// sup_x |F_n(x) - Phi(x)| for the empirical CDF of `x`.
double ks_distance_normal(std::vector<double> x);
/// Two-sample sup distance between empirical CDFs.
double ks_distance(std::vector<double> x, std::vector<double> y);
/// sup distance to the uniform CDF on [lo, hi].
double ks_distance_uniform(std::vector<double> x, double lo, double hi);

/// Integrated autocorrelation time with Sokal's adaptive window (c = 5).
double integrated_autocorrelation_time(std::span<const double> x);
double effective_sample_size(std::span<const double> x);

/// Ordinary least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace pinv
