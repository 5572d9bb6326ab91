// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

namespace franson::stats {

inline constexpr double pi = 3.14159265358979323846;

/// FWHM of a Gaussian divided by its standard deviation.
inline constexpr double fwhm_over_sigma = 2.35482004503094938202;

/// Probability mass of a zero-mean Gaussian with std dev `sigma`
/// inside [-half_width, +half_width].
inline double gaussian_window_fraction(double half_width, double sigma) {
    if (sigma <= 0.0) return 1.0;
    return std::erf(half_width / (sigma * std::sqrt(2.0)));
}

namespace detail {

// Regularized lower incomplete gamma P(a,x) by series expansion (x < a+1).
inline double gamma_p_series(double a, double x) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < 500; ++n) {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if (std::fabs(del) < std::fabs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Regularized upper incomplete gamma Q(a,x) by continued fraction (x >= a+1).
inline double gamma_q_cf(double a, double x) {
    const double tiny = 1e-300;
    double b = x + 1.0 - a;
    double c = 1.0 / tiny;
    double d = 1.0 / b;
    double h = d;
    for (int i = 1; i < 500; ++i) {
        double an = -i * (i - a);
        b += 2.0;
        d = an * d + b;
        if (std::fabs(d) < tiny) d = tiny;
        c = b + an / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 1e-15) break;
    }
    return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace detail

/// Regularized lower incomplete gamma P(a, x).
inline double gamma_p(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_p: a > 0 and x >= 0 required");
    if (x == 0.0) return 0.0;
    if (x < a + 1.0) return detail::gamma_p_series(a, x);
    return 1.0 - detail::gamma_q_cf(a, x);
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
inline double gamma_q(double a, double x) {
    if (a <= 0.0 || x < 0.0) throw std::domain_error("gamma_q: a > 0 and x >= 0 required");
    if (x == 0.0) return 1.0;
    if (x < a + 1.0) return 1.0 - detail::gamma_p_series(a, x);
    return detail::gamma_q_cf(a, x);
}

/// Survival function of the chi-square distribution with `dof` degrees of freedom.
inline double chi2_sf(double x, double dof) {
    if (x <= 0.0) return 1.0;
    return gamma_q(dof / 2.0, x / 2.0);
}

/// Asymptotic p-value of the one-sample Kolmogorov-Smirnov statistic `d`
/// computed from `n` samples.
inline double ks_p_value(double d, std::size_t n) {
    if (n == 0) return 1.0;
    double sn = std::sqrt(static_cast<double>(n));
    double lambda = (sn + 0.12 + 0.11 / sn) * d;
    double sum = 0.0;
    for (int k = 1; k <= 100; ++k) {
        double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
        sum += term;
        if (std::fabs(term) < 1e-12) break;
    }
    return std::min(1.0, std::max(0.0, sum));
}

/// KS test of sorted samples in [0, span] against the uniform distribution.
inline double ks_uniform_p(const std::vector<double>& sorted, double span) {
    std::size_t n = sorted.size();
    if (n == 0) return 1.0;
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double f = sorted[i] / span;
        double lo = static_cast<double>(i) / n;
        double hi = static_cast<double>(i + 1) / n;
        d = std::max(d, std::max(std::fabs(f - lo), std::fabs(hi - f)));
    }
    return ks_p_value(d, n);
}

/// Chi-square constancy test against the hypothesis that all counts share
/// their common mean (Poisson errors). Returns {chi2, dof, p}.
struct ConstancyTest {
    double chi2 = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
};

inline ConstancyTest chi2_constancy(const std::vector<double>& counts) {
    ConstancyTest r;
    if (counts.size() < 2) return r;
    double mean = 0.0;
    for (double c : counts) mean += c;
    mean /= static_cast<double>(counts.size());
    if (mean <= 0.0) return r;
    for (double c : counts) r.chi2 += (c - mean) * (c - mean) / mean;
    r.dof = static_cast<double>(counts.size() - 1);
    r.p_value = chi2_sf(r.chi2, r.dof);
    return r;
}

}  // namespace franson::stats
