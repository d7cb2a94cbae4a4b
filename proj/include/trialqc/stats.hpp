#pragma once

#include <cstdint>
#include <optional>
#include <span>

namespace trialqc::eval {

// Distribution functions; absolute error below 1e-10 in the ranges used here.

/// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double x, double a, double b);
double normal_cdf(double z);
double student_t_cdf(double t, double df);
/// Inverse of student_t_cdf for p in (0, 1).
double student_t_quantile(double p, double df);
/// Noncentral t CDF P(T <= t) with noncentrality `delta` (AS 243 series).
double noncentral_t_cdf(double t, double df, double delta);

struct ConfusionMatrix {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;

    std::int64_t total() const noexcept { return tp + fp + fn + tn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Ratios in [0, 1]. Undefined ratios (zero denominator) are empty, not zero.
struct Metrics {
    double accuracy = 0;
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
    double error_rate = 0;
    std::optional<double> false_positive_rate; // fp / (fp + tn)
};

/// Throws ValidationError when the matrix is empty or has a negative cell.
Metrics confusion_metrics(const ConfusionMatrix& cm);

double mean(std::span<const double> v);
/// n - 1 denominator; throws ValidationError for fewer than two values.
double sample_sd(std::span<const double> v);
double median(std::span<const double> v);

/// mean / sample sd of paired differences. Throws ValidationError when sd is 0.
double paired_cohens_d(std::span<const double> differences);

/// Two-sided paired t-test power with noncentrality d * sqrt(n), df n - 1.
double power_paired_t(int n, double d, double alpha);

/// Smallest n >= 2 with power_paired_t(n, d, alpha) >= power.
int required_n(double d, double alpha, double power, int max_n = 1'000'000);

struct TTestResult {
    double t = 0;
    double df = 0;
    double p_two_sided = 1;
    double mean_difference = 0; // after - before
};

/// Paired t-test on after - before. Throws ValidationError on unequal lengths,
/// fewer than two pairs, or zero variance of the differences.
TTestResult paired_t_test(std::span<const double> before, std::span<const double> after);

/// Standard SUS: ten items rated 1-5.
double sus_score(std::span<const int> items);
/// 100 - mean of six ratings in 0-100.
double inverse_tlx(std::span<const double> ratings);

} // namespace trialqc::eval
