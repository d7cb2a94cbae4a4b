#include "trialqc/error.hpp"
#include "trialqc/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace trialqc::eval {

Metrics confusion_metrics(const ConfusionMatrix& cm) {
    if (cm.tp < 0 || cm.fp < 0 || cm.fn < 0 || cm.tn < 0)
        throw ValidationError("confusion matrix cells must be non-negative");
    if (cm.total() == 0)
        throw ValidationError("confusion matrix is empty");
    auto ratio = [](std::int64_t num, std::int64_t den) -> std::optional<double> {
        if (den == 0)
            return std::nullopt;
        return static_cast<double>(num) / static_cast<double>(den);
    };
    Metrics m;
    m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total());
    m.error_rate = 1 - m.accuracy;
    m.precision = ratio(cm.tp, cm.tp + cm.fp);
    m.recall = ratio(cm.tp, cm.tp + cm.fn);
    m.false_positive_rate = ratio(cm.fp, cm.fp + cm.tn);
    if (m.precision && m.recall && *m.precision + *m.recall > 0)
        m.f1 = 2 * *m.precision * *m.recall / (*m.precision + *m.recall);
    return m;
}

double mean(std::span<const double> v) {
    if (v.empty())
        throw ValidationError("mean of an empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2)
        throw ValidationError("standard deviation needs at least two values");
    const double m = mean(v);
    double ss = 0;
    for (double x : v)
        ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double median(std::span<const double> v) {
    if (v.empty())
        throw ValidationError("median of an empty sample");
    std::vector<double> s(v.begin(), v.end());
    std::sort(s.begin(), s.end());
    const auto n = s.size();
    return n % 2 ? s[n / 2] : 0.5 * (s[n / 2 - 1] + s[n / 2]);
}

double paired_cohens_d(std::span<const double> differences) {
    const double sd = sample_sd(differences);
    if (sd == 0)
        throw ValidationError("effect size undefined: differences have zero standard deviation");
    return mean(differences) / sd;
}

double power_paired_t(int n, double d, double alpha) {
    if (n < 2)
        throw ValidationError("power_paired_t: n must be at least 2");
    if (!(alpha > 0 && alpha < 1))
        throw ValidationError("power_paired_t: alpha must be in (0, 1)");
    const double df = n - 1;
    const double crit = student_t_quantile(1 - alpha / 2, df);
    const double ncp = d * std::sqrt(static_cast<double>(n));
    return (1 - noncentral_t_cdf(crit, df, ncp)) + noncentral_t_cdf(-crit, df, ncp);
}

int required_n(double d, double alpha, double power, int max_n) {
    if (!(power > 0 && power < 1))
        throw ValidationError("required_n: power must be in (0, 1)");
    if (d == 0)
        throw ValidationError("required_n: effect size must be non-zero");
    if (power_paired_t(max_n, d, alpha) < power)
        throw ValidationError("required_n: target power not reached within the search limit");
    // Power is monotone in n: bisect on [2, max_n].
    int lo = 2, hi = max_n;
    while (lo < hi) {
        const int mid = lo + (hi - lo) / 2;
        if (power_paired_t(mid, d, alpha) >= power)
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

TTestResult paired_t_test(std::span<const double> before, std::span<const double> after) {
    if (before.size() != after.size())
        throw ValidationError("paired_t_test: samples differ in length");
    if (before.size() < 2)
        throw ValidationError("paired_t_test: need at least two pairs");
    std::vector<double> diff(before.size());
    for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = after[i] - before[i];
    const double sd = sample_sd(diff);
    if (sd == 0)
        throw ValidationError("paired_t_test: differences have zero variance");
    TTestResult r;
    r.mean_difference = mean(diff);
    r.df = static_cast<double>(diff.size() - 1);
    r.t = r.mean_difference / (sd / std::sqrt(static_cast<double>(diff.size())));
    r.p_two_sided = std::min(1.0, 2 * student_t_cdf(-std::fabs(r.t), r.df));
    return r;
}

double sus_score(std::span<const int> items) {
    if (items.size() != 10)
        throw ValidationError("SUS needs exactly ten items");
    int sum = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i] < 1 || items[i] > 5)
            throw ValidationError("SUS items must be rated 1–5");
        sum += i % 2 == 0 ? items[i] - 1 : 5 - items[i];
    }
    return sum * 2.5;
}

double inverse_tlx(std::span<const double> ratings) {
    if (ratings.size() != 6)
        throw ValidationError("NASA-TLX needs exactly six ratings");
    for (double r : ratings)
        if (!(r >= 0 && r <= 100))
            throw ValidationError("NASA-TLX ratings must be within 0–100");
    return 100 - mean(ratings);
}

} // namespace trialqc::eval
