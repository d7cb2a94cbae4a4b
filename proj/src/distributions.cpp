#include "trialqc/error.hpp"
#include "trialqc/stats.hpp"

#include <cmath>
#include <limits>

namespace trialqc::eval {

namespace {

constexpr double kEps = 1e-16;
constexpr double kTiny = 1e-300;

// Lentz's method for the incomplete beta continued fraction.
double beta_fraction(double x, double a, double b) {
    const double qab = a + b, qap = a + 1, qam = a - 1;
    double c = 1, d = 1 - qab * x / qap;
    if (std::fabs(d) < kTiny)
        d = kTiny;
    d = 1 / d;
    double h = d;
    for (int m = 1; m <= 10000; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1 + aa * d;
        if (std::fabs(d) < kTiny)
            d = kTiny;
        c = 1 + aa / c;
        if (std::fabs(c) < kTiny)
            c = kTiny;
        d = 1 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1 + aa * d;
        if (std::fabs(d) < kTiny)
            d = kTiny;
        c = 1 + aa / c;
        if (std::fabs(c) < kTiny)
            c = kTiny;
        d = 1 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1) < kEps)
            break;
    }
    return h;
}

} // namespace

double incomplete_beta(double x, double a, double b) {
    if (!(a > 0 && b > 0))
        throw ValidationError("incomplete_beta: shape parameters must be positive");
    if (x <= 0)
        return 0;
    if (x >= 1)
        return 1;
    const double ln_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1) / (a + b + 2))
        return front * beta_fraction(x, a, b) / a;
    return 1 - front * beta_fraction(1 - x, b, a) / b;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double student_t_cdf(double t, double df) {
    if (!(df > 0))
        throw ValidationError("student_t_cdf: df must be positive");
    if (std::isinf(t))
        return t > 0 ? 1 : 0;
    const double tail = 0.5 * incomplete_beta(df / (df + t * t), 0.5 * df, 0.5);
    return t > 0 ? 1 - tail : tail;
}

double student_t_quantile(double p, double df) {
    if (!(p > 0 && p < 1))
        throw ValidationError("student_t_quantile: p must be in (0, 1)");
    if (p == 0.5)
        return 0;
    if (p < 0.5)
        return -student_t_quantile(1 - p, df);
    double lo = 0, hi = 1;
    while (student_t_cdf(hi, df) < p)
        hi *= 2;
    for (int i = 0; i < 200 && hi - lo > 1e-14 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (student_t_cdf(mid, df) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double noncentral_t_cdf(double t, double df, double delta) {
    if (!(df > 0))
        throw ValidationError("noncentral_t_cdf: df must be positive");
    if (std::isinf(t))
        return t > 0 ? 1 : 0;
    const bool negate = t < 0;
    const double tt = negate ? -t : t;
    const double del = negate ? -delta : delta;

    constexpr double kErrMax = 1e-12;
    constexpr int kMaxTerms = 2000;
    double tnc = 0;
    const double x = tt * tt / (tt * tt + df);
    if (x > 0) {
        const double lambda = del * del;
        double p = 0.5 * std::exp(-0.5 * lambda);
        double q = std::sqrt(2 / M_PI) * p * del;
        double s = 0.5 - p;
        double a = 0.5;
        const double b = 0.5 * df;
        const double rxb = std::pow(1 - x, b);
        const double albeta = 0.5 * std::log(M_PI) + std::lgamma(b) - std::lgamma(a + b);
        double xodd = incomplete_beta(x, a, b);
        double godd = 2 * rxb * std::exp(a * std::log(x) - albeta);
        double xeven = 1 - rxb;
        double geven = b * x * rxb;
        tnc = p * xodd + q * xeven;
        for (int en = 1; en <= kMaxTerms; ++en) {
            a += 1;
            xodd -= godd;
            xeven -= geven;
            godd *= x * (a + b - 1) / a;
            geven *= x * (a + b - 0.5) / (a + 0.5);
            p *= lambda / (2 * en);
            q *= lambda / (2 * en + 1);
            s -= p;
            tnc += p * xodd + q * xeven;
            if (2 * s * (xodd - godd) <= kErrMax)
                break;
        }
    }
    tnc += normal_cdf(-del);
    tnc = std::fmin(1.0, std::fmax(0.0, tnc));
    return negate ? 1 - tnc : tnc;
}

} // namespace trialqc::eval
