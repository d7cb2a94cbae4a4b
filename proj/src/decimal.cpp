#include "trialqc/decimal.hpp"
#include "trialqc/error.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

namespace trialqc {

namespace {

constexpr __int128 pow10(int n) {
    __int128 p = 1;
    for (int i = 0; i < n; ++i)
        p *= 10;
    return p;
}

// num / den rounded half away from zero.
__int128 div_round(__int128 num, __int128 den) {
    const bool neg = (num < 0) != (den < 0);
    __int128 n = num < 0 ? -num : num;
    __int128 d = den < 0 ? -den : den;
    __int128 q = n / d;
    if ((n % d) * 2 >= d)
        ++q;
    return neg ? -q : q;
}

} // namespace

Decimal Decimal::parse(std::string_view text) {
    auto fail = [&] { return ValidationError("not a decimal number: '" + std::string(text) + "'"); };
    std::size_t i = 0;
    bool neg = false;
    if (i < text.size() && (text[i] == '-' || text[i] == '+'))
        neg = text[i++] == '-';
    __int128 whole = 0, frac = 0;
    int frac_digits = 0;
    bool digits = false;
    for (; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i, digits = true) {
        whole = whole * 10 + (text[i] - '0');
        if (whole > pow10(27))
            throw fail();
    }
    if (i < text.size() && text[i] == '.') {
        for (++i; i < text.size() && text[i] >= '0' && text[i] <= '9'; ++i, digits = true) {
            if (++frac_digits > kScale)
                throw ValidationError("more than nine fractional digits: '" + std::string(text) + "'");
            frac = frac * 10 + (text[i] - '0');
        }
    }
    int exponent = 0;
    if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
        try {
            std::size_t used = 0;
            exponent = std::stoi(std::string(text.substr(i + 1)), &used);
            i += 1 + used;
        } catch (const std::exception&) {
            throw fail();
        }
    }
    if (!digits || i != text.size())
        throw fail();
    __int128 r = whole * kOne + frac * pow10(kScale - frac_digits);
    if (exponent > 0) {
        if (exponent > 20)
            throw fail();
        r *= pow10(exponent);
    } else if (exponent < 0) {
        if (-exponent > 30)
            throw fail();
        r = div_round(r, pow10(-exponent));
    }
    return raw(neg ? -r : r);
}

Decimal Decimal::from_double(double v) {
    if (!std::isfinite(v) || std::fabs(v) > 1e18)
        throw ValidationError("value out of decimal range");
    // Shortest round-trip text avoids binary noise such as 0.0813 -> 0.08129999...
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v)
            break;
    }
    std::string s(buf);
    // Round away excess fractional digits rather than rejecting them.
    if (auto dot = s.find('.'); dot != std::string::npos && s.find_first_of("eE") == std::string::npos &&
                                s.size() - dot - 1 > static_cast<std::size_t>(kScale))
        return raw(static_cast<__int128>(std::llround(v * 1e9)));
    return parse(s);
}

double Decimal::to_double() const {
    return static_cast<double>(raw_ / kOne) + static_cast<double>(raw_ % kOne) / 1e9;
}

Decimal Decimal::round(int places) const {
    if (places < 0 || places > kScale)
        throw ValidationError("round: places must be within 0–9");
    const __int128 unit = pow10(kScale - places);
    return raw(div_round(raw_, unit) * unit);
}

std::string Decimal::to_string(int places) const {
    const Decimal r = round(places);
    __int128 v = r.raw_ < 0 ? -r.raw_ : r.raw_;
    __int128 whole = v / kOne, frac = v % kOne;
    std::string w;
    do {
        w.insert(w.begin(), static_cast<char>('0' + static_cast<int>(whole % 10)));
        whole /= 10;
    } while (whole > 0);
    std::string out = (r.raw_ < 0 ? "-" : "") + w;
    if (places > 0) {
        std::string f(kScale, '0');
        for (int i = kScale - 1; i >= 0; --i, frac /= 10)
            f[i] = static_cast<char>('0' + static_cast<int>(frac % 10));
        out += "." + f.substr(0, static_cast<std::size_t>(places));
    }
    return out;
}

Decimal operator*(Decimal a, Decimal b) { return Decimal::raw(div_round(a.raw_ * b.raw_, Decimal::kOne)); }

Decimal operator/(Decimal a, Decimal b) {
    if (b.raw_ == 0)
        throw ValidationError("decimal division by zero");
    return Decimal::raw(div_round(a.raw_ * Decimal::kOne, b.raw_));
}

} // namespace trialqc
