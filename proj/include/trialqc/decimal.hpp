#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace trialqc {

/// Signed fixed-point number with nine fractional digits. Addition and subtraction
/// are exact; multiplication and division round half away from zero at 1e-9.
class Decimal {
public:
    static constexpr int kScale = 9;

    constexpr Decimal() = default;
    constexpr Decimal(long long units) : raw_(static_cast<__int128>(units) * kOne) {}

    /// Parses "-123.4567" style text; throws ValidationError on bad input or more
    /// than nine fractional digits.
    static Decimal parse(std::string_view text);
    /// Nearest Decimal to `v` (for values that come from binary sources).
    static Decimal from_double(double v);

    double to_double() const;
    /// Fixed notation rounded half away from zero to `places` (0-9) digits.
    std::string to_string(int places = kScale) const;
    Decimal round(int places) const;

    friend Decimal operator+(Decimal a, Decimal b) { return raw(a.raw_ + b.raw_); }
    friend Decimal operator-(Decimal a, Decimal b) { return raw(a.raw_ - b.raw_); }
    friend Decimal operator-(Decimal a) { return raw(-a.raw_); }
    friend Decimal operator*(Decimal a, Decimal b);
    /// Throws ValidationError on division by zero.
    friend Decimal operator/(Decimal a, Decimal b);
    Decimal& operator+=(Decimal b) { return *this = *this + b; }
    Decimal& operator-=(Decimal b) { return *this = *this - b; }

    friend auto operator<=>(const Decimal&, const Decimal&) = default;

private:
    static constexpr __int128 kOne = 1'000'000'000;
    static constexpr Decimal raw(__int128 r) {
        Decimal d;
        d.raw_ = r;
        return d;
    }
    __int128 raw_ = 0;
};

} // namespace trialqc
