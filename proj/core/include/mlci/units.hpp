#pragma once

#include <compare>
#include <string>
#include <string_view>
#include <vector>

#include "mlci/error.hpp"

namespace mlci {

/// Integer exponents over the three base dimensions (length, time,
/// intensity). Pixel counts are plain dimensionless reals until converted.
struct Dimension {
    int length = 0;
    int time = 0;
    int intensity = 0;

    constexpr bool dimensionless() const noexcept {
        return length == 0 && time == 0 && intensity == 0;
    }

    friend constexpr bool operator==(const Dimension&, const Dimension&) = default;

    friend constexpr Dimension operator+(Dimension a, Dimension b) noexcept {
        return {a.length + b.length, a.time + b.time, a.intensity + b.intensity};
    }
    friend constexpr Dimension operator-(Dimension a, Dimension b) noexcept {
        return {a.length - b.length, a.time - b.time, a.intensity - b.intensity};
    }
    constexpr Dimension pow(int p) const noexcept {
        return {length * p, time * p, intensity * p};
    }
};

namespace dim {
inline constexpr Dimension none{};
inline constexpr Dimension length{1, 0, 0};
inline constexpr Dimension area{2, 0, 0};
inline constexpr Dimension time{0, 1, 0};
inline constexpr Dimension rate{0, -1, 0};
inline constexpr Dimension area_rate{2, -1, 0};
inline constexpr Dimension intensity{0, 0, 1};
} // namespace dim

std::string to_string(const Dimension& d);

/// A display unit: a dimension plus the factor that converts a value in this
/// unit into canonical units (micrometer, hour, arbitrary intensity).
struct Unit {
    Dimension dimension;
    double to_canonical = 1.0;
    std::string_view token;
};

namespace unit {
inline constexpr Unit one{dim::none, 1.0, ""};
inline constexpr Unit um{dim::length, 1.0, "um"};
inline constexpr Unit nm{dim::length, 1e-3, "nm"};
inline constexpr Unit um2{dim::area, 1.0, "um2"};
inline constexpr Unit h{dim::time, 1.0, "h"};
inline constexpr Unit min{dim::time, 1.0 / 60.0, "min"};
inline constexpr Unit s{dim::time, 1.0 / 3600.0, "s"};
inline constexpr Unit per_h{dim::rate, 1.0, "1/h"};
inline constexpr Unit um2_per_h{dim::area_rate, 1.0, "um2/h"};
inline constexpr Unit au{dim::intensity, 1.0, "au"};
} // namespace unit

/// Output token for a canonical dimension ("um2", "h", "1/h", "um2/h", "au",
/// "um", "" for dimensionless). Throws InvalidInput for dimensions that have
/// no declared token.
std::string_view unit_token(const Dimension& d);

/// Column-name suffix for a token: "um2/h" -> "um2_per_h", "1/h" -> "per_h".
std::string column_suffix(std::string_view token);

/// Inverse of column_suffix, used when reading tables back.
Dimension dimension_from_suffix(std::string_view suffix);

/// A measured value. The stored value is always canonical; any other unit is
/// applied only when constructing or reading out.
class Quantity {
public:
    constexpr Quantity() = default;
    constexpr Quantity(double value, Dimension d) : value_(value), dim_(d) {}
    constexpr Quantity(double value, const Unit& u)
        : value_(value * u.to_canonical), dim_(u.dimension) {}

    constexpr double value() const noexcept { return value_; }
    constexpr const Dimension& dimension() const noexcept { return dim_; }

    /// Value expressed in `u`; DimensionMismatch if `u` measures something else.
    double in(const Unit& u) const;

    static constexpr Quantity zero(Dimension d) { return {0.0, d}; }

private:
    double value_ = 0.0;
    Dimension dim_{};
};

Quantity q_add(const Quantity& a, const Quantity& b);
Quantity q_sub(const Quantity& a, const Quantity& b);
Quantity q_mul(const Quantity& a, const Quantity& b);
Quantity q_div(const Quantity& a, const Quantity& b);

/// Three-way comparison; DimensionMismatch on unequal dimensions.
std::partial_ordering q_compare(const Quantity& a, const Quantity& b);

inline Quantity operator+(const Quantity& a, const Quantity& b) { return q_add(a, b); }
inline Quantity operator-(const Quantity& a, const Quantity& b) { return q_sub(a, b); }
inline Quantity operator*(const Quantity& a, const Quantity& b) { return q_mul(a, b); }
inline Quantity operator/(const Quantity& a, const Quantity& b) { return q_div(a, b); }
inline Quantity operator*(double k, const Quantity& q) { return {k * q.value(), q.dimension()}; }
inline Quantity operator*(const Quantity& q, double k) { return {k * q.value(), q.dimension()}; }

inline bool operator==(const Quantity& a, const Quantity& b) { return q_compare(a, b) == 0; }
inline bool operator<(const Quantity& a, const Quantity& b) { return q_compare(a, b) < 0; }
inline bool operator>(const Quantity& a, const Quantity& b) { return q_compare(a, b) > 0; }
inline bool operator<=(const Quantity& a, const Quantity& b) { return q_compare(a, b) <= 0; }
inline bool operator>=(const Quantity& a, const Quantity& b) { return q_compare(a, b) >= 0; }

/// `pixels` measured in px^power, converted with a length-per-pixel size.
/// InvalidMetadata for a non-positive or non-finite pixel size.
Quantity px_to_physical(double pixels, int power, const Quantity& pixel_size);

/// Value/time pairs with a uniform value dimension and strictly increasing
/// times.
class QuantitySeries {
public:
    QuantitySeries() = default;
    /// Value dimension taken from the first value (dimensionless when empty).
    QuantitySeries(std::string name, std::vector<Quantity> times, std::vector<Quantity> values);
    QuantitySeries(std::string name, std::vector<Quantity> times, std::vector<Quantity> values,
                   Dimension value_dimension);

    const std::string& name() const noexcept { return name_; }
    const std::vector<Quantity>& times() const noexcept { return times_; }
    const std::vector<Quantity>& values() const noexcept { return values_; }
    std::size_t size() const noexcept { return times_.size(); }
    bool empty() const noexcept { return times_.empty(); }
    Dimension value_dimension() const noexcept { return value_dim_; }

private:
    std::string name_;
    std::vector<Quantity> times_;
    std::vector<Quantity> values_;
    Dimension value_dim_{};
};

} // namespace mlci
