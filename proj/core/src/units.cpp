#include "mlci/units.hpp"

#include <cmath>
#include <sstream>
#include <utility>

namespace mlci {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
    case ErrorKind::dimension_mismatch: return "DimensionMismatch";
    case ErrorKind::division_by_zero: return "DivisionByZero";
    case ErrorKind::invalid_metadata: return "InvalidMetadata";
    case ErrorKind::invalid_input: return "InvalidInput";
    case ErrorKind::index_error: return "IndexError";
    case ErrorKind::invalid_graph: return "InvalidGraph";
    case ErrorKind::inconsistent_input: return "InconsistentInput";
    case ErrorKind::insufficient_data: return "InsufficientData";
    case ErrorKind::degenerate_input: return "DegenerateInput";
    case ErrorKind::scenario_overflow: return "ScenarioOverflow";
    case ErrorKind::empty_plot: return "EmptyPlot";
    case ErrorKind::batch_failed: return "BatchFailed";
    }
    return "Error";
}

std::string to_string(const Dimension& d) {
    std::ostringstream os;
    os << "[L^" << d.length << " T^" << d.time << " I^" << d.intensity << "]";
    return os.str();
}

std::string_view unit_token(const Dimension& d) {
    if (d == dim::none) return unit::one.token;
    if (d == dim::length) return unit::um.token;
    if (d == dim::area) return unit::um2.token;
    if (d == dim::time) return unit::h.token;
    if (d == dim::rate) return unit::per_h.token;
    if (d == dim::area_rate) return unit::um2_per_h.token;
    if (d == dim::intensity) return unit::au.token;
    throw InvalidInput("no unit token for dimension " + to_string(d));
}

std::string column_suffix(std::string_view token) {
    if (token == "1/h") return "per_h";
    std::string out;
    for (std::size_t i = 0; i < token.size(); ++i) {
        if (token[i] == '/') {
            out += "_per_";
        } else {
            out += token[i];
        }
    }
    return out;
}

Dimension dimension_from_suffix(std::string_view suffix) {
    for (const Dimension d : {dim::none, dim::length, dim::area, dim::time, dim::rate,
                              dim::area_rate, dim::intensity}) {
        if (column_suffix(unit_token(d)) == suffix) return d;
    }
    throw InvalidInput("unknown unit suffix '" + std::string(suffix) + "'");
}

namespace {

void require_same(const Quantity& a, const Quantity& b, const char* op) {
    if (a.dimension() != b.dimension()) {
        throw DimensionMismatch(std::string(op) + ": " + to_string(a.dimension()) + " vs " +
                                to_string(b.dimension()));
    }
}

} // namespace

double Quantity::in(const Unit& u) const {
    if (u.dimension != dim_) {
        throw DimensionMismatch("cannot express " + to_string(dim_) + " in '" +
                                std::string(u.token) + "'");
    }
    return value_ / u.to_canonical;
}

Quantity q_add(const Quantity& a, const Quantity& b) {
    require_same(a, b, "add");
    return {a.value() + b.value(), a.dimension()};
}

Quantity q_sub(const Quantity& a, const Quantity& b) {
    require_same(a, b, "subtract");
    return {a.value() - b.value(), a.dimension()};
}

Quantity q_mul(const Quantity& a, const Quantity& b) {
    return {a.value() * b.value(), a.dimension() + b.dimension()};
}

Quantity q_div(const Quantity& a, const Quantity& b) {
    if (b.value() == 0.0) throw DivisionByZero("quantity division by zero");
    return {a.value() / b.value(), a.dimension() - b.dimension()};
}

std::partial_ordering q_compare(const Quantity& a, const Quantity& b) {
    require_same(a, b, "compare");
    return a.value() <=> b.value();
}

Quantity px_to_physical(double pixels, int power, const Quantity& pixel_size) {
    if (pixel_size.dimension() != dim::length) {
        throw DimensionMismatch("pixel size must be a length, got " +
                                to_string(pixel_size.dimension()));
    }
    if (!std::isfinite(pixel_size.value()) || pixel_size.value() <= 0.0) {
        throw InvalidMetadata("pixel_size_um must be positive");
    }
    double scale = 1.0;
    for (int i = 0; i < std::abs(power); ++i) scale *= pixel_size.value();
    if (power < 0) scale = 1.0 / scale;
    return {pixels * scale, dim::length.pow(power)};
}

QuantitySeries::QuantitySeries(std::string name, std::vector<Quantity> times,
                               std::vector<Quantity> values)
    : QuantitySeries(std::move(name), std::move(times), values,
                     values.empty() ? dim::none : values.front().dimension()) {}

QuantitySeries::QuantitySeries(std::string name, std::vector<Quantity> times,
                               std::vector<Quantity> values, Dimension value_dimension)
    : name_(std::move(name)), times_(std::move(times)), values_(std::move(values)),
      value_dim_(value_dimension) {
    if (times_.size() != values_.size()) {
        throw InvalidInput("series '" + name_ + "': times and values differ in length");
    }
    for (std::size_t i = 0; i < times_.size(); ++i) {
        if (times_[i].dimension() != dim::time) {
            throw DimensionMismatch("series '" + name_ + "': time axis must be a time");
        }
        if (values_[i].dimension() != value_dim_) {
            throw DimensionMismatch("series '" + name_ + "': mixed value dimensions");
        }
        if (i > 0 && !(times_[i].value() > times_[i - 1].value())) {
            throw InvalidInput("series '" + name_ + "': times must be strictly increasing");
        }
    }
}

} // namespace mlci
