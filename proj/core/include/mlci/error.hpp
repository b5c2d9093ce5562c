#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mlci {

enum class ErrorKind {
    dimension_mismatch,
    division_by_zero,
    invalid_metadata,
    invalid_input,
    index_error,
    invalid_graph,
    inconsistent_input,
    insufficient_data,
    degenerate_input,
    scenario_overflow,
    empty_plot,
    batch_failed,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Base of every error raised by the library. `what()` carries the detail
/// (offending key, index, stage); `kind()` is stable and machine-checkable.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& detail)
        : std::runtime_error(detail), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

template <ErrorKind K>
class KindedError : public Error {
public:
    explicit KindedError(const std::string& detail) : Error(K, detail) {}
};

using DimensionMismatch = KindedError<ErrorKind::dimension_mismatch>;
using DivisionByZero = KindedError<ErrorKind::division_by_zero>;
using InvalidMetadata = KindedError<ErrorKind::invalid_metadata>;
using InvalidInput = KindedError<ErrorKind::invalid_input>;
using IndexError = KindedError<ErrorKind::index_error>;
using InvalidGraph = KindedError<ErrorKind::invalid_graph>;
using InconsistentInput = KindedError<ErrorKind::inconsistent_input>;
using InsufficientData = KindedError<ErrorKind::insufficient_data>;
using DegenerateInput = KindedError<ErrorKind::degenerate_input>;
using ScenarioOverflow = KindedError<ErrorKind::scenario_overflow>;
using EmptyPlot = KindedError<ErrorKind::empty_plot>;
using BatchFailed = KindedError<ErrorKind::batch_failed>;

} // namespace mlci
