#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace prmix {

enum class ErrorCode {
    invalid_grid,
    shape,
    degenerate_density,
    domain,
    parameter,
    invalid_schedule,
    zero_predictive,
    optimization_failure,
    design,
    range,
    config,
    parse,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library.  `index()` names
/// the offending observation (0-based) when one is known.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message,
          std::optional<std::size_t> index = std::nullopt)
        : std::runtime_error(message), code_(code), index_(index) {}

    ErrorCode code() const noexcept { return code_; }
    std::optional<std::size_t> index() const noexcept { return index_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> index_;
};

/// The mixture assigned zero density to an observation.
class ZeroPredictiveError : public Error {
public:
    explicit ZeroPredictiveError(std::size_t index);
};

}  // namespace prmix
