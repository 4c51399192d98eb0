#include "prmix/error.hpp"

namespace prmix {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_grid: return "invalid-grid";
        case ErrorCode::shape: return "shape";
        case ErrorCode::degenerate_density: return "degenerate-density";
        case ErrorCode::domain: return "domain";
        case ErrorCode::parameter: return "parameter";
        case ErrorCode::invalid_schedule: return "invalid-schedule";
        case ErrorCode::zero_predictive: return "zero-predictive";
        case ErrorCode::optimization_failure: return "optimization-failure";
        case ErrorCode::design: return "design";
        case ErrorCode::range: return "range";
        case ErrorCode::config: return "config";
        case ErrorCode::parse: return "parse";
    }
    return "unknown";
}

ZeroPredictiveError::ZeroPredictiveError(std::size_t index)
    : Error(ErrorCode::zero_predictive,
            "observation " + std::to_string(index) +
                " has zero density under the current mixture",
            index) {}

}  // namespace prmix
