#include "polaron/error.hpp"

namespace polaron {

const char* to_string(Errc code) noexcept {
    switch (code) {
        case Errc::invalid_extent: return "invalid-extent";
        case Errc::invalid_count: return "invalid-count";
        case Errc::invalid_argument: return "invalid-argument";
        case Errc::size_mismatch: return "size-mismatch";
        case Errc::no_convergence: return "no-convergence";
        case Errc::step_instability: return "step-instability";
        case Errc::dimension_overflow: return "dimension-overflow";
        case Errc::basis_truncation: return "basis-truncation";
        case Errc::sampling_stall: return "sampling-stall";
        case Errc::overdamped_parameters: return "overdamped-parameters";
        case Errc::quadrature_non_convergence: return "quadrature-non-convergence";
        case Errc::missing_reference: return "missing-reference";
        case Errc::series_too_short: return "series-too-short";
        case Errc::unpaired_shots: return "unpaired-shots";
        case Errc::mismatched_time_grids: return "mismatched-time-grids";
        case Errc::unknown_key: return "unknown-key";
        case Errc::invalid_value: return "invalid-value";
        case Errc::constraint_violation: return "constraint-violation";
        case Errc::io_failure: return "io-failure";
    }
    return "unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace polaron
