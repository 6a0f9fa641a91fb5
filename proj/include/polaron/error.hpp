#pragma once

#include <stdexcept>
#include <string>

namespace polaron {

enum class Errc {
    invalid_extent,
    invalid_count,
    invalid_argument,
    size_mismatch,
    no_convergence,
    step_instability,
    dimension_overflow,
    basis_truncation,
    sampling_stall,
    overdamped_parameters,
    quadrature_non_convergence,
    missing_reference,
    series_too_short,
    unpaired_shots,
    mismatched_time_grids,
    unknown_key,
    invalid_value,
    constraint_violation,
    io_failure,
};

const char* to_string(Errc code) noexcept;

/// Exception carrying a machine-readable error kind.
class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message);

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace polaron
