#pragma once

#include <cstddef>

namespace polaron {

/// Physical constants of the trapped bath + single impurity mixture, in
/// harmonic-transverse units (hbar = m_B = 1), plus the quench protocol.
struct MixtureParams {
    std::size_t n_bath = 100;
    std::size_t n_imp = 1;
    double mass_bath = 1.0;
    double mass_imp = 1.0;
    double omega = 0.1;
    double g_bb = 1.0;
    double g_bi_pre = 0.0;
    double g_bi_post = 0.0;
    double x0 = 0.0;
    double u0 = 0.0;

    double k0() const noexcept { return mass_imp * u0; }

    /// Throws Error(invalid_argument) when an invariant is broken.
    void validate() const;

    friend bool operator==(const MixtureParams&, const MixtureParams&) = default;
};

enum class Species { bath, impurity };

}  // namespace polaron
