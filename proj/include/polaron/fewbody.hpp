#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <unordered_map>
#include <vector>

#include "polaron/grid.hpp"
#include "polaron/mixture.hpp"

namespace polaron {

/// Occupation-number basis of n bosons in d modes, packed four bits per mode.
class FockSpace {
public:
    static constexpr std::size_t max_modes = 16;

    FockSpace(std::size_t n_particles, std::size_t n_modes);

    std::size_t n_particles() const noexcept { return n_particles_; }
    std::size_t n_modes() const noexcept { return n_modes_; }
    std::size_t dimension() const noexcept { return states_.size(); }

    std::uint64_t state(std::size_t index) const noexcept { return states_[index]; }
    unsigned occupation(std::size_t index, std::size_t mode) const noexcept {
        return occupation_of(states_[index], mode);
    }
    /// Index of a packed configuration; dimension() when absent.
    std::size_t index_of(std::uint64_t packed) const;

    static unsigned occupation_of(std::uint64_t packed, std::size_t mode) noexcept {
        return static_cast<unsigned>((packed >> (4 * mode)) & 0xFu);
    }

private:
    std::size_t n_particles_;
    std::size_t n_modes_;
    std::vector<std::uint64_t> states_;
    std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Fixed orthonormal single-particle functions for each species.
struct ModeBasis {
    Grid1D grid;
    std::vector<RealVector> bath_modes;
    std::vector<RealVector> imp_modes;
    /// One-body energies, diagonal in the mode basis. Empty for custom bases.
    RealVector bath_energies;
    RealVector imp_energies;

    std::size_t d_bath() const noexcept { return bath_modes.size(); }
    std::size_t d_imp() const noexcept { return imp_modes.size(); }
};

/// Lowest trap eigenfunctions of each species, energies (n + 1/2) omega.
ModeBasis harmonic_mode_basis(const MixtureParams& params, const Grid1D& grid,
                              std::size_t d_bath, std::size_t d_imp);

/// Arbitrary real orthonormal modes; throws when orthonormality fails by more than 1e-8.
ModeBasis custom_mode_basis(const Grid1D& grid, std::vector<RealVector> bath_modes,
                            std::vector<RealVector> imp_modes);

/// Harmonic-oscillator eigenfunction n of mass*omega, evaluated at x.
double oscillator_eigenfunction(std::size_t n, double mass_omega, double x);

/// Configuration space (bath Fock states x impurity modes) with cached mode
/// integrals and one-body operators, plus Fock spaces for every smaller bath
/// number used by sequential annihilation.
class CISpace {
public:
    static constexpr std::size_t max_dimension = 1'000'000;

    CISpace(const MixtureParams& params, ModeBasis basis);

    const MixtureParams& params() const noexcept { return params_; }
    const ModeBasis& basis() const noexcept { return basis_; }
    const Grid1D& grid() const noexcept { return basis_.grid; }
    std::size_t d_bath() const noexcept { return basis_.d_bath(); }
    std::size_t d_imp() const noexcept { return basis_.d_imp(); }

    /// Fock space with n bath bosons, 0 <= n <= n_bath.
    const FockSpace& bath_space(std::size_t n) const { return fock_.at(n); }
    const FockSpace& bath_space() const { return fock_.back(); }
    std::size_t dimension() const noexcept { return bath_space().dimension() * d_imp(); }

    const Eigen::MatrixXcd& position_matrix(Species s) const noexcept {
        return s == Species::bath ? x_bath_ : x_imp_;
    }
    const Eigen::MatrixXcd& momentum_matrix(Species s) const noexcept {
        return s == Species::bath ? p_bath_ : p_imp_;
    }

private:
    MixtureParams params_;
    ModeBasis basis_;
    std::vector<FockSpace> fock_;
    Eigen::MatrixXcd x_bath_, x_imp_, p_bath_, p_imp_;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

struct CIHamiltonian {
    std::shared_ptr<const CISpace> space;
    SparseMatrix matrix;
    double g_bi = 0.0;
};

/// Many-body Hamiltonian projected on the mode basis at interspecies coupling g_bi.
CIHamiltonian build_hamiltonian(std::shared_ptr<const CISpace> space, double g_bi);

/// Bath-only Hamiltonian on the N_B-boson Fock space.
SparseMatrix build_bath_hamiltonian(const CISpace& space);

/// Amplitudes C(b, k) over bath configuration b and impurity mode k,
/// flattened as b * d_imp + k.
struct CorrelatedState {
    std::shared_ptr<const CISpace> space;
    Eigen::VectorXcd amplitudes;
    double time = 0.0;

    Eigen::Map<const Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    as_matrix() const {
        return {amplitudes.data(), static_cast<Eigen::Index>(space->bath_space().dimension()),
                static_cast<Eigen::Index>(space->d_imp())};
    }
    double norm_squared() const { return amplitudes.squaredNorm(); }
};

struct EigenResult {
    double eigenvalue = 0.0;
    Eigen::VectorXd eigenvector;
    double residual = 0.0;
    std::size_t iterations = 0;
};

/// Lowest eigenpair of a real symmetric sparse matrix by restarted Lanczos
/// (dense diagonalization for small dimensions).
EigenResult lowest_eigenpair(const SparseMatrix& matrix, double tolerance = 1e-8,
                             std::size_t max_restarts = 500);

CorrelatedState ground_state(const CIHamiltonian& hamiltonian, double tolerance = 1e-8);

/// Bath ground state times the coherent impurity projected on the impurity
/// modes (captured norm must exceed min_captured_norm; then renormalized).
CorrelatedState quench_initial_state(std::shared_ptr<const CISpace> space,
                                     double min_captured_norm = 0.999);

/// One Krylov (short-iterative Lanczos) step psi <- exp(-i H dt) psi.
void krylov_step(const SparseMatrix& matrix, Eigen::VectorXcd& psi, double dt,
                 double tolerance = 1e-12, std::size_t max_krylov = 40);

struct CIEvolutionOptions {
    double dt = 0.05;
    double t_final = 20.0;
    std::size_t sample_every = 1;
};

std::vector<CorrelatedState> evolve(const CorrelatedState& initial,
                                    const CIHamiltonian& hamiltonian,
                                    const CIEvolutionOptions& options);

double energy_expectation(const CIHamiltonian& hamiltonian, const CorrelatedState& state);

/// One-body reduced density matrix <a_i^dagger a_j> in the species' mode basis.
Eigen::MatrixXcd one_body_matrix(const CorrelatedState& state, Species species);

struct SchmidtSpectrum {
    /// Non-increasing natural species populations.
    RealVector lambdas;
};

SchmidtSpectrum schmidt_spectrum(const CorrelatedState& state);

/// -sum lambda ln lambda with 0 ln 0 = 0.
double vn_entropy(const SchmidtSpectrum& spectrum);

}  // namespace polaron
