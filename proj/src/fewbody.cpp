#include "polaron/fewbody.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>

#include "polaron/error.hpp"
#include "polaron/meanfield.hpp"

namespace polaron {

namespace {

constexpr std::uint64_t unit(std::size_t mode) { return std::uint64_t{1} << (4 * mode); }

bool annihilate(std::uint64_t& packed, std::size_t mode, double& coefficient) {
    const unsigned n = FockSpace::occupation_of(packed, mode);
    if (n == 0) return false;
    coefficient *= std::sqrt(static_cast<double>(n));
    packed -= unit(mode);
    return true;
}

void create(std::uint64_t& packed, std::size_t mode, double& coefficient) {
    const unsigned n = FockSpace::occupation_of(packed, mode) + 1;
    coefficient *= std::sqrt(static_cast<double>(n));
    packed += unit(mode);
}

void enumerate(std::size_t mode, std::size_t n_modes, std::size_t remaining,
               std::uint64_t packed, std::vector<std::uint64_t>& out) {
    if (mode + 1 == n_modes) {
        out.push_back(packed + remaining * unit(mode));
        return;
    }
    for (std::size_t k = remaining + 1; k-- > 0;) {
        enumerate(mode + 1, n_modes, remaining - k, packed + k * unit(mode), out);
    }
}

double overlap(const RealVector& a, const RealVector& b, double h) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
    return s * h;
}

void check_orthonormal(const std::vector<RealVector>& modes, const Grid1D& grid,
                       const char* species) {
    for (std::size_t i = 0; i < modes.size(); ++i) {
        if (modes[i].size() != grid.n_points()) {
            throw Error(Errc::size_mismatch, std::string(species) + " mode has wrong length");
        }
        for (std::size_t j = 0; j <= i; ++j) {
            const double expected = i == j ? 1.0 : 0.0;
            if (std::abs(overlap(modes[i], modes[j], grid.spacing()) - expected) > 1e-8) {
                throw Error(Errc::invalid_argument,
                            std::string(species) + " modes are not orthonormal on the grid");
            }
        }
    }
}

Eigen::MatrixXcd position_in_modes(const std::vector<RealVector>& modes, const Grid1D& grid) {
    const auto d = static_cast<Eigen::Index>(modes.size());
    Eigen::MatrixXcd x(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        for (Eigen::Index l = 0; l < d; ++l) {
            double s = 0.0;
            for (std::size_t j = 0; j < grid.n_points(); ++j) {
                s += modes[k][j] * grid.x(j) * modes[l][j];
            }
            x(k, l) = s * grid.spacing();
        }
    }
    return x;
}

Eigen::MatrixXcd momentum_in_modes(const std::vector<RealVector>& modes, const Grid1D& grid) {
    const auto d = static_cast<Eigen::Index>(modes.size());
    const SineTransform dst(grid);
    std::vector<ComplexVector> derivatives;
    for (const auto& m : modes) {
        const ComplexVector c(m.begin(), m.end());
        derivatives.push_back(dst.derivative(c));
    }
    Eigen::MatrixXcd p(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
        for (Eigen::Index l = 0; l < d; ++l) {
            Complex s{};
            for (std::size_t j = 0; j < grid.n_points(); ++j) s += modes[k][j] * derivatives[l][j];
            p(k, l) = Complex{0.0, -1.0} * s * grid.spacing();
        }
    }
    return p;
}

// Integrals of four real mode products on the grid, flattened (i, j, k, l).
std::vector<double> quartic_integrals(const std::vector<RealVector>& first,
                                      const std::vector<RealVector>& second, double h) {
    const std::size_t a = first.size();
    const std::size_t b = second.size();
    const std::size_t n = first.empty() ? 0 : first[0].size();
    std::vector<double> out(a * a * b * b, 0.0);
    RealVector pair_first(n);
    std::vector<RealVector> second_pairs(b * b, RealVector(n));
    for (std::size_t k = 0; k < b; ++k) {
        for (std::size_t l = 0; l < b; ++l) {
            for (std::size_t x = 0; x < n; ++x) second_pairs[k * b + l][x] = second[k][x] * second[l][x];
        }
    }
    for (std::size_t i = 0; i < a; ++i) {
        for (std::size_t j = 0; j < a; ++j) {
            for (std::size_t x = 0; x < n; ++x) pair_first[x] = first[i][x] * first[j][x];
            for (std::size_t kl = 0; kl < b * b; ++kl) {
                double s = 0.0;
                for (std::size_t x = 0; x < n; ++x) s += pair_first[x] * second_pairs[kl][x];
                out[(i * a + j) * b * b + kl] = s * h;
            }
        }
    }
    return out;
}

Eigen::VectorXcd apply_real(const SparseMatrix& matrix, const Eigen::VectorXcd& v) {
    const Eigen::VectorXd re = matrix * v.real();
    const Eigen::VectorXd im = matrix * v.imag();
    Eigen::VectorXcd out(v.size());
    out.real() = re;
    out.imag() = im;
    return out;
}

}  // namespace

FockSpace::FockSpace(std::size_t n_particles, std::size_t n_modes)
    : n_particles_(n_particles), n_modes_(n_modes) {
    if (n_modes == 0 || n_modes > max_modes) {
        throw Error(Errc::invalid_count, "Fock space supports 1.." + std::to_string(max_modes) +
                                             " modes");
    }
    if (n_particles > 15) throw Error(Errc::invalid_count, "at most 15 bosons per Fock space");
    enumerate(0, n_modes, n_particles, 0, states_);
    index_.reserve(states_.size());
    for (std::size_t i = 0; i < states_.size(); ++i) index_.emplace(states_[i], i);
}

std::size_t FockSpace::index_of(std::uint64_t packed) const {
    const auto it = index_.find(packed);
    return it == index_.end() ? states_.size() : it->second;
}

double oscillator_eigenfunction(std::size_t n, double mass_omega, double x) {
    const double xi = std::sqrt(mass_omega) * x;
    double prev = 0.0;
    double cur = std::pow(mass_omega / std::numbers::pi, 0.25) * std::exp(-0.5 * xi * xi);
    for (std::size_t k = 0; k < n; ++k) {
        const double kk = static_cast<double>(k);
        const double next =
            std::sqrt(2.0 / (kk + 1.0)) * xi * cur - std::sqrt(kk / (kk + 1.0)) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

ModeBasis harmonic_mode_basis(const MixtureParams& params, const Grid1D& grid,
                              std::size_t d_bath, std::size_t d_imp) {
    params.validate();
    if (d_bath == 0 || d_imp == 0) throw Error(Errc::invalid_count, "mode counts must be positive");
    auto modes = [&](std::size_t d, double mass) {
        std::vector<RealVector> out(d, RealVector(grid.n_points()));
        for (std::size_t n = 0; n < d; ++n) {
            for (std::size_t j = 0; j < grid.n_points(); ++j) {
                out[n][j] = oscillator_eigenfunction(n, mass * params.omega, grid.x(j));
            }
        }
        return out;
    };
    auto energies = [&](std::size_t d) {
        RealVector e(d);
        for (std::size_t n = 0; n < d; ++n) e[n] = (static_cast<double>(n) + 0.5) * params.omega;
        return e;
    };
    ModeBasis basis{grid, modes(d_bath, params.mass_bath), modes(d_imp, params.mass_imp),
                    energies(d_bath), energies(d_imp)};
    check_orthonormal(basis.bath_modes, grid, "bath");
    check_orthonormal(basis.imp_modes, grid, "impurity");
    return basis;
}

ModeBasis custom_mode_basis(const Grid1D& grid, std::vector<RealVector> bath_modes,
                            std::vector<RealVector> imp_modes) {
    if (bath_modes.empty() || imp_modes.empty()) {
        throw Error(Errc::invalid_count, "mode counts must be positive");
    }
    check_orthonormal(bath_modes, grid, "bath");
    check_orthonormal(imp_modes, grid, "impurity");
    return ModeBasis{grid, std::move(bath_modes), std::move(imp_modes), {}, {}};
}

CISpace::CISpace(const MixtureParams& params, ModeBasis basis)
    : params_(params), basis_(std::move(basis)) {
    params_.validate();
    if (params_.n_bath > 15) throw Error(Errc::invalid_count, "CI solver supports n_bath <= 15");
    // binom(n + d - 1, n) * d_imp, checked before enumerating anything
    double dim = static_cast<double>(d_imp());
    for (std::size_t k = 1; k <= params_.n_bath; ++k) {
        dim *= static_cast<double>(d_bath() - 1 + k) / static_cast<double>(k);
    }
    if (dim > static_cast<double>(max_dimension) + 0.5) {
        throw Error(Errc::dimension_overflow, "CI dimension " + std::to_string(std::llround(dim)) +
                                                  " exceeds " + std::to_string(max_dimension));
    }
    fock_.reserve(params_.n_bath + 1);
    for (std::size_t n = 0; n <= params_.n_bath; ++n) fock_.emplace_back(n, d_bath());
    x_bath_ = position_in_modes(basis_.bath_modes, grid());
    x_imp_ = position_in_modes(basis_.imp_modes, grid());
    p_bath_ = momentum_in_modes(basis_.bath_modes, grid());
    p_imp_ = momentum_in_modes(basis_.imp_modes, grid());
}

namespace {

// Bath one- and two-body terms on the N_B Fock space, as (row, col, value) per column.
std::vector<Eigen::Triplet<double>> bath_block(const CISpace& space) {
    const FockSpace& fock = space.bath_space();
    const std::size_t d = space.d_bath();
    const ModeBasis& basis = space.basis();
    if (basis.bath_energies.size() != d || basis.imp_energies.size() != space.d_imp()) {
        throw Error(Errc::invalid_argument, "Hamiltonian assembly needs a harmonic mode basis");
    }
    const std::vector<double> u =
        quartic_integrals(basis.bath_modes, basis.bath_modes, space.grid().spacing());
    const double half_g = 0.5 * space.params().g_bb;

    std::vector<Eigen::Triplet<double>> triplets;
    std::unordered_map<std::size_t, double> column;
    for (std::size_t b = 0; b < fock.dimension(); ++b) {
        column.clear();
        double diagonal = 0.0;
        for (std::size_t i = 0; i < d; ++i) diagonal += fock.occupation(b, i) * basis.bath_energies[i];
        column[b] += diagonal;
        if (half_g != 0.0) {
            for (std::size_t k = 0; k < d; ++k) {
                for (std::size_t l = 0; l < d; ++l) {
                    std::uint64_t s = fock.state(b);
                    double c = 1.0;
                    if (!annihilate(s, l, c) || !annihilate(s, k, c)) continue;
                    for (std::size_t i = 0; i < d; ++i) {
                        for (std::size_t j = 0; j < d; ++j) {
                            std::uint64_t t = s;
                            double cc = c;
                            create(t, j, cc);
                            create(t, i, cc);
                            const double w = u[((i * d + j) * d + k) * d + l];
                            column[fock.index_of(t)] += half_g * w * cc;
                        }
                    }
                }
            }
        }
        for (const auto& [row, value] : column) {
            if (value != 0.0) triplets.emplace_back(static_cast<int>(row), static_cast<int>(b), value);
        }
    }
    return triplets;
}

}  // namespace

SparseMatrix build_bath_hamiltonian(const CISpace& space) {
    const auto n = static_cast<Eigen::Index>(space.bath_space().dimension());
    SparseMatrix h(n, n);
    const auto triplets = bath_block(space);
    h.setFromTriplets(triplets.begin(), triplets.end());
    return h;
}

CIHamiltonian build_hamiltonian(std::shared_ptr<const CISpace> space, double g_bi) {
    const CISpace& sp = *space;
    const FockSpace& fock = sp.bath_space();
    const std::size_t db = sp.d_bath();
    const std::size_t di = sp.d_imp();
    const ModeBasis& basis = sp.basis();

    std::vector<Eigen::Triplet<double>> triplets;
    for (const auto& t : bath_block(sp)) {
        for (std::size_t k = 0; k < di; ++k) {
            triplets.emplace_back(static_cast<int>(t.row() * di + k), static_cast<int>(t.col() * di + k),
                                  t.value());
        }
    }
    for (std::size_t b = 0; b < fock.dimension(); ++b) {
        for (std::size_t k = 0; k < di; ++k) {
            triplets.emplace_back(static_cast<int>(b * di + k), static_cast<int>(b * di + k),
                                  basis.imp_energies[k]);
        }
    }

    if (g_bi != 0.0) {
        const std::vector<double> w =
            quartic_integrals(basis.bath_modes, basis.imp_modes, sp.grid().spacing());
        std::unordered_map<std::size_t, double> column;
        for (std::size_t b = 0; b < fock.dimension(); ++b) {
            for (std::size_t l = 0; l < di; ++l) {
                column.clear();
                for (std::size_t i = 0; i < db; ++i) {
                    for (std::size_t j = 0; j < db; ++j) {
                        std::uint64_t s = fock.state(b);
                        double c = 1.0;
                        if (!annihilate(s, j, c)) continue;
                        create(s, i, c);
                        const std::size_t target = fock.index_of(s);
                        for (std::size_t k = 0; k < di; ++k) {
                            column[target * di + k] += g_bi * c * w[(i * db + j) * di * di + k * di + l];
                        }
                    }
                }
                for (const auto& [row, value] : column) {
                    if (value != 0.0) {
                        triplets.emplace_back(static_cast<int>(row), static_cast<int>(b * di + l), value);
                    }
                }
            }
        }
    }

    const auto n = static_cast<Eigen::Index>(sp.dimension());
    SparseMatrix h(n, n);
    h.setFromTriplets(triplets.begin(), triplets.end());
    h.makeCompressed();
    return CIHamiltonian{std::move(space), std::move(h), g_bi};
}

EigenResult lowest_eigenpair(const SparseMatrix& matrix, double tolerance,
                             std::size_t max_restarts) {
    const Eigen::Index n = matrix.rows();
    if (n == 0 || matrix.cols() != n) throw Error(Errc::invalid_argument, "matrix must be square");

    auto finish = [&](double value, Eigen::VectorXd v, std::size_t iterations) {
        // Deterministic sign: largest-magnitude component positive.
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0.0) v = -v;
        const double residual = (matrix * v - value * v).norm();
        return EigenResult{value, std::move(v), residual, iterations};
    };

    if (n <= 400) {
        const Eigen::MatrixXd dense = Eigen::MatrixXd(matrix);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
        if (solver.info() != Eigen::Success) {
            throw Error(Errc::no_convergence, "dense eigensolver failed");
        }
        return finish(solver.eigenvalues()(0), solver.eigenvectors().col(0), 1);
    }

    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = 1.0 + 0.1 * std::sin(static_cast<double>(i + 1));
    v.normalize();

    const Eigen::Index m_max = std::min<Eigen::Index>(n, 60);
    Eigen::MatrixXd q(n, m_max);
    for (std::size_t restart = 0; restart < max_restarts; ++restart) {
        Eigen::VectorXd alpha(m_max), beta(m_max);
        Eigen::Index m = m_max;
        q.col(0) = v;
        for (Eigen::Index j = 0; j < m_max; ++j) {
            Eigen::VectorXd w = matrix * q.col(j);
            alpha(j) = q.col(j).dot(w);
            for (int pass = 0; pass < 2; ++pass) {
                w -= q.leftCols(j + 1) * (q.leftCols(j + 1).transpose() * w);
            }
            beta(j) = w.norm();
            if (j + 1 == m_max) break;
            if (beta(j) < 1e-13) {
                m = j + 1;
                break;
            }
            q.col(j + 1) = w / beta(j);
        }
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index j = 0; j < m; ++j) {
            t(j, j) = alpha(j);
            if (j + 1 < m) t(j, j + 1) = t(j + 1, j) = beta(j);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
        v = (q.leftCols(m) * small.eigenvectors().col(0)).normalized();
        const double theta = small.eigenvalues()(0);
        const double residual = (matrix * v - theta * v).norm();
        if (residual < tolerance) return finish(theta, v, restart + 1);
    }
    throw Error(Errc::no_convergence, "Lanczos did not reach the requested residual");
}

CorrelatedState ground_state(const CIHamiltonian& hamiltonian, double tolerance) {
    const EigenResult r = lowest_eigenpair(hamiltonian.matrix, tolerance);
    return CorrelatedState{hamiltonian.space, r.eigenvector.cast<Complex>(), 0.0};
}

CorrelatedState quench_initial_state(std::shared_ptr<const CISpace> space,
                                     double min_captured_norm) {
    const CISpace& sp = *space;
    const EigenResult bath = lowest_eigenpair(build_bath_hamiltonian(sp));
    const ComplexField coherent = coherent_impurity(sp.params(), sp.grid());
    const double h = sp.grid().spacing();

    Eigen::VectorXcd imp(sp.d_imp());
    for (std::size_t k = 0; k < sp.d_imp(); ++k) {
        Complex s{};
        for (std::size_t j = 0; j < sp.grid().n_points(); ++j) {
            s += sp.basis().imp_modes[k][j] * coherent.values[j];
        }
        imp(static_cast<Eigen::Index>(k)) = s * h;
    }
    const double captured = imp.squaredNorm();
    if (captured < min_captured_norm) {
        throw Error(Errc::basis_truncation,
                    "impurity modes capture only " + std::to_string(captured) +
                        " of the coherent state; increase d_imp");
    }
    imp /= std::sqrt(captured);

    const auto db = static_cast<Eigen::Index>(sp.bath_space().dimension());
    const auto di = static_cast<Eigen::Index>(sp.d_imp());
    Eigen::VectorXcd amplitudes(db * di);
    for (Eigen::Index b = 0; b < db; ++b) {
        for (Eigen::Index k = 0; k < di; ++k) amplitudes(b * di + k) = bath.eigenvector(b) * imp(k);
    }
    amplitudes.normalize();
    return CorrelatedState{std::move(space), std::move(amplitudes), 0.0};
}

void krylov_step(const SparseMatrix& matrix, Eigen::VectorXcd& psi, double dt, double tolerance,
                 std::size_t max_krylov) {
    const double norm = psi.norm();
    if (norm == 0.0) return;
    const auto n = psi.size();
    const auto m_max = static_cast<Eigen::Index>(std::min<std::size_t>(max_krylov, n));

    std::vector<Eigen::VectorXcd> q;
    q.reserve(m_max + 1);
    q.push_back(psi / norm);
    std::vector<double> alpha, beta;

    for (Eigen::Index j = 0; j < m_max; ++j) {
        Eigen::VectorXcd w = apply_real(matrix, q[j]);
        alpha.push_back(q[j].dot(w).real());
        for (int pass = 0; pass < 2; ++pass) {
            for (const auto& qi : q) w -= qi * qi.dot(w);
        }
        const double b = w.norm();
        beta.push_back(b);

        const Eigen::Index m = j + 1;
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
        for (Eigen::Index i = 0; i < m; ++i) {
            t(i, i) = alpha[i];
            if (i + 1 < m) t(i, i + 1) = t(i + 1, i) = beta[i];
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(t);
        const Eigen::MatrixXd& vecs = small.eigenvectors();
        Eigen::VectorXcd phases(m);
        for (Eigen::Index i = 0; i < m; ++i) {
            phases(i) = std::polar(1.0, -dt * small.eigenvalues()(i)) * vecs(0, i);
        }
        const Eigen::VectorXcd coeffs = vecs.cast<Complex>() * phases;
        const double error = b * std::abs(coeffs(m - 1));
        if (error < tolerance || b < 1e-14 || m == n) {
            Eigen::VectorXcd out = Eigen::VectorXcd::Zero(n);
            for (Eigen::Index i = 0; i < m; ++i) out += coeffs(i) * q[i];
            psi = norm * out;
            return;
        }
        q.push_back(w / b);
    }
    krylov_step(matrix, psi, 0.5 * dt, tolerance, max_krylov);
    krylov_step(matrix, psi, 0.5 * dt, tolerance, max_krylov);
}

std::vector<CorrelatedState> evolve(const CorrelatedState& initial,
                                    const CIHamiltonian& hamiltonian,
                                    const CIEvolutionOptions& options) {
    if (!(options.dt > 0.0) || !(options.t_final >= 0.0) || options.sample_every == 0) {
        throw Error(Errc::invalid_argument, "evolution requires dt > 0, t_final >= 0, stride > 0");
    }
    if (std::abs(initial.norm_squared() - 1.0) > 1e-8) {
        throw Error(Errc::invalid_argument, "initial CI state must be normalized");
    }
    if (initial.amplitudes.size() != hamiltonian.matrix.rows()) {
        throw Error(Errc::size_mismatch, "state and Hamiltonian dimensions differ");
    }
    const auto steps = static_cast<std::size_t>(std::llround(options.t_final / options.dt));
    std::vector<CorrelatedState> out{initial};
    CorrelatedState state = initial;
    for (std::size_t s = 1; s <= steps; ++s) {
        krylov_step(hamiltonian.matrix, state.amplitudes, options.dt);
        state.time = initial.time + static_cast<double>(s) * options.dt;
        if (s % options.sample_every == 0 || s == steps) out.push_back(state);
    }
    return out;
}

double energy_expectation(const CIHamiltonian& hamiltonian, const CorrelatedState& state) {
    return state.amplitudes.dot(apply_real(hamiltonian.matrix, state.amplitudes)).real() /
           state.amplitudes.squaredNorm();
}

Eigen::MatrixXcd one_body_matrix(const CorrelatedState& state, Species species) {
    const CISpace& sp = *state.space;
    const auto c = state.as_matrix();
    if (species == Species::impurity) return c.adjoint() * c;

    const FockSpace& fock = sp.bath_space();
    const std::size_t d = sp.d_bath();
    Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(d, d);
    for (std::size_t b = 0; b < fock.dimension(); ++b) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                std::uint64_t s = fock.state(b);
                double coef = 1.0;
                if (!annihilate(s, j, coef)) continue;
                create(s, i, coef);
                const std::size_t target = fock.index_of(s);
                rho(i, j) += coef * c.row(target).dot(c.row(b));
            }
        }
    }
    return rho;
}

SchmidtSpectrum schmidt_spectrum(const CorrelatedState& state) {
    const Eigen::MatrixXcd m = state.as_matrix();
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
    const Eigen::VectorXd& s = svd.singularValues();
    SchmidtSpectrum out;
    out.lambdas.resize(s.size());
    for (Eigen::Index k = 0; k < s.size(); ++k) out.lambdas[k] = s(k) * s(k);
    std::sort(out.lambdas.begin(), out.lambdas.end(), std::greater<>());
    return out;
}

double vn_entropy(const SchmidtSpectrum& spectrum) {
    double s = 0.0;
    for (double l : spectrum.lambdas) {
        if (l > 0.0 && l < 1.0) s -= l * std::log(l);
    }
    return std::max(s, 0.0);
}

}  // namespace polaron
