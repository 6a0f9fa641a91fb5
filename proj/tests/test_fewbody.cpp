#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "polaron/error.hpp"
#include "polaron/fewbody.hpp"
#include "polaron/observables.hpp"

using namespace polaron;

namespace {

// Oscillator eigenfunction from the explicit Hermite polynomial.
double hermite_function(unsigned n, double mw, double x) {
    const double xi = std::sqrt(mw) * x;
    return std::pow(mw / std::numbers::pi, 0.25) / std::sqrt(std::ldexp(std::tgamma(n + 1.0), n)) *
           std::hermite(n, xi) * std::exp(-0.5 * xi * xi);
}

std::vector<RealVector> hermite_modes(const Grid1D& g, std::size_t d, double mw) {
    std::vector<RealVector> out(d, RealVector(g.n_points()));
    for (std::size_t n = 0; n < d; ++n) {
        for (std::size_t j = 0; j < g.n_points(); ++j) {
            out[n][j] = hermite_function(static_cast<unsigned>(n), mw, g.x(j));
        }
    }
    return out;
}

double quad4(const Grid1D& g, const RealVector& a, const RealVector& b, const RealVector& c,
             const RealVector& d) {
    double s = 0.0;
    for (std::size_t j = 0; j < g.n_points(); ++j) s += a[j] * b[j] * c[j] * d[j];
    return s * g.spacing();
}

Eigen::VectorXd sorted_eigenvalues(const Eigen::MatrixXd& m) {
    Eigen::VectorXd e = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues();
    std::sort(e.data(), e.data() + e.size());
    return e;
}

// First-quantized Hamiltonian of two bath bosons and one impurity on the
// product basis, projected on bath-exchange-symmetric states.
Eigen::MatrixXd first_quantized_two_boson(const MixtureParams& p, const Grid1D& g, std::size_t d,
                                          std::size_t di) {
    const auto mb = hermite_modes(g, d, p.mass_bath * p.omega);
    const auto mi = hermite_modes(g, di, p.mass_imp * p.omega);
    const auto idx = [&](std::size_t a, std::size_t b, std::size_t k) { return (a * d + b) * di + k; };
    const auto n = static_cast<Eigen::Index>(d * d * di);
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
            for (std::size_t k = 0; k < di; ++k)
                for (std::size_t c = 0; c < d; ++c)
                    for (std::size_t e = 0; e < d; ++e)
                        for (std::size_t l = 0; l < di; ++l) {
                            double v = 0.0;
                            if (a == c && b == e && k == l) {
                                v += p.omega * (a + b + k + 1.5);
                            }
                            if (k == l) v += p.g_bb * quad4(g, mb[a], mb[b], mb[c], mb[e]);
                            if (b == e) v += p.g_bi_post * quad4(g, mb[a], mi[k], mb[c], mi[l]);
                            if (a == c) v += p.g_bi_post * quad4(g, mb[b], mi[k], mb[e], mi[l]);
                            h(static_cast<Eigen::Index>(idx(a, b, k)),
                              static_cast<Eigen::Index>(idx(c, e, l))) = v;
                        }
    std::vector<Eigen::VectorXd> sym;
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = a; b < d; ++b)
            for (std::size_t k = 0; k < di; ++k) {
                Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
                v(static_cast<Eigen::Index>(idx(a, b, k))) += 1.0;
                v(static_cast<Eigen::Index>(idx(b, a, k))) += 1.0;
                sym.push_back(v.normalized());
            }
    Eigen::MatrixXd s(n, static_cast<Eigen::Index>(sym.size()));
    for (std::size_t c = 0; c < sym.size(); ++c) s.col(static_cast<Eigen::Index>(c)) = sym[c];
    return s.transpose() * h * s;
}

std::shared_ptr<const CISpace> make_space(const MixtureParams& p, std::size_t d, std::size_t di) {
    const Grid1D g = Grid1D::build(-80.0, 80.0, 1000);
    return std::make_shared<const CISpace>(p, harmonic_mode_basis(p, g, d, di));
}

Eigen::MatrixXcd random_unitary(Eigen::Index n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXcd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) a(i, j) = Complex{nd(rng), nd(rng)};
    return Eigen::HouseholderQR<Eigen::MatrixXcd>(a).householderQ();
}

}  // namespace

TEST_CASE("Fock space dimension is the bosonic binomial") {
    for (std::size_t n = 0; n <= 4; ++n) {
        for (std::size_t d = 1; d <= 8; ++d) {
            const FockSpace f(n, d);
            const double binom = std::tgamma(n + d) / (std::tgamma(n + 1.0) * std::tgamma(d));
            CHECK(f.dimension() == static_cast<std::size_t>(std::llround(binom)));
            for (std::size_t i = 0; i < f.dimension(); ++i) CHECK(f.index_of(f.state(i)) == i);
        }
    }
}

TEST_CASE("oscillator modes agree with explicit Hermite functions") {
    for (unsigned n : {0u, 1u, 4u, 9u}) {
        for (double x : {-3.0, -0.4, 0.0, 1.7, 5.0}) {
            CHECK(oscillator_eigenfunction(n, 0.1, x) ==
                  doctest::Approx(hermite_function(n, 0.1, x)).epsilon(1e-12));
        }
    }
}

TEST_CASE("CI spectrum equals first-quantized diagonalization for two bosons") {
    MixtureParams p;
    p.n_bath = 2;
    p.g_bb = 1.0;
    p.g_bi_post = -0.7;
    const std::size_t d = 4, di = 3;
    const auto space = make_space(p, d, di);
    const CIHamiltonian h = build_hamiltonian(space, p.g_bi_post);
    const Grid1D g = Grid1D::build(-80.0, 80.0, 1000);
    const Eigen::VectorXd oracle = sorted_eigenvalues(first_quantized_two_boson(p, g, d, di));
    const Eigen::VectorXd ci = sorted_eigenvalues(Eigen::MatrixXd(h.matrix));
    REQUIRE(ci.size() == oracle.size());
    CHECK((ci - oracle).cwiseAbs().maxCoeff() < 1e-10);

    const CorrelatedState gs = ground_state(h, 1e-12);
    CHECK(energy_expectation(h, gs) == doctest::Approx(oracle(0)).epsilon(1e-10));
}

TEST_CASE("restarted Lanczos matches dense diagonalization above the dense cutoff") {
    MixtureParams p;
    p.n_bath = 3;
    p.g_bi_post = 0.8;
    const auto space = make_space(p, 8, 6);
    REQUIRE(space->dimension() > 400);
    const CIHamiltonian h = build_hamiltonian(space, p.g_bi_post);
    const EigenResult r = lowest_eigenpair(h.matrix, 1e-10);
    const Eigen::VectorXd dense = sorted_eigenvalues(Eigen::MatrixXd(h.matrix));
    CHECK(r.eigenvalue == doctest::Approx(dense(0)).epsilon(1e-10));
    CHECK(r.residual < 1e-8);
}

TEST_CASE("Krylov step equals the dense matrix exponential") {
    MixtureParams p;
    p.n_bath = 2;
    p.g_bi_post = 1.0;
    p.u0 = -0.2;
    const auto space = make_space(p, 5, 4);
    const CIHamiltonian h = build_hamiltonian(space, p.g_bi_post);
    const CorrelatedState s0 = quench_initial_state(space);
    Eigen::VectorXcd psi = s0.amplitudes;
    const double dt = 0.3;
    krylov_step(h.matrix, psi, dt);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig{Eigen::MatrixXd(h.matrix)};
    const Eigen::MatrixXcd v = eig.eigenvectors().cast<Complex>();
    Eigen::VectorXcd phase(eig.eigenvalues().size());
    for (Eigen::Index i = 0; i < phase.size(); ++i) {
        phase(i) = std::exp(Complex{0.0, -dt * eig.eigenvalues()(i)});
    }
    const Eigen::VectorXcd exact = v * phase.asDiagonal() * v.adjoint() * s0.amplitudes;
    CHECK((psi - exact).norm() < 1e-10);
}

TEST_CASE("quench initial state is a normalized product state") {
    MixtureParams p;
    p.n_bath = 3;
    p.g_bi_post = 0.5;
    p.u0 = -0.2;
    const auto space = make_space(p, 6, 6);
    const CorrelatedState s = quench_initial_state(space);
    CHECK(s.norm_squared() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(vn_entropy(schmidt_spectrum(s)) < 1e-10);
    CHECK(mean_momentum(s) == doctest::Approx(-0.2).epsilon(1e-4));
    CHECK(one_body_matrix(s, Species::bath).trace().real() == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(one_body_matrix(s, Species::impurity).trace().real() ==
          doctest::Approx(1.0).epsilon(1e-12));

    MixtureParams fast = p;
    fast.u0 = -0.87;
    try {
        quench_initial_state(make_space(fast, 4, 4));
        FAIL("expected basis truncation");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::basis_truncation);
    }
}

TEST_CASE("evolution conserves norm and energy and builds entanglement") {
    MixtureParams p;
    p.n_bath = 2;
    p.g_bi_post = 1.0;
    p.u0 = -0.2;
    const auto space = make_space(p, 6, 6);
    const CIHamiltonian h = build_hamiltonian(space, p.g_bi_post);
    const CorrelatedState s0 = quench_initial_state(space);
    const double e0 = energy_expectation(h, s0);
    const auto traj = evolve(s0, h, CIEvolutionOptions{0.05, 10.0, 20});
    REQUIRE(traj.size() == 11);
    for (std::size_t i = 0; i < traj.size(); ++i) {
        CHECK(std::abs(traj[i].norm_squared() - 1.0) < 1e-10);
        CHECK(std::abs(energy_expectation(h, traj[i]) - e0) < 1e-9);
        const double s = vn_entropy(schmidt_spectrum(traj[i]));
        CHECK(s <= std::log(6.0) + 1e-12);
        if (i > 0) CHECK(s > 0.0);
    }
}

TEST_CASE("Schmidt spectrum is invariant under species-local unitaries") {
    MixtureParams p;
    p.n_bath = 2;
    p.g_bi_post = -1.0;
    const auto space = make_space(p, 5, 4);
    const CorrelatedState gs = ground_state(build_hamiltonian(space, p.g_bi_post));
    const SchmidtSpectrum ref = schmidt_spectrum(gs);
    CHECK(vn_entropy(ref) > 1e-3);
    double sum = 0.0;
    for (double l : ref.lambdas) sum += l;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));

    std::mt19937_64 rng(11);
    const auto rows = static_cast<Eigen::Index>(space->bath_space().dimension());
    const Eigen::MatrixXcd ub = random_unitary(rows, rng);
    const Eigen::MatrixXcd ui = random_unitary(4, rng);
    const Eigen::MatrixXcd rotated = ub * Eigen::MatrixXcd(gs.as_matrix()) * ui.transpose();
    CorrelatedState r = gs;
    for (Eigen::Index b = 0; b < rows; ++b)
        for (Eigen::Index k = 0; k < 4; ++k) r.amplitudes(b * 4 + k) = rotated(b, k);
    const SchmidtSpectrum rs = schmidt_spectrum(r);
    for (std::size_t i = 0; i < ref.lambdas.size(); ++i) {
        CHECK(std::abs(rs.lambdas[i] - ref.lambdas[i]) < 1e-8);
    }
}

TEST_CASE("one-body density traces out to the species number") {
    MixtureParams p;
    p.n_bath = 2;
    p.g_bi_post = 0.6;
    const auto space = make_space(p, 5, 3);
    const CorrelatedState gs = ground_state(build_hamiltonian(space, p.g_bi_post));
    const Grid1D& g = space->grid();
    CHECK(integrate(one_body_density(gs, Species::bath), g) == doctest::Approx(2.0).epsilon(1e-10));
    CHECK(integrate(one_body_density(gs, Species::impurity), g) ==
          doctest::Approx(1.0).epsilon(1e-10));

    // Direct marginal of the amplitude tensor for the impurity.
    const auto c = gs.as_matrix();
    const Eigen::MatrixXcd rho = c.adjoint() * c;
    const Eigen::MatrixXcd from_space = one_body_matrix(gs, Species::impurity);
    CHECK((rho - from_space).norm() < 1e-12);
}

TEST_CASE("CI space guards") {
    MixtureParams p;
    p.n_bath = 15;
    const Grid1D g = Grid1D::build(-80.0, 80.0, 200);
    CHECK_THROWS_AS(CISpace(p, harmonic_mode_basis(p, g, 16, 8)), Error);
    std::vector<RealVector> bad{RealVector(200, 1.0)};
    CHECK_THROWS_AS(custom_mode_basis(g, bad, bad), Error);
}
