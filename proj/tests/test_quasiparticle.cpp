#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "polaron/error.hpp"
#include "polaron/quasiparticle.hpp"

using namespace polaron;

namespace {

// RK4 on x' = p/m, p' = -m w^2 x - (gamma/m) p.
PhasePoint integrate_ode(const DampedModel& m, double t_end) {
    const std::size_t steps = 20000;
    const double h = t_end / steps;
    double x = m.x0, p = m.p0;
    auto fx = [&](double, double pp) { return pp / m.m_eff; };
    auto fp = [&](double xx, double pp) {
        return -m.m_eff * m.omega_eff * m.omega_eff * xx - m.gamma_eff / m.m_eff * pp;
    };
    for (std::size_t i = 0; i < steps; ++i) {
        const double k1x = fx(x, p), k1p = fp(x, p);
        const double k2x = fx(x + 0.5 * h * k1x, p + 0.5 * h * k1p);
        const double k2p = fp(x + 0.5 * h * k1x, p + 0.5 * h * k1p);
        const double k3x = fx(x + 0.5 * h * k2x, p + 0.5 * h * k2p);
        const double k3p = fp(x + 0.5 * h * k2x, p + 0.5 * h * k2p);
        const double k4x = fx(x + h * k3x, p + h * k3p);
        const double k4p = fp(x + h * k3x, p + h * k3p);
        x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x);
        p += h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p);
    }
    return {x, p};
}

std::pair<TimeSeries<double>, TimeSeries<double>> synthetic(const DampedModel& m, double noise,
                                                            unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    TimeSeries<double> xs, ps;
    for (int i = 0; i <= 300; ++i) {
        const double t = 0.5 * i;
        const PhasePoint pt = damped_trajectory(m, t);
        xs.push_back(t, pt.x + noise * nd(rng));
        ps.push_back(t, pt.p + noise * nd(rng));
    }
    return {xs, ps};
}

// Bogoliubov form of the second-order mass integral, Simpson on k = s / (1 - s).
double frohlich_oracle(double n0, double g_bb, double mb, double mi) {
    const std::size_t n = 400000;
    const double hs = 1.0 / n;
    auto f = [&](double s) {
        if (s <= 0.0 || s >= 1.0) {
            if (s <= 0.0) {
                const double c = std::sqrt(g_bb * n0 / mb);
                const double xi = 1.0 / std::sqrt(2.0 * mb * g_bb * n0);
                return n0 * xi / (2.0 * std::numbers::pi * std::numbers::sqrt2 * c * c * c);
            }
            return 0.0;
        }
        const double k = s / (1.0 - s);
        const double eps = k * k / (2.0 * mb);
        const double w = std::sqrt(eps * (eps + 2.0 * g_bb * n0));
        const double v2 = n0 / (2.0 * std::numbers::pi) * eps / w;
        const double d = w + k * k / (2.0 * mi);
        return k * k * v2 / (d * d * d) / ((1.0 - s) * (1.0 - s));
    };
    double sum = f(0.0) + f(1.0);
    for (std::size_t i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(i * hs);
    return sum * hs / 3.0;
}

}  // namespace

TEST_CASE("closed-form damped trajectory solves the equation of motion") {
    const DampedModel models[] = {
        {1.0, 0.1, 0.0, 0.0, -0.87},
        {1.2, 0.09, 0.01, 0.5, -0.3},
        {2.5, 0.2, 0.3, -3.0, 1.1},
    };
    for (const auto& m : models) {
        const PhasePoint start = damped_trajectory(m, 0.0);
        CHECK(start.x == doctest::Approx(m.x0));
        CHECK(start.p == doctest::Approx(m.p0));
        for (double t : {7.0, 40.0, 150.0}) {
            const PhasePoint a = damped_trajectory(m, t);
            const PhasePoint b = integrate_ode(m, t);
            CHECK(std::abs(a.x - b.x) < 1e-9);
            CHECK(std::abs(a.p - b.p) < 1e-9);
        }
    }
    CHECK_THROWS_AS(damped_trajectory(DampedModel{1.0, 0.1, 0.5, 0.0, 1.0}, 1.0), Error);
}

TEST_CASE("fit recovers planted parameters") {
    const DampedModel truth{1.2, 0.09, 0.01, 0.0, -0.87};
    SUBCASE("noise free") {
        const auto [xs, ps] = synthetic(truth, 0.0, 1);
        const FitResult r = fit_effective_parameters(xs, ps, 0.0, -0.87, 1.0, 0.1);
        CHECK(r.status == FitStatus::converged);
        CHECK(r.model.m_eff == doctest::Approx(1.2).epsilon(1e-6));
        CHECK(r.model.omega_eff == doctest::Approx(0.09).epsilon(1e-6));
        CHECK(r.model.gamma_eff == doctest::Approx(0.01).epsilon(1e-5));
        CHECK(r.residual_rms < 1e-8);
        CHECK(r.start_objectives.size() == 36);
    }
    SUBCASE("noisy") {
        const auto [xs, ps] = synthetic(truth, 0.05, 7);
        const FitResult r = fit_effective_parameters(xs, ps, 0.0, -0.87, 1.0, 0.1);
        CHECK(r.status == FitStatus::converged);
        CHECK(std::abs(r.model.m_eff - 1.2) < 4.0 * r.uncertainties[0] + 1e-3);
        CHECK(std::abs(r.model.omega_eff - 0.09) < 4.0 * r.uncertainties[1] + 1e-4);
        CHECK(std::abs(r.model.gamma_eff - 0.01) < 4.0 * r.uncertainties[2] + 1e-4);
        CHECK(r.uncertainties[0] > 0.0);
    }
}

TEST_CASE("fit guards") {
    const DampedModel truth{1.0, 0.1, 0.0, 0.0, -0.5};
    auto [xs, ps] = synthetic(truth, 0.0, 1);
    MixtureParams p;
    p.u0 = -0.5;
    p.g_bi_post = 2.0;
    CHECK(fit_quench_trajectory(xs, ps, p).status == FitStatus::not_applicable);
    CHECK_FALSE(fit_applicable(-2.5));
    CHECK_FALSE(fit_applicable(0.95));
    CHECK(fit_applicable(-1.0));
    p.g_bi_post = 0.5;
    CHECK(fit_quench_trajectory(xs, ps, p).status == FitStatus::converged);

    TimeSeries<double> shifted;
    for (std::size_t i = 0; i < xs.size(); ++i) shifted.push_back(xs.times[i] + 0.1, xs.values[i]);
    try {
        fit_effective_parameters(shifted, ps, 0.0, -0.5, 1.0, 0.1);
        FAIL("expected mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::mismatched_time_grids);
    }
    TimeSeries<double> a, b;
    for (int i = 0; i < 3; ++i) {
        a.push_back(i, 0.0);
        b.push_back(i, 0.0);
    }
    try {
        fit_effective_parameters(a, b, 0.0, 0.0, 1.0, 0.1);
        FAIL("expected short series");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::series_too_short);
    }
}

TEST_CASE("BEC scales") {
    const BecScales s = bec_scales(2.0, 0.5, 1.0);
    CHECK(s.healing_length == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(s.sound_speed == doctest::Approx(1.0));
    CHECK_THROWS_AS(bec_scales(0.0, 1.0, 1.0), Error);
}

TEST_CASE("Froehlich mass against an independent quadrature") {
    for (double n0 : {1.0, 3.04}) {
        for (double mi : {1.0, 2.0}) {
            FrohlichParams fp;
            fp.n0 = n0;
            fp.mass_imp = mi;
            fp.g_bi = 0.5;
            const FrohlichResult r = frohlich_mass(fp);
            const double a = frohlich_oracle(n0, 1.0, 1.0, mi);
            CHECK(r.a_integral == doctest::Approx(a).epsilon(1e-7));
            CHECK(r.relative_tail < 1e-8);
            CHECK(r.m_eff == doctest::Approx(mi + a).epsilon(1e-7));
        }
    }
}

TEST_CASE("Froehlich mass is even in the coupling and exact at zero") {
    FrohlichParams fp;
    fp.n0 = 3.04;
    double previous = 0.0;
    for (double g : {0.0, 0.25, 0.5, 1.0, 2.0}) {
        fp.g_bi = g;
        const double plus = frohlich_mass(fp).m_eff;
        fp.g_bi = -g;
        const double minus = frohlich_mass(fp).m_eff;
        CHECK(plus == minus);
        if (g == 0.0) {
            CHECK(plus == 1.0);
        } else {
            CHECK(plus > previous);
        }
        previous = plus;
    }
    fp.n0 = -1.0;
    CHECK_THROWS_AS(frohlich_mass(fp), Error);
}
