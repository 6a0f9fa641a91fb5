#include "polaron/quasiparticle.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace polaron {

PhasePoint damped_trajectory(const DampedModel& model, double t) {
    if (!(model.m_eff > 0.0) || !(model.omega_eff > 0.0) || model.gamma_eff < 0.0) {
        throw Error(Errc::invalid_argument, "damped model needs m > 0, omega > 0, gamma >= 0");
    }
    const double w2 = model.omega0_squared();
    if (!(w2 > 0.0)) {
        throw Error(Errc::overdamped_parameters, "gamma/(2m) must stay below omega_eff");
    }
    const double w0 = std::sqrt(w2);
    const double m = model.m_eff;
    const double g = model.gamma_eff;
    const double envelope = std::exp(-model.decay_rate() * t);
    const double c = std::cos(w0 * t);
    const double s = std::sin(w0 * t);
    const double drive = model.p0 + 0.5 * g * model.x0;
    return PhasePoint{
        envelope * (model.x0 * c + drive / (m * w0) * s),
        envelope * (model.p0 * c - (m * w0 * model.x0 + g * drive / (2.0 * m * w0)) * s),
    };
}

const char* to_string(FitStatus status) noexcept {
    switch (status) {
        case FitStatus::converged: return "converged";
        case FitStatus::not_converged: return "not-converged";
        case FitStatus::overdamped: return "overdamped";
        case FitStatus::not_applicable: return "not-applicable";
    }
    return "unknown";
}

namespace {

class TrajectoryObjective {
public:
    TrajectoryObjective(const TimeSeries<double>& xs, const TimeSeries<double>& ps, double x0,
                        double p0)
        : xs_(xs), ps_(ps), x0_(x0), p0_(p0) {
        double xm = 0.0, pm = 0.0;
        for (double v : xs.values) xm = std::max(xm, std::abs(v));
        for (double v : ps.values) pm = std::max(pm, std::abs(v));
        x_scale_ = xm > 0.0 ? xm : 1.0;
        p_scale_ = pm > 0.0 ? pm : 1.0;
    }

    std::size_t size() const noexcept { return xs_.size() + ps_.size(); }

    DampedModel model(const Eigen::Vector3d& theta) const {
        return DampedModel{theta(0), theta(1), theta(2), x0_, p0_};
    }

    // Empty when theta is outside the underdamped region.
    std::optional<Eigen::VectorXd> residuals(const Eigen::Vector3d& theta) const {
        const DampedModel m = model(theta);
        if (!(m.m_eff > 0.0) || !(m.omega_eff > 0.0) || m.gamma_eff < 0.0 ||
            !(m.omega0_squared() > 0.0)) {
            return std::nullopt;
        }
        Eigen::VectorXd r(static_cast<Eigen::Index>(size()));
        Eigen::Index k = 0;
        for (std::size_t i = 0; i < xs_.size(); ++i) {
            r(k++) = (damped_trajectory(m, xs_.times[i]).x - xs_.values[i]) / x_scale_;
        }
        for (std::size_t i = 0; i < ps_.size(); ++i) {
            r(k++) = (damped_trajectory(m, ps_.times[i]).p - ps_.values[i]) / p_scale_;
        }
        return r;
    }

    double cost(const Eigen::Vector3d& theta) const {
        const auto r = residuals(theta);
        return r ? r->squaredNorm() : std::numeric_limits<double>::infinity();
    }

    // Central differences, one-sided at the gamma = 0 bound.
    std::optional<Eigen::MatrixXd> jacobian(const Eigen::Vector3d& theta) const {
        Eigen::MatrixXd j(static_cast<Eigen::Index>(size()), 3);
        for (int c = 0; c < 3; ++c) {
            const double h = 1e-6 * std::max(std::abs(theta(c)), 1e-3);
            Eigen::Vector3d up = theta, down = theta;
            up(c) += h;
            down(c) -= h;
            double span = 2.0 * h;
            if (down(c) < 0.0) {
                down(c) = theta(c);
                span = h;
            }
            const auto ru = residuals(up);
            const auto rd = residuals(down);
            if (!ru || !rd) return std::nullopt;
            j.col(c) = (*ru - *rd) / span;
        }
        return j;
    }

private:
    const TimeSeries<double>& xs_;
    const TimeSeries<double>& ps_;
    double x0_, p0_;
    double x_scale_ = 1.0, p_scale_ = 1.0;
};

struct LocalFit {
    Eigen::Vector3d theta;
    double cost;
    bool converged;
};

Eigen::Vector3d project(Eigen::Vector3d theta) {
    theta(0) = std::max(theta(0), 1e-6);
    theta(1) = std::max(theta(1), 1e-8);
    theta(2) = std::max(theta(2), 0.0);
    return theta;
}

LocalFit levenberg_marquardt(const TrajectoryObjective& objective, Eigen::Vector3d theta,
                             std::size_t max_iterations) {
    double cost = objective.cost(theta);
    double lambda = 1e-3;
    bool converged = false;
    for (std::size_t it = 0; it < max_iterations && std::isfinite(cost); ++it) {
        const auto r = objective.residuals(theta);
        const auto j = objective.jacobian(theta);
        if (!r || !j) break;
        const Eigen::Matrix3d jtj = j->transpose() * *j;
        const Eigen::Vector3d grad = j->transpose() * *r;

        bool improved = false;
        for (int attempt = 0; attempt < 30; ++attempt) {
            Eigen::Matrix3d a = jtj;
            for (int d = 0; d < 3; ++d) a(d, d) += lambda * std::max(jtj(d, d), 1e-12);
            const Eigen::Vector3d step = a.ldlt().solve(-grad);
            const Eigen::Vector3d trial = project(theta + step);
            const double trial_cost = objective.cost(trial);
            if (trial_cost < cost) {
                const double change = cost - trial_cost;
                const double step_size = (trial - theta).norm();
                theta = trial;
                improved = true;
                lambda = std::max(lambda * 0.3, 1e-12);
                if (change <= 1e-14 * std::max(cost, 1e-300) ||
                    step_size <= 1e-12 * (theta.norm() + 1e-12)) {
                    converged = true;
                }
                cost = trial_cost;
                break;
            }
            lambda *= 10.0;
        }
        if (!improved) {
            converged = true;  // no descent direction left at machine precision
            break;
        }
        if (converged) break;
    }
    return LocalFit{theta, cost, converged};
}

}  // namespace

FitResult fit_effective_parameters(const TimeSeries<double>& x_series,
                                   const TimeSeries<double>& p_series, double x0, double p0,
                                   double m_imp, double omega_trap, const FitOptions& options) {
    if (x_series.size() != p_series.size() || x_series.times != p_series.times) {
        throw Error(Errc::mismatched_time_grids, "position and momentum series must be aligned");
    }
    if (x_series.size() < 4) throw Error(Errc::series_too_short, "need at least 4 samples to fit");
    const TrajectoryObjective objective(x_series, p_series, x0, p0);

    FitResult best;
    double best_cost = std::numeric_limits<double>::infinity();
    bool best_converged = false;
    Eigen::Vector3d best_theta = Eigen::Vector3d::Zero();
    for (double mf : options.mass_factors) {
        for (double wf : options.omega_factors) {
            for (double g : options.gammas) {
                const Eigen::Vector3d start(mf * m_imp, wf * omega_trap, g);
                best.start_objectives.push_back(objective.cost(start));
                if (!std::isfinite(best.start_objectives.back())) continue;
                const LocalFit fit = levenberg_marquardt(objective, start, options.max_iterations);
                if (fit.cost < best_cost) {
                    best_cost = fit.cost;
                    best_theta = fit.theta;
                    best_converged = fit.converged;
                }
            }
        }
    }
    if (!std::isfinite(best_cost)) {
        throw Error(Errc::no_convergence, "no multi-start point produced a finite objective");
    }

    best.model = objective.model(best_theta);
    best.objective = best_cost;
    const auto n = static_cast<double>(objective.size());
    best.residual_rms = std::sqrt(best_cost / n);
    if (const auto j = objective.jacobian(best_theta)) {
        const Eigen::Matrix3d jtj = j->transpose() * *j;
        const double dof = std::max(n - 3.0, 1.0);
        const Eigen::Matrix3d cov = jtj.inverse() * (best_cost / dof);
        for (int d = 0; d < 3; ++d) best.uncertainties[d] = std::sqrt(std::max(cov(d, d), 0.0));
    }
    // Fits pinned against the critical-damping boundary are flagged.
    if (best.model.omega0_squared() < 1e-3 * best.model.omega_eff * best.model.omega_eff) {
        best.status = FitStatus::overdamped;
    } else {
        best.status = best_converged ? FitStatus::converged : FitStatus::not_converged;
    }
    return best;
}

bool fit_applicable(double g_bi) noexcept { return g_bi > -2.5 && g_bi < 0.95; }

FitResult fit_quench_trajectory(const TimeSeries<double>& x_series,
                                const TimeSeries<double>& p_series, const MixtureParams& params,
                                const FitOptions& options) {
    if (!fit_applicable(params.g_bi_post)) {
        FitResult r;
        r.status = FitStatus::not_applicable;
        return r;
    }
    const double x0 = x_series.empty() ? params.x0 : x_series.values.front();
    const double p0 = p_series.empty() ? params.k0() : p_series.values.front();
    return fit_effective_parameters(x_series, p_series, x0, p0, params.mass_imp, params.omega,
                                    options);
}

BecScales bec_scales(double n0, double g_bb, double mass_bath) {
    if (!(n0 > 0.0)) throw Error(Errc::invalid_argument, "n0 must be positive");
    if (!(mass_bath > 0.0) || g_bb < 0.0) {
        throw Error(Errc::invalid_argument, "need m_B > 0 and g_BB >= 0");
    }
    return BecScales{1.0 / std::sqrt(2.0 * mass_bath * g_bb * n0), std::sqrt(g_bb * n0 / mass_bath)};
}

FrohlichResult frohlich_mass(const FrohlichParams& params) {
    if (!(params.n0 > 0.0) || !(params.g_bb > 0.0) || !(params.mass_bath > 0.0) ||
        !(params.mass_imp > 0.0) || params.k_max < 0.0) {
        throw Error(Errc::invalid_argument, "Froehlich mass needs positive n0, g_BB, masses");
    }
    const BecScales scales = bec_scales(params.n0, params.g_bb, params.mass_bath);
    const double xi = scales.healing_length;
    const double uc = scales.sound_speed;
    const double n0 = params.n0;
    const double mi = params.mass_imp;

    // k^2 (V_k/g_BI)^2 / (omega_k + k^2/2m_I)^3 with the k -> 0 limit handled.
    auto integrand = [&](double k) {
        const double xk2 = xi * xi * k * k;
        if (k <= 0.0) {
            return n0 * xi / (2.0 * std::numbers::pi * std::numbers::sqrt2 * uc * uc * uc);
        }
        const double coupling2 = n0 / (2.0 * std::numbers::pi) * std::sqrt(xk2 / (2.0 + xk2));
        const double omega_k = uc * k * std::sqrt(1.0 + 0.5 * xk2);
        const double denom = omega_k + k * k / (2.0 * mi);
        return k * k * coupling2 / (denom * denom * denom);
    };
    // Large-k limit: integrand -> C k^-4, tail from K is C / (3 K^3).
    const double reduced = 0.5 / params.mass_bath + 0.5 / mi;
    const double tail_coefficient = n0 / (2.0 * std::numbers::pi) / (reduced * reduced * reduced);

    auto integrate_to = [&](double k_max) {
        using boost::math::quadrature::gauss_kronrod;
        double total = 0.0;
        // Split at a few healing wavenumbers so the adaptive rule sees the peak.
        const double knots[] = {0.0, 0.5 / xi, 2.0 / xi, 10.0 / xi, 50.0 / xi};
        double lo = 0.0;
        for (double knot : knots) {
            if (knot <= lo) continue;
            const double hi = std::min(knot, k_max);
            double err = 0.0;
            total += gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 20, 1e-14, &err);
            if (!(err <= 1e-10 * std::abs(total) + 1e-300)) {
                throw Error(Errc::quadrature_non_convergence, "Froehlich integral did not converge");
            }
            lo = hi;
            if (lo >= k_max) break;
        }
        if (lo < k_max) {
            double err = 0.0;
            total += gauss_kronrod<double, 61>::integrate(integrand, lo, k_max, 25, 1e-14, &err);
            if (!(err <= 1e-10 * std::abs(total) + 1e-300)) {
                throw Error(Errc::quadrature_non_convergence, "Froehlich integral did not converge");
            }
        }
        return total;
    };

    FrohlichResult out;
    double k_max = params.k_max > 0.0 ? params.k_max : 50.0 / xi;
    double a = integrate_to(k_max);
    double tail = tail_coefficient / (3.0 * k_max * k_max * k_max) / a;
    while (params.k_max == 0.0 && tail >= 1e-8) {
        k_max *= 2.0;
        a = integrate_to(k_max);
        tail = tail_coefficient / (3.0 * k_max * k_max * k_max) / a;
    }
    out.a_integral = a;
    out.k_max = k_max;
    out.relative_tail = tail;
    out.m_eff = mi + 4.0 * params.g_bi * params.g_bi * a;
    return out;
}

}  // namespace polaron
