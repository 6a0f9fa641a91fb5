#include "polaron/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <string>
#include <utility>

#include "fftw_lock.hpp"
#include "polaron/error.hpp"

namespace polaron {

namespace detail {

std::mutex& fftw_planner_mutex() {
    static std::mutex mutex;
    return mutex;
}

}  // namespace detail

namespace {

// FFTW planning is not thread-safe; execution of an existing plan with
// fftw_execute_r2r is. Plans live for the lifetime of the process.
fftw_plan interleaved_plan(fftw_r2r_kind kind, std::size_t n) {
    static std::map<std::pair<int, std::size_t>, fftw_plan> cache;

    std::lock_guard lock(detail::fftw_planner_mutex());
    auto key = std::make_pair(static_cast<int>(kind), n);
    if (auto it = cache.find(key); it != cache.end()) return it->second;

    std::vector<double> in(2 * n), out(2 * n);
    int size = static_cast<int>(n);
    fftw_plan plan = fftw_plan_many_r2r(1, &size, 2, in.data(), nullptr, 2, 1, out.data(),
                                        nullptr, 2, 1, &kind,
                                        FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (plan == nullptr) {
        throw Error(Errc::invalid_argument, "FFTW could not plan a transform of size " +
                                                std::to_string(n));
    }
    cache.emplace(key, plan);
    return plan;
}

// Unnormalized DST-I of real and imaginary parts: y_m = 2 sum_j f_j sin(pi (j+1)(m+1)/(n+1)).
void raw_dst(std::span<const Complex> in, std::span<Complex> out) {
    thread_local ComplexVector scratch;
    scratch.assign(in.begin(), in.end());
    fftw_plan plan = interleaved_plan(FFTW_RODFT00, in.size());
    fftw_execute_r2r(plan, reinterpret_cast<double*>(scratch.data()),
                     reinterpret_cast<double*>(out.data()));
}

void check_size(std::size_t got, std::size_t expected) {
    if (got != expected) {
        throw Error(Errc::size_mismatch, "expected " + std::to_string(expected) +
                                             " samples, got " + std::to_string(got));
    }
}

}  // namespace

Grid1D::Grid1D(double x_min, double x_max, std::size_t n_points)
    : x_min_(x_min),
      x_max_(x_max),
      n_points_(n_points),
      spacing_((x_max - x_min) / static_cast<double>(n_points + 1)) {}

Grid1D Grid1D::build(double x_min, double x_max, std::size_t n_points) {
    if (!(x_min < x_max) || !std::isfinite(x_min) || !std::isfinite(x_max)) {
        throw Error(Errc::invalid_extent, "grid requires x_min < x_max");
    }
    if (n_points < 8) {
        throw Error(Errc::invalid_count, "grid requires at least 8 points");
    }
    return Grid1D(x_min, x_max, n_points);
}

RealVector Grid1D::points() const {
    RealVector xs(n_points_);
    for (std::size_t j = 0; j < n_points_; ++j) xs[j] = x(j);
    return xs;
}

double Grid1D::wavenumber(std::size_t mode) const noexcept {
    return std::numbers::pi * static_cast<double>(mode + 1) / length();
}

ComplexField::ComplexField(const Grid1D& g, ComplexVector v) : grid(g), values(std::move(v)) {
    check_size(values.size(), grid.n_points());
}

double ComplexField::norm_squared() const {
    double sum = 0.0;
    for (const auto& v : values) sum += std::norm(v);
    return sum * grid.spacing();
}

void ComplexField::normalize() {
    const double n2 = norm_squared();
    if (!(n2 > 0.0) || !std::isfinite(n2)) {
        throw Error(Errc::invalid_argument, "cannot normalize a field with zero or non-finite norm");
    }
    const double scale = 1.0 / std::sqrt(n2);
    for (auto& v : values) v *= scale;
}

double integrate(std::span<const double> samples, const Grid1D& grid) {
    check_size(samples.size(), grid.n_points());
    double sum = 0.0;
    for (double s : samples) sum += s;
    return sum * grid.spacing();
}

RealVector abs_squared(std::span<const Complex> values) {
    RealVector out(values.size());
    for (std::size_t j = 0; j < values.size(); ++j) out[j] = std::norm(values[j]);
    return out;
}

SineTransform::SineTransform(const Grid1D& grid)
    : grid_(grid),
      forward_scale_(std::sqrt(grid.spacing() / (2.0 * static_cast<double>(grid.n_points() + 1)))),
      inverse_scale_(1.0 / std::sqrt(2.0 * static_cast<double>(grid.n_points() + 1) *
                                     grid.spacing())) {}

void SineTransform::forward(std::span<const Complex> field, std::span<Complex> coefficients) const {
    check_size(field.size(), grid_.n_points());
    check_size(coefficients.size(), grid_.n_points());
    raw_dst(field, coefficients);
    for (auto& c : coefficients) c *= forward_scale_;
}

void SineTransform::inverse(std::span<const Complex> coefficients, std::span<Complex> field) const {
    check_size(field.size(), grid_.n_points());
    check_size(coefficients.size(), grid_.n_points());
    raw_dst(coefficients, field);
    for (auto& f : field) f *= inverse_scale_;
}

ComplexVector SineTransform::forward(std::span<const Complex> field) const {
    ComplexVector out(field.size());
    forward(field, out);
    return out;
}

ComplexVector SineTransform::inverse(std::span<const Complex> coefficients) const {
    ComplexVector out(coefficients.size());
    inverse(coefficients, out);
    return out;
}

ComplexVector SineTransform::derivative(std::span<const Complex> field) const {
    const std::size_t n = grid_.n_points();
    check_size(field.size(), n);
    ComplexVector y(n);
    raw_dst(field, y);

    // Cosine synthesis as a DCT-I of length n+2 with vanishing end samples.
    ComplexVector padded(n + 2, Complex{});
    for (std::size_t m = 0; m < n; ++m) padded[m + 1] = y[m] * grid_.wavenumber(m);
    ComplexVector z(n + 2);
    fftw_plan plan = interleaved_plan(FFTW_REDFT00, n + 2);
    fftw_execute_r2r(plan, reinterpret_cast<double*>(padded.data()),
                     reinterpret_cast<double*>(z.data()));

    const double scale = 1.0 / (2.0 * static_cast<double>(n + 1));
    ComplexVector out(n);
    for (std::size_t j = 0; j < n; ++j) out[j] = z[j + 1] * scale;
    return out;
}

double SineTransform::gradient_norm_squared(std::span<const Complex> field) const {
    const ComplexVector c = forward(field);
    double sum = 0.0;
    for (std::size_t m = 0; m < c.size(); ++m) {
        const double k = grid_.wavenumber(m);
        sum += k * k * std::norm(c[m]);
    }
    return sum;
}

KineticPropagator::KineticPropagator(const Grid1D& grid, double mass, Complex factor)
    : grid_(grid), multipliers_(grid.n_points()) {
    if (!(mass > 0.0)) throw Error(Errc::invalid_argument, "mass must be positive");
    // Two unnormalized DST-I passes compose to 2(n+1) times the identity.
    const double scale = 1.0 / (2.0 * static_cast<double>(grid.n_points() + 1));
    for (std::size_t m = 0; m < multipliers_.size(); ++m) {
        const double k = grid.wavenumber(m);
        multipliers_[m] = std::exp(factor * (k * k / (2.0 * mass))) * scale;
    }
}

void KineticPropagator::apply(std::span<Complex> field) const {
    check_size(field.size(), grid_.n_points());
    thread_local ComplexVector coefficients;
    coefficients.resize(field.size());
    raw_dst(field, coefficients);
    for (std::size_t m = 0; m < coefficients.size(); ++m) coefficients[m] *= multipliers_[m];
    raw_dst(coefficients, field);
}

ComplexField apply_kinetic(const ComplexField& field, double mass, Complex factor) {
    ComplexField out = field;
    KineticPropagator(field.grid, mass, factor).apply(out.values);
    return out;
}

}  // namespace polaron
