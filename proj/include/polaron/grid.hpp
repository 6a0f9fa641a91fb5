#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace polaron {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;
using RealVector = std::vector<double>;

/// Uniform grid of strictly interior points on the hard-wall box [x_min, x_max].
///
/// Points sit at x_j = x_min + j * spacing for j = 1..n_points, with
/// spacing = (x_max - x_min) / (n_points + 1). Fields vanish at both walls,
/// which is the natural layout of a sine discrete variable representation.
class Grid1D {
public:
    static Grid1D build(double x_min, double x_max, std::size_t n_points);

    double x_min() const noexcept { return x_min_; }
    double x_max() const noexcept { return x_max_; }
    std::size_t n_points() const noexcept { return n_points_; }
    double spacing() const noexcept { return spacing_; }
    double length() const noexcept { return x_max_ - x_min_; }

    /// Coordinate of the zero-based point index (index 0 is x_1).
    double x(std::size_t index) const noexcept {
        return x_min_ + static_cast<double>(index + 1) * spacing_;
    }
    RealVector points() const;

    /// Wavenumber pi*(mode+1)/L of the zero-based sine mode.
    double wavenumber(std::size_t mode) const noexcept;

    bool contains(double x) const noexcept { return x > x_min_ && x < x_max_; }

    friend bool operator==(const Grid1D&, const Grid1D&) = default;

private:
    Grid1D(double x_min, double x_max, std::size_t n_points);

    double x_min_ = 0.0;
    double x_max_ = 1.0;
    std::size_t n_points_ = 0;
    double spacing_ = 0.0;
};

/// Complex amplitude sampled on a grid.
struct ComplexField {
    Grid1D grid;
    ComplexVector values;

    explicit ComplexField(const Grid1D& g) : grid(g), values(g.n_points()) {}
    ComplexField(const Grid1D& g, ComplexVector v);

    /// Sum |values|^2 * spacing.
    double norm_squared() const;
    void normalize();
};

/// Riemann sum with vanishing boundary values: sum f_j * spacing.
double integrate(std::span<const double> samples, const Grid1D& grid);

RealVector abs_squared(std::span<const Complex> values);

/// Orthonormal type-I discrete sine transform on the interior grid.
///
/// Coefficients are scaled so that sum |f_j|^2 * h == sum |c_m|^2. Mode m
/// (zero based) is the box eigenfunction sqrt(2/L) sin(k_m (x - x_min)).
class SineTransform {
public:
    explicit SineTransform(const Grid1D& grid);

    void forward(std::span<const Complex> field, std::span<Complex> coefficients) const;
    void inverse(std::span<const Complex> coefficients, std::span<Complex> field) const;

    ComplexVector forward(std::span<const Complex> field) const;
    ComplexVector inverse(std::span<const Complex> coefficients) const;

    /// Exact derivative of the sine interpolant at the grid points.
    ComplexVector derivative(std::span<const Complex> field) const;

    /// sum k_m^2 |c_m|^2, i.e. the integral of |f'|^2.
    double gradient_norm_squared(std::span<const Complex> field) const;

    const Grid1D& grid() const noexcept { return grid_; }

private:
    Grid1D grid_;
    double forward_scale_;
    double inverse_scale_;
};

/// Spectral propagator exp(factor * k^2 / (2 mass)) in the sine basis.
///
/// factor = -i dt gives a real-time kinetic step, factor = -dtau an
/// imaginary-time one.
class KineticPropagator {
public:
    KineticPropagator(const Grid1D& grid, double mass, Complex factor);

    void apply(std::span<Complex> field) const;

private:
    Grid1D grid_;
    ComplexVector multipliers_;
};

ComplexField apply_kinetic(const ComplexField& field, double mass, Complex factor);

}  // namespace polaron
