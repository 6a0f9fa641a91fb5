#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "polaron/fewbody.hpp"
#include "polaron/grid.hpp"
#include "polaron/meanfield.hpp"
#include "polaron/mixture.hpp"

namespace polaron {

struct PointSpreadFunction {
    double width = 1.0;

    /// Throws Error(invalid_argument) unless width > 0.
    static PointSpreadFunction make(double width);
};

struct ShotImage {
    Grid1D grid;
    RealVector intensity;
    Species species = Species::bath;
    std::uint64_t seed = 0;

    /// Integral of intensity times x over the integral of intensity.
    double centroid() const;
    double total() const;
};

struct Shot {
    ShotImage bath;
    ShotImage impurity;
    /// Drawn bath positions in drawing order.
    RealVector bath_positions;
    double impurity_position = 0.0;
    /// X_k, the impurity image centroid.
    double impurity_centroid = 0.0;
};

enum class ImagingOrder { bath_first, impurity_first };

using ShotRng = std::mt19937_64;

/// Generator for shot `index` of a run seeded with `seed`.
ShotRng shot_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream = 0);

/// Uniform double on [0, 1) built from the top 53 bits of one draw.
double uniform01(ShotRng& rng);

/// Draws positions with density proportional to a non-negative grid density,
/// linearly interpolated and vanishing at the walls. Proposals are uniform on
/// the box and accepted when z ~ U[0, max rho] falls below rho(x).
class RejectionSampler {
public:
    static constexpr std::size_t max_proposals = 1'000'000;

    RejectionSampler(const Grid1D& grid, std::span<const double> density);

    /// Throws Error(sampling_stall) after max_proposals rejections.
    double draw(ShotRng& rng) const;
    double density_at(double x) const;

private:
    Grid1D grid_;
    RealVector density_;
    double peak_ = 0.0;
};

/// Linear interpolation of grid samples at x; zero at and beyond the walls.
double interpolate(const Grid1D& grid, std::span<const double> samples, double x);

/// Sum of unit-weight Gaussians of width w centered on the positions, on the
/// grid, clipped beyond ten widths.
ShotImage render_image(const Grid1D& grid, std::span<const double> positions,
                       const PointSpreadFunction& psf, Species species, std::uint64_t seed);

/// (1/sqrt(2 pi) w) sum_j h rho(x_j) exp(-(x - x_j)^2 / 2 w^2) on the grid.
RealVector psf_convolve(std::span<const double> density, const Grid1D& grid,
                        const PointSpreadFunction& psf);

/// Independent draws: N_B from rho_B / N_B, then one from |phi_I|^2.
Shot sample_shot(const MeanFieldState& state, const PointSpreadFunction& psf, std::uint64_t seed,
                 std::uint64_t index = 0);

/// Sequential annihilation on the full bath x impurity amplitude tensor. Each
/// drawn position x applies the field operator sum_i m_i(x) a_i of its species
/// and renormalizes the remaining state.
Shot sample_shot(const CorrelatedState& state, const PointSpreadFunction& psf, std::uint64_t seed,
                 std::uint64_t index = 0, ImagingOrder order = ImagingOrder::bath_first);

/// Shots 0..n_shots-1, generated in parallel; the result does not depend on threads.
std::vector<Shot> sample_shots(const MeanFieldState& state, const PointSpreadFunction& psf,
                               std::uint64_t seed, std::size_t n_shots, std::size_t threads = 1);
std::vector<Shot> sample_shots(const CorrelatedState& state, const PointSpreadFunction& psf,
                               std::uint64_t seed, std::size_t n_shots, std::size_t threads = 1,
                               ImagingOrder order = ImagingOrder::bath_first);

/// Pixel-wise mean. Throws on empty input or species/grid mismatch.
ShotImage average_images(std::span<const ShotImage> shots);

/// Mean of A_k(x_r + X_k) over the relative coordinate grid.
/// Throws Error(unpaired_shots) when the counts differ or are zero.
ShotImage comoving_average(std::span<const ShotImage> bath_shots,
                           std::span<const double> impurity_positions);

std::vector<ShotImage> bath_images(std::span<const Shot> shots);
std::vector<ShotImage> impurity_images(std::span<const Shot> shots);
std::vector<double> impurity_centroids(std::span<const Shot> shots);

/// Sum over pixels of h |a - b|.
double l1_distance(std::span<const double> a, std::span<const double> b, const Grid1D& grid);

struct OrderingReport {
    std::size_t n_shots = 0;
    bool sufficient_statistics = false;
    double l1_difference = 0.0;
    /// Sum over pixels of h times the standard error of the pixel difference.
    double standard_error = 0.0;
    bool consistent = true;
    ShotImage bath_first;
    ShotImage impurity_first;
};

/// Compares averaged bath images from the two imaging orders; consistent when
/// the L1 difference is below three standard errors. Fewer than two shots
/// only reports insufficient statistics.
OrderingReport image_ordering_average_invariance_test(const CorrelatedState& state,
                                                      const PointSpreadFunction& psf,
                                                      std::size_t n_shots, std::uint64_t seed,
                                                      std::size_t threads = 1);

}  // namespace polaron
