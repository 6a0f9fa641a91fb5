#include "polaron/singleshot.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>

#include "polaron/error.hpp"
#include "polaron/observables.hpp"

namespace polaron {

PointSpreadFunction PointSpreadFunction::make(double width) {
    if (!(width > 0.0) || !std::isfinite(width)) {
        throw Error(Errc::invalid_argument, "PSF width must be positive");
    }
    return PointSpreadFunction{width};
}

double ShotImage::total() const { return integrate(intensity, grid); }

double ShotImage::centroid() const {
    double weight = 0.0, moment = 0.0;
    for (std::size_t j = 0; j < intensity.size(); ++j) {
        weight += intensity[j];
        moment += intensity[j] * grid.x(j);
    }
    if (!(weight > 0.0)) throw Error(Errc::invalid_argument, "centroid of an empty image");
    return moment / weight;
}

ShotRng shot_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
                      static_cast<std::uint32_t>(stream)};
    return ShotRng(seq);
}

double uniform01(ShotRng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double interpolate(const Grid1D& grid, std::span<const double> samples, double x) {
    // Sample j sits at x_min + (j + 1) h; the walls carry implicit zeros.
    const double s = (x - grid.x_min()) / grid.spacing() - 1.0;
    if (!(s > -1.0) || !(s < static_cast<double>(grid.n_points()))) return 0.0;
    const double floor_s = std::floor(s);
    const auto j = static_cast<std::ptrdiff_t>(floor_s);
    const double frac = s - floor_s;
    const auto n = static_cast<std::ptrdiff_t>(samples.size());
    const double left = j >= 0 ? samples[static_cast<std::size_t>(j)] : 0.0;
    const double right = j + 1 < n ? samples[static_cast<std::size_t>(j + 1)] : 0.0;
    return left + frac * (right - left);
}

RejectionSampler::RejectionSampler(const Grid1D& grid, std::span<const double> density)
    : grid_(grid), density_(density.begin(), density.end()) {
    if (density_.size() != grid.n_points()) {
        throw Error(Errc::size_mismatch, "density must live on the sampler grid");
    }
    for (double& d : density_) {
        if (!std::isfinite(d)) throw Error(Errc::invalid_argument, "density must be finite");
        d = std::max(d, 0.0);
        peak_ = std::max(peak_, d);
    }
    if (!(peak_ > 0.0)) throw Error(Errc::invalid_argument, "density vanishes everywhere");
}

double RejectionSampler::density_at(double x) const { return interpolate(grid_, density_, x); }

double RejectionSampler::draw(ShotRng& rng) const {
    for (std::size_t attempt = 0; attempt < max_proposals; ++attempt) {
        const double x = grid_.x_min() + grid_.length() * uniform01(rng);
        const double z = peak_ * uniform01(rng);
        if (z < density_at(x)) return x;
    }
    throw Error(Errc::sampling_stall, "rejection sampling exceeded " +
                                          std::to_string(max_proposals) + " proposals");
}

ShotImage render_image(const Grid1D& grid, std::span<const double> positions,
                       const PointSpreadFunction& psf, Species species, std::uint64_t seed) {
    ShotImage image{grid, RealVector(grid.n_points(), 0.0), species, seed};
    const double w = psf.width;
    const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * w);
    const double h = grid.spacing();
    const auto n = static_cast<std::ptrdiff_t>(grid.n_points());
    for (double x : positions) {
        const double centre = (x - grid.x_min()) / h - 1.0;
        const auto lo = std::max<std::ptrdiff_t>(0, static_cast<std::ptrdiff_t>(
                                                        std::ceil(centre - 10.0 * w / h)));
        const auto hi = std::min<std::ptrdiff_t>(n - 1, static_cast<std::ptrdiff_t>(
                                                            std::floor(centre + 10.0 * w / h)));
        for (std::ptrdiff_t j = lo; j <= hi; ++j) {
            const double d = (grid.x(static_cast<std::size_t>(j)) - x) / w;
            image.intensity[static_cast<std::size_t>(j)] += norm * std::exp(-0.5 * d * d);
        }
    }
    return image;
}

RealVector psf_convolve(std::span<const double> density, const Grid1D& grid,
                        const PointSpreadFunction& psf) {
    if (density.size() != grid.n_points()) {
        throw Error(Errc::size_mismatch, "density must live on the image grid");
    }
    const double w = psf.width;
    const double h = grid.spacing();
    const double norm = h / (std::sqrt(2.0 * std::numbers::pi) * w);
    const auto reach = static_cast<std::ptrdiff_t>(std::floor(10.0 * w / h));
    const auto n = static_cast<std::ptrdiff_t>(grid.n_points());
    RealVector out(grid.n_points(), 0.0);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const double rho = density[static_cast<std::size_t>(i)];
        if (rho == 0.0) continue;
        for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - reach);
             j <= std::min(n - 1, i + reach); ++j) {
            const double d = static_cast<double>(j - i) * h / w;
            out[static_cast<std::size_t>(j)] += norm * rho * std::exp(-0.5 * d * d);
        }
    }
    return out;
}

namespace {

struct MeanFieldSamplers {
    RejectionSampler bath;
    RejectionSampler imp;
    std::size_t n_bath;
};

MeanFieldSamplers mean_field_samplers(const MeanFieldState& state) {
    return MeanFieldSamplers{RejectionSampler(state.grid(), abs_squared(state.bath.values)),
                             RejectionSampler(state.grid(), abs_squared(state.imp.values)),
                             state.params.n_bath};
}

Shot finish_shot(const Grid1D& grid, RealVector bath_positions, double imp_position,
                 const PointSpreadFunction& psf, std::uint64_t seed) {
    Shot shot{render_image(grid, bath_positions, psf, Species::bath, seed),
              render_image(grid, std::span<const double>(&imp_position, 1), psf,
                           Species::impurity, seed),
              std::move(bath_positions), imp_position, 0.0};
    shot.impurity_centroid = shot.impurity.centroid();
    return shot;
}

Shot mean_field_shot(const MeanFieldSamplers& samplers, const Grid1D& grid,
                     const PointSpreadFunction& psf, std::uint64_t seed, std::uint64_t index) {
    ShotRng rng = shot_rng(seed, index);
    RealVector bath(samplers.n_bath);
    for (double& x : bath) x = samplers.bath.draw(rng);
    const double imp = samplers.imp.draw(rng);
    return finish_shot(grid, std::move(bath), imp, psf, seed);
}

using Amplitudes = Eigen::MatrixXcd;

// Rows: bath configurations with `n` bosons; columns: impurity components.
Amplitudes annihilate(const FockSpace& from, const FockSpace& to, const Amplitudes& c,
                      std::size_t mode) {
    Amplitudes out = Amplitudes::Zero(static_cast<Eigen::Index>(to.dimension()), c.cols());
    for (std::size_t b = 0; b < from.dimension(); ++b) {
        const unsigned occ = from.occupation(b, mode);
        if (occ == 0) continue;
        const std::uint64_t packed = from.state(b) - (std::uint64_t{1} << (4 * mode));
        const auto target = static_cast<Eigen::Index>(to.index_of(packed));
        out.row(target) += std::sqrt(static_cast<double>(occ)) * c.row(static_cast<Eigen::Index>(b));
    }
    return out;
}

RealVector density_from(const Eigen::MatrixXcd& rho, const std::vector<RealVector>& modes,
                        std::size_t n_points) {
    RealVector density(n_points, 0.0);
    const auto d = static_cast<Eigen::Index>(modes.size());
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            const double r = rho(i, j).real();
            if (r == 0.0) continue;
            const RealVector& mi = modes[static_cast<std::size_t>(i)];
            const RealVector& mj = modes[static_cast<std::size_t>(j)];
            for (std::size_t g = 0; g < n_points; ++g) density[g] += r * mi[g] * mj[g];
        }
    }
    return density;
}

RealVector values_at(const Grid1D& grid, const std::vector<RealVector>& modes, double x) {
    RealVector v(modes.size());
    for (std::size_t i = 0; i < modes.size(); ++i) v[i] = interpolate(grid, modes[i], x);
    return v;
}

void renormalize(Amplitudes& c) {
    const double norm = c.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw Error(Errc::sampling_stall, "conditional state vanished after a projection");
    }
    c /= norm;
}

class CorrelatedSampler {
public:
    explicit CorrelatedSampler(const CorrelatedState& state) : space_(*state.space) {
        const auto rows = static_cast<Eigen::Index>(space_.bath_space().dimension());
        const auto cols = static_cast<Eigen::Index>(space_.d_imp());
        initial_ = Amplitudes(rows, cols);
        for (Eigen::Index b = 0; b < rows; ++b) {
            for (Eigen::Index k = 0; k < cols; ++k) initial_(b, k) = state.amplitudes(b * cols + k);
        }
        renormalize(initial_);
    }

    Shot shot(const PointSpreadFunction& psf, std::uint64_t seed, std::uint64_t index,
              ImagingOrder order) const {
        ShotRng rng = shot_rng(seed, index, order == ImagingOrder::bath_first ? 0 : 1);
        Amplitudes c = initial_;
        const std::size_t n_bath = space_.params().n_bath;
        RealVector bath_positions;
        bath_positions.reserve(n_bath);
        double imp = 0.0;
        if (order == ImagingOrder::impurity_first) imp = draw_impurity(c, rng);
        for (std::size_t n = n_bath; n > 0; --n) bath_positions.push_back(draw_bath(c, n, rng));
        if (order == ImagingOrder::bath_first) imp = draw_impurity(c, rng);
        return finish_shot(space_.grid(), std::move(bath_positions), imp, psf, seed);
    }

private:
    double draw_bath(Amplitudes& c, std::size_t n, ShotRng& rng) const {
        const FockSpace& from = space_.bath_space(n);
        const FockSpace& to = space_.bath_space(n - 1);
        const std::size_t d = space_.d_bath();
        std::vector<Amplitudes> parts(d);
        for (std::size_t i = 0; i < d; ++i) parts[i] = annihilate(from, to, c, i);
        Eigen::MatrixXcd rho(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                rho(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                    (parts[i].adjoint() * parts[j]).trace();
            }
        }
        const auto& modes = space_.basis().bath_modes;
        const double x = RejectionSampler(space_.grid(), density_from(rho, modes, space_.grid().n_points()))
                             .draw(rng);
        const RealVector v = values_at(space_.grid(), modes, x);
        Amplitudes next = Amplitudes::Zero(parts[0].rows(), parts[0].cols());
        for (std::size_t i = 0; i < d; ++i) next += v[i] * parts[i];
        renormalize(next);
        c = std::move(next);
        return x;
    }

    double draw_impurity(Amplitudes& c, ShotRng& rng) const {
        const Eigen::MatrixXcd rho = c.adjoint() * c;
        const auto& modes = space_.basis().imp_modes;
        const double x = RejectionSampler(space_.grid(), density_from(rho, modes,
                                                                      space_.grid().n_points()))
                             .draw(rng);
        const RealVector v = values_at(space_.grid(), modes, x);
        Amplitudes next = Amplitudes::Zero(c.rows(), 1);
        for (Eigen::Index k = 0; k < c.cols(); ++k) next += v[static_cast<std::size_t>(k)] * c.col(k);
        renormalize(next);
        c = std::move(next);
        return x;
    }

    const CISpace& space_;
    Amplitudes initial_;
};

template <class MakeShot>
std::vector<Shot> parallel_shots(std::size_t n_shots, std::size_t threads, MakeShot make_shot) {
    std::vector<std::optional<Shot>> slots(n_shots);
    const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n_shots));
    if (workers == 1) {
        for (std::size_t i = 0; i < n_shots; ++i) slots[i].emplace(make_shot(i));
    } else {
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = w; i < n_shots; i += workers) slots[i].emplace(make_shot(i));
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    std::vector<Shot> shots;
    shots.reserve(n_shots);
    for (auto& slot : slots) shots.push_back(std::move(*slot));
    return shots;
}

}  // namespace

Shot sample_shot(const MeanFieldState& state, const PointSpreadFunction& psf, std::uint64_t seed,
                 std::uint64_t index) {
    return mean_field_shot(mean_field_samplers(state), state.grid(), psf, seed, index);
}

Shot sample_shot(const CorrelatedState& state, const PointSpreadFunction& psf, std::uint64_t seed,
                 std::uint64_t index, ImagingOrder order) {
    return CorrelatedSampler(state).shot(psf, seed, index, order);
}

std::vector<Shot> sample_shots(const MeanFieldState& state, const PointSpreadFunction& psf,
                               std::uint64_t seed, std::size_t n_shots, std::size_t threads) {
    const MeanFieldSamplers samplers = mean_field_samplers(state);
    return parallel_shots(n_shots, threads, [&](std::size_t i) {
        return mean_field_shot(samplers, state.grid(), psf, seed, i);
    });
}

std::vector<Shot> sample_shots(const CorrelatedState& state, const PointSpreadFunction& psf,
                               std::uint64_t seed, std::size_t n_shots, std::size_t threads,
                               ImagingOrder order) {
    const CorrelatedSampler sampler(state);
    return parallel_shots(n_shots, threads,
                          [&](std::size_t i) { return sampler.shot(psf, seed, i, order); });
}

ShotImage average_images(std::span<const ShotImage> shots) {
    if (shots.empty()) throw Error(Errc::invalid_argument, "cannot average zero shots");
    ShotImage mean = shots.front();
    for (std::size_t s = 1; s < shots.size(); ++s) {
        if (shots[s].species != mean.species) {
            throw Error(Errc::invalid_argument, "cannot average images of different species");
        }
        if (!(shots[s].grid == mean.grid) || shots[s].intensity.size() != mean.intensity.size()) {
            throw Error(Errc::size_mismatch, "cannot average images on different grids");
        }
        for (std::size_t j = 0; j < mean.intensity.size(); ++j) {
            mean.intensity[j] += shots[s].intensity[j];
        }
    }
    const double scale = 1.0 / static_cast<double>(shots.size());
    for (double& v : mean.intensity) v *= scale;
    return mean;
}

ShotImage comoving_average(std::span<const ShotImage> bath_shots,
                           std::span<const double> impurity_positions) {
    if (bath_shots.empty() || bath_shots.size() != impurity_positions.size()) {
        throw Error(Errc::unpaired_shots, "every bath shot needs exactly one impurity position");
    }
    const Grid1D& grid = bath_shots.front().grid;
    ShotImage out{grid, RealVector(grid.n_points(), 0.0), Species::bath, bath_shots.front().seed};
    for (std::size_t s = 0; s < bath_shots.size(); ++s) {
        if (!(bath_shots[s].grid == grid)) {
            throw Error(Errc::size_mismatch, "cannot average images on different grids");
        }
        for (std::size_t j = 0; j < grid.n_points(); ++j) {
            out.intensity[j] +=
                interpolate(grid, bath_shots[s].intensity, grid.x(j) + impurity_positions[s]);
        }
    }
    const double scale = 1.0 / static_cast<double>(bath_shots.size());
    for (double& v : out.intensity) v *= scale;
    return out;
}

std::vector<ShotImage> bath_images(std::span<const Shot> shots) {
    std::vector<ShotImage> out;
    out.reserve(shots.size());
    for (const auto& s : shots) out.push_back(s.bath);
    return out;
}

std::vector<ShotImage> impurity_images(std::span<const Shot> shots) {
    std::vector<ShotImage> out;
    out.reserve(shots.size());
    for (const auto& s : shots) out.push_back(s.impurity);
    return out;
}

std::vector<double> impurity_centroids(std::span<const Shot> shots) {
    std::vector<double> out;
    out.reserve(shots.size());
    for (const auto& s : shots) out.push_back(s.impurity_centroid);
    return out;
}

double l1_distance(std::span<const double> a, std::span<const double> b, const Grid1D& grid) {
    if (a.size() != b.size() || a.size() != grid.n_points()) {
        throw Error(Errc::size_mismatch, "L1 distance needs two images on one grid");
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) sum += std::abs(a[j] - b[j]);
    return sum * grid.spacing();
}

namespace {

RealVector pixel_variance(const std::vector<ShotImage>& images, const ShotImage& mean) {
    RealVector var(mean.intensity.size(), 0.0);
    for (const auto& img : images) {
        for (std::size_t j = 0; j < var.size(); ++j) {
            const double d = img.intensity[j] - mean.intensity[j];
            var[j] += d * d;
        }
    }
    const double scale = 1.0 / static_cast<double>(images.size() - 1);
    for (double& v : var) v *= scale;
    return var;
}

}  // namespace

OrderingReport image_ordering_average_invariance_test(const CorrelatedState& state,
                                                      const PointSpreadFunction& psf,
                                                      std::size_t n_shots, std::uint64_t seed,
                                                      std::size_t threads) {
    const std::size_t count = std::max<std::size_t>(n_shots, 1);
    const auto forward = bath_images(
        sample_shots(state, psf, seed, count, threads, ImagingOrder::bath_first));
    const auto reverse = bath_images(
        sample_shots(state, psf, seed, count, threads, ImagingOrder::impurity_first));
    OrderingReport report{n_shots, false, 0.0, 0.0, true, average_images(forward),
                          average_images(reverse)};
    const Grid1D& grid = report.bath_first.grid;
    report.l1_difference =
        l1_distance(report.bath_first.intensity, report.impurity_first.intensity, grid);
    if (n_shots < 2) return report;

    report.sufficient_statistics = true;
    const RealVector var_f = pixel_variance(forward, report.bath_first);
    const RealVector var_r = pixel_variance(reverse, report.impurity_first);
    const double n = static_cast<double>(n_shots);
    double se = 0.0;
    for (std::size_t j = 0; j < var_f.size(); ++j) se += std::sqrt((var_f[j] + var_r[j]) / n);
    report.standard_error = se * grid.spacing();
    report.consistent = report.l1_difference < 3.0 * report.standard_error;
    return report;
}

}  // namespace polaron
