#include <algorithm>
#include <cmath>
#include <numbers>

#include "doctest.h"
#include "polaron/error.hpp"
#include "polaron/fewbody.hpp"
#include "polaron/observables.hpp"
#include "polaron/singleshot.hpp"

using namespace polaron;

namespace {

// Exact CDF of the piecewise-linear interpolant with zero walls.
struct LinearCdf {
    RealVector knots, cumulative;

    LinearCdf(const Grid1D& g, const RealVector& rho) {
        RealVector vals{0.0};
        vals.insert(vals.end(), rho.begin(), rho.end());
        vals.push_back(0.0);
        const double h = g.spacing();
        cumulative.push_back(0.0);
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            knots.push_back(g.x_min() + h * i);
            cumulative.push_back(cumulative.back() + 0.5 * h * (vals[i] + vals[i + 1]));
        }
        knots.push_back(g.x_max());
        slopes = vals;
        step = h;
    }

    double operator()(double x) const {
        if (x <= knots.front()) return 0.0;
        if (x >= knots.back()) return 1.0;
        const auto i = static_cast<std::size_t>((x - knots.front()) / step);
        const double u = x - knots[i];
        const double a = slopes[i], b = slopes[i + 1];
        const double part = a * u + 0.5 * (b - a) / step * u * u;
        return (cumulative[i] + part) / cumulative.back();
    }

    RealVector slopes;
    double step = 0.0;
};

double ks_statistic(RealVector samples, const LinearCdf& cdf) {
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double d = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double f = cdf(samples[i]);
        d = std::max({d, std::abs(f - i / n), std::abs((i + 1) / n - f)});
    }
    return d;
}

RealVector gaussian_density(const Grid1D& g, double centre, double sigma) {
    RealVector v(g.n_points());
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double d = g.x(j) - centre;
        v[j] = std::exp(-d * d / (2.0 * sigma * sigma));
    }
    return v;
}

RealVector normalized_mode(const Grid1D& g, double centre) {
    RealVector v = gaussian_density(g, centre, 1.0);
    double s = 0.0;
    for (double x : v) s += x * x * g.spacing();
    for (double& x : v) x /= std::sqrt(s);
    return v;
}

// (|0,0> + |1,1>) / sqrt 2 with one bath boson and well-separated modes.
CorrelatedState bell_state() {
    const Grid1D g = Grid1D::build(-40.0, 40.0, 801);
    MixtureParams p;
    p.n_bath = 1;
    std::vector<RealVector> modes{normalized_mode(g, -10.0), normalized_mode(g, 10.0)};
    auto space = std::make_shared<const CISpace>(p, custom_mode_basis(g, modes, modes));
    CorrelatedState s{space, Eigen::VectorXcd::Zero(4), 0.0};
    const FockSpace& f = space->bath_space();
    for (std::size_t mode = 0; mode < 2; ++mode) {
        const std::size_t b = f.index_of(std::uint64_t{1} << (4 * mode));
        s.amplitudes(static_cast<Eigen::Index>(b * 2 + mode)) = 1.0 / std::numbers::sqrt2;
    }
    return s;
}

MeanFieldState mean_field_state(double x0) {
    MixtureParams p;
    p.n_bath = 100;
    p.x0 = x0;
    return prepare_initial_state(p, Grid1D::build(-80.0, 80.0, 1000));
}

}  // namespace

TEST_CASE("generators are reproducible and uniform01 stays in range") {
    ShotRng a = shot_rng(42, 7), b = shot_rng(42, 7), c = shot_rng(42, 8), d = shot_rng(42, 7, 1);
    const auto va = a();
    CHECK(va == b());
    CHECK(va != c());
    CHECK(va != d());
    double lo = 1.0, hi = 0.0, mean = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = uniform01(a);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        mean += u;
    }
    CHECK(lo >= 0.0);
    CHECK(hi < 1.0);
    CHECK(mean / 1e5 == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("rejection sampler reproduces its density") {
    SUBCASE("flat") {
        const Grid1D g = Grid1D::build(-1.0, 1.0, 199);
        const RealVector rho(g.n_points(), 2.5);
        const RejectionSampler sampler(g, rho);
        ShotRng rng = shot_rng(1, 0);
        RealVector xs(10000);
        for (double& x : xs) x = sampler.draw(rng);
        CHECK(ks_statistic(xs, LinearCdf(g, rho)) < 1.63 / std::sqrt(1e4));
    }
    SUBCASE("bath profile") {
        const MeanFieldState s = mean_field_state(0.0);
        const RealVector rho = one_body_density(s, Species::bath);
        const RejectionSampler sampler(s.grid(), rho);
        ShotRng rng = shot_rng(2, 0);
        RealVector xs(100000);
        for (double& x : xs) x = sampler.draw(rng);
        CHECK(ks_statistic(xs, LinearCdf(s.grid(), rho)) < 1.63 / std::sqrt(1e5));
    }
    const Grid1D g = Grid1D::build(-1.0, 1.0, 9);
    CHECK_THROWS_AS(RejectionSampler(g, RealVector(9, 0.0)), Error);
    CHECK_THROWS_AS(RejectionSampler(g, RealVector(3, 1.0)), Error);
}

TEST_CASE("rendering and averaging") {
    const Grid1D g = Grid1D::build(-20.0, 20.0, 1000);
    const PointSpreadFunction psf = PointSpreadFunction::make(1.0);
    CHECK_THROWS_AS(PointSpreadFunction::make(0.0), Error);

    const RealVector one{0.3};
    const ShotImage img = render_image(g, one, psf, Species::bath, 5);
    CHECK(img.total() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(img.centroid() == doctest::Approx(0.3).epsilon(1e-9));
    for (std::size_t j = 0; j < g.n_points(); ++j) {
        const double d = g.x(j) - 0.3;
        const double exact = std::abs(d) > 10.0
                                 ? 0.0
                                 : std::exp(-d * d / 2.0) / std::sqrt(2.0 * std::numbers::pi);
        CHECK(img.intensity[j] == doctest::Approx(exact).epsilon(1e-12));
    }

    const std::vector<ShotImage> same(5, img);
    const ShotImage avg = average_images(same);
    for (std::size_t j = 0; j < g.n_points(); ++j) {
        CHECK(avg.intensity[j] == doctest::Approx(img.intensity[j]).epsilon(1e-14));
    }
    std::vector<ShotImage> mixed{img, img};
    mixed[1].species = Species::impurity;
    CHECK_THROWS_AS(average_images(mixed), Error);
    CHECK_THROWS_AS(average_images(std::vector<ShotImage>{}), Error);
}

TEST_CASE("mean-field shots carry the particle number and follow the convolved density") {
    const MeanFieldState s = mean_field_state(3.0);
    const PointSpreadFunction psf = PointSpreadFunction::make(1.0);
    const Shot shot = sample_shot(s, psf, 9);
    CHECK(shot.bath_positions.size() == 100);
    CHECK(shot.bath.total() == doctest::Approx(100.0).epsilon(0.01));
    CHECK(shot.impurity.total() == doctest::Approx(1.0).epsilon(0.01));
    CHECK(shot.impurity_centroid == doctest::Approx(shot.impurity_position).epsilon(1e-6));

    const auto shots = sample_shots(s, psf, 9, 800, 2);
    const ShotImage avg = average_images(bath_images(shots));
    const RealVector expected = psf_convolve(one_body_density(s, Species::bath), s.grid(), psf);
    CHECK(l1_distance(avg.intensity, expected, s.grid()) / 100.0 < 0.02);
}

TEST_CASE("shots do not depend on the thread count") {
    const MeanFieldState s = mean_field_state(0.0);
    const PointSpreadFunction psf = PointSpreadFunction::make(1.0);
    const auto one = sample_shots(s, psf, 77, 12, 1);
    const auto four = sample_shots(s, psf, 77, 12, 4);
    for (std::size_t k = 0; k < one.size(); ++k) {
        CHECK(one[k].bath_positions == four[k].bath_positions);
        CHECK(one[k].impurity_position == four[k].impurity_position);
        CHECK(one[k].bath.intensity == four[k].bath.intensity);
    }
    const auto bell = bell_state();
    const auto c1 = sample_shots(bell, psf, 3, 6, 1);
    const auto c3 = sample_shots(bell, psf, 3, 6, 3);
    for (std::size_t k = 0; k < c1.size(); ++k) {
        CHECK(c1[k].bath_positions == c3[k].bath_positions);
        CHECK(c1[k].impurity_position == c3[k].impurity_position);
    }
}

TEST_CASE("sequential annihilation preserves Bell correlations") {
    const CorrelatedState s = bell_state();
    const PointSpreadFunction psf = PointSpreadFunction::make(1.0);
    for (ImagingOrder order : {ImagingOrder::bath_first, ImagingOrder::impurity_first}) {
        const auto shots = sample_shots(s, psf, 11, 400, 2, order);
        std::size_t left = 0;
        for (const auto& shot : shots) {
            REQUIRE(shot.bath_positions.size() == 1);
            const double xb = shot.bath_positions[0];
            CHECK((xb < 0.0) == (shot.impurity_position < 0.0));
            if (xb < 0.0) ++left;
        }
        // Binomial(400, 1/2) within 4 sigma.
        CHECK(std::abs(static_cast<double>(left) - 200.0) < 40.0);
    }
}

TEST_CASE("comoving average") {
    const Grid1D g = Grid1D::build(-30.0, 30.0, 600);
    const PointSpreadFunction psf = PointSpreadFunction::make(1.0);
    SUBCASE("rigid shift") {
        std::vector<ShotImage> baths;
        std::vector<double> centres;
        for (int k = 0; k < 5; ++k) {
            const double x = -4.0 + 2.0 * k;
            const RealVector pos{x + 2.0};
            baths.push_back(render_image(g, pos, psf, Species::bath, 0));
            centres.push_back(x);
        }
        const ShotImage co = comoving_average(baths, centres);
        const auto peak = std::max_element(co.intensity.begin(), co.intensity.end());
        CHECK(g.x(static_cast<std::size_t>(peak - co.intensity.begin())) ==
              doctest::Approx(2.0).epsilon(0.05));
        CHECK_THROWS_AS(comoving_average(baths, std::vector<double>{0.0}), Error);
    }
    SUBCASE("product state equals the cross-correlation") {
        const MeanFieldState s = mean_field_state(3.0);
        const auto shots = sample_shots(s, psf, 21, 1500, 2);
        const ShotImage co = comoving_average(bath_images(shots), impurity_centroids(shots));
        const Grid1D& sg = s.grid();
        const RealVector conv = psf_convolve(one_body_density(s, Species::bath), sg, psf);
        const RealVector rho_i = one_body_density(s, Species::impurity);
        RealVector oracle(sg.n_points(), 0.0);
        for (std::size_t r = 0; r < sg.n_points(); ++r) {
            for (std::size_t j = 0; j < sg.n_points(); ++j) {
                oracle[r] += sg.spacing() * rho_i[j] * interpolate(sg, conv, sg.x(r) + sg.x(j));
            }
        }
        CHECK(l1_distance(co.intensity, oracle, sg) / 100.0 < 0.03);
    }
}

TEST_CASE("attractive CI ground state bunches the bath around the impurity") {
    MixtureParams p;
    p.n_bath = 2;
    p.g_bi_post = -1.0;
    const Grid1D g = Grid1D::build(-80.0, 80.0, 1000);
    auto space = std::make_shared<const CISpace>(p, harmonic_mode_basis(p, g, 6, 6));
    const CorrelatedState gs = ground_state(build_hamiltonian(space, p.g_bi_post));
    const PointSpreadFunction psf = PointSpreadFunction::make(1.0);
    const auto shots = sample_shots(gs, psf, 5, 1500, 2);
    const auto baths = bath_images(shots);
    const auto centres = impurity_centroids(shots);
    std::vector<double> shuffled(centres.size());
    for (std::size_t k = 0; k < centres.size(); ++k) shuffled[k] = centres[(k + 1) % centres.size()];
    const double paired = interpolate(g, comoving_average(baths, centres).intensity, 0.0);
    const double unpaired = interpolate(g, comoving_average(baths, shuffled).intensity, 0.0);
    CHECK(paired > 1.1 * unpaired);
}

TEST_CASE("imaging order invariance of averaged bath images") {
    const CorrelatedState s = bell_state();
    const PointSpreadFunction psf = PointSpreadFunction::make(1.0);
    const OrderingReport few = image_ordering_average_invariance_test(s, psf, 1, 3);
    CHECK_FALSE(few.sufficient_statistics);
    const OrderingReport r = image_ordering_average_invariance_test(s, psf, 400, 3, 2);
    CHECK(r.sufficient_statistics);
    CHECK(r.n_shots == 400);
    CHECK(r.standard_error > 0.0);
    CHECK(r.consistent);
}
