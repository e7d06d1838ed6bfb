#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "lawline/laws.hpp"
#include "lawline/nlls.hpp"
#include "lawline/rng.hpp"

using namespace lawline;

namespace {

struct LineModel {
    double operator()(std::span<const double> p, const double& x) const { return p[0] * x; }
};

struct ConstModel {
    double operator()(std::span<const double> p, const double&) const { return p[0]; }
};

struct PowerModel {
    double operator()(std::span<const double> p, const double& x) const {
        return p[0] * std::pow(x, p[1]);
    }
};

const std::vector<ParamBounds> kWide1 = {{-1e6, 1e6}};
const std::vector<ParamBounds> kWide2 = {{-1e6, 1e6}, {-1e6, 1e6}};

} // namespace

TEST_CASE("exact linear data recovers the slope with zero sse", "[nlls]") {
    const std::vector<double> xs = {1.0, 2.0, 3.0};
    const std::vector<double> ys = {2.0, 4.0, 6.0};
    const std::vector<std::vector<double>> starts = {{0.5}};
    const auto fit = nlls_fit<double>(LineModel{}, xs, ys, kWide1, starts);
    CHECK_THAT(fit.params[0], Catch::Matchers::WithinRel(2.0, 1e-12));
    CHECK(fit.diagnostics.sse < 1e-20);
    CHECK(fit.diagnostics.converged);
}

TEST_CASE("constant model finds the mean of equal targets", "[nlls]") {
    const std::vector<double> xs = {0.0, 1.0};
    const std::vector<double> ys = {5.0, 5.0};
    const std::vector<std::vector<double>> starts = {{1.0}};
    const auto fit = nlls_fit<double>(ConstModel{}, xs, ys, kWide1, starts);
    CHECK_THAT(fit.params[0], Catch::Matchers::WithinRel(5.0, 1e-12));
}

TEST_CASE("noiseless power-law recovery within 1e-6 relative", "[nlls]") {
    std::vector<double> xs, ys;
    for (int i = 0; i < 50; ++i) {
        const double x = 0.1 * std::pow(10.0 / 0.1, i / 49.0);
        xs.push_back(x);
        ys.push_back(2.0 * std::pow(x, 0.7));  // the generator is the oracle
    }
    const std::vector<ParamBounds> bounds = {{1e-12, 1e6}, {1e-8, 10.0}};
    const std::vector<std::vector<double>> starts = {{1.0, 1.0}, {0.5, 0.5}};
    const auto fit = nlls_fit<double>(PowerModel{}, xs, ys, bounds, starts);
    CHECK_THAT(fit.params[0], Catch::Matchers::WithinRel(2.0, 1e-6));
    CHECK_THAT(fit.params[1], Catch::Matchers::WithinRel(0.7, 1e-6));
    CHECK(fit.diagnostics.sse <= 1e-10 * static_cast<double>(xs.size()));
}

TEST_CASE("error paths", "[nlls]") {
    SECTION("insufficient data is underdetermined") {
        const std::vector<double> xs = {1.0, 2.0};
        const std::vector<double> ys = {1.0, 2.0};
        const std::vector<std::vector<double>> starts = {{1.0, 1.0}};
        CHECK_THROWS_AS(nlls_fit<double>(PowerModel{}, xs, ys, kWide2, starts),
                        UnderdeterminedError);
    }

    SECTION("every start diverging raises a convergence error") {
        struct NanModel {
            double operator()(std::span<const double>, const double&) const {
                return std::numeric_limits<double>::quiet_NaN();
            }
        };
        const std::vector<double> xs = {1.0, 2.0, 3.0};
        const std::vector<double> ys = {1.0, 2.0, 3.0};
        const std::vector<std::vector<double>> starts = {{1.0}, {2.0}};
        CHECK_THROWS_AS(nlls_fit<double>(NanModel{}, xs, ys, kWide1, starts), ConvergenceError);
    }

    SECTION("degenerate bounds are rejected") {
        const std::vector<double> xs = {1.0, 2.0, 3.0};
        const std::vector<double> ys = {1.0, 2.0, 3.0};
        const std::vector<ParamBounds> bad = {{1.0, 1.0}};
        const std::vector<std::vector<double>> starts = {{1.0}};
        CHECK_THROWS_AS(nlls_fit<double>(LineModel{}, xs, ys, bad, starts), ValidationError);
    }
}

TEST_CASE("bounds clamp the solution", "[nlls]") {
    const std::vector<double> xs = {1.0, 2.0, 3.0};
    const std::vector<double> ys = {5.0, 10.0, 15.0};  // wants slope 5
    const std::vector<ParamBounds> bounds = {{1.0, 3.0}};
    const std::vector<std::vector<double>> starts = {{2.0}};
    const auto fit = nlls_fit<double>(LineModel{}, xs, ys, bounds, starts);
    CHECK(fit.params[0] == 3.0);
}

TEST_CASE("deterministic: identical inputs give bit-identical parameters", "[nlls][property]") {
    std::vector<double> xs, ys;
    auto rng = CounterRng::keyed(77, 0);
    for (int i = 0; i < 40; ++i) {
        const double x = 0.2 + 4.0 * rng.next_unit();
        xs.push_back(x);
        ys.push_back(1.7 * std::pow(x, 1.2) + 0.05 * rng.next_gaussian());
    }
    const std::vector<ParamBounds> bounds = {{1e-12, 1e6}, {1e-8, 10.0}};
    const std::vector<std::vector<double>> starts = {{0.5, 0.5}, {1.0, 1.0}, {2.0, 2.0}};
    const auto a = nlls_fit<double>(PowerModel{}, xs, ys, bounds, starts);
    const auto b = nlls_fit<double>(PowerModel{}, xs, ys, bounds, starts);
    REQUIRE(a.params.size() == b.params.size());
    CHECK(std::memcmp(a.params.data(), b.params.data(), a.params.size() * sizeof(double)) == 0);
    CHECK(a.diagnostics.sse == b.diagnostics.sse);
    CHECK(a.diagnostics.best_start_index == b.diagnostics.best_start_index);
}

TEST_CASE("sse ties break toward the lexicographically smaller vector", "[nlls]") {
    // p^2 * x fits y = 4x equally well at p = 2 and p = -2
    struct SquareModel {
        double operator()(std::span<const double> p, const double& x) const {
            return p[0] * p[0] * x;
        }
    };
    const std::vector<double> xs = {1.0, 2.0, 3.0};
    const std::vector<double> ys = {4.0, 8.0, 12.0};
    const std::vector<std::vector<double>> starts = {{2.1}, {-2.1}};
    const auto fit = nlls_fit<double>(SquareModel{}, xs, ys, kWide1, starts);
    CHECK_THAT(fit.params[0], Catch::Matchers::WithinRel(-2.0, 1e-10));
}

TEST_CASE("analytic jacobians match central differences", "[nlls][property]") {
    auto rng = CounterRng::keyed(5150, 0);

    SECTION("compute-to-loss model") {
        const ComputeToLossModel model;
        const std::vector<ParamBounds> bounds = {
            {0.0, 10.0}, {1e-12, 1e12}, {1e-12, 1e12}, {1e-8, 2.0}, {1e-8, 2.0}};
        for (int trial = 0; trial < 25; ++trial) {
            const std::vector<double> p = {3.0 * rng.next_unit(),
                                           50.0 + 1e3 * rng.next_unit(),
                                           100.0 + 1e4 * rng.next_unit(),
                                           0.15 + 0.8 * rng.next_unit(),
                                           0.15 + 0.8 * rng.next_unit()};
            const NdPoint x{1e3 + 1e6 * rng.next_unit(), 1e4 + 1e7 * rng.next_unit()};
            double analytic[5], numeric[5];
            model.jacobian(p, x, analytic);
            numeric_jacobian_row(model, p, x, bounds, numeric);
            for (int j = 0; j < 5; ++j)
                REQUIRE_THAT(analytic[j],
                             Catch::Matchers::WithinRel(numeric[j], 1e-5) ||
                                 Catch::Matchers::WithinAbs(numeric[j], 1e-9));
        }
    }

    SECTION("shifted power model") {
        const ShiftedPowerModel model{1.5, 2.0};
        const std::vector<ParamBounds> bounds = {{1e-12, 1e6}, {1e-8, 10.0}};
        for (int trial = 0; trial < 25; ++trial) {
            const std::vector<double> p = {0.1 + 3.0 * rng.next_unit(),
                                           0.3 + 2.0 * rng.next_unit()};
            const double x = 1.6 + 3.0 * rng.next_unit();
            double analytic[2], numeric[2];
            model.jacobian(p, x, analytic);
            numeric_jacobian_row(model, p, x, bounds, numeric);
            for (int j = 0; j < 2; ++j)
                REQUIRE_THAT(analytic[j],
                             Catch::Matchers::WithinRel(numeric[j], 1e-5) ||
                                 Catch::Matchers::WithinAbs(numeric[j], 1e-9));
        }
    }
}
