#include <catch2/catch_amalgamated.hpp>

#include "snrsel/data.hpp"
#include "snrsel/simulation.hpp"

using namespace snrsel;

TEST_CASE("generator hits the requested SNR profile exactly", "[simulation]") {
    SimSpec spec;
    spec.n = 40;
    spec.d_noise = 20;
    spec.seed = 1;
    auto [data, truth] = generate(spec);
    REQUIRE(data.n() == 40);
    REQUIRE(data.dim() == 30);

    const auto profile = spec.resolved_profile();
    for (Index i = 0; i < kSignalFeatures; ++i) {
        const double sig = truth.W_true.row(i).squaredNorm();
        REQUIRE(std::abs(sig / truth.psi_true[i] - profile[static_cast<std::size_t>(i)]) <= 1e-12);
        REQUIRE(truth.snr_true[i] == profile[static_cast<std::size_t>(i)]);
    }
    for (Index i = kSignalFeatures; i < data.dim(); ++i) {
        REQUIRE(truth.snr_true[i] == 0.0);
        REQUIRE(truth.W_true.row(i).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("default profile is 0.5 through 1.4", "[simulation]") {
    SimSpec spec;
    const auto profile = spec.resolved_profile();
    REQUIRE(profile.size() == 10);
    for (std::size_t i = 0; i < profile.size(); ++i)
        REQUIRE(profile[i] == Catch::Approx(0.5 + static_cast<double>(i) / 10.0));
}

TEST_CASE("custom profile is honored", "[simulation]") {
    SimSpec spec;
    spec.n = 30;
    spec.d_noise = 5;
    spec.snr_profile = {2, 2, 2, 2, 2, 2, 2, 2, 2, 2};
    auto [data, truth] = generate(spec);
    (void)data;
    for (Index i = 0; i < kSignalFeatures; ++i) REQUIRE(truth.snr_true[i] == 2.0);
}

TEST_CASE("noise-feature variances stay inside the sampling interval", "[simulation]") {
    SimSpec spec;
    spec.n = 10;
    spec.d_noise = 500;
    spec.r = 3;
    spec.seed = 9;
    auto [data, truth] = generate(spec);
    (void)data;
    const double lo = 3.0 / 1.4;
    const double hi = 3.0 / 0.5;
    for (Index i = kSignalFeatures; i < spec.dim(); ++i) {
        REQUIRE(truth.psi_true[i] >= lo);
        REQUIRE(truth.psi_true[i] < hi);
    }
}

TEST_CASE("same seed regenerates bit-identical data", "[simulation]") {
    SimSpec spec;
    spec.n = 64;
    spec.d_noise = 30;
    spec.seed = 77;
    auto [a, truth_a] = generate(spec);
    auto [b, truth_b] = generate(spec);
    REQUIRE((a.values - b.values).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((truth_a.W_true - truth_b.W_true).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((truth_a.psi_true - truth_b.psi_true).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("different seeds give different data", "[simulation]") {
    SimSpec a_spec, b_spec;
    a_spec.n = b_spec.n = 16;
    a_spec.d_noise = b_spec.d_noise = 4;
    a_spec.seed = 1;
    b_spec.seed = 2;
    auto [a, ta] = generate(a_spec);
    auto [b, tb] = generate(b_spec);
    (void)ta;
    (void)tb;
    REQUIRE((a.values - b.values).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("empirical covariance approaches the model covariance", "[simulation]") {
    SimSpec small, large;
    small.n = 2000;
    large.n = 40000;
    small.d_noise = large.d_noise = 10;
    small.seed = large.seed = 5;

    const auto gap = [](const SimSpec& spec) {
        auto [data, truth] = generate(spec);
        const Matrix target = truth.W_true * truth.W_true.transpose() +
                              Matrix(truth.psi_true.asDiagonal());
        const Matrix cov = sample_covariance(center(data));
        return (cov - target).cwiseAbs().maxCoeff();
    };
    const double gap_small = gap(small);
    const double gap_large = gap(large);
    REQUIRE(gap_large < gap_small);
    REQUIRE(gap_large < 0.25);
}

TEST_CASE("mad is the mean absolute deviation", "[simulation]") {
    Vector a(2), b(2);
    a << 0, 0;
    b << 1, 3;
    REQUIRE(mad(a, b) == Catch::Approx(2.0));
    REQUIRE(mad(b, b) == 0.0);
    Vector c(3);
    REQUIRE_THROWS_AS(mad(a, c), PreconditionError);
}

TEST_CASE("spec validation rejects bad parameters", "[simulation]") {
    SimSpec spec;
    SECTION("n too small") {
        spec.n = 1;
        REQUIRE_THROWS_AS(spec.validate(), PreconditionError);
    }
    SECTION("negative d_noise") {
        spec.d_noise = -1;
        REQUIRE_THROWS_AS(spec.validate(), PreconditionError);
    }
    SECTION("zero rank") {
        spec.r = 0;
        REQUIRE_THROWS_AS(spec.validate(), PreconditionError);
    }
    SECTION("wrong profile length") {
        spec.snr_profile = {1.0, 2.0};
        REQUIRE_THROWS_AS(spec.validate(), PreconditionError);
    }
    SECTION("non-positive profile entry") {
        spec.snr_profile = {1, 1, 1, 1, 0, 1, 1, 1, 1, 1};
        REQUIRE_THROWS_AS(spec.validate(), PreconditionError);
    }
}
