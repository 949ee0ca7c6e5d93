#include <catch2/catch_amalgamated.hpp>

#include <limits>

#include "snrsel/data.hpp"
#include "snrsel/rng.hpp"

using namespace snrsel;

TEST_CASE("center removes the column means", "[data]") {
    Matrix x(2, 2);
    x << 1, 3, 3, 5;
    const CenteredData c = center(x);
    REQUIRE(c.mean[0] == Catch::Approx(2.0));
    REQUIRE(c.mean[1] == Catch::Approx(4.0));
    Matrix expected(2, 2);
    expected << -1, -1, 1, 1;
    REQUIRE((c.values - expected).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("center leaves zero-mean data unchanged", "[data]") {
    Matrix x(4, 3);
    x << 1, 2, -1, -1, -2, 1, 2, 4, -2, -2, -4, 2;
    const CenteredData c = center(x);
    REQUIRE(c.mean.cwiseAbs().maxCoeff() == 0.0);
    REQUIRE((c.values - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("centered columns sum to numerical zero", "[data]") {
    Rng rng(5);
    const Matrix x = rng.normal_matrix(100, 5) * 10.0;
    const CenteredData c = center(x);
    const double max_abs = x.cwiseAbs().maxCoeff();
    const double bound = 1e-9 * static_cast<double>(x.rows()) * max_abs;
    REQUIRE(c.values.colwise().sum().cwiseAbs().maxCoeff() <= bound);
}

TEST_CASE("adding the mean back restores the input", "[data]") {
    Rng rng(6);
    const Matrix x = rng.normal_matrix(50, 8) * 3.0;
    const CenteredData c = center(x);
    const Matrix rebuilt = c.values.rowwise() + c.mean.transpose();
    REQUIRE((rebuilt - x).cwiseAbs().maxCoeff() <= 1e-12 * x.cwiseAbs().maxCoeff());
}

TEST_CASE("center needs at least two rows", "[data]") {
    Matrix x(1, 3);
    x << 1, 2, 3;
    REQUIRE_THROWS_AS(center(x), PreconditionError);
}

TEST_CASE("center rejects non-finite data", "[data]") {
    DataMatrix data;
    data.values = Matrix::Zero(3, 2);
    data.values(1, 1) = std::numeric_limits<double>::quiet_NaN();
    REQUIRE_THROWS_AS(center(data), PreconditionError);
}

TEST_CASE("partition splits rows by label and keeps their order", "[data]") {
    DataMatrix data;
    data.values = Matrix(4, 2);
    data.values << 1, 2, 3, 4, 5, 6, 7, 8;
    data.labels = std::vector<std::uint32_t>{0, 1, 0, 1};
    const auto parts = partition_by_class(data);
    REQUIRE(parts.size() == 2);
    REQUIRE(parts.at(0).n() == 2);
    REQUIRE(parts.at(1).n() == 2);
    REQUIRE(parts.at(0).values(0, 0) == 1);
    REQUIRE(parts.at(0).values(1, 0) == 5);
    REQUIRE(parts.at(1).values(0, 0) == 3);
    REQUIRE(parts.at(1).values(1, 0) == 7);
    REQUIRE_FALSE(parts.at(0).labels.has_value());
}

TEST_CASE("partition of a single class returns the full data", "[data]") {
    DataMatrix data;
    data.values = Matrix::Random(5, 3);
    data.labels = std::vector<std::uint32_t>(5, 9);
    const auto parts = partition_by_class(data);
    REQUIRE(parts.size() == 1);
    REQUIRE((parts.at(9).values - data.values).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("partition sizes follow the label multiset", "[data]") {
    DataMatrix data;
    data.values = Matrix::Random(10, 2);
    data.labels = std::vector<std::uint32_t>{2, 0, 0, 1, 0, 2, 0, 0, 1, 2};
    const auto parts = partition_by_class(data);
    REQUIRE(parts.at(0).n() == 5);
    REQUIRE(parts.at(1).n() == 2);
    REQUIRE(parts.at(2).n() == 3);
}

TEST_CASE("partition requires labels", "[data]") {
    DataMatrix data;
    data.values = Matrix::Random(4, 2);
    REQUIRE_THROWS_AS(partition_by_class(data), PreconditionError);
}

TEST_CASE("partition concatenation is a row permutation of the input", "[data]") {
    Rng rng(17);
    DataMatrix data;
    data.values = rng.normal_matrix(20, 3);
    std::vector<std::uint32_t> labels(20);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<std::uint32_t>(i % 4);
    data.labels = labels;

    const auto parts = partition_by_class(data);
    Index total = 0;
    for (const auto& [id, part] : parts) {
        // Every row of the part appears verbatim in the source, in source order.
        Index cursor = 0;
        for (Index i = 0; i < part.n(); ++i) {
            bool found = false;
            for (; cursor < data.n(); ++cursor) {
                if ((data.values.row(cursor) - part.values.row(i)).cwiseAbs().maxCoeff() == 0.0 &&
                    labels[static_cast<std::size_t>(cursor)] == id) {
                    found = true;
                    ++cursor;
                    break;
                }
            }
            REQUIRE(found);
        }
        total += part.n();
    }
    REQUIRE(total == data.n());
}

TEST_CASE("sample covariance matches hand computation", "[data]") {
    Matrix x(2, 2);
    x << 1, 3, 3, 5;
    const Matrix cov = sample_covariance(center(x));
    REQUIRE(cov(0, 0) == Catch::Approx(2.0));
    REQUIRE(cov(0, 1) == Catch::Approx(2.0));
    REQUIRE(cov(1, 0) == Catch::Approx(2.0));
    REQUIRE(cov(1, 1) == Catch::Approx(2.0));
}

TEST_CASE("orthogonal zero-mean columns have zero covariance", "[data]") {
    Matrix x(4, 2);
    x << 1, 1, 1, -1, -1, 1, -1, -1;
    const Matrix cov = sample_covariance(center(x));
    REQUIRE(std::abs(cov(0, 1)) < 1e-15);
    REQUIRE(std::abs(cov(1, 0)) < 1e-15);
}

TEST_CASE("sample covariance agrees with the direct double loop", "[data]") {
    Rng rng(23);
    const Matrix x = rng.normal_matrix(200, 4);
    const CenteredData c = center(x);
    const Matrix cov = sample_covariance(c);

    Matrix oracle = Matrix::Zero(4, 4);
    for (Index a = 0; a < 4; ++a)
        for (Index b = 0; b < 4; ++b) {
            double sum = 0.0;
            for (Index i = 0; i < 200; ++i) sum += c.values(i, a) * c.values(i, b);
            oracle(a, b) = sum / 199.0;
        }
    REQUIRE((cov - oracle).cwiseAbs().maxCoeff() < 1e-10);
    REQUIRE((cov - cov.transpose()).cwiseAbs().maxCoeff() == 0.0);
}
