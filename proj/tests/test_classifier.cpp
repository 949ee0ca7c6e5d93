#include <catch2/catch_amalgamated.hpp>

#include <Eigen/QR>

#include "snrsel/classifier.hpp"
#include "snrsel/data_io.hpp"
#include "snrsel/estimators.hpp"
#include "snrsel/rng.hpp"
#include "snrsel/simulation.hpp"

using namespace snrsel;

namespace {

Matrix orthobasis(const Matrix& a) {
    Eigen::HouseholderQR<Matrix> qr(a);
    return qr.householderQ() * Matrix::Identity(a.rows(), a.cols());
}

// Class restriction of the model covariance: W_S W_S^T + diag(psi_S).
Matrix restricted_cov(const LowRankModel& model, const std::vector<Index>& selected) {
    const Index m = static_cast<Index>(selected.size());
    Matrix w(m, model.rank);
    Vector psi(m);
    for (Index k = 0; k < m; ++k) {
        w.row(k) = model.loadings.row(selected[static_cast<std::size_t>(k)]);
        psi[k] = model.noise_variances[selected[static_cast<std::size_t>(k)]];
    }
    return w * w.transpose() + Matrix(psi.asDiagonal());
}

Vector gather(const Vector& x, const std::vector<Index>& selected) {
    Vector out(static_cast<Index>(selected.size()));
    for (std::size_t k = 0; k < selected.size(); ++k) out[static_cast<Index>(k)] = x[selected[k]];
    return out;
}

ClassModel make_class(std::uint32_t id, const Matrix& rows, Index rank, Index m) {
    FitOptions opts;
    opts.rank = rank;
    LowRankModel model = fit_lfa(center(rows), opts);
    auto ranking = select_top_m(model, m);
    return build_class_model(id, std::move(model), std::move(ranking));
}

} // namespace

TEST_CASE("direct mahalanobis matches hand cases", "[classifier]") {
    Vector x(2), mean(2);
    x << 3, 4;
    mean << 0, 0;
    REQUIRE(mahalanobis_direct(mean, mean, Matrix::Identity(2, 2)) == 0.0);
    REQUIRE(mahalanobis_direct(x, mean, Matrix::Identity(2, 2)) == Catch::Approx(25.0));

    Matrix cov(2, 2);
    cov << 4, 0, 0, 1;
    REQUIRE(mahalanobis_direct(x, mean, cov) == Catch::Approx(9.0 / 4.0 + 16.0));
}

TEST_CASE("direct mahalanobis agrees with the explicit inverse", "[classifier]") {
    Rng rng(51);
    const Index m = 6;
    const Matrix a = rng.normal_matrix(m, m);
    const Matrix cov = a * a.transpose() + Matrix::Identity(m, m);
    const Vector x = rng.normal_vector(m);
    const Vector mean = rng.normal_vector(m);
    const Vector diff = x - mean;
    const double oracle = diff.dot(cov.inverse() * diff);
    const double fast = mahalanobis_direct(x, mean, cov);
    REQUIRE(std::abs(fast - oracle) <= 1e-9 * std::max(1.0, std::abs(oracle)));
}

TEST_CASE("direct mahalanobis rejects indefinite covariances", "[classifier]") {
    Matrix cov(2, 2);
    cov << 1, 0, 0, -1;
    Vector x = Vector::Zero(2);
    REQUIRE_THROWS_AS(mahalanobis_direct(x, x, cov), NumericError);
}

TEST_CASE("r_score with no factors is the scaled euclidean distance", "[classifier]") {
    Vector x(3), mean(3);
    x << 1, 2, 3;
    mean << 0, 0, 0;
    const Matrix basis(3, 0);
    const Vector d_vec(0);
    REQUIRE(r_score(x, mean, basis, d_vec, 2.0) == Catch::Approx(14.0 / 2.0));
    REQUIRE(r_score(mean, mean, basis, d_vec, 2.0) == 0.0);
}

TEST_CASE("r_score equals the dense inverse on structured covariances", "[classifier]") {
    Rng rng(52);
    const Index m = 50, r = 3;
    const Matrix basis = orthobasis(rng.normal_matrix(m, r));
    Vector d_vec(r);
    for (Index j = 0; j < r; ++j) d_vec[j] = rng.uniform(0.5, 4.0);
    const double lambda = 0.7;

    const Matrix cov = basis * d_vec.asDiagonal() * basis.transpose() +
                       lambda * Matrix::Identity(m, m);
    for (int trial = 0; trial < 20; ++trial) {
        const Vector x = rng.normal_vector(m) * 2.0;
        const Vector mean = rng.normal_vector(m);
        const double fast = r_score(x, mean, basis, d_vec, lambda);
        const double oracle = mahalanobis_direct(x, mean, cov);
        REQUIRE(std::abs(fast - oracle) <= 1e-9 * std::max(1.0, std::abs(oracle)));
    }
}

TEST_CASE("r_score validates its inputs", "[classifier]") {
    Rng rng(53);
    const Index m = 10, r = 2;
    const Matrix basis = orthobasis(rng.normal_matrix(m, r));
    const Vector d_vec = Vector::Constant(r, 1.0);
    const Vector x = rng.normal_vector(m);

    SECTION("lambda must be positive") {
        REQUIRE_THROWS_AS(r_score(x, x, basis, d_vec, 0.0), PreconditionError);
    }
    SECTION("d_vec must be non-negative") {
        Vector bad = d_vec;
        bad[0] = -0.5;
        REQUIRE_THROWS_AS(r_score(x, x, basis, bad, 1.0), PreconditionError);
    }
    SECTION("basis must have orthonormal columns") {
        REQUIRE_THROWS_AS(r_score(x, x, basis * 2.0, d_vec, 1.0), PreconditionError);
    }
    SECTION("dimensions must line up") {
        Vector short_x = Vector::Zero(m - 1);
        REQUIRE_THROWS_AS(r_score(short_x, x, basis, d_vec, 1.0), PreconditionError);
    }
}

TEST_CASE("general r_score reduces to r_score under shared noise", "[classifier]") {
    Rng rng(54);
    const Index m = 20, r = 3;
    const Matrix w = rng.normal_matrix(m, r);
    const double lambda = 1.9;
    const Vector psi = Vector::Constant(m, lambda);

    // Whitened factors for psi = lambda * 1.
    Eigen::JacobiSVD<Matrix> svd(psi.cwiseSqrt().cwiseInverse().asDiagonal() * w,
                                 Eigen::ComputeThinU);
    const Matrix basis = svd.matrixU();
    const Vector d_vec = svd.singularValues().cwiseAbs2();

    const Matrix cov = w * w.transpose() + lambda * Matrix::Identity(m, m);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector x = rng.normal_vector(m);
        const Vector mean = rng.normal_vector(m);
        const double general = general_r_score(x, mean, basis, d_vec, psi);
        const double oracle = mahalanobis_direct(x, mean, cov);
        REQUIRE(std::abs(general - oracle) <= 1e-9 * std::max(1.0, std::abs(oracle)));
    }
}

TEST_CASE("general r_score handles heteroskedastic noise", "[classifier]") {
    Rng rng(55);
    const Index m = 40, r = 3;
    const Matrix w = rng.normal_matrix(m, r);
    Vector psi(m);
    for (Index i = 0; i < m; ++i) psi[i] = rng.uniform(0.3, 3.0);

    Eigen::JacobiSVD<Matrix> svd(psi.cwiseSqrt().cwiseInverse().asDiagonal() * w,
                                 Eigen::ComputeThinU);
    const Matrix basis = svd.matrixU();
    const Vector d_vec = svd.singularValues().cwiseAbs2();

    const Matrix cov = w * w.transpose() + Matrix(psi.asDiagonal());
    for (int trial = 0; trial < 10; ++trial) {
        const Vector x = rng.normal_vector(m) * 1.5;
        const Vector mean = rng.normal_vector(m);
        const double general = general_r_score(x, mean, basis, d_vec, psi);
        const double oracle = mahalanobis_direct(x, mean, cov);
        REQUIRE(std::abs(general - oracle) <= 1e-9 * std::max(1.0, std::abs(oracle)));
    }
    SECTION("psi must be positive") {
        Vector bad = psi;
        bad[0] = 0.0;
        REQUIRE_THROWS_AS(general_r_score(Vector::Zero(m), Vector::Zero(m), basis, d_vec, bad),
                          PreconditionError);
    }
}

TEST_CASE("class model factors reproduce the whitened covariance", "[classifier]") {
    SimSpec spec;
    spec.n = 300;
    spec.d_noise = 100;
    spec.seed = 61;
    auto [raw, truth] = generate(spec);
    (void)truth;
    FitOptions opts;
    opts.rank = 3;
    LowRankModel model = fit_lfa(center(raw), opts);
    auto ranking = select_top_m(model, 20);
    const std::vector<Index> selected = ranking.selected;
    const LowRankModel kept = model;
    const ClassModel cls = build_class_model(0, std::move(model), std::move(ranking));

    const Matrix whitened_cov = cls.inv_sqrt_psi.asDiagonal() *
                                restricted_cov(kept, selected) *
                                cls.inv_sqrt_psi.asDiagonal();
    const Matrix rebuilt = cls.basis * cls.d_vec.asDiagonal() * cls.basis.transpose() +
                           Matrix::Identity(20, 20);
    REQUIRE((whitened_cov - rebuilt).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("svd and eigendecomposition factor routes give the same score", "[classifier]") {
    Rng rng(62);
    const Index m = 25, r = 4;
    const Matrix w = rng.normal_matrix(m, r);
    Vector psi(m);
    for (Index i = 0; i < m; ++i) psi[i] = rng.uniform(0.4, 2.5);
    const Matrix whitened = psi.cwiseSqrt().cwiseInverse().asDiagonal() * w;

    Eigen::JacobiSVD<Matrix> svd(whitened, Eigen::ComputeThinU);
    const Matrix basis_svd = svd.matrixU();
    const Vector d_svd = svd.singularValues().cwiseAbs2();

    auto [lambda, vectors] = detail::sym_eig_desc(whitened * whitened.transpose());
    const Matrix basis_eig = vectors.leftCols(r);
    const Vector d_eig = lambda.head(r).cwiseMax(0.0);

    for (int trial = 0; trial < 10; ++trial) {
        const Vector x = rng.normal_vector(m);
        const Vector mean = rng.normal_vector(m);
        const double a = general_r_score(x, mean, basis_svd, d_svd, psi);
        const double b = general_r_score(x, mean, basis_eig, d_eig, psi);
        REQUIRE(std::abs(a - b) <= 1e-8 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("scoring a single selected feature is a scalar mahalanobis", "[classifier]") {
    Rng rng(63);
    const Matrix rows = rng.normal_matrix(60, 5).rowwise() + Vector::Constant(5, 2.0).transpose();
    const ClassModel cls = make_class(0, rows, 2, 1);

    const Index j = cls.ranking.selected[0];
    const double cov_jj = cls.model.loadings.row(j).squaredNorm() + cls.model.noise_variances[j];
    const Vector x = rng.normal_vector(5);
    const double expected = (x[j] - cls.model.mean[j]) * (x[j] - cls.model.mean[j]) / cov_jj;
    REQUIRE(score(cls, x) == Catch::Approx(expected).epsilon(1e-9));
}

TEST_CASE("class score equals the dense mahalanobis on the selected block", "[classifier]") {
    Rng rng(64);
    const Matrix rows = rng.normal_matrix(120, 12);
    const ClassModel cls = make_class(3, rows, 3, 7);

    const Matrix cov = restricted_cov(cls.model, cls.ranking.selected);
    for (int trial = 0; trial < 25; ++trial) {
        const Vector x = rng.normal_vector(12) * 2.0;
        const double fast = score(cls, x);
        const double oracle = mahalanobis_direct(gather(x, cls.ranking.selected),
                                                 gather(cls.model.mean, cls.ranking.selected), cov);
        REQUIRE(std::abs(fast - oracle) <= 1e-8 * std::max(1.0, std::abs(oracle)));
    }
}

TEST_CASE("prediction picks the generating class for separated gaussians", "[classifier]") {
    Rng rng(65);
    ClassifierBank bank;
    std::vector<Vector> means;
    for (std::uint32_t id = 0; id < 3; ++id) {
        Vector mean = Vector::Constant(8, 10.0 * id);
        const Matrix rows = rng.normal_matrix(80, 8).rowwise() + mean.transpose();
        bank.add_class(make_class(id, rows, 2, 8));
        means.push_back(mean);
    }
    for (std::uint32_t id = 0; id < 3; ++id) {
        const Vector probe = means[id] + rng.normal_vector(8) * 0.3;
        REQUIRE(bank.predict(probe) == id);
    }
}

TEST_CASE("predictions match a dense-oracle classifier", "[classifier]") {
    Rng rng(66);
    ClassifierBank bank;
    std::vector<ClassModel> classes;
    for (std::uint32_t id = 0; id < 3; ++id) {
        const Matrix rows = rng.normal_matrix(100, 10).rowwise() +
                            (Vector::Constant(10, 1.5 * id)).transpose();
        ClassModel cls = make_class(id, rows, 2, 6);
        classes.push_back(cls);
        bank.add_class(std::move(cls));
    }

    int checked = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const Vector x = rng.normal_vector(10) * 2.0 +
                         Vector::Constant(10, rng.uniform(0.0, 3.0));
        std::uint32_t best_id = 0;
        double best = std::numeric_limits<double>::infinity();
        for (const auto& cls : classes) {
            const Matrix cov = restricted_cov(cls.model, cls.ranking.selected);
            const double s = mahalanobis_direct(gather(x, cls.ranking.selected),
                                                gather(cls.model.mean, cls.ranking.selected), cov);
            if (s < best) {
                best = s;
                best_id = cls.class_id;
            }
        }
        // Skip hairline calls where fast-path rounding could legitimately flip.
        const auto [label, scores] = bank.predict_scored(x);
        double second = std::numeric_limits<double>::infinity();
        for (Index c = 0; c < scores.size(); ++c)
            if (scores[c] > scores.minCoeff() && scores[c] < second) second = scores[c];
        if (second - scores.minCoeff() < 1e-6) continue;
        REQUIRE(label == best_id);
        ++checked;
    }
    REQUIRE(checked > 450);
}

TEST_CASE("adding a class never perturbs the existing ones", "[classifier]") {
    Rng rng(67);
    ClassifierBank bank;
    for (std::uint32_t id = 0; id < 3; ++id)
        bank.add_class(make_class(id, rng.normal_matrix(50, 6), 2, 4));

    std::vector<std::string> before;
    std::vector<Matrix> bases;
    for (const auto& cls : bank.classes) {
        before.push_back(snrm_bytes(cls.model));
        bases.push_back(cls.basis);
    }
    const Vector probe = rng.normal_vector(6);
    const Vector scores_before = bank.predict_scored(probe).second;

    bank.add_class(make_class(7, rng.normal_matrix(50, 6), 2, 4));
    for (std::size_t c = 0; c < 3; ++c) {
        REQUIRE(snrm_bytes(bank.classes[c].model) == before[c]);
        REQUIRE((bank.classes[c].basis - bases[c]).cwiseAbs().maxCoeff() == 0.0);
    }
    const Vector scores_after = bank.predict_scored(probe).second;
    for (Index c = 0; c < 3; ++c) REQUIRE(scores_after[c] == scores_before[c]);

    bank.remove_class(7);
    REQUIRE(bank.classes.size() == 3);
    const Vector scores_final = bank.predict_scored(probe).second;
    for (Index c = 0; c < 3; ++c) REQUIRE(scores_final[c] == scores_before[c]);
}

TEST_CASE("bank membership is validated", "[classifier]") {
    Rng rng(68);
    ClassifierBank bank;
    bank.add_class(make_class(1, rng.normal_matrix(40, 5), 2, 3));
    REQUIRE_THROWS_AS(bank.add_class(make_class(1, rng.normal_matrix(40, 5), 2, 3)),
                      PreconditionError);
    REQUIRE_THROWS_AS(bank.remove_class(9), PreconditionError);
    REQUIRE_THROWS_AS(ClassifierBank{}.predict(Vector::Zero(5)), PreconditionError);
}

TEST_CASE("insertion order does not change predictions", "[classifier]") {
    Rng rng(69);
    std::vector<ClassModel> classes;
    for (std::uint32_t id = 0; id < 4; ++id)
        classes.push_back(make_class(id, rng.normal_matrix(60, 6).rowwise() +
                                             Vector::Constant(6, 2.0 * id).transpose(),
                                     2, 5));

    ClassifierBank forward, shuffled;
    for (const auto& cls : classes) forward.add_class(cls);
    for (std::size_t i : {2u, 0u, 3u, 1u}) shuffled.add_class(classes[i]);

    for (int trial = 0; trial < 200; ++trial) {
        const Vector x = rng.normal_vector(6) * 3.0;
        REQUIRE(forward.predict(x) == shuffled.predict(x));
    }
}

TEST_CASE("scaling all scores preserves the winner", "[classifier]") {
    Rng rng(70);
    ClassifierBank bank;
    for (std::uint32_t id = 0; id < 3; ++id)
        bank.add_class(make_class(id, rng.normal_matrix(50, 6), 2, 4));
    const Vector x = rng.normal_vector(6);
    const auto [label, scores] = bank.predict_scored(x);
    Index argmin = 0;
    (scores * 3.5).minCoeff(&argmin);
    REQUIRE(bank.classes[static_cast<std::size_t>(argmin)].class_id == label);
}
