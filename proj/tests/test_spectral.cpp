#include "glmspec/errors.hpp"
#include "glmspec/spectral.hpp"
#include "glmspec/theory.hpp"

#include <doctest.h>

#include <cmath>

using namespace glmspec;
using doctest::Approx;

namespace {

double mean(const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v;
    return s / double(x.size());
}

double sample_std(const std::vector<double>& x) {
    const double m = mean(x);
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / double(x.size() - 1));
}

Eigen::MatrixXd random_symmetric(int d, unsigned seed) {
    std::srand(seed);
    Eigen::MatrixXd a = Eigen::MatrixXd::Random(d, d);
    return (a + a.transpose()) / 2;
}

} // namespace

TEST_SUITE("spectral") {

TEST_CASE("build_D small cases") {
    Eigen::MatrixXd x(1, 1);
    x << 2;
    Eigen::VectorXd t(1);
    t << 3;
    CHECK(build_D(x, t)(0, 0) == 12.0);
    Eigen::MatrixXd x3 = Eigen::MatrixXd::Random(5, 3);
    CHECK(build_D(x3, Eigen::VectorXd::Zero(5)).cwiseAbs().maxCoeff() == 0.0);
    Eigen::MatrixXd x2(2, 2);
    x2 << 0.3, -1.2, 0.7, 0.4;
    Eigen::VectorXd t2(2);
    t2 << 1.5, -0.5;
    Eigen::MatrixXd naive = Eigen::MatrixXd::Zero(2, 2);
    for (int i = 0; i < 2; ++i) naive += t2(i) * x2.row(i).transpose() * x2.row(i);
    CHECK((build_D(x2, t2) - naive).cwiseAbs().maxCoeff() < 1e-15);
    Eigen::MatrixXd xb = Eigen::MatrixXd::Random(200, 30);
    Eigen::VectorXd tb = Eigen::VectorXd::Random(200);
    const Eigen::MatrixXd D = build_D(xb, tb);
    CHECK((D - D.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((D - xb.transpose() * tb.asDiagonal() * xb).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("top2 small cases") {
    Eigen::MatrixXd d3 = Eigen::Vector3d(3, 2, 1).asDiagonal();
    auto [p1, p2] = top2_eigs(d3);
    CHECK(p1.value == Approx(3.0));
    CHECK(p2.value == Approx(2.0));
    CHECK(std::abs(p1.vector(0)) == Approx(1.0));
    CHECK(std::abs(p2.vector(1)) == Approx(1.0));
    Eigen::Matrix2d m;
    m << 2, 1, 1, 2;
    auto [q1, q2] = top2_eigs(m);
    CHECK(q1.value == Approx(3.0));
    CHECK(q2.value == Approx(1.0));
}

TEST_CASE("top2 against the dense oracle") {
    for (auto method : {EigMethod::Dense, EigMethod::Lanczos}) {
        const Eigen::MatrixXd a = random_symmetric(50, 3);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
        auto [p1, p2] = top2_eigs(a, method);
        CHECK(std::abs(p1.value - es.eigenvalues()(49)) < 1e-9);
        CHECK(std::abs(p2.value - es.eigenvalues()(48)) < 1e-9);
        CHECK(std::abs(std::abs(p1.vector.dot(es.eigenvectors().col(49))) - 1) < 1e-9);
        const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
        for (const auto* p : {&p1, &p2}) {
            CHECK(std::abs(p->vector.norm() - 1) < 1e-12);
            CHECK((a * p->vector - p->value * p->vector).norm() <= 1e-8 * norm);
        }
        CHECK(std::abs(p1.vector.dot(p2.vector)) < 1e-8);
        // sign convention: largest-magnitude coordinate positive
        Eigen::Index k;
        p1.vector.cwiseAbs().maxCoeff(&k);
        CHECK(p1.vector(k) > 0);
    }
}

TEST_CASE("lanczos on a larger matrix") {
    const Eigen::MatrixXd a = random_symmetric(400, 8);
    auto [d1, d2] = top2_eigs(a, EigMethod::Dense);
    auto [l1, l2] = top2_eigs(a, EigMethod::Lanczos);
    CHECK(std::abs(d1.value - l1.value) < 1e-9);
    CHECK(std::abs(d2.value - l2.value) < 1e-9);
}

TEST_CASE("shift and scale") {
    const Eigen::MatrixXd a = random_symmetric(60, 4);
    auto [p1, p2] = top2_eigs(a);
    auto [s1, s2] = top2_eigs(a + 2.5 * Eigen::MatrixXd::Identity(60, 60));
    CHECK(std::abs(s1.value - p1.value - 2.5) < 1e-10);
    CHECK(std::abs(s2.value - p2.value - 2.5) < 1e-10);
    CHECK(std::abs(std::abs(s1.vector.dot(p1.vector)) - 1) < 1e-9);

    auto cov = std::make_shared<const CovarianceFactors>(build_covariance(CovarianceSpec::toeplitz(80, 0.5)));
    const Dataset ds = sample_dataset(cov, LinkModel::phase_retrieval(), 240, 1);
    const TheoryContext ctx = make_context(3.0, cov->measure, LinkModel::phase_retrieval(), PreprocKind::Subset);
    auto [b1, b2] = top2_eigs(build_D(ds, ctx.preproc()));
    auto [c1, c2] = top2_eigs(build_D(ds, ctx.preproc().scaled(3.0)));
    CHECK(c1.value == Approx(3 * b1.value).epsilon(1e-10));
    CHECK(c2.value == Approx(3 * b2.value).epsilon(1e-10));
    CHECK(std::abs(std::abs(c1.vector.dot(b1.vector)) - 1) < 1e-9);
    CHECK(std::abs(std::abs(c2.vector.dot(b2.vector)) - 1) < 1e-9);
}

TEST_CASE("overlap") {
    Eigen::VectorXd u(3), v(3);
    u << 1, 2, 2;
    v << 2, 0, 0;
    CHECK(overlap(u, v) == Approx(1.0 / 3));
    CHECK(overlap(-u, v) == overlap(u, v));
}

TEST_CASE("null model: T = 1 carries no signal") {
    auto cov = std::make_shared<const CovarianceFactors>(build_covariance(CovarianceSpec::identity(200)));
    const Dataset ds = sample_dataset(cov, LinkModel::phase_retrieval(), 4000, 2);
    const EstimateReport r = spectral_estimate(ds, Preprocessor::custom("one", [](double) { return 1.0; }, 1.0, 1.0));
    CHECK(r.overlap_emp < 0.3);
    CHECK(r.overlap_emp == Approx(overlap(r.v1, ds.beta_star)).epsilon(1e-12));
}

TEST_CASE("identity covariance, subset, delta = 5") {
    const int d = 500;
    const double delta = 5.0;
    auto cov = std::make_shared<const CovarianceFactors>(build_covariance(CovarianceSpec::identity(d)));
    PreprocParams pp;
    pp.K = std::sqrt(2.0);
    const TheoryContext ctx = make_context(delta, cov->measure, LinkModel::phase_retrieval(), PreprocKind::Subset, pp);
    const double eta = predict(ctx).eta;
    std::vector<double> ov;
    for (int s = 0; s < 10; ++s) {
        const Dataset ds = sample_dataset(cov, LinkModel::phase_retrieval(), int(delta * d), 100 + s);
        const EstimateReport r = spectral_estimate(ds, ctx.preproc());
        ov.push_back(r.overlap_emp);
        if (s == 0) {
            // whitening by the identity changes nothing
            const WhitenedReport w = whitened_estimate(ds, ctx.preproc());
            CHECK(w.overlap == r.overlap_emp);
            CHECK(w.lambda1 == r.lambda1_emp);
        }
    }
    CHECK(std::abs(mean(ov) - eta) < 0.05);
}

TEST_CASE("whitened estimator, Toeplitz delta = 3") {
    const int d = 500;
    const double delta = 3.0;
    auto cov = std::make_shared<const CovarianceFactors>(build_covariance(CovarianceSpec::toeplitz(d, 0.9)));
    const TheoryContext ctx =
        make_context(delta, cov->measure, LinkModel::phase_retrieval(), PreprocKind::OptimalLimit);
    const double eta_k = whitened_theory(ctx).eta_k;
    std::vector<double> ov;
    for (int s = 0; s < 10; ++s) {
        const Dataset ds = sample_dataset(cov, LinkModel::phase_retrieval(), int(delta * d), 200 + s);
        ov.push_back(whitened_estimate(ds, ctx.preproc()).overlap);
    }
    CHECK(std::abs(mean(ov) - eta_k) < 0.05);
}

TEST_CASE("bulk edge rigidity at d = 1000") {
    const int d = 1000;
    struct Kind {
        PreprocKind kind;
        double K;
    };
    const Kind kinds[] = {{PreprocKind::OptimalLimit, std::nan("")},
                          {PreprocKind::Subset, std::sqrt(2.0)},
                          {PreprocKind::Trimming, std::sqrt(7.0)},
                          {PreprocKind::IdentityTrunc, 3.0}};
    struct Setting {
        CovarianceSpec spec;
        double delta;
    };
    const Setting settings[] = {{CovarianceSpec::toeplitz(d, 0.9), 3.0},
                                {CovarianceSpec::circulant(d, 1.0, 0.1, 17), 5.0}};
    for (const Setting& st : settings) {
        auto cov = std::make_shared<const CovarianceFactors>(build_covariance(st.spec));
        std::vector<std::vector<double>> l2(4);
        for (int s = 0; s < 10; ++s) {
            const Dataset ds = sample_dataset(cov, LinkModel::phase_retrieval(), int(st.delta * d), 300 + s);
            for (int k = 0; k < 4; ++k) {
                PreprocParams pp;
                pp.K = kinds[k].K;
                const TheoryContext ctx =
                    make_context(st.delta, cov->measure, LinkModel::phase_retrieval(), kinds[k].kind, pp);
                l2[k].push_back(spectral_estimate(ds, ctx.preproc()).lambda2_emp);
            }
        }
        for (int k = 0; k < 4; ++k) {
            INFO("delta " << st.delta << " kind " << k << " mean " << mean(l2[k]) << " std " << sample_std(l2[k]));
            CHECK(sample_std(l2[k]) < 0.05 * std::abs(mean(l2[k])));
        }
    }
}

}
