#include "glmspec/errors.hpp"
#include "glmspec/model.hpp"
#include "glmspec/rng.hpp"
#include "glmspec/theory.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace glmspec;
using doctest::Approx;

namespace {

const ScalarMeasure kTwoAtom({1.0, 2.0}, {0.5, 0.5});

TheoryContext subset_ctx(const ScalarMeasure& sigma, double delta) {
    PreprocParams pp;
    pp.K = std::sqrt(2.0);
    return make_context(delta, sigma, LinkModel::phase_retrieval(), PreprocKind::Subset, pp);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

} // namespace

TEST_SUITE("theory") {

TEST_CASE("context invariants") {
    const TheoryContext ctx = subset_ctx(kTwoAtom, 2.0);
    CHECK(std::abs(ctx.law().g_variance() - 1.5 / 2.0) < 1e-12);
    CHECK(ctx.t_sup() == 1.0);
}

TEST_CASE("s(a)") {
    const TheoryContext pm = subset_ctx(ScalarMeasure::point_mass(1.0), 2.0);
    CHECK(s_of_a(pm, 2.0) == Approx(pm.obs_moments(2.0).ef).epsilon(1e-15));
    const TheoryContext two = subset_ctx(kTwoAtom, 2.0);
    const double ef = two.obs_moments(2.0).ef;
    REQUIRE(ef > 0.0);
    CHECK(s_of_a(two, 2.0) == Approx(2.0 * ef).epsilon(1e-15));
    // T = 0 gives E[F] = 0
    ObservationLaw law(1.5, LinkModel::phase_retrieval());
    TheoryContext zero(1.0, kTwoAtom, law, Preprocessor::custom("zero", [](double) { return 0.0; }, 0.0, 0.5));
    CHECK(s_of_a(zero, 1.0) == 0.0);
}

TEST_CASE("gamma equation") {
    CHECK(gamma_for_c(ScalarMeasure::point_mass(1.0), 2.0, 0.3) == Approx(0.8).epsilon(1e-12));
    CHECK(gamma_for_c(kTwoAtom, 3.0, 0.0) == Approx(1.5 / 3.0).epsilon(1e-15));
    // two atoms, delta = 1: 2 g^2 - (6c + 3) g + 4c^2 + 4c = 0, larger root
    for (double c : {-0.7, 0.2, 0.9}) {
        const double b = 6 * c + 3, disc = b * b - 8 * (4 * c * c + 4 * c);
        const double root = (b + std::sqrt(disc)) / 4;
        CHECK(gamma_for_c(kTwoAtom, 1.0, c) == Approx(root).epsilon(1e-12));
    }
    const TheoryContext ctx = subset_ctx(kTwoAtom, 1.5);
    for (double a : {1.01, 1.3, 2.0, 5.0, 40.0}) {
        const GammaRoot g = solve_gamma(ctx, a);
        CHECK(std::abs(g.residual) < 1e-12);
        CHECK(g.gamma > s_of_a(ctx, a));
    }
}

TEST_CASE("point-mass psi is the whitened psi") {
    const TheoryContext ctx = subset_ctx(ScalarMeasure::point_mass(1.0), 2.5);
    for (double a : {1.1, 1.7, 3.0, 12.0}) {
        CHECK(psi(ctx, a) == Approx(a * (1 / 2.5 + ctx.obs_moments(a).ef)).epsilon(1e-12));
        CHECK(psi(ctx, a) == Approx(psi_known(ctx, a)).epsilon(1e-12));
        CHECK(phi(ctx, a) == Approx(phi_known(ctx, a)).epsilon(1e-10));
    }
}

TEST_CASE("psi' against finite differences") {
    const auto toe = build_covariance(CovarianceSpec::toeplitz(200, 0.9));
    const TheoryContext ctx = make_context(3.0, toe.measure, LinkModel::phase_retrieval(), PreprocKind::OptimalLimit);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(std::log(1e-2), std::log(50.0));
    for (int i = 0; i < 20; ++i) {
        const double a = ctx.t_sup() + std::exp(u(rng));
        const double h = 1e-6 * a;
        const double fd = (psi(ctx, a + h) - psi(ctx, a - h)) / (2 * h);
        const double an = psi_prime(ctx, a);
        CHECK(std::abs(an - fd) / std::max(std::abs(fd), 1e-3) < 1e-6 * 10);
    }
    const double big = ctx.t_sup() * 1e6;
    CHECK(psi_prime(ctx, big) == Approx(toe.measure.mean() / 3.0).epsilon(0.01));
}

TEST_CASE("critical point and zeta") {
    const auto toe = build_covariance(CovarianceSpec::toeplitz(200, 0.9));
    const TheoryContext ctx = make_context(2.0, toe.measure, LinkModel::phase_retrieval(), PreprocKind::OptimalLimit);
    const CriticalPoint cp = find_a_circ(ctx);
    CHECK(cp.a > ctx.t_sup());
    CHECK(std::abs(psi_prime(ctx, cp.a)) < 1e-8 * std::max(1.0, std::abs(psi(ctx, cp.a))));
    CHECK(std::abs(cp.selfcons_residual) < 1e-8);
    CHECK(zeta(ctx, cp.a * 0.5 + ctx.t_sup() * 0.5, cp.a) == psi(ctx, cp.a));
    CHECK(zeta(ctx, cp.a, cp.a) == psi(ctx, cp.a));
    double prev = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < 1000; ++i) {
        const double a = ctx.a_lo() + (10 * cp.a - ctx.a_lo()) * i / 999.0;
        const double z = zeta(ctx, a, cp.a);
        CHECK(z >= prev - 1e-12);
        prev = z;
    }
    for (double a = cp.a * 1.01; a < 10 * cp.a; a *= 1.3) CHECK(psi(ctx, a * 1.05) > psi(ctx, a));
}

TEST_CASE("supercritical invariants") {
    const auto toe = build_covariance(CovarianceSpec::toeplitz(200, 0.9));
    for (double delta : {2.0, 4.0}) {
        for (auto kind : {PreprocKind::OptimalLimit, PreprocKind::Subset, PreprocKind::Trimming}) {
            const TheoryContext ctx = make_context(delta, toe.measure, LinkModel::phase_retrieval(), kind);
            const TheoryResult r = predict(ctx);
            const auto& cp = r.critical_points;
            REQUIRE(cp.supercritical);
            CHECK(*cp.a_star > cp.a_circ + 1e-9);
            CHECK(std::abs(zeta(ctx, *cp.a_star, cp.a_circ) - phi(ctx, *cp.a_star)) <
                  1e-9 * std::max(1.0, std::abs(r.lambda1)));
            CHECK(r.lambda1 > r.lambda2);
            CHECK(r.lambda1 == Approx(*cp.a_star * *cp.gamma_star).epsilon(1e-12));
            CHECK(r.lambda2 == Approx(cp.a_circ * cp.gamma_circ).epsilon(1e-12));
            CHECK(r.eta > 0.0);
            CHECK(r.eta < 1.0);
            CHECK(r.w1 > 0.0);
            CHECK(r.w2 > 0.0);
            CHECK(r.w2 < 1.0);
            // Cauchy-Schwarz: E[S] z1 >= E[S^2/(g - cS)]^2
            const double c = ctx.obs_moments(*cp.a_star).ef;
            const auto rm = rational_moments(ctx.sigma(), *cp.gamma_star, c);
            CHECK(rm.s32 * toe.measure.mean() >= rm.s21 * rm.s21 * (1 - 1e-12));
        }
    }
}

TEST_CASE("point-mass overlap collapse") {
    const TheoryContext ctx = subset_ctx(ScalarMeasure::point_mass(1.0), 4.0);
    const TheoryResult r = predict(ctx);
    REQUIRE(r.critical_points.supercritical);
    CHECK(r.eta * r.eta == Approx((1 - r.w2) / ((1 - r.w2) + r.w1)).epsilon(1e-10));
}

TEST_CASE("point mass matches the whitened theory") {
    for (auto kind : {PreprocKind::OptimalLimit, PreprocKind::Subset, PreprocKind::Trimming}) {
        for (double delta : {0.5, 1.5, 3.0, 6.0}) {
            const TheoryContext ctx =
                make_context(delta, ScalarMeasure::point_mass(1.0), LinkModel::phase_retrieval(), kind);
            const TheoryResult r = predict(ctx);
            const WhitenedTheoryResult w = whitened_theory(ctx);
            CAPTURE(delta);
            CHECK(r.critical_points.supercritical == w.supercritical_k);
            CHECK(rel(r.critical_points.a_circ, w.a_circ_k) < 1e-8);
            CHECK(rel(r.lambda1, w.lambda1_k) < 1e-8);
            CHECK(rel(r.lambda2, w.lambda2_k) < 1e-8);
            CHECK(std::abs(r.eta - w.eta_k) < 1e-8);
            if (w.supercritical_k) CHECK(rel(*r.critical_points.a_star, w.a_star_k) < 1e-8);
            // an interior minimizer of psi_k is a root of psi_k'
            if (!find_a_circ(ctx).at_edge)
                CHECK(std::abs(psi_known_prime(ctx, w.a_circ_k)) < 1e-10 * std::max(1.0, w.lambda2_k));
        }
    }
}

TEST_CASE("subcritical convention") {
    const TheoryContext ctx = make_context(0.05, ScalarMeasure::point_mass(1.0), LinkModel::phase_retrieval(),
                                           PreprocKind::OptimalLimit);
    const TheoryResult r = predict(ctx);
    CHECK_FALSE(r.critical_points.supercritical);
    CHECK(r.eta == 0.0);
    CHECK(r.lambda1 == r.lambda2);
}

TEST_CASE("whitened and general overlaps differ for Toeplitz") {
    const auto toe = build_covariance(CovarianceSpec::toeplitz(200, 0.9));
    const TheoryContext ctx = make_context(1.0, toe.measure, LinkModel::phase_retrieval(), PreprocKind::OptimalLimit);
    const TheoryResult r = predict(ctx);
    const WhitenedTheoryResult w = whitened_theory(ctx);
    CHECK(std::abs(r.eta - w.eta_k) > 0.05);
}

TEST_CASE("predictions are pure") {
    const auto circ = build_covariance(CovarianceSpec::circulant(100, 1.0, 0.1, 17));
    const TheoryContext a = make_context(3.0, circ.measure, LinkModel::phase_retrieval(), PreprocKind::OptimalLimit);
    const TheoryContext b = make_context(3.0, circ.measure, LinkModel::phase_retrieval(), PreprocKind::OptimalLimit);
    const TheoryResult ra = predict(a), rb = predict(b);
    CHECK(std::abs(ra.eta - rb.eta) < 1e-12);
    CHECK(std::abs(ra.lambda1 - rb.lambda1) < 1e-12);
    CHECK(std::abs(ra.lambda2 - rb.lambda2) < 1e-12);
}

TEST_CASE("threshold depends on two moments only") {
    // {1,3} and {2-sqrt2, 2+sqrt2} with equal weights: mean 2, second moment 5 and 6
    // use {1,3} vs a three-atom measure with mean 2 and second moment 5
    const ScalarMeasure a({1.0, 3.0}, {0.5, 0.5});
    const double s = std::sqrt(1.5);
    const ScalarMeasure b({2 - s, 2.0, 2 + s}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
    REQUIRE(moment(b, 2) == Approx(5.0).epsilon(1e-14));
    for (auto link : {LinkModel::phase_retrieval(), LinkModel::linear(0.5), LinkModel::poisson()})
        CHECK(std::abs(delta_cap(a, link, 2.0) - delta_cap(b, link, 2.0)) < 1e-10);
}

TEST_CASE("linear link threshold against Monte Carlo") {
    const double v = 1.0 / 2.0, s2 = 0.25;
    const ScalarMeasure sigma = ScalarMeasure::point_mass(1.0);
    const double cap = delta_cap(sigma, LinkModel::linear(0.5), 2.0);
    CHECK(cap > 0.0);
    CHECK(std::isfinite(cap));
    // E[G^2 | Y] / v from the Gaussian posterior; Y ~ N(0, v + s2)
    Philox4x32 rng(1, 0, StreamTag::Misc);
    std::normal_distribution<double> nd;
    const int N = 10000000;
    double acc = 0;
    for (int i = 0; i < N; ++i) {
        const double y = std::sqrt(v + s2) * nd(rng);
        const double pm = v * y / (v + s2), pv = v * s2 / (v + s2);
        const double r = (pv + pm * pm) / v;
        acc += (r - 1) * (r - 1);
    }
    CHECK(cap == Approx(1.0 / (acc / N)).epsilon(0.01));
}

TEST_CASE("threshold fixed point and supercriticality") {
    const ScalarMeasure sigma = ScalarMeasure::point_mass(1.0);
    const ThresholdResult tr = optimal_threshold(sigma, LinkModel::phase_retrieval(), 1.0);
    REQUIRE(tr.fixed_point_delta.has_value());
    // the noiseless phase retrieval threshold with Sigma = I is 1/2
    CHECK(*tr.fixed_point_delta == Approx(0.5).epsilon(1e-6));
    const double delta = 1.06 * *tr.fixed_point_delta;
    const TheoryContext ctx = make_context(delta, sigma, LinkModel::phase_retrieval(), PreprocKind::OptimalThreshold);
    CHECK(predict(ctx).critical_points.supercritical);
    try {
        delta_cap(sigma, LinkModel::one_bit(0.0), 1.0);
        FAIL("expected DegenerateLink");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateLink);
    }
}

}
