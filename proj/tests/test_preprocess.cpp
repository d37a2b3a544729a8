#include "glmspec/errors.hpp"
#include "glmspec/preprocess.hpp"
#include "glmspec/theory.hpp"

#include <doctest.h>

#include <cmath>

using namespace glmspec;
using doctest::Approx;

namespace {

std::vector<double> probes(const ObservationLaw& law, int count) {
    std::vector<double> out;
    if (law.output_kind() == OutputKind::NonnegInteger) {
        for (int y = 0; y <= law.y_max(); ++y) out.push_back(y);
        return out;
    }
    const double r = 8 * std::sqrt(law.g_variance()) + 4 * law.link().sigma + 1.5;
    for (int i = 0; i < count; ++i) out.push_back(-r + 2 * r * (i + 0.5) / count);
    return out;
}

} // namespace

TEST_SUITE("preprocess") {

TEST_CASE("optimal_limit for noiseless phase retrieval") {
    const double es = 1.0, delta = 2.0, v = es / delta;
    ObservationLaw law(v, LinkModel::phase_retrieval());
    const Preprocessor p = make_preprocessor(PreprocKind::OptimalLimit, {}, law, delta);
    for (double y : {0.05, 0.2, 0.5, 1.0, 1.7, 3.0}) CHECK(p(y) == Approx(std::max(1 - es / (delta * y * y), -10.0)).epsilon(1e-6));
    const auto [lo, hi] = t_support(p, law);
    CHECK(lo == -10.0);
    CHECK(hi == 1.0);
}

TEST_CASE("optimal_limit for poisson") {
    const double es = 1.3, delta = 2.0, v = es / delta;
    ObservationLaw law(v, LinkModel::poisson());
    const Preprocessor p = make_preprocessor(PreprocKind::OptimalLimit, {}, law, delta);
    for (int y = 0; y <= 30; ++y) CHECK(p(y) == Approx((y - v) / (y + 0.5)).epsilon(1e-6));
}

TEST_CASE("subset thresholds") {
    const double es = 1.0, delta = 3.0, v = es / delta;
    ObservationLaw law(v, LinkModel::phase_retrieval());
    PreprocParams pp;
    pp.K = std::sqrt(2.0);
    const Preprocessor p = make_preprocessor(PreprocKind::Subset, pp, law, delta);
    CHECK(p(1.0 * std::sqrt(v)) == 0.0);
    CHECK(p(2.0 * std::sqrt(v)) == 1.0);
    CHECK(p(-2.0 * std::sqrt(v)) == 1.0);
    const auto [lo, hi] = t_support(p, law);
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);
    CHECK(f_a(p, 1.5, 2.0) == 2.0);
    CHECK(f_a(p, 1.5, 0.0) == 0.0);
    for (double y : probes(law, 1000)) {
        const double f = f_a(p, 1.5, y);
        CHECK((f == 0.0 || f == 2.0));
    }
}

TEST_CASE("trimming support") {
    ObservationLaw law(1.0, LinkModel::phase_retrieval());
    PreprocParams pp;
    pp.K = std::sqrt(7.0);
    const Preprocessor p = make_preprocessor(PreprocKind::Trimming, pp, law, 1.0);
    const auto [lo, hi] = t_support(p, law);
    CHECK(lo == 0.0);
    CHECK(hi == Approx(7.0).epsilon(1e-14));
    CHECK(p(2.0) == Approx(4.0));
    CHECK(p(2.7) == 0.0);
}

TEST_CASE("identity truncation") {
    ObservationLaw law(0.25, LinkModel::linear(0.2));
    PreprocParams pp;
    pp.K = 3.0;
    const Preprocessor p = make_preprocessor(PreprocKind::IdentityTrunc, pp, law, 4.0);
    CHECK(p(0.5) == Approx(1.0));
    CHECK(p(10.0) == 3.0);
    CHECK(p(-10.0) == -3.0);
}

TEST_CASE("f_a domain") {
    CHECK(f_a(Preprocessor::custom("one", [](double) { return 1.0; }, 1.0, 1.0), 2.0, 0.3) == 1.0);
    const Preprocessor zero = Preprocessor::custom("zero-ish", [](double y) { return y > 0 ? 0.0 : 0.5; }, 0.0, 0.5);
    CHECK(f_a(zero, 0.7, 1.0) == 0.0);
    try {
        f_a(zero, 0.5, 1.0);
        FAIL("expected ADomain");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ADomain);
    }
}

TEST_CASE("boundedness and t_sup on probes") {
    const ScalarMeasure sigma = ScalarMeasure::point_mass(1.0);
    for (auto link : {LinkModel::phase_retrieval(), LinkModel::phase_retrieval_gaussian(0.3), LinkModel::poisson(),
                      LinkModel::linear(0.5)}) {
        for (auto kind : {PreprocKind::OptimalLimit, PreprocKind::OptimalThreshold, PreprocKind::Trimming,
                          PreprocKind::Subset, PreprocKind::IdentityTrunc}) {
            const double delta = 12.0;
            CAPTURE(link.name());
            CAPTURE(kind_name(kind));
            const TheoryContext ctx = make_context(delta, sigma, link, kind);
            const Preprocessor& p = ctx.preproc();
            const auto [lo, hi] = t_support(p, ctx.law());
            CHECK(hi > 0.0);
            const double bound = std::max(std::abs(lo), hi);
            const double a = hi + 0.5;
            for (double y : probes(ctx.law(), 100000)) {
                const double t = p(y);
                REQUIRE(std::abs(t) <= bound + 1e-9);
                REQUIRE(t <= hi + 1e-9);
                REQUIRE(std::abs(f_a(p, a, y)) <= bound / (a - hi) + 1e-9);
            }
        }
    }
}

TEST_CASE("degenerate links") {
    // sgn(G) is independent of |G|, with or without noise
    for (double s : {0.0, 0.5}) {
        ObservationLaw law(1.0, LinkModel::one_bit(s));
        try {
            make_preprocessor(PreprocKind::OptimalLimit, {}, law, 1.0);
            FAIL("expected DegenerateLink");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::DegenerateLink);
        }
    }
}

TEST_CASE("optimal_threshold approaches optimal_limit at the fixed point") {
    const ScalarMeasure sigma = ScalarMeasure::point_mass(1.0);
    const LinkModel link = LinkModel::phase_retrieval_gaussian(0.3);
    const ThresholdResult tr = optimal_threshold(sigma, link, 1.0);
    REQUIRE(tr.fixed_point_delta.has_value());
    const double delta = 1.0001 * *tr.fixed_point_delta;
    const TheoryContext thr = make_context(delta, sigma, link, PreprocKind::OptimalThreshold);
    const TheoryContext lim = make_context(delta, sigma, link, PreprocKind::OptimalLimit);
    double gap = 0;
    for (double y : probes(thr.law(), 2000)) gap = std::max(gap, std::abs(thr.preproc()(y) - lim.preproc()(y)));
    CHECK(gap < 1e-2);
}

TEST_CASE("E[F_a] decreases in a for nonnegative T") {
    // dE[F_a]/da = -E[T/(a-T)^2], which has no fixed sign when T changes sign
    const ScalarMeasure sigma = ScalarMeasure::point_mass(1.0);
    for (auto kind : {PreprocKind::Trimming, PreprocKind::Subset}) {
        const TheoryContext ctx = make_context(2.0, sigma, LinkModel::phase_retrieval(), kind);
        double prev = std::numeric_limits<double>::infinity();
        for (int i = 0; i < 200; ++i) {
            const double a = ctx.t_sup() + 1e-3 * std::pow(1e6, i / 199.0);
            const double ef = ctx.obs_moments(a).ef;
            REQUIRE(std::isfinite(ef));
            CHECK(ef < prev);
            prev = ef;
        }
    }
}

TEST_CASE("names round trip") {
    for (auto kind : {PreprocKind::OptimalThreshold, PreprocKind::OptimalLimit, PreprocKind::Trimming,
                      PreprocKind::Subset, PreprocKind::IdentityTrunc})
        CHECK(parse_preproc_kind(kind_name(kind)) == kind);
    CHECK_THROWS_AS(parse_preproc_kind("median"), Error);
}

}
