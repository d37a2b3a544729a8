#include "glmspec/measure.hpp"

#include "glmspec/errors.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <tuple>
#include <utility>

namespace glmspec {

ScalarMeasure::ScalarMeasure(std::vector<double> values, std::vector<double> weights)
    : values_(std::move(values)), weights_(std::move(weights)) {
    if (values_.empty() || values_.size() != weights_.size())
        throw Error(ErrorKind::InvariantViolation, "measure needs matching, nonempty atoms and weights");
    double total = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i]) || !std::isfinite(weights_[i]) || weights_[i] < 0.0)
            throw Error(ErrorKind::InvariantViolation, "measure atom not finite or weight negative");
        total += weights_[i];
    }
    if (std::abs(total - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "measure weights sum to " << total;
        throw Error(ErrorKind::InvariantViolation, os.str());
    }
    auto [lo, hi] = std::minmax_element(values_.begin(), values_.end());
    inf_ = *lo;
    sup_ = *hi;
    mean_ = moment(*this, 1);
}

ScalarMeasure ScalarMeasure::uniform(std::vector<double> values) {
    const std::size_t n = values.size();
    std::vector<double> w(n, n ? 1.0 / double(n) : 0.0);
    return ScalarMeasure(std::move(values), std::move(w));
}

ScalarMeasure ScalarMeasure::point_mass(double value) {
    return ScalarMeasure({value}, {1.0});
}

double moment(const ScalarMeasure& m, int k) {
    if (k < 0) throw Error(ErrorKind::InvariantViolation, "negative moment order");
    const auto& v = m.values();
    const auto& w = m.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += w[i] * std::pow(v[i], k);
    return s;
}

namespace {

inline double denom_checked(double gamma, double x, double lam) {
    const double den = gamma - x * lam;
    if (std::abs(den) < 1e-14 * std::max(std::abs(gamma), 1.0)) {
        std::ostringstream os;
        os << "gamma=" << gamma << " x=" << x << " atom=" << lam;
        throw Error(ErrorKind::PoleHit, os.str());
    }
    return den;
}

} // namespace

double expect_rational(const ScalarMeasure& m, int p, int q, double gamma, double x) {
    if (p < 0 || q < 0) throw Error(ErrorKind::InvariantViolation, "negative exponent");
    const auto& v = m.values();
    const auto& w = m.weights();
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        double term = std::pow(v[i], p);
        if (q > 0) term /= std::pow(denom_checked(gamma, x, v[i]), q);
        s += w[i] * term;
    }
    return s;
}

RationalMoments rational_moments(const ScalarMeasure& m, double gamma, double x) {
    const auto& v = m.values();
    const auto& w = m.weights();
    RationalMoments r;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double lam = v[i];
        const double inv = 1.0 / denom_checked(gamma, x, lam);
        const double a = w[i] * lam * inv;  // w S/(g - xS)
        r.s11 += a;
        r.s21 += a * lam;
        r.s12 += a * inv;
        r.s22 += a * inv * lam;
        r.s32 += a * inv * lam * lam;
    }
    return r;
}

QuadRule gauss_hermite(int n, double variance) {
    if (n < 1 || !(variance > 0.0))
        throw Error(ErrorKind::InvariantViolation, "gauss_hermite needs n >= 1 and variance > 0");
    // weight exp(-x^2) on the real line
    std::unique_ptr<gsl_integration_fixed_workspace, decltype(&gsl_integration_fixed_free)> ws(
        gsl_integration_fixed_alloc(gsl_integration_fixed_hermite, std::size_t(n), 0.0, 1.0, 0.0, 0.0),
        &gsl_integration_fixed_free);
    if (!ws) throw Error(ErrorKind::ConvergenceFail, "gsl quadrature allocation failed");
    std::vector<std::pair<double, double>> xw(n);
    for (int i = 0; i < n; ++i)
        xw[i] = {gsl_integration_fixed_nodes(ws.get())[i], gsl_integration_fixed_weights(ws.get())[i]};
    std::sort(xw.begin(), xw.end());
    std::vector<double> x(n), w(n);
    for (int i = 0; i < n; ++i) std::tie(x[i], w[i]) = xw[i];

    QuadRule rule;
    rule.nodes.resize(n);
    rule.weights.resize(n);
    const double scale = std::sqrt(2.0 * variance);
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        // enforce exact symmetry about zero; odd rules get a node at 0
        const int j = n - 1 - i;
        rule.nodes[i] = scale * 0.5 * (x[i] - x[j]);
        rule.weights[i] = 0.5 * (w[i] + w[j]);
        total += rule.weights[i];
    }
    // renormalise so that the constant integrates to exactly one
    for (double& wi : rule.weights) wi /= total;
    return rule;
}

} // namespace glmspec
