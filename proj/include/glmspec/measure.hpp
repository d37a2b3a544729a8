// Discrete scalar measures and Gaussian quadrature.
//
// Every limiting expectation over the spectral variable reduces to a finite
// weighted sum over atoms; every expectation over the Gaussian variable is a
// Gauss-Hermite sum.
#pragma once

#include <vector>

namespace glmspec {

class ScalarMeasure {
public:
    ScalarMeasure(std::vector<double> values, std::vector<double> weights);

    // equal weights 1/n, e.g. the eigenvalues of a finite covariance
    static ScalarMeasure uniform(std::vector<double> values);
    static ScalarMeasure point_mass(double value);

    std::size_t size() const { return values_.size(); }
    const std::vector<double>& values() const { return values_; }
    const std::vector<double>& weights() const { return weights_; }

    double inf() const { return inf_; }
    double sup() const { return sup_; }
    double mean() const { return mean_; }

    bool strictly_positive() const { return inf_ > 0.0; }

private:
    std::vector<double> values_;
    std::vector<double> weights_;
    double inf_ = 0.0, sup_ = 0.0, mean_ = 0.0;
};

double moment(const ScalarMeasure& m, int k);

// E[S^p / (gamma - x S)^q]
double expect_rational(const ScalarMeasure& m, int p, int q, double gamma, double x);

// All rational moments the fixed-point equations need, in one pass.
// sPQ = E[S^P / (gamma - x S)^Q].
struct RationalMoments {
    double s11 = 0, s21 = 0, s12 = 0, s22 = 0, s32 = 0;
};
RationalMoments rational_moments(const ScalarMeasure& m, double gamma, double x);

// Nodes and weights for E[f(Z)], Z ~ N(0, variance). Weights sum to one.
struct QuadRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
QuadRule gauss_hermite(int n, double variance);

} // namespace glmspec
