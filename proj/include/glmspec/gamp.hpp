// GAMP run as a power method on D, and its scalar state evolution. The
// initialization uses beta*, so this is a verification device, not a solver.
#pragma once

#include "glmspec/model.hpp"
#include "glmspec/theory.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace glmspec {

// (mu_t, sigma_U_t, chi_{t+1}, sigma_V_{t+1}, gamma_{t+1})
struct SEState {
    double mu = 0, sigma_u = 0, chi = 0, sigma_v = 0, gamma = 0;
};

// max-abs difference over the five coordinates
double se_distance(const SEState& a, const SEState& b);

// Everything the recursion needs, frozen at a*.
struct SEContext {
    double delta = 0;
    ScalarMeasure sigma = ScalarMeasure::point_mass(1.0);
    double sigma_mean = 0;
    double a_star = 0, gamma_star = 0;
    double c = 0;        // E[F_{a*}]
    ObsMoments m;        // at a*
    double edge = 0;     // s(a*)
};
SEContext make_se_context(const TheoryContext& ctx, double a_star, double gamma_star);

SEState se_step(const SEContext& se, const SEState& s);

struct SEFixedPoints {
    SEState plus, minus, zero;
    double w1 = 0, w2 = 0, z1 = 0, z2 = 0;
};
SEFixedPoints se_fixed_points(const SEContext& se);

// Data-side constants of the iteration: the whitened design, F = F_{a*}(y),
// the spectral factors of Sigma and B = (gamma* I - c Sigma)^{-1} Sigma.
struct GampContext {
    const Dataset* ds = nullptr;
    Eigen::MatrixXd Xw;            // X Sigma^{-1/2}; empty for identity (X used directly)
    Eigen::VectorXd F;
    Eigen::VectorXd b_diag;        // eigenvalues of B
    double a_star = 0, gamma_star = 0, c = 0;
    double b = 0;                  // tr(B)/n

    const Eigen::MatrixXd& design() const { return Xw.size() ? Xw : ds->X; }
    // B v via the eigendecomposition of Sigma
    Eigen::VectorXd apply_B(const Eigen::VectorXd& v) const;
};
GampContext make_gamp_context(const Dataset& ds, const SEContext& se, const Preprocessor& pre);

struct GampState {
    Eigen::VectorXd u, v, u_tilde_prev, v_tilde;
    double b = 0, c = 0;
    int t = 0;
};

GampState gamp_init(const Dataset& ds, const SEFixedPoints& fp, double sigma_mean, std::uint64_t seed);
// one pass: u^t, u~^t, c_t, v^{t+1}, v~^{t+1}, b_{t+1}
void gamp_step(GampState& st, const GampContext& g);

struct SurrogateStep {
    int t = 0;
    double e1 = 0;        // ||u^t - u^{t-1}|| / sqrt(n)
    double e2 = 0;        // ||v^{t+1} - v^t|| / sqrt(d)
    double residual = 0;  // ||D vh - lambda1 vh|| / (lambda1 ||vh||)
    double norm_v = 0;    // (1/d)||v^{t+1}||^2
    double corr_v = 0;    // (1/d)<v^{t+1}, Sigma^{1/2} beta*>
};
struct SurrogateResult {
    Eigen::VectorXd v_hat;  // Sigma^{-1/2} B v^{t_max}
    std::vector<SurrogateStep> steps;
};
// D is the spectral matrix of the same dataset and preprocessor.
SurrogateResult run_power_surrogate(const GampContext& g, const SEFixedPoints& fp, const Eigen::MatrixXd& D,
                                    int t_max, std::uint64_t seed);

} // namespace glmspec
