// Asymptotic predictions: the self-consistent equations in a, the bulk edge
// and outlier location, the limiting overlap, the optimal threshold, and the
// whitened estimator's counterparts.
#pragma once

#include "glmspec/measure.hpp"
#include "glmspec/observation.hpp"
#include "glmspec/preprocess.hpp"

#include <optional>
#include <vector>

namespace glmspec {

// Expectations over (G, Y) that depend on a only through F_a = T/(a - T).
struct ObsMoments {
    double ef = 0;      // E[F]
    double ef2 = 0;     // E[F^2]
    double eg2f = 0;    // E[G^2 F]
    double eg2f2 = 0;   // E[G^2 F^2]
    double edf = 0;     // E[T/(a-T)^2] = -d/da E[F]
};

class TheoryContext {
public:
    TheoryContext(double delta, ScalarMeasure sigma, ObservationLaw law, Preprocessor pre);

    double delta() const { return delta_; }
    const ScalarMeasure& sigma() const { return sigma_; }
    const ObservationLaw& law() const { return law_; }
    const Preprocessor& preproc() const { return pre_; }
    double t_sup() const { return t_sup_; }
    double sigma_mean() const { return sigma_mean_; }
    double sigma_second() const { return sigma_second_; }

    // left end of every a-bracket
    double a_lo() const;
    // right end: the expansion budget
    double a_hi() const;

    ObsMoments obs_moments(double a) const;

private:
    double delta_;
    ScalarMeasure sigma_;
    ObservationLaw law_;
    Preprocessor pre_;
    double t_sup_, sigma_mean_, sigma_second_;
    // T(y), g^2 and weight on the law's reduced grid
    std::vector<double> t_, g2_, w_;
};

// Convenience: law with variance E[Sigma]/delta, then the preprocessor on it.
// OptimalThreshold gets Delta(delta) filled in when params leave it unset.
TheoryContext make_context(double delta, const ScalarMeasure& sigma, const LinkModel& link, PreprocKind kind,
                           PreprocParams params = {});

double s_of_a(const TheoryContext& ctx, double a);

struct GammaRoot {
    double gamma;
    double c;         // E[F_a]
    double residual;  // 1 - (1/delta) E[S/(gamma - c S)]
};
GammaRoot solve_gamma(const TheoryContext& ctx, double a);
double gamma_of_a(const TheoryContext& ctx, double a);

// root in (lower edge, inf) of 1 = (1/delta) E[S/(gamma - c S)] for given c
double gamma_for_c(const ScalarMeasure& sigma, double delta, double c);

// root in (lower edge, inf) of 1 = p E[S^3/(g - cS)^2] + q E[S^2/(g - cS)^2]
double gamma_normalizing(const ScalarMeasure& sigma, double c, double p, double q);

double phi(const TheoryContext& ctx, double a);
double psi(const TheoryContext& ctx, double a);
double psi_prime(const TheoryContext& ctx, double a);
double gamma_prime(const TheoryContext& ctx, double a);

struct CriticalPoint {
    double a = 0;
    double gamma = 0;
    bool at_edge = false;             // psi' > 0 on the whole bracket
    std::vector<double> roots;        // every psi' root found
    double selfcons_residual = 0;     // bulk self-consistency check at (a, gamma)
};
CriticalPoint find_a_circ(const TheoryContext& ctx);

double zeta(const TheoryContext& ctx, double a, double a_circ);

struct StarPoint {
    bool supercritical = false;
    double a = 0;
    double gamma = 0;
    double residual = 0;              // phi - zeta at the root
    std::vector<double> roots;        // all sign changes found (largest kept)
};
StarPoint find_a_star(const TheoryContext& ctx, double a_circ);

struct CriticalPoints {
    double a_circ = 0;
    double gamma_circ = 0;
    std::optional<double> a_star;
    std::optional<double> gamma_star;
    bool supercritical = false;
    bool a_circ_at_edge = false;
};

struct OverlapParams {
    double w1 = 0, w2 = 0, z1 = 0, z2 = 0;
    double eta = 0;
    double lambda1 = 0;
    double gamma_sharp = 0;
    double c = 0;  // E[F_{a*}]
};
OverlapParams overlap_params(const TheoryContext& ctx, double a_star, double gamma_star);

struct TheoryResult {
    double lambda1 = 0, lambda2 = 0, eta = 0;
    double w1 = 0, w2 = 0, z1 = 0, z2 = 0;
    double gamma_sharp = 0;
    CriticalPoints critical_points;
};
TheoryResult predict(const TheoryContext& ctx);

struct WhitenedTheoryResult {
    double a_circ_k = 0, a_star_k = 0;
    double lambda1_k = 0, lambda2_k = 0, eta_k = 0;
    bool supercritical_k = false;
};
double phi_known(const TheoryContext& ctx, double a);
double psi_known(const TheoryContext& ctx, double a);
double psi_known_prime(const TheoryContext& ctx, double a);
WhitenedTheoryResult whitened_theory(const TheoryContext& ctx);

// Delta(delta) = (E[S]^2 / E[S^2]) / integral (m2 - m0)^2 / m0
double delta_cap(const ScalarMeasure& sigma, const LinkModel& link, double delta);

struct ThresholdResult {
    double delta_cap = 0;                    // at the requested delta
    std::optional<double> fixed_point_delta; // smallest delta = Delta(delta)
};
ThresholdResult optimal_threshold(const ScalarMeasure& sigma, const LinkModel& link, double delta,
                                  double scan_lo = 1e-3, double scan_hi = 1e3, int scan_points = 400);

} // namespace glmspec
