// Link functions and the law of the scalar pair (G, Y), G ~ N(0, v),
// Y = q(G, eps).
#pragma once

#include "glmspec/measure.hpp"

#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace glmspec {

enum class LinkKind {
    PhaseRetrieval,          // y = |g|
    PhaseRetrievalGaussian,  // y = |g| + eps
    OneBit,                  // y = sgn(g) + eps
    Linear,                  // y = g + eps
    Poisson,                 // y ~ Pois(g^2)
};

struct LinkModel {
    LinkKind kind = LinkKind::PhaseRetrieval;
    double sigma = 0.0;  // additive Gaussian noise level where applicable

    static LinkModel phase_retrieval() { return {LinkKind::PhaseRetrieval, 0.0}; }
    static LinkModel phase_retrieval_gaussian(double s) { return {LinkKind::PhaseRetrievalGaussian, s}; }
    static LinkModel one_bit(double s) { return {LinkKind::OneBit, s}; }
    static LinkModel linear(double s) { return {LinkKind::Linear, s}; }
    static LinkModel poisson() { return {LinkKind::Poisson, 0.0}; }

    std::string name() const;
    bool discrete_output() const { return kind == LinkKind::Poisson; }
    bool has_noise() const { return kind != LinkKind::Poisson && sigma > 0.0; }
    // y is a deterministic function of g
    bool deterministic() const { return kind != LinkKind::Poisson && sigma == 0.0; }

    double noiseless(double g) const;  // q(g, 0) for additive-noise links

    // draws y given g; eps drawn from `rng`
    template <class Rng>
    double sample(double g, Rng& rng) const {
        if (kind == LinkKind::Poisson) {
            const double mu = g * g;
            if (mu == 0.0) return 0.0;
            std::poisson_distribution<long long> pois(mu);
            return double(pois(rng));
        }
        double y = noiseless(g);
        if (sigma > 0.0) {
            std::normal_distribution<double> nd(0.0, sigma);
            y += nd(rng);
        }
        return y;
    }

    // p(y | g) for links with a density or pmf (not the noiseless ones)
    double density(double y, double g) const;
};

LinkModel parse_link(const std::string& name, double sigma);

enum class OutputKind { Continuous, NonnegInteger };

// One point of the joint quadrature of (G, Y): y, g^2 (or E[G^2 | y] after
// aggregation for discrete outputs) and the weight.
struct ObsAtom {
    double y;
    double g2;
    double w;
};

struct CondMoments {
    double m0;
    double m2;
};

class ObservationLaw {
public:
    ObservationLaw(double g_variance, LinkModel link, int g_nodes = 201, int noise_nodes = 101);

    double g_variance() const { return v_; }
    const LinkModel& link() const { return link_; }
    OutputKind output_kind() const {
        return link_.discrete_output() ? OutputKind::NonnegInteger : OutputKind::Continuous;
    }
    const QuadRule& g_quadrature() const { return g_rule_; }
    const QuadRule& noise_quadrature() const { return noise_rule_; }
    int y_max() const { return y_max_; }

    // E[h(G, Y)] by tensor quadrature
    double expect(const std::function<double(double, double)>& h) const;

    // m0(y) = E[p(y|G)], m2(y) = E[p(y|G) G^2 / v]
    CondMoments cond_moments(double y) const;
    // the same by g-quadrature of p(y|g); links with a density only
    CondMoments cond_moments_quadrature(double y) const;
    // m2/m0, evaluated stably; the ratio E[G^2 | Y=y]/v
    double ratio(double y) const;

    // reduced joint grid: only functions of y and g^2 are integrated here
    const std::vector<ObsAtom>& atoms() const { return atoms_; }

    // A finer rule for functions of y that are only piecewise smooth, with
    // panel edges at the given y values. Deterministic links integrate in g,
    // noisy continuous links in y against m0(y); Poisson returns atoms().
    std::vector<ObsAtom> refined_atoms(const std::vector<double>& y_breaks) const;

    // E[(m2/m0 - 1)^2] under the law of Y, i.e. the integral of (m2-m0)^2/m0
    double ratio_divergence() const;

private:
    double v_;
    LinkModel link_;
    QuadRule g_rule_;
    QuadRule noise_rule_;
    int y_max_ = 0;
    std::vector<ObsAtom> atoms_;
};

} // namespace glmspec
