#include "glmspec/observation.hpp"

#include "glmspec/errors.hpp"

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace glmspec {

namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

double normal_pdf(double x, double var) {
    return kInvSqrt2Pi / std::sqrt(var) * std::exp(-0.5 * x * x / var);
}

double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// phi(a)/Phi(a), the inverse Mills ratio, without underflow for a << 0
double inv_mills(double a) {
    if (a > -35.0) return kInvSqrt2Pi * std::exp(-0.5 * a * a) / std_normal_cdf(a);
    const double r = 1.0 / (a * a);
    const double series = 1.0 - r + 3.0 * r * r - 15.0 * r * r * r + 105.0 * r * r * r * r;
    return -a / series;
}

double log_poisson_pmf(double y, double mu) {
    if (mu == 0.0) return y == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
    return -mu + y * std::log(mu) - std::lgamma(y + 1.0);
}

bool is_nonneg_integer(double y) { return y >= 0.0 && std::floor(y) == y; }

// outside mu +- (15 sqrt(mu) + 15) the pmf is below 1e-40
std::pair<int, int> poisson_window(double mu, int y_max) {
    const double half = 15.0 * std::sqrt(mu) + 15.0;
    const int lo = int(std::max(0.0, std::floor(mu - half)));
    const int hi = int(std::min(double(y_max), std::ceil(mu + half)));
    return {lo, hi};
}

} // namespace

std::string LinkModel::name() const {
    switch (kind) {
    case LinkKind::PhaseRetrieval: return "phase_retrieval";
    case LinkKind::PhaseRetrievalGaussian: return "phase_retrieval_gaussian";
    case LinkKind::OneBit: return "one_bit";
    case LinkKind::Linear: return "linear";
    case LinkKind::Poisson: return "poisson";
    }
    return "unknown";
}

double LinkModel::noiseless(double g) const {
    switch (kind) {
    case LinkKind::PhaseRetrieval:
    case LinkKind::PhaseRetrievalGaussian: return std::abs(g);
    case LinkKind::OneBit: return g >= 0.0 ? 1.0 : -1.0;
    case LinkKind::Linear: return g;
    case LinkKind::Poisson: return g * g;
    }
    return g;
}

double LinkModel::density(double y, double g) const {
    if (kind == LinkKind::Poisson) {
        if (!is_nonneg_integer(y)) return 0.0;
        return std::exp(log_poisson_pmf(y, g * g));
    }
    if (sigma <= 0.0)
        throw Error(ErrorKind::UnsupportedLink, name() + " without noise has no conditional density");
    return normal_pdf(y - noiseless(g), sigma * sigma);
}

LinkModel parse_link(const std::string& name, double sigma) {
    if (name == "phase_retrieval" || name == "phase_retrieval_noiseless") {
        if (sigma > 0.0) return LinkModel::phase_retrieval_gaussian(sigma);
        return LinkModel::phase_retrieval();
    }
    if (name == "phase_retrieval_gaussian") return LinkModel::phase_retrieval_gaussian(sigma);
    if (name == "one_bit") return LinkModel::one_bit(sigma);
    if (name == "linear") return LinkModel::linear(sigma);
    if (name == "poisson") return LinkModel::poisson();
    throw Error(ErrorKind::ConfigError, "unknown link '" + name + "'");
}

ObservationLaw::ObservationLaw(double g_variance, LinkModel link, int g_nodes, int noise_nodes)
    : v_(g_variance), link_(link) {
    if (!(v_ > 0.0) || !std::isfinite(v_))
        throw Error(ErrorKind::InvariantViolation, "g_variance must be positive");
    if (link_.sigma < 0.0) throw Error(ErrorKind::ConfigError, "negative noise level");
    g_rule_ = gauss_hermite(g_nodes, v_);
    const auto& gx = g_rule_.nodes;
    const auto& gw = g_rule_.weights;

    if (link_.kind == LinkKind::Poisson) {
        double mu_hat = 0.0;
        for (double g : gx) mu_hat = std::max(mu_hat, g * g);
        y_max_ = std::max(60, int(std::ceil(mu_hat + 12.0 * std::sqrt(mu_hat))));
        std::vector<double> p(y_max_ + 1, 0.0), q(y_max_ + 1, 0.0);
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double mu = gx[i] * gx[i];
            double total = 0.0;
            auto [ylo, yhi] = poisson_window(mu, y_max_);
            for (int y = ylo; y <= yhi; ++y) {
                const double pm = std::exp(log_poisson_pmf(double(y), mu));
                total += pm;
                p[y] += gw[i] * pm;
                q[y] += gw[i] * pm * mu;
            }
            if (std::abs(total - 1.0) > 1e-10) {
                std::ostringstream os;
                os << "Poisson pmf at node g=" << gx[i] << " sums to " << total << " over 0.." << y_max_;
                throw Error(ErrorKind::InvariantViolation, os.str());
            }
        }
        for (int y = 0; y <= y_max_; ++y)
            if (p[y] > 1e-300) atoms_.push_back({double(y), q[y] / p[y], p[y]});
    } else if (link_.has_noise()) {
        noise_rule_ = gauss_hermite(noise_nodes, link_.sigma * link_.sigma);
        atoms_.reserve(gx.size() * noise_rule_.nodes.size());
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double y0 = link_.noiseless(gx[i]);
            for (std::size_t j = 0; j < noise_rule_.nodes.size(); ++j)
                atoms_.push_back({y0 + noise_rule_.nodes[j], gx[i] * gx[i], gw[i] * noise_rule_.weights[j]});
        }
    } else {
        atoms_.reserve(gx.size());
        for (std::size_t i = 0; i < gx.size(); ++i)
            atoms_.push_back({link_.noiseless(gx[i]), gx[i] * gx[i], gw[i]});
    }
}

double ObservationLaw::expect(const std::function<double(double, double)>& h) const {
    const auto& gx = g_rule_.nodes;
    const auto& gw = g_rule_.weights;
    double s = 0.0;
    auto add = [&](double w, double g, double y) {
        const double val = h(g, y);
        if (!std::isfinite(val)) {
            std::ostringstream os;
            os << "h(" << g << ", " << y << ") = " << val;
            throw Error(ErrorKind::NonFinite, os.str());
        }
        s += w * val;
    };
    if (link_.kind == LinkKind::Poisson) {
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double mu = gx[i] * gx[i];
            auto [ylo, yhi] = poisson_window(mu, y_max_);
            for (int y = ylo; y <= yhi; ++y) {
                const double pm = std::exp(log_poisson_pmf(double(y), mu));
                if (pm > 0.0) add(gw[i] * pm, gx[i], double(y));
            }
        }
    } else if (link_.has_noise()) {
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double y0 = link_.noiseless(gx[i]);
            for (std::size_t j = 0; j < noise_rule_.nodes.size(); ++j)
                add(gw[i] * noise_rule_.weights[j], gx[i], y0 + noise_rule_.nodes[j]);
        }
    } else {
        for (std::size_t i = 0; i < gx.size(); ++i) add(gw[i], gx[i], link_.noiseless(gx[i]));
    }
    return s;
}

namespace {

// composite Gauss-Legendre on the sorted edges
template <class Emit>
void composite_gl(std::vector<double> edges, int order, Emit emit) {
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    gsl_integration_glfixed_table* tab = gsl_integration_glfixed_table_alloc(order);
    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        const double lo = edges[k], hi = edges[k + 1];
        if (!(hi > lo)) continue;
        for (int i = 0; i < order; ++i) {
            double x, w;
            gsl_integration_glfixed_point(lo, hi, std::size_t(i), &x, &w, tab);
            emit(x, w);
        }
    }
    gsl_integration_glfixed_table_free(tab);
}

std::vector<double> uniform_edges(double lo, double hi, int panels) {
    std::vector<double> e(panels + 1);
    for (int i = 0; i <= panels; ++i) e[i] = lo + (hi - lo) * double(i) / double(panels);
    return e;
}

} // namespace

std::vector<ObsAtom> ObservationLaw::refined_atoms(const std::vector<double>& y_breaks) const {
    if (link_.kind == LinkKind::Poisson) return atoms_;
    constexpr double kSpan = 12.0;
    constexpr int kOrder = 16;
    std::vector<ObsAtom> out;
    double total = 0.0;
    const double rv = std::sqrt(v_);
    if (!link_.has_noise()) {
        // g-space; y-breaks map back through q
        std::vector<double> edges = uniform_edges(-kSpan * rv, kSpan * rv, 96);
        edges.push_back(0.0);
        for (double yb : y_breaks) {
            for (double g : {yb, -yb}) {
                if (std::abs(g) < kSpan * rv && link_.noiseless(g) == yb) edges.push_back(g);
            }
        }
        composite_gl(edges, kOrder, [&](double g, double w) {
            const double wt = w * normal_pdf(g, v_);
            total += wt;
            out.push_back({link_.noiseless(g), g * g, wt});
        });
    } else {
        const double s = link_.sigma;
        double y0lo = link_.noiseless(-kSpan * rv), y0hi = y0lo;
        for (double g : g_rule_.nodes) {
            y0lo = std::min(y0lo, link_.noiseless(g));
            y0hi = std::max(y0hi, link_.noiseless(g));
        }
        y0lo = std::min({y0lo, link_.noiseless(-kSpan * rv), link_.noiseless(0.0)});
        y0hi = std::max({y0hi, link_.noiseless(kSpan * rv), link_.noiseless(0.0)});
        const double lo = y0lo - kSpan * s, hi = y0hi + kSpan * s;
        const double width = 0.5 * std::min(s, rv);
        const int panels = std::clamp(int(std::ceil((hi - lo) / width)), 64, 8000);
        std::vector<double> edges = uniform_edges(lo, hi, panels);
        for (double yb : y_breaks)
            if (yb > lo && yb < hi) edges.push_back(yb);
        composite_gl(edges, kOrder, [&](double y, double w) {
            const CondMoments m = cond_moments(y);
            if (!(m.m0 > 1e-300)) return;
            const double wt = w * m.m0;
            total += wt;
            out.push_back({y, v_ * m.m2 / m.m0, wt});
        });
    }
    if (std::abs(total - 1.0) > 1e-8) {
        std::ostringstream os;
        os << link_.name() << ": refined rule carries mass " << total;
        throw Error(ErrorKind::InvariantViolation, os.str());
    }
    for (auto& a : out) a.w /= total;
    return out;
}

CondMoments ObservationLaw::cond_moments_quadrature(double y) const {
    const auto& gx = g_rule_.nodes;
    const auto& gw = g_rule_.weights;
    CondMoments m{0.0, 0.0};
    for (std::size_t i = 0; i < gx.size(); ++i) {
        const double p = link_.density(y, gx[i]);
        m.m0 += gw[i] * p;
        m.m2 += gw[i] * p * gx[i] * gx[i] / v_;
    }
    return m;
}

CondMoments ObservationLaw::cond_moments(double y) const {
    const double v = v_;
    const double s2 = link_.sigma * link_.sigma;
    switch (link_.kind) {
    case LinkKind::Poisson:
        if (!is_nonneg_integer(y)) return {0.0, 0.0};
        return cond_moments_quadrature(y);
    case LinkKind::PhaseRetrieval: {
        if (y < 0.0) return {0.0, 0.0};
        const double m0 = 2.0 * normal_pdf(y, v);
        return {m0, m0 * y * y / v};
    }
    case LinkKind::Linear: {
        const double s = v + s2;
        const double m0 = normal_pdf(y, s);
        if (s2 == 0.0) return {m0, m0 * y * y / v};
        // G | Y=y ~ N(v y/s, v s2/s)
        const double mean = v * y / s, var = v * s2 / s;
        return {m0, m0 * (mean * mean + var) / v};
    }
    case LinkKind::OneBit: {
        if (s2 == 0.0) {
            const double m0 = (y == 1.0 || y == -1.0) ? 0.5 : 0.0;
            return {m0, m0};
        }
        // sgn(G) is independent of G^2, so E[G^2 | Y] = v
        const double m0 = 0.5 * normal_pdf(y - 1.0, s2) + 0.5 * normal_pdf(y + 1.0, s2);
        return {m0, m0};
    }
    case LinkKind::PhaseRetrievalGaussian: {
        if (s2 == 0.0) {
            if (y < 0.0) return {0.0, 0.0};
            const double m0 = 2.0 * normal_pdf(y, v);
            return {m0, m0 * y * y / v};
        }
        // E[phi_s2(y - |G|)] = 2 phi_s(y) P(N(m, tau) > 0) with s = v + s2
        const double s = v + s2;
        const double mean = v * y / s, tau = v * s2 / s, rt = std::sqrt(tau);
        const double alpha = mean / rt;
        const double base = 2.0 * normal_pdf(y, s);
        const double cdf = std_normal_cdf(alpha);
        const double m0 = base * cdf;
        const double m2 = base * ((mean * mean + tau) * cdf + mean * rt * kInvSqrt2Pi * std::exp(-0.5 * alpha * alpha)) / v;
        return {m0, m2};
    }
    }
    throw Error(ErrorKind::UnsupportedLink, link_.name());
}

double ObservationLaw::ratio(double y) const {
    const double v = v_;
    const double s2 = link_.sigma * link_.sigma;
    switch (link_.kind) {
    case LinkKind::PhaseRetrieval: return y * y / v;
    case LinkKind::OneBit: return 1.0;
    case LinkKind::Linear: {
        if (s2 == 0.0) return y * y / v;
        const double s = v + s2;
        const double mean = v * y / s, var = v * s2 / s;
        return (mean * mean + var) / v;
    }
    case LinkKind::PhaseRetrievalGaussian: {
        if (s2 == 0.0) return y * y / v;
        const double s = v + s2;
        const double mean = v * y / s, tau = v * s2 / s, rt = std::sqrt(tau);
        return (mean * mean + tau + mean * rt * inv_mills(mean / rt)) / v;
    }
    case LinkKind::Poisson: {
        if (!is_nonneg_integer(y))
            throw Error(ErrorKind::UnsupportedLink, "Poisson ratio at non-integer y");
        // log-sum-exp over the g nodes
        const auto& gx = g_rule_.nodes;
        const auto& gw = g_rule_.weights;
        std::vector<double> l(gx.size());
        double lmax = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < gx.size(); ++i) {
            l[i] = std::log(gw[i]) + log_poisson_pmf(y, gx[i] * gx[i]);
            lmax = std::max(lmax, l[i]);
        }
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < gx.size(); ++i) {
            const double e = std::exp(l[i] - lmax);
            den += e;
            num += e * gx[i] * gx[i];
        }
        return num / den / v;
    }
    }
    throw Error(ErrorKind::UnsupportedLink, link_.name());
}

double ObservationLaw::ratio_divergence() const {
    double s = 0.0;
    for (const auto& a : atoms_) {
        // aggregated Poisson atoms already carry E[G^2 | y]
        const double r = link_.kind == LinkKind::Poisson ? a.g2 / v_ : ratio(a.y);
        s += a.w * (r - 1.0) * (r - 1.0);
    }
    return s;
}

} // namespace glmspec
