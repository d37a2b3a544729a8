#include "glmspec/gamp.hpp"

#include "glmspec/errors.hpp"
#include "glmspec/rng.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace glmspec {

double se_distance(const SEState& a, const SEState& b) {
    return std::max({std::abs(a.mu - b.mu), std::abs(a.sigma_u - b.sigma_u), std::abs(a.chi - b.chi),
                     std::abs(a.sigma_v - b.sigma_v), std::abs(a.gamma - b.gamma)});
}

SEContext make_se_context(const TheoryContext& ctx, double a_star, double gamma_star) {
    SEContext se;
    se.delta = ctx.delta();
    se.sigma = ctx.sigma();
    se.sigma_mean = ctx.sigma_mean();
    se.a_star = a_star;
    se.gamma_star = gamma_star;
    se.m = ctx.obs_moments(a_star);
    se.c = se.m.ef;
    se.edge = s_of_a(ctx, a_star);
    if (!(gamma_star > se.edge)) {
        std::ostringstream os;
        os << "gamma*=" << gamma_star << " not above s(a*)=" << se.edge;
        throw Error(ErrorKind::InvariantViolation, os.str());
    }
    return se;
}

SEState se_step(const SEContext& se, const SEState& s) {
    const double delta = se.delta, es = se.sigma_mean;
    const RationalMoments r = rational_moments(se.sigma, s.gamma, se.c);
    SEState o;
    o.mu = r.s21 * s.chi / es;
    double su2 = (r.s32 * s.chi * s.chi + r.s22 * s.sigma_v * s.sigma_v) / delta - es / delta * o.mu * o.mu;
    if (su2 < 0.0) {
        // only rounding can push this below zero (Cauchy-Schwarz)
        if (su2 < -1e-12 * std::max(1.0, r.s22 * s.sigma_v * s.sigma_v)) {
            std::ostringstream os;
            os << "sigma_U^2 = " << su2;
            throw Error(ErrorKind::InvariantViolation, os.str());
        }
        su2 = 0.0;
    }
    o.sigma_u = std::sqrt(su2);
    o.chi = (delta / es * se.m.eg2f - se.m.ef) * o.mu;
    const double sv2 = se.m.eg2f2 * o.mu * o.mu + se.m.ef2 * su2;
    o.sigma_v = std::sqrt(sv2);
    o.gamma = gamma_normalizing(se.sigma, se.c, o.chi * o.chi, sv2);
    return o;
}

SEFixedPoints se_fixed_points(const SEContext& se) {
    const double delta = se.delta, es = se.sigma_mean;
    const RationalMoments r = rational_moments(se.sigma, se.gamma_star, se.c);
    SEFixedPoints fp;
    fp.w1 = (delta / es * se.m.eg2f2 - se.m.ef2) * r.s21 * r.s21 / (delta * es) + se.m.ef2 * r.s32 / delta;
    fp.w2 = se.m.ef2 * r.s22 / delta;
    fp.z1 = r.s32;
    fp.z2 = r.s22;
    if (!(fp.w1 > 0.0) || !(fp.w2 < 1.0)) {
        std::ostringstream os;
        os << "fixed points need w1 > 0 and w2 < 1, got w1=" << fp.w1 << " w2=" << fp.w2;
        throw Error(ErrorKind::InvariantViolation, os.str());
    }
    const double den = (1.0 - fp.w2) * fp.z1 + fp.w1 * fp.z2;
    const double chi = std::sqrt((1.0 - fp.w2) / den);
    const double sv = std::sqrt(fp.w1 / den);
    const double mu = r.s21 * chi / es;
    const double radicand = fp.z1 - r.s21 * r.s21 / es + fp.z2 * se.m.eg2f2 * r.s21 * r.s21 / (es * es);
    if (!(radicand > 0.0)) {
        std::ostringstream os;
        os << "sigma_U radicand " << radicand;
        throw Error(ErrorKind::InvariantViolation, os.str());
    }
    const double su = std::sqrt(radicand / (delta * den));
    if (!(1.0 - mu * mu * es > 0.0)) {
        std::ostringstream os;
        os << "1 - mu^2 E[S] = " << 1.0 - mu * mu * es;
        throw Error(ErrorKind::InvariantViolation, os.str());
    }
    fp.plus = {mu, su, chi, sv, se.gamma_star};
    fp.minus = {-mu, su, -chi, sv, se.gamma_star};

    const double g_sharp = gamma_normalizing(se.sigma, se.c, 0.0, se.m.ef2 / delta);
    const double s22 = rational_moments(se.sigma, g_sharp, se.c).s22;
    fp.zero = {0.0, 1.0 / std::sqrt(delta), 0.0, 1.0 / std::sqrt(s22), g_sharp};
    return fp;
}

Eigen::VectorXd GampContext::apply_B(const Eigen::VectorXd& v) const {
    const auto& cov = *ds->cov;
    if (cov.is_identity) return b_diag(0) * v;
    const Eigen::VectorXd w = cov.eigenvectors.transpose() * v;
    return cov.eigenvectors * b_diag.cwiseProduct(w);
}

GampContext make_gamp_context(const Dataset& ds, const SEContext& se, const Preprocessor& pre) {
    if (!ds.cov) throw Error(ErrorKind::InvariantViolation, "dataset carries no covariance factors");
    GampContext g;
    g.ds = &ds;
    g.a_star = se.a_star;
    g.gamma_star = se.gamma_star;
    g.c = se.c;
    if (!ds.cov->is_identity) g.Xw = ds.X * ds.cov->inv_sqrt;
    g.F.resize(ds.n());
    for (int i = 0; i < ds.n(); ++i) g.F(i) = f_a(pre, se.a_star, ds.y(i));
    const Eigen::VectorXd& lam = ds.cov->eigenvalues;
    g.b_diag.resize(lam.size());
    for (Eigen::Index k = 0; k < lam.size(); ++k) g.b_diag(k) = lam(k) / (se.gamma_star - se.c * lam(k));
    g.b = g.b_diag.sum() / double(ds.n());
    return g;
}

GampState gamp_init(const Dataset& ds, const SEFixedPoints& fp, double sigma_mean, std::uint64_t seed) {
    const double mu = fp.plus.mu;
    if (!(mu > 0.0)) throw Error(ErrorKind::ConfigError, "GAMP initialization needs mu > 0 (supercritical)");
    const double rest = 1.0 - mu * mu * sigma_mean;
    if (!(rest > 0.0)) throw Error(ErrorKind::InvariantViolation, "1 - mu^2 E[S] <= 0");
    Philox4x32 rng(seed, ds.trial, StreamTag::GampInit);
    std::normal_distribution<double> nd;
    Eigen::VectorXd w(ds.d());
    for (int i = 0; i < ds.d(); ++i) w(i) = nd(rng);

    GampState st;
    const Eigen::VectorXd bt = ds.cov->is_identity ? ds.beta_star : Eigen::VectorXd(ds.cov->sqrt * ds.beta_star);
    st.v_tilde = mu * bt + std::sqrt(rest) * w;
    st.u_tilde_prev = Eigen::VectorXd::Zero(ds.n());
    st.v = Eigen::VectorXd::Zero(ds.d());
    st.u = Eigen::VectorXd::Zero(ds.n());
    st.t = 0;
    return st;
}

void gamp_step(GampState& st, const GampContext& g) {
    const Eigen::MatrixXd& X = g.design();
    st.u.noalias() = X * st.v_tilde;
    st.u -= st.b * st.u_tilde_prev;
    st.u_tilde_prev = g.F.cwiseProduct(st.u);
    st.c = g.F.mean();
    st.v.noalias() = X.transpose() * st.u_tilde_prev;
    st.v -= st.c * st.v_tilde;
    st.v_tilde = g.apply_B(st.v);
    st.b = g.b;
    ++st.t;
}

SurrogateResult run_power_surrogate(const GampContext& g, const SEFixedPoints& fp, const Eigen::MatrixXd& D,
                                    int t_max, std::uint64_t seed) {
    const Dataset& ds = *g.ds;
    const auto& cov = *ds.cov;
    const double es = cov.measure.mean();
    GampState st = gamp_init(ds, fp, es, seed);
    const Eigen::VectorXd bt = cov.is_identity ? ds.beta_star : Eigen::VectorXd(cov.sqrt * ds.beta_star);
    const double lambda1 = g.a_star * g.gamma_star;
    const double sn = std::sqrt(double(ds.n())), sd = std::sqrt(double(ds.d()));

    SurrogateResult res;
    Eigen::VectorXd u_prev, v_prev;
    auto whiten = [&](const Eigen::VectorXd& vt) -> Eigen::VectorXd {
        return cov.is_identity ? vt : Eigen::VectorXd(cov.inv_sqrt * vt);
    };
    for (int t = 0; t < t_max; ++t) {
        gamp_step(st, g);
        SurrogateStep s;
        s.t = t;
        s.e1 = u_prev.size() ? (st.u - u_prev).norm() / sn : std::nan("");
        s.e2 = v_prev.size() ? (st.v - v_prev).norm() / sd : std::nan("");
        const Eigen::VectorXd vh = whiten(st.v_tilde);
        s.residual = (D * vh - lambda1 * vh).norm() / (lambda1 * vh.norm());
        s.norm_v = st.v.squaredNorm() / double(ds.d());
        s.corr_v = st.v.dot(bt) / double(ds.d());
        res.steps.push_back(s);
        u_prev = st.u;
        v_prev = st.v;
    }
    res.v_hat = whiten(st.v_tilde);
    return res;
}

} // namespace glmspec
