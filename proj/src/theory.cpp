#include "glmspec/theory.hpp"

#include "glmspec/errors.hpp"

#include <boost/math/tools/roots.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

namespace glmspec {

namespace {

constexpr int kScanPoints = 4000;

// Refine a bracketed root of f to (nearly) full precision.
double refine(const std::function<double(double)>& f, double lo, double hi, double flo, double fhi) {
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    boost::uintmax_t iters = 200;
    auto tol = boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 2);
    auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
    return 0.5 * (r.first + r.second);
}

// Geometric grid base + x, x from xlo to xhi.
std::vector<double> geometric_grid(double base, double xlo, double xhi, int n) {
    std::vector<double> g(n);
    const double r = std::log(xhi / xlo) / double(n - 1);
    for (int i = 0; i < n; ++i) g[i] = base + xlo * std::exp(r * double(i));
    g.back() = base + xhi;
    return g;
}

std::string fmt_bracket(const char* what, double a, double b) {
    std::ostringstream os;
    os << what << " on [" << a << ", " << b << "]";
    return os.str();
}

// Largest root of an increasing-at-infinity function on a geometric grid
// above `base`. Returns all refined roots (ascending); empty if no sign change.
std::vector<double> scan_roots(const std::function<double(double)>& f, const std::vector<double>& grid,
                               std::vector<double>* values = nullptr) {
    std::vector<double> fv(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) fv[i] = f(grid[i]);
    std::vector<double> roots;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
        const bool change = (fv[i] < 0.0 && fv[i + 1] >= 0.0) || (fv[i] > 0.0 && fv[i + 1] <= 0.0);
        if (change) roots.push_back(refine(f, grid[i], grid[i + 1], fv[i], fv[i + 1]));
    }
    if (values) *values = std::move(fv);
    return roots;
}

} // namespace

TheoryContext::TheoryContext(double delta, ScalarMeasure sigma, ObservationLaw law, Preprocessor pre)
    : delta_(delta), sigma_(std::move(sigma)), law_(std::move(law)), pre_(std::move(pre)) {
    if (!(delta_ > 0.0)) throw Error(ErrorKind::ConfigError, "delta must be positive");
    if (!sigma_.strictly_positive())
        throw Error(ErrorKind::NotPositiveDefinite, "spectral measure has a non-positive atom");
    sigma_mean_ = sigma_.mean();
    sigma_second_ = moment(sigma_, 2);
    const double v = sigma_mean_ / delta_;
    if (std::abs(law_.g_variance() - v) > 1e-12 * std::max(1.0, v)) {
        std::ostringstream os;
        os << "law variance " << law_.g_variance() << " != E[S]/delta = " << v;
        throw Error(ErrorKind::InvariantViolation, os.str());
    }
    t_sup_ = pre_.t_sup();
    const std::vector<ObsAtom> atoms = law_.refined_atoms(pre_.breaks());
    t_.reserve(atoms.size());
    g2_.reserve(atoms.size());
    w_.reserve(atoms.size());
    for (const auto& a : atoms) {
        if (!(a.w > 0.0)) continue;
        const double t = pre_(a.y);
        if (!std::isfinite(t)) throw Error(ErrorKind::NonFinite, pre_.id() + " not finite on the grid");
        if (t > t_sup_ + 1e-9 * std::max(1.0, t_sup_)) {
            std::ostringstream os;
            os << pre_.id() << ": T(" << a.y << ") = " << t << " exceeds t_sup = " << t_sup_;
            throw Error(ErrorKind::InvariantViolation, os.str());
        }
        t_.push_back(t);
        g2_.push_back(a.g2);
        w_.push_back(a.w);
    }
}

double TheoryContext::a_lo() const { return t_sup_ * (1.0 + 1e-8) + 1e-10; }

double TheoryContext::a_hi() const { return t_sup_ + 1e6 * std::max(1.0, std::abs(t_sup_)); }

ObsMoments TheoryContext::obs_moments(double a) const {
    if (!(a > t_sup_)) {
        std::ostringstream os;
        os << "a=" << a << " not above t_sup=" << t_sup_;
        throw Error(ErrorKind::ADomain, os.str());
    }
    ObsMoments m;
    for (std::size_t i = 0; i < t_.size(); ++i) {
        const double inv = 1.0 / (a - t_[i]);
        const double f = t_[i] * inv;
        const double wf = w_[i] * f;
        m.ef += wf;
        m.ef2 += wf * f;
        m.eg2f += wf * g2_[i];
        m.eg2f2 += wf * f * g2_[i];
        m.edf += wf * inv;
    }
    return m;
}

TheoryContext make_context(double delta, const ScalarMeasure& sigma, const LinkModel& link, PreprocKind kind,
                           PreprocParams params) {
    ObservationLaw law(sigma.mean() / delta, link);
    if (kind == PreprocKind::OptimalThreshold && std::isnan(params.delta_cap))
        params.delta_cap = delta_cap(sigma, link, delta);
    Preprocessor pre = make_preprocessor(kind, params, law, delta);
    return TheoryContext(delta, sigma, std::move(law), std::move(pre));
}

namespace {

double lower_edge(const ScalarMeasure& sigma, double c) {
    if (std::abs(c) < 1e-13) return 0.0;
    return c > 0.0 ? sigma.sup() * c : sigma.inf() * c;
}

// root in (lower_edge, inf) of g(gamma) = rhs(gamma) - 1 where rhs is
// decreasing and blows up at the edge
double solve_above_edge(const std::function<double(double)>& g, double edge, const char* what) {
    const double scale = std::max(1.0, std::abs(edge));
    double lo = edge + 1e-12 * scale;
    double glo = g(lo);
    if (!(glo > 0.0)) {
        // the edge atom carries too little mass to blow up at this offset
        throw Error(ErrorKind::BracketFail, fmt_bracket(what, lo, lo));
    }
    double step = 1.0;
    double hi = edge + step, ghi = g(hi);
    int budget = 0;
    while (ghi > 0.0) {
        lo = hi;
        glo = ghi;
        step *= 2.0;
        hi = edge + step;
        ghi = g(hi);
        if (++budget > 200) throw Error(ErrorKind::BracketFail, fmt_bracket(what, edge, hi));
    }
    return refine(g, lo, hi, glo, ghi);
}

} // namespace

double s_of_a(const TheoryContext& ctx, double a) {
    return lower_edge(ctx.sigma(), ctx.obs_moments(a).ef);
}

double gamma_for_c(const ScalarMeasure& sigma, double delta, double c) {
    if (std::abs(c) < 1e-13) return sigma.mean() / delta;
    auto g = [&](double gam) { return expect_rational(sigma, 1, 1, gam, c) / delta - 1.0; };
    return solve_above_edge(g, lower_edge(sigma, c), "gamma equation");
}

double gamma_normalizing(const ScalarMeasure& sigma, double c, double p, double q) {
    auto g = [&](double gam) {
        const RationalMoments r = rational_moments(sigma, gam, c);
        return p * r.s32 + q * r.s22 - 1.0;
    };
    return solve_above_edge(g, lower_edge(sigma, c), "normalization equation");
}

GammaRoot solve_gamma(const TheoryContext& ctx, double a) {
    const double c = ctx.obs_moments(a).ef;
    const double gam = gamma_for_c(ctx.sigma(), ctx.delta(), c);
    const double res = 1.0 - expect_rational(ctx.sigma(), 1, 1, gam, c) / ctx.delta();
    return {gam, c, res};
}

double gamma_of_a(const TheoryContext& ctx, double a) { return solve_gamma(ctx, a).gamma; }

namespace {

struct Eval {
    double a, gamma, c;
    ObsMoments m;
    RationalMoments r;
};

Eval evaluate(const TheoryContext& ctx, double a) {
    Eval e;
    e.a = a;
    e.m = ctx.obs_moments(a);
    e.c = e.m.ef;
    e.gamma = gamma_for_c(ctx.sigma(), ctx.delta(), e.c);
    e.r = rational_moments(ctx.sigma(), e.gamma, e.c);
    return e;
}

double phi_of(const TheoryContext& ctx, const Eval& e) {
    return e.a / ctx.sigma_mean() * e.m.eg2f * e.r.s21;
}

double gamma_prime_of(const Eval& e) { return -e.m.edf * e.r.s22 / e.r.s12; }

double psi_prime_of(const Eval& e) { return e.gamma + e.a * gamma_prime_of(e); }

} // namespace

double phi(const TheoryContext& ctx, double a) { return phi_of(ctx, evaluate(ctx, a)); }

double psi(const TheoryContext& ctx, double a) { return a * gamma_of_a(ctx, a); }

double gamma_prime(const TheoryContext& ctx, double a) { return gamma_prime_of(evaluate(ctx, a)); }

double psi_prime(const TheoryContext& ctx, double a) { return psi_prime_of(evaluate(ctx, a)); }

CriticalPoint find_a_circ(const TheoryContext& ctx) {
    const double base = ctx.t_sup();
    const double xlo = ctx.a_lo() - base, xhi = ctx.a_hi() - base;
    const auto grid = geometric_grid(base, xlo, xhi, kScanPoints);
    auto f = [&](double a) { return psi_prime(ctx, a); };
    std::vector<double> vals;
    CriticalPoint cp;
    cp.roots = scan_roots(f, grid, &vals);
    if (!(vals.back() > 0.0)) {
        std::ostringstream os;
        os << "psi' = " << vals.back() << " at the end of the bracket a=" << grid.back();
        throw Error(ErrorKind::BracketFail, os.str());
    }
    if (cp.roots.empty()) {
        // psi is increasing on the whole admissible range: the bulk edge sits
        // at the left end of the bracket
        cp.at_edge = true;
        cp.a = grid.front();
    } else {
        cp.a = cp.roots.back();
    }
    const Eval e = evaluate(ctx, cp.a);
    cp.gamma = e.gamma;
    if (!cp.at_edge) {
        const double scale = std::max(1.0, std::abs(cp.a * cp.gamma));
        const double pp = psi_prime_of(e);
        if (std::abs(pp) > 1e-10 * scale) {
            std::ostringstream os;
            os << "psi'(a_circ) = " << pp;
            throw Error(ErrorKind::ConvergenceFail, os.str());
        }
    }
    cp.selfcons_residual = 1.0 - e.m.ef2 * e.r.s22 / ctx.delta();
    return cp;
}

double zeta(const TheoryContext& ctx, double a, double a_circ) { return psi(ctx, std::max(a, a_circ)); }

StarPoint find_a_star(const TheoryContext& ctx, double a_circ) {
    StarPoint sp;
    auto h = [&](double a) {
        const Eval e = evaluate(ctx, a);
        return phi_of(ctx, e) - a * e.gamma;  // phi - zeta on a >= a_circ
    };
    const double h0 = h(a_circ);
    if (!(h0 > 0.0)) return sp;  // phi(a_circ) <= zeta(a_circ): subcritical

    const double xhi = ctx.a_hi() - a_circ;
    const double xlo = std::max(1e-12 * std::max(1.0, a_circ), 1e-12);
    if (!(xhi > xlo)) throw Error(ErrorKind::BracketFail, fmt_bracket("phi - zeta", a_circ, ctx.a_hi()));
    std::vector<double> grid = geometric_grid(a_circ, xlo, xhi, kScanPoints);
    grid.insert(grid.begin(), a_circ);
    std::vector<double> vals;
    sp.roots = scan_roots(h, grid, &vals);
    if (!(vals.back() < 0.0)) {
        std::ostringstream os;
        os << "phi - zeta stays positive up to a=" << grid.back() << " (value " << vals.back() << ")";
        throw Error(ErrorKind::BracketFail, os.str());
    }
    // largest downward crossing
    double best = -1.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i)
        if (vals[i] > 0.0 && vals[i + 1] <= 0.0) best = refine(h, grid[i], grid[i + 1], vals[i], vals[i + 1]);
    if (best < 0.0) throw Error(ErrorKind::BracketFail, "no downward crossing of phi - zeta");

    const Eval e = evaluate(ctx, best);
    sp.a = best;
    sp.gamma = e.gamma;
    sp.residual = phi_of(ctx, e) - best * e.gamma;
    const double scale = std::max(1.0, std::abs(best * e.gamma));
    if (std::abs(sp.residual) > 1e-9 * scale) {
        std::ostringstream os;
        os << "phi - zeta residual " << sp.residual << " at a*=" << best;
        throw Error(ErrorKind::ConvergenceFail, os.str());
    }
    sp.supercritical = best > a_circ + 1e-9;
    return sp;
}

OverlapParams overlap_params(const TheoryContext& ctx, double a_star, double gamma_star) {
    const ObsMoments m = ctx.obs_moments(a_star);
    const double c = m.ef;
    const double delta = ctx.delta(), es = ctx.sigma_mean();
    const RationalMoments r = rational_moments(ctx.sigma(), gamma_star, c);

    OverlapParams op;
    op.c = c;
    const double signal_f2 = delta / es * m.eg2f2 - m.ef2;  // E[(delta G^2/E[S] - 1) F^2]
    op.w1 = signal_f2 * r.s21 * r.s21 / (delta * es) + m.ef2 * r.s32 / delta;
    op.w2 = m.ef2 * r.s22 / delta;
    op.z1 = r.s32;
    op.z2 = r.s22;
    op.lambda1 = a_star * gamma_star;

    if (!(op.w1 > 0.0) || !(op.w2 < 1.0)) {
        std::ostringstream os;
        os << "w1=" << op.w1 << " w2=" << op.w2 << " at a*=" << a_star;
        throw Error(ErrorKind::InvariantViolation, os.str());
    }
    // Cauchy-Schwarz: E[S^2/(g - cS)]^2 <= E[S] E[S^3/(g - cS)^2]
    if (r.s21 * r.s21 > es * r.s32 * (1.0 + 1e-12)) {
        std::ostringstream os;
        os << "Cauchy-Schwarz violated: " << r.s21 * r.s21 << " > " << es * r.s32;
        throw Error(ErrorKind::InvariantViolation, os.str());
    }
    const double num = (1.0 - op.w2) * r.s11 * r.s11;
    const double den = (1.0 - op.w2) * r.s22 + op.w1 * r.s12;
    op.eta = std::sqrt(num / den);

    // gamma_sharp: 1 = (1/delta) E[F^2] E[S^2/(g - cS)^2]
    const auto& sigma = ctx.sigma();
    op.gamma_sharp = gamma_normalizing(sigma, c, 0.0, m.ef2 / delta);
    return op;
}

TheoryResult predict(const TheoryContext& ctx) {
    TheoryResult res;
    const CriticalPoint cp = find_a_circ(ctx);
    auto& crit = res.critical_points;
    crit.a_circ = cp.a;
    crit.gamma_circ = cp.gamma;
    crit.a_circ_at_edge = cp.at_edge;
    res.lambda2 = cp.a * cp.gamma;

    const StarPoint sp = find_a_star(ctx, cp.a);
    if (!sp.supercritical) {
        res.lambda1 = res.lambda2;
        res.eta = 0.0;
        return res;
    }
    crit.a_star = sp.a;
    crit.gamma_star = sp.gamma;
    crit.supercritical = true;
    const OverlapParams op = overlap_params(ctx, sp.a, sp.gamma);
    res.lambda1 = op.lambda1;
    res.eta = op.eta;
    res.w1 = op.w1;
    res.w2 = op.w2;
    res.z1 = op.z1;
    res.z2 = op.z2;
    res.gamma_sharp = op.gamma_sharp;
    if (!(res.lambda1 > res.lambda2)) {
        std::ostringstream os;
        os << "supercritical but lambda1=" << res.lambda1 << " <= lambda2=" << res.lambda2;
        throw Error(ErrorKind::InvariantViolation, os.str());
    }
    return res;
}

double phi_known(const TheoryContext& ctx, double a) {
    return a * ctx.delta() / ctx.sigma_mean() * ctx.obs_moments(a).eg2f;
}

double psi_known(const TheoryContext& ctx, double a) {
    return a * (1.0 / ctx.delta() + ctx.obs_moments(a).ef);
}

double psi_known_prime(const TheoryContext& ctx, double a) {
    // d/da [a (1/delta + E F_a)] = 1/delta + E[F] - a E[T/(a-T)^2] = 1/delta - E[F^2]
    return 1.0 / ctx.delta() - ctx.obs_moments(a).ef2;
}

WhitenedTheoryResult whitened_theory(const TheoryContext& ctx) {
    WhitenedTheoryResult w;
    const double base = ctx.t_sup();
    const auto grid = geometric_grid(base, ctx.a_lo() - base, ctx.a_hi() - base, kScanPoints);
    auto dpsi = [&](double a) { return psi_known_prime(ctx, a); };
    std::vector<double> vals;
    const auto roots = scan_roots(dpsi, grid, &vals);
    w.a_circ_k = roots.empty() ? grid.front() : roots.back();
    w.lambda2_k = psi_known(ctx, w.a_circ_k);

    auto h = [&](double a) { return phi_known(ctx, a) - psi_known(ctx, a); };
    const double h0 = h(w.a_circ_k);
    if (!(h0 > 0.0)) {
        w.a_star_k = w.a_circ_k;
        w.lambda1_k = w.lambda2_k;
        return w;
    }
    const double xlo = std::max(1e-12 * std::max(1.0, w.a_circ_k), 1e-12);
    std::vector<double> g2 = geometric_grid(w.a_circ_k, xlo, ctx.a_hi() - w.a_circ_k, kScanPoints);
    g2.insert(g2.begin(), w.a_circ_k);
    std::vector<double> hv;
    scan_roots(h, g2, &hv);
    double best = -1.0;
    for (std::size_t i = 0; i + 1 < g2.size(); ++i)
        if (hv[i] > 0.0 && hv[i + 1] <= 0.0) best = refine(h, g2[i], g2[i + 1], hv[i], hv[i + 1]);
    if (best < 0.0) throw Error(ErrorKind::BracketFail, "no downward crossing of phi_known - zeta_known");
    w.a_star_k = best;
    w.supercritical_k = best > w.a_circ_k + 1e-9;
    if (!w.supercritical_k) {
        w.lambda1_k = w.lambda2_k;
        return w;
    }
    w.lambda1_k = psi_known(ctx, best);
    const ObsMoments m = ctx.obs_moments(best);
    const double delta = ctx.delta();
    // the whitened estimate maps back through S^{-1/2}, hence E[1/S]
    const double inv_mean = expect_rational(ctx.sigma(), 0, 1, 0.0, -1.0);
    const double num = 1.0 - delta * m.ef2;
    const double den = 1.0 + delta * (delta * inv_mean * m.eg2f2 - m.ef2);
    w.eta_k = std::sqrt(num / den);
    return w;
}

double delta_cap(const ScalarMeasure& sigma, const LinkModel& link, double delta) {
    ObservationLaw law(sigma.mean() / delta, link);
    const double integral = law.ratio_divergence();
    if (integral < 1e-14)
        throw Error(ErrorKind::DegenerateLink, link.name() + ": m2 == m0, Delta is infinite");
    const double es = sigma.mean();
    return es * es / moment(sigma, 2) / integral;
}

ThresholdResult optimal_threshold(const ScalarMeasure& sigma, const LinkModel& link, double delta, double scan_lo,
                                  double scan_hi, int scan_points) {
    ThresholdResult out;
    out.delta_cap = delta_cap(sigma, link, delta);
    auto h = [&](double d) { return d - delta_cap(sigma, link, d); };
    const double r = std::log(scan_hi / scan_lo) / double(scan_points - 1);
    double prev_d = scan_lo, prev_h = h(scan_lo);
    if (prev_h >= 0.0) return out;  // fixed point below the scanned range
    for (int i = 1; i < scan_points; ++i) {
        const double d = scan_lo * std::exp(r * double(i));
        const double hv = h(d);
        if (hv >= 0.0) {
            out.fixed_point_delta = refine(h, prev_d, d, prev_h, hv);
            return out;
        }
        prev_d = d;
        prev_h = hv;
    }
    return out;
}

} // namespace glmspec
