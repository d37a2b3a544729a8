#include "glmspec/preprocess.hpp"

#include "glmspec/errors.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace glmspec {

double default_truncation(PreprocKind kind) {
    switch (kind) {
    case PreprocKind::Trimming: return std::sqrt(7.0);
    case PreprocKind::Subset: return std::sqrt(2.0);
    case PreprocKind::IdentityTrunc: return 3.0;
    default: return std::numeric_limits<double>::quiet_NaN();
    }
}

Preprocessor::Preprocessor(PreprocKind kind, std::string id, std::function<double(double)> fn, double t_inf,
                           double t_sup, PreprocParams params, double delta, double g_variance)
    : kind_(kind), id_(std::move(id)), fn_(std::move(fn)), t_inf_(t_inf), t_sup_(t_sup),
      params_(params), delta_(delta), g_variance_(g_variance) {
    if (!(t_sup_ > 0.0) || !std::isfinite(t_sup_) || !std::isfinite(t_inf_))
        throw Error(ErrorKind::InvariantViolation, id_ + ": support edge must be finite with t_sup > 0");
}

Preprocessor Preprocessor::custom(std::string id, std::function<double(double)> fn, double t_inf, double t_sup) {
    return Preprocessor(PreprocKind::Custom, std::move(id), std::move(fn), t_inf, t_sup);
}

Preprocessor Preprocessor::scaled(double s) const {
    if (!(s > 0.0)) throw Error(ErrorKind::InvariantViolation, "scale must be positive");
    auto f = fn_;
    std::ostringstream os;
    os << s << "*" << id_;
    Preprocessor out(kind_, os.str(), [f, s](double y) { return s * f(y); }, s * t_inf_, s * t_sup_, params_,
                     delta_, g_variance_);
    out.set_breaks(breaks_);
    return out;
}

namespace {

std::pair<double, double> grid_extremes(const std::function<double(double)>& fn, const ObservationLaw& law) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& a : law.atoms()) {
        if (!(a.w > 0.0)) continue;
        const double t = fn(a.y);
        lo = std::min(lo, t);
        hi = std::max(hi, t);
    }
    return {lo, hi};
}

// sign changes of h between consecutive grid ys, bisected
std::vector<double> crossings(const std::function<double(double)>& h, const ObservationLaw& law) {
    std::vector<double> ys;
    for (const auto& a : law.atoms()) ys.push_back(a.y);
    std::sort(ys.begin(), ys.end());
    ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < ys.size(); ++i) {
        double lo = ys[i], hi = ys[i + 1];
        const double hlo = h(lo);
        if ((hlo < 0.0) == (h(hi) < 0.0)) continue;
        for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, std::abs(hi)); ++it) {
            const double mid = 0.5 * (lo + hi);
            if ((h(mid) < 0.0) == (hlo < 0.0)) lo = mid;
            else hi = mid;
        }
        out.push_back(0.5 * (lo + hi));
    }
    return out;
}

std::string with_k(const char* name, double k) {
    std::ostringstream os;
    os << name << "(" << k << ")";
    return os.str();
}

} // namespace

Preprocessor make_preprocessor(PreprocKind kind, const PreprocParams& params_in, const ObservationLaw& law,
                               double delta) {
    if (!(delta > 0.0)) throw Error(ErrorKind::ConfigError, "delta must be positive");
    PreprocParams params = params_in;
    if (std::isnan(params.K)) params.K = default_truncation(kind);
    const double v = law.g_variance();
    const double rv = std::sqrt(v);
    const double K = params.K;

    switch (kind) {
    case PreprocKind::Subset: {
        if (!(K >= 0.0)) throw Error(ErrorKind::ConfigError, "subset needs K >= 0");
        auto fn = [rv, K](double y) { return std::abs(y) / rv >= K ? 1.0 : 0.0; };
        Preprocessor p(kind, with_k("subset", K), fn, 0.0, 1.0, params, delta, v);
        p.set_breaks({-K * rv, K * rv});
        return p;
    }
    case PreprocKind::Trimming: {
        if (!(K > 0.0)) throw Error(ErrorKind::ConfigError, "trimming needs K > 0");
        auto fn = [v, rv, K](double y) { return std::abs(y) / rv <= K ? y * y / v : 0.0; };
        Preprocessor p(kind, with_k("trimming", K), fn, 0.0, K * K, params, delta, v);
        p.set_breaks({-K * rv, K * rv});
        return p;
    }
    case PreprocKind::IdentityTrunc: {
        if (!(K > 0.0)) throw Error(ErrorKind::ConfigError, "identity_trunc needs K > 0");
        auto fn = [rv, K](double y) { return std::clamp(y / rv, -K, K); };
        auto [lo, hi] = grid_extremes(fn, law);
        Preprocessor p(kind, with_k("identity_trunc", K), fn, lo, hi, params, delta, v);
        p.set_breaks({-K * rv, K * rv});
        return p;
    }
    case PreprocKind::OptimalLimit:
    case PreprocKind::OptimalThreshold: {
        if (!(params.clamp > 0.0)) throw Error(ErrorKind::ConfigError, "clamp K* must be positive");
        if (law.link().deterministic() && law.link().kind == LinkKind::OneBit)
            throw Error(ErrorKind::DegenerateLink, "noiseless one-bit: m2 == m0");
        if (law.ratio_divergence() < 1e-14)
            throw Error(ErrorKind::DegenerateLink, law.link().name() + ": m2 == m0, no informative preprocessing");
        auto lawp = std::make_shared<const ObservationLaw>(law);
        const double kstar = params.clamp;
        std::function<double(double)> raw;
        std::string id;
        if (kind == PreprocKind::OptimalLimit) {
            raw = [lawp](double y) { return 1.0 - 1.0 / lawp->ratio(y); };
            id = "optimal_limit";
        } else {
            if (!(params.delta_cap > 0.0))
                throw Error(ErrorKind::ConfigError, "optimal_threshold needs Delta(delta) > 0");
            const double s = std::sqrt(params.delta_cap / delta);
            if (!(s < 1.0)) {
                std::ostringstream os;
                os << "optimal_threshold needs delta > Delta(delta); delta=" << delta
                   << " Delta=" << params.delta_cap;
                throw Error(ErrorKind::ConfigError, os.str());
            }
            raw = [lawp, s](double y) { return 1.0 - 1.0 / (s * lawp->ratio(y) + 1.0 - s); };
            id = "optimal_threshold";
        }
        std::function<double(double)> fn = [raw, kstar](double y) { return std::max(raw(y), -kstar); };
        // m2/m0 is unbounded above for every shipped non-degenerate link, so
        // sup T = 1; the infimum is read off the grid (it includes the clamp)
        auto [lo, hi] = grid_extremes(fn, law);
        (void)hi;
        Preprocessor p(kind, id, fn, lo, 1.0, params, delta, v);
        p.set_breaks(crossings([raw, kstar](double y) { return raw(y) + kstar; }, law));
        return p;
    }
    case PreprocKind::Custom:
        throw Error(ErrorKind::ConfigError, "custom preprocessors are built with Preprocessor::custom");
    }
    throw Error(ErrorKind::ConfigError, "unknown preprocessor kind");
}

double f_a(const Preprocessor& p, double a, double y) {
    if (!(a > p.t_sup())) {
        std::ostringstream os;
        os << "a=" << a << " not above t_sup=" << p.t_sup();
        throw Error(ErrorKind::ADomain, os.str());
    }
    const double t = p(y);
    return t / (a - t);
}

std::pair<double, double> t_support(const Preprocessor& p, const ObservationLaw& law) {
    switch (p.kind()) {
    case PreprocKind::Subset:
    case PreprocKind::Trimming:
    case PreprocKind::OptimalLimit:
    case PreprocKind::OptimalThreshold: return {p.t_inf(), p.t_sup()};
    default: {
        std::function<double(double)> fn = [&p](double y) { return p(y); };
        return grid_extremes(fn, law);
    }
    }
}

PreprocKind parse_preproc_kind(const std::string& name) {
    if (name == "optimal_threshold") return PreprocKind::OptimalThreshold;
    if (name == "optimal_limit" || name == "optimal") return PreprocKind::OptimalLimit;
    if (name == "trimming") return PreprocKind::Trimming;
    if (name == "subset") return PreprocKind::Subset;
    if (name == "identity_trunc" || name == "identity") return PreprocKind::IdentityTrunc;
    throw Error(ErrorKind::ConfigError, "unknown preprocessor '" + name + "'");
}

std::string kind_name(PreprocKind kind) {
    switch (kind) {
    case PreprocKind::OptimalThreshold: return "optimal_threshold";
    case PreprocKind::OptimalLimit: return "optimal_limit";
    case PreprocKind::Trimming: return "trimming";
    case PreprocKind::Subset: return "subset";
    case PreprocKind::IdentityTrunc: return "identity_trunc";
    case PreprocKind::Custom: return "custom";
    }
    return "unknown";
}

} // namespace glmspec
