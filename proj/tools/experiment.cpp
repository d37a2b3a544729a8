#include "experiment.hpp"

#include "glmspec/errors.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace glmspec::app {

using nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) config_error("unknown key '" + it.key() + "' in " + where);
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        config_error(std::string("key '") + key + "': " + e.what());
    }
}

CovarianceSpec parse_covariance(const json& j) {
    if (!j.is_object()) config_error("covariance must be an object");
    reject_unknown(j, {"kind", "d", "rho", "c0", "c1", "ell"}, "covariance");
    const std::string kind = get_or<std::string>(j, "kind", "identity");
    const int d = get_or<int>(j, "d", 0);
    if (d < 2) config_error("covariance.d must be >= 2");
    if (kind == "identity") return CovarianceSpec::identity(d);
    if (kind == "toeplitz") return CovarianceSpec::toeplitz(d, get_or<double>(j, "rho", 0.9));
    if (kind == "circulant")
        return CovarianceSpec::circulant(d, get_or<double>(j, "c0", 1.0), get_or<double>(j, "c1", 0.1),
                                         get_or<int>(j, "ell", 17));
    config_error("unknown covariance kind '" + kind + "'");
}

json covariance_json(const CovarianceSpec& c) {
    json j;
    j["d"] = c.d;
    switch (c.kind) {
    case CovarianceSpec::Kind::Identity: j["kind"] = "identity"; break;
    case CovarianceSpec::Kind::Toeplitz:
        j["kind"] = "toeplitz";
        j["rho"] = c.rho;
        break;
    case CovarianceSpec::Kind::Circulant:
        j["kind"] = "circulant";
        j["c0"] = c.c0;
        j["c1"] = c.c1;
        j["ell"] = c.ell;
        break;
    case CovarianceSpec::Kind::Explicit: j["kind"] = "explicit"; break;
    }
    return j;
}

std::string prior_name(Prior p) {
    switch (p) {
    case Prior::Spherical: return "spherical";
    case Prior::Rademacher: return "rademacher";
    case Prior::Gaussian: return "gaussian";
    }
    return "spherical";
}

double parse_double(const std::string& s) {
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double x = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || p != s.data() + s.size()) config_error("bad number '" + s + "'");
    return x;
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double mean_of(const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v;
    return x.empty() ? 0.0 : s / double(x.size());
}

// sample standard deviation
double std_of(const std::vector<double>& x) {
    if (x.size() < 2) return 0.0;
    const double m = mean_of(x);
    double s = 0;
    for (double v : x) s += (v - m) * (v - m);
    return std::sqrt(s / double(x.size() - 1));
}

// runs f(i) for i in [0, count) on `workers` threads
template <class F>
void parallel_for(int count, int workers, F f) {
    workers = std::max(1, std::min(workers, count));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) f(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) f(i);
        });
    for (auto& t : pool) t.join();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string describe(const std::exception& e) { return e.what(); }

} // namespace

std::string PreprocSpec::label() const {
    std::ostringstream os;
    os << kind_name(kind);
    const double K = std::isnan(params.K) ? default_truncation(kind) : params.K;
    if (!std::isnan(K)) os << "(K=" << fmt_double(K) << ")";
    if (kind == PreprocKind::OptimalLimit || kind == PreprocKind::OptimalThreshold)
        os << "(clamp=" << fmt_double(params.clamp) << ")";
    return os.str();
}

std::string fmt_double(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
    (void)ec;
    return std::string(buf, p);
}

ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) config_error("config must be a JSON object");
    reject_unknown(j,
                   {"covariance", "link", "prior", "preprocessors", "deltas", "trials", "seed", "out", "whitened",
                    "gamp_check", "dump_curves", "timing", "workers", "dump_dir", "secheck", "threshold_scan"},
                   "config");
    ExperimentConfig c;
    if (!j.contains("covariance")) config_error("config needs 'covariance'");
    c.covariance = parse_covariance(j.at("covariance"));
    if (j.contains("link")) {
        const json& l = j.at("link");
        if (l.is_string()) {
            c.link = parse_link(l.get<std::string>(), 0.0);
        } else {
            reject_unknown(l, {"name", "sigma"}, "link");
            c.link = parse_link(get_or<std::string>(l, "name", "phase_retrieval"), get_or<double>(l, "sigma", 0.0));
        }
    }
    c.prior = parse_prior(get_or<std::string>(j, "prior", "spherical"));
    if (j.contains("preprocessors")) {
        for (const json& p : j.at("preprocessors")) {
            PreprocSpec s;
            if (p.is_string()) {
                s.kind = parse_preproc_kind(p.get<std::string>());
            } else {
                reject_unknown(p, {"kind", "K", "clamp"}, "preprocessor");
                s.kind = parse_preproc_kind(get_or<std::string>(p, "kind", "optimal_limit"));
                s.params.K = get_or<double>(p, "K", std::numeric_limits<double>::quiet_NaN());
                s.params.clamp = get_or<double>(p, "clamp", 10.0);
            }
            c.preprocessors.push_back(s);
        }
    } else {
        c.preprocessors.push_back(PreprocSpec{});
    }
    c.deltas = get_or<std::vector<double>>(j, "deltas", {});
    c.trials = get_or<int>(j, "trials", 1);
    c.seed = get_or<std::uint64_t>(j, "seed", 1);
    c.out = get_or<std::string>(j, "out", "");
    c.whitened = get_or<bool>(j, "whitened", false);
    c.gamp_check = get_or<bool>(j, "gamp_check", false);
    c.dump_curves = get_or<bool>(j, "dump_curves", false);
    c.timing = get_or<bool>(j, "timing", true);
    c.workers = get_or<int>(j, "workers", 1);
    c.dump_dir = get_or<std::string>(j, "dump_dir", "");
    if (j.contains("secheck")) {
        const json& s = j.at("secheck");
        reject_unknown(s, {"d", "t_compare", "t_max"}, "secheck");
        c.gamp_d = get_or<int>(s, "d", c.gamp_d);
        c.t_compare = get_or<int>(s, "t_compare", c.t_compare);
        c.t_max = get_or<int>(s, "t_max", c.t_max);
    }
    if (j.contains("threshold_scan")) {
        const json& s = j.at("threshold_scan");
        reject_unknown(s, {"lo", "hi", "points"}, "threshold_scan");
        c.scan_lo = get_or<double>(s, "lo", c.scan_lo);
        c.scan_hi = get_or<double>(s, "hi", c.scan_hi);
        c.scan_points = get_or<int>(s, "points", c.scan_points);
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open config " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        config_error(path + ": " + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
    json j;
    j["covariance"] = covariance_json(c.covariance);
    j["link"] = {{"name", c.link.name()}, {"sigma", c.link.sigma}};
    j["prior"] = prior_name(c.prior);
    json pre = json::array();
    for (const auto& p : c.preprocessors) {
        json e{{"kind", kind_name(p.kind)}, {"clamp", p.params.clamp}};
        if (!std::isnan(p.params.K)) e["K"] = p.params.K;
        pre.push_back(e);
    }
    j["preprocessors"] = pre;
    j["deltas"] = c.deltas;
    j["trials"] = c.trials;
    j["seed"] = c.seed;
    j["whitened"] = c.whitened;
    j["gamp_check"] = c.gamp_check;
    j["secheck"] = {{"d", c.gamp_d}, {"t_compare", c.t_compare}, {"t_max", c.t_max}};
    j["threshold_scan"] = {{"lo", c.scan_lo}, {"hi", c.scan_hi}, {"points", c.scan_points}};
    return j;
}

void validate(const ExperimentConfig& c) {
    if (c.trials < 1) config_error("trials must be >= 1");
    if (c.workers < 1) config_error("workers must be >= 1");
    for (std::size_t i = 0; i < c.deltas.size(); ++i) {
        if (!std::isfinite(c.deltas[i]) || !(c.deltas[i] > 0.0)) config_error("deltas must be finite and positive");
        if (i > 0 && !(c.deltas[i] > c.deltas[i - 1])) config_error("deltas must be strictly increasing");
    }
    for (const auto& p : c.preprocessors) {
        if (!std::isnan(p.params.K) && !std::isfinite(p.params.K)) config_error("truncation K must be finite");
        if (!std::isfinite(p.params.clamp) || !(p.params.clamp > 0.0)) config_error("clamp must be finite, > 0");
        if (p.kind == PreprocKind::Custom) config_error("custom preprocessors cannot come from a config file");
    }
    if (!std::isfinite(c.link.sigma) || c.link.sigma < 0.0) config_error("link sigma must be finite, >= 0");
    if (c.covariance.kind == CovarianceSpec::Kind::Toeplitz && !(std::abs(c.covariance.rho) < 1.0))
        config_error("toeplitz needs |rho| < 1");
    if (c.gamp_d < 2 || c.t_compare < 1 || c.t_max < 1) config_error("secheck sizes must be positive");
    if (!(c.scan_lo > 0.0) || !(c.scan_hi > c.scan_lo) || c.scan_points < 2) config_error("bad threshold_scan");
}

std::string config_hash(const ExperimentConfig& c) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << fnv1a(to_json(c).dump());
    return os.str();
}

int exit_code(ErrorKind k) {
    switch (k) {
    case ErrorKind::ConfigError:
    case ErrorKind::UnsupportedLink:
    case ErrorKind::DegenerateLink:
    case ErrorKind::NotPositiveDefinite: return 3;
    default: return 2;
    }
}

// ---------------------------------------------------------------- CSV

const std::vector<std::string>& sweep_columns() {
    static const std::vector<std::string> cols = {
        "delta",          "preproc",         "trial",         "overlap_emp",
        "lambda1_emp",    "lambda2_emp",     "overlap_theory", "lambda1_theory",
        "lambda2_theory", "supercritical",   "whitened_overlap_emp", "whitened_overlap_theory",
        "runtime_ms",     "status"};
    return cols;
}

std::string format_row(const SweepRow& r) {
    std::ostringstream os;
    os << fmt_double(r.delta) << ',' << r.preproc << ',' << r.trial << ',' << fmt_double(r.overlap_emp) << ','
       << fmt_double(r.lambda1_emp) << ',' << fmt_double(r.lambda2_emp) << ',' << fmt_double(r.overlap_theory)
       << ',' << fmt_double(r.lambda1_theory) << ',' << fmt_double(r.lambda2_theory) << ','
       << (r.supercritical ? 1 : 0) << ',' << fmt_double(r.whitened_overlap_emp) << ','
       << fmt_double(r.whitened_overlap_theory) << ',' << fmt_double(r.runtime_ms) << ',' << r.status;
    return os.str();
}

SweepRow parse_row(const std::string& line) {
    const auto f = split(line, ',');
    if (f.size() != sweep_columns().size()) config_error("sweep row has " + std::to_string(f.size()) + " fields");
    SweepRow r;
    r.delta = parse_double(f[0]);
    r.preproc = f[1];
    r.trial = std::stoi(f[2]);
    r.overlap_emp = parse_double(f[3]);
    r.lambda1_emp = parse_double(f[4]);
    r.lambda2_emp = parse_double(f[5]);
    r.overlap_theory = parse_double(f[6]);
    r.lambda1_theory = parse_double(f[7]);
    r.lambda2_theory = parse_double(f[8]);
    r.supercritical = f[9] == "1";
    r.whitened_overlap_emp = parse_double(f[10]);
    r.whitened_overlap_theory = parse_double(f[11]);
    r.runtime_ms = parse_double(f[12]);
    r.status = f[13];
    return r;
}

std::vector<SweepRow> read_sweep_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) config_error("cannot open " + path);
    std::vector<SweepRow> rows;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = true;
            continue;
        }
        rows.push_back(parse_row(line));
    }
    return rows;
}

std::vector<PointSummary> summarize(const std::vector<SweepRow>& rows) {
    std::vector<PointSummary> out;
    std::size_t i = 0;
    while (i < rows.size()) {
        std::size_t j = i;
        std::vector<double> ov, l1, l2;
        while (j < rows.size() && rows[j].delta == rows[i].delta && rows[j].preproc == rows[i].preproc) {
            if (rows[j].status == "ok") {
                ov.push_back(rows[j].overlap_emp);
                l1.push_back(rows[j].lambda1_emp);
                l2.push_back(rows[j].lambda2_emp);
            }
            ++j;
        }
        PointSummary s;
        s.delta = rows[i].delta;
        s.preproc = rows[i].preproc;
        s.count = int(ov.size());
        s.mean_overlap = mean_of(ov);
        s.std_overlap = std_of(ov);
        s.mean_lambda1 = mean_of(l1);
        s.std_lambda1 = std_of(l1);
        s.mean_lambda2 = mean_of(l2);
        s.std_lambda2 = std_of(l2);
        s.overlap_theory = rows[i].overlap_theory;
        s.lambda1_theory = rows[i].lambda1_theory;
        s.lambda2_theory = rows[i].lambda2_theory;
        s.supercritical = rows[i].supercritical;
        out.push_back(s);
        i = j;
    }
    return out;
}

// -------------------------------------------------------------- sweep

TheoryContext point_context(const ScalarMeasure& sigma, const LinkModel& link, const PreprocSpec& p, double delta) {
    return make_context(delta, sigma, link, p.kind, p.params);
}

namespace {

struct PointTheory {
    std::optional<TheoryContext> ctx;
    std::optional<TheoryResult> res;
    double eta_whitened = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

} // namespace

SweepResult run_sweep(const ExperimentConfig& cfg) {
    validate(cfg);
    if (cfg.deltas.empty()) config_error("sweep needs a non-empty delta grid");
    auto cov = std::make_shared<const CovarianceFactors>(build_covariance(cfg.covariance));
    const int nd = int(cfg.deltas.size()), np = int(cfg.preprocessors.size()), nt = cfg.trials;

    std::vector<PointTheory> theory(std::size_t(nd) * np);
    parallel_for(nd * np, cfg.workers, [&](int k) {
        const double delta = cfg.deltas[k / np];
        PointTheory& pt = theory[k];
        try {
            pt.ctx.emplace(point_context(cov->measure, cfg.link, cfg.preprocessors[k % np], delta));
            pt.res = predict(*pt.ctx);
            if (cfg.whitened) pt.eta_whitened = whitened_theory(*pt.ctx).eta_k;
        } catch (const std::exception& e) {
            pt.error = describe(e);
        }
    });

    SweepResult out;
    out.rows.resize(std::size_t(nd) * np * nt);
    std::vector<std::string> task_errors(std::size_t(nd) * nt);
    parallel_for(nd * nt, cfg.workers, [&](int task) {
        const int di = task / nt, t = task % nt;
        const double delta = cfg.deltas[di];
        const int n = int(std::lround(delta * cfg.d()));
        std::optional<Dataset> ds;
        std::string sample_error;
        try {
            const std::uint64_t trial_id = (std::uint64_t(di) << 32) | std::uint64_t(t);
            ds.emplace(sample_dataset(cov, cfg.link, n, cfg.seed, trial_id, cfg.prior));
            if (!cfg.dump_dir.empty()) {
                std::filesystem::create_directories(cfg.dump_dir);
                write_dataset_csv(*ds, cfg.dump_dir + "/delta" + std::to_string(di) + "_trial" + std::to_string(t) +
                                           ".csv");
            }
        } catch (const std::exception& e) {
            sample_error = describe(e);
        }
        for (int pi = 0; pi < np; ++pi) {
            const PointTheory& pt = theory[std::size_t(di) * np + pi];
            SweepRow& r = out.rows[(std::size_t(di) * np + pi) * nt + t];
            r.delta = delta;
            r.preproc = cfg.preprocessors[pi].label();
            r.trial = t;
            r.overlap_emp = r.lambda1_emp = r.lambda2_emp = std::numeric_limits<double>::quiet_NaN();
            if (pt.res) {
                r.overlap_theory = pt.res->eta;
                r.lambda1_theory = pt.res->lambda1;
                r.lambda2_theory = pt.res->lambda2;
                r.supercritical = pt.res->critical_points.supercritical;
            } else {
                r.overlap_theory = r.lambda1_theory = r.lambda2_theory = std::numeric_limits<double>::quiet_NaN();
            }
            r.whitened_overlap_theory = pt.eta_whitened;
            if (!ds || !pt.ctx) {
                r.status = "error";
                task_errors[task] += (sample_error.empty() ? pt.error : sample_error) + "\n";
                continue;
            }
            if (!pt.res) r.status = "theory_error";
            try {
                const auto t0 = std::chrono::steady_clock::now();
                const EstimateReport e = spectral_estimate(*ds, pt.ctx->preproc());
                r.overlap_emp = e.overlap_emp;
                r.lambda1_emp = e.lambda1_emp;
                r.lambda2_emp = e.lambda2_emp;
                if (cfg.whitened) r.whitened_overlap_emp = whitened_estimate(*ds, pt.ctx->preproc()).overlap;
                const double ms =
                    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
                r.runtime_ms = cfg.timing ? std::round(ms * 1000.0) / 1000.0 : 0.0;
            } catch (const std::exception& e) {
                r.status = "error";
                task_errors[task] += describe(e) + "\n";
            }
        }
    });

    for (int k = 0; k < nd * np; ++k)
        if (!theory[k].error.empty()) {
            std::ostringstream os;
            os << "delta=" << cfg.deltas[k / np] << " " << cfg.preprocessors[k % np].label() << ": "
               << theory[k].error;
            out.errors.push_back(os.str());
        }
    for (int k = 0; k < nd * nt; ++k)
        if (!task_errors[k].empty()) {
            std::ostringstream os;
            os << "delta=" << cfg.deltas[k / nt] << " trial " << k % nt << ": " << task_errors[k];
            out.errors.push_back(os.str());
        }
    out.summary = summarize(out.rows);
    return out;
}

// --------------------------------------------------------- subcommands

std::vector<CurvePoint> theory_curves(const TheoryContext& ctx, double a_circ, int points) {
    const double base = ctx.t_sup();
    const double lo = ctx.a_lo() - base;
    const double hi = std::max(10.0 * (a_circ - base), 100.0 * std::max(1.0, std::abs(base)));
    std::vector<CurvePoint> out;
    for (int i = 0; i < points; ++i) {
        const double a = base + lo * std::pow(hi / lo, double(i) / double(points - 1));
        out.push_back({a, phi(ctx, a), psi(ctx, a), zeta(ctx, a, a_circ)});
    }
    return out;
}

int cmd_theory(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.deltas.empty()) config_error("theory needs a non-empty delta grid");
    const CovarianceFactors cov = build_covariance(cfg.covariance);
    std::ofstream csv, curves;
    if (!cfg.out.empty()) {
        csv.open(cfg.out);
        if (!csv) config_error("cannot open " + cfg.out);
        csv << "# glmspec theory\n# version=" << kVersion << "\n# config_hash=" << config_hash(cfg) << "\n";
        csv << "delta,preproc,supercritical,a_circ,gamma_circ,a_circ_at_edge,a_star,gamma_star,lambda1,lambda2,"
               "eta,w1,w2,gamma_sharp";
        if (cfg.whitened) csv << ",supercritical_k,a_circ_k,a_star_k,lambda1_k,lambda2_k,eta_k";
        csv << "\n";
        if (cfg.dump_curves) {
            curves.open(cfg.out + ".curves.csv");
            curves << "delta,preproc,a,phi,psi,zeta\n";
        }
    }
    int code = 0;
    log << std::setprecision(6);
    for (double delta : cfg.deltas) {
        for (const auto& p : cfg.preprocessors) {
            try {
                const TheoryContext ctx = point_context(cov.measure, cfg.link, p, delta);
                const TheoryResult r = predict(ctx);
                const auto& cp = r.critical_points;
                log << "delta=" << delta << " " << p.label() << (cp.supercritical ? " supercritical" : " subcritical")
                    << " a_circ=" << cp.a_circ << " lambda1=" << r.lambda1 << " lambda2=" << r.lambda2
                    << " eta=" << r.eta;
                std::optional<WhitenedTheoryResult> w;
                if (cfg.whitened) {
                    w = whitened_theory(ctx);
                    log << " | whitened: lambda1=" << w->lambda1_k << " lambda2=" << w->lambda2_k
                        << " eta=" << w->eta_k;
                }
                log << "\n";
                if (csv.is_open()) {
                    const double nan = std::numeric_limits<double>::quiet_NaN();
                    csv << fmt_double(delta) << ',' << p.label() << ',' << int(cp.supercritical) << ','
                        << fmt_double(cp.a_circ) << ',' << fmt_double(cp.gamma_circ) << ','
                        << int(cp.a_circ_at_edge) << ',' << fmt_double(cp.a_star.value_or(nan)) << ','
                        << fmt_double(cp.gamma_star.value_or(nan)) << ',' << fmt_double(r.lambda1) << ','
                        << fmt_double(r.lambda2) << ',' << fmt_double(r.eta) << ',' << fmt_double(r.w1) << ','
                        << fmt_double(r.w2) << ',' << fmt_double(r.gamma_sharp);
                    if (w)
                        csv << ',' << int(w->supercritical_k) << ',' << fmt_double(w->a_circ_k) << ','
                            << fmt_double(w->a_star_k) << ',' << fmt_double(w->lambda1_k) << ','
                            << fmt_double(w->lambda2_k) << ',' << fmt_double(w->eta_k);
                    csv << "\n";
                }
                if (cfg.dump_curves) {
                    std::ostream& os = curves.is_open() ? static_cast<std::ostream&>(curves) : log;
                    if (!curves.is_open()) os << "delta,preproc,a,phi,psi,zeta\n";
                    for (const auto& c : theory_curves(ctx, cp.a_circ))
                        os << fmt_double(delta) << ',' << p.label() << ',' << fmt_double(c.a) << ','
                           << fmt_double(c.phi) << ',' << fmt_double(c.psi) << ',' << fmt_double(c.zeta) << "\n";
                }
            } catch (const Error& e) {
                log << "delta=" << delta << " " << p.label() << ": " << e.what() << "\n";
                code = std::max(code, exit_code(e.kind()));
            }
        }
    }
    return code;
}

int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log) {
    const SweepResult res = run_sweep(cfg);
    std::ofstream file;
    if (!cfg.out.empty()) {
        file.open(cfg.out);
        if (!file) config_error("cannot open " + cfg.out);
    }
    std::ostream& csv = file.is_open() ? static_cast<std::ostream&>(file) : log;
    csv << "# glmspec sweep\n# version=" << kVersion << "\n# seed=" << cfg.seed << "\n# config_hash="
        << config_hash(cfg) << "\n# config=" << to_json(cfg).dump() << "\n";
    const auto& cols = sweep_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) csv << (i ? "," : "") << cols[i];
    csv << "\n";
    for (const auto& r : res.rows) csv << format_row(r) << "\n";
    csv << "# summary: delta,preproc,count,mean_overlap,std_overlap,mean_lambda1,std_lambda1,mean_lambda2,"
           "std_lambda2,overlap_theory,lambda1_theory,lambda2_theory,supercritical\n";
    for (const auto& s : res.summary)
        csv << "# summary: " << fmt_double(s.delta) << ',' << s.preproc << ',' << s.count << ','
            << fmt_double(s.mean_overlap) << ',' << fmt_double(s.std_overlap) << ',' << fmt_double(s.mean_lambda1)
            << ',' << fmt_double(s.std_lambda1) << ',' << fmt_double(s.mean_lambda2) << ','
            << fmt_double(s.std_lambda2) << ',' << fmt_double(s.overlap_theory) << ','
            << fmt_double(s.lambda1_theory) << ',' << fmt_double(s.lambda2_theory) << ',' << int(s.supercritical)
            << "\n";
    csv.flush();

    log << std::fixed << std::setprecision(4);
    for (const auto& s : res.summary)
        log << "delta=" << s.delta << " " << s.preproc << " overlap " << s.mean_overlap << " +- " << s.std_overlap
            << " (theory " << s.overlap_theory << ")  lambda1 " << s.mean_lambda1 << " (theory " << s.lambda1_theory
            << ")  lambda2 " << s.mean_lambda2 << " (theory " << s.lambda2_theory << ")\n";

    int code = 0;
    if (cfg.gamp_check) {
        auto cov = std::make_shared<const CovarianceFactors>(build_covariance(cfg.covariance));
        for (double delta : cfg.deltas) {
            try {
                const GampCheck g = run_gamp_check(cov, cfg.link, cfg.preprocessors.front(), delta, cfg.seed, 0,
                                                   cfg.t_compare, cfg.t_max, cfg.prior);
                log << "gamp delta=" << delta << " max rel dev: norm " << g.max_rel_norm << " corr "
                    << g.max_rel_corr << "  overlap(v_hat, v1) " << g.overlap_vhat_v1 << "\n";
            } catch (const Error& e) {
                log << "gamp delta=" << delta << ": " << e.what() << "\n";
            }
        }
    }
    for (const auto& e : res.errors) {
        log << "error: " << e << "\n";
        code = 2;
    }
    return code;
}

int cmd_threshold(const ExperimentConfig& cfg, std::ostream& log) {
    const CovarianceFactors cov = build_covariance(cfg.covariance);
    std::ofstream csv;
    if (!cfg.out.empty()) {
        csv.open(cfg.out);
        if (!csv) config_error("cannot open " + cfg.out);
        csv << "# glmspec threshold\n# version=" << kVersion << "\n# config_hash=" << config_hash(cfg) << "\n";
        csv << "delta,delta_cap,above\n";
    }
    log << std::setprecision(8);
    for (double delta : cfg.deltas) {
        const double dc = delta_cap(cov.measure, cfg.link, delta);
        log << "delta=" << delta << " Delta(delta)=" << dc << (delta > dc ? "  (above)" : "  (below)") << "\n";
        if (csv.is_open()) csv << fmt_double(delta) << ',' << fmt_double(dc) << ',' << int(delta > dc) << "\n";
    }
    const double probe = cfg.deltas.empty() ? 1.0 : cfg.deltas.front();
    const ThresholdResult tr =
        optimal_threshold(cov.measure, cfg.link, probe, cfg.scan_lo, cfg.scan_hi, cfg.scan_points);
    if (tr.fixed_point_delta) {
        log << "fixed point delta = Delta(delta): " << *tr.fixed_point_delta << "\n";
        if (csv.is_open()) csv << "# fixed_point=" << fmt_double(*tr.fixed_point_delta) << "\n";
        return 0;
    }
    log << "no fixed point in [" << cfg.scan_lo << ", " << cfg.scan_hi << "]\n";
    return 2;
}

SEPersistence se_persistence(const SEContext& se, const SEFixedPoints& fp, int steps) {
    SEPersistence p;
    auto run = [&](SEState s, bool track_gamma) {
        double drift = 0;
        for (int t = 0; t < steps; ++t) {
            const SEState next = se_step(se, s);
            drift += se_distance(next, s);
            if (track_gamma) p.max_gamma_dev = std::max(p.max_gamma_dev, std::abs(next.gamma - se.gamma_star));
            s = next;
        }
        return drift;
    };
    p.drift_plus = run(fp.plus, true);
    p.drift_minus = run(fp.minus, false);
    p.drift_zero = run(fp.zero, false);
    return p;
}

GampCheck run_gamp_check(std::shared_ptr<const CovarianceFactors> cov, const LinkModel& link, const PreprocSpec& p,
                         double delta, std::uint64_t seed, std::uint64_t trial, int t_compare, int t_max,
                         Prior prior) {
    const TheoryContext ctx = point_context(cov->measure, link, p, delta);
    const TheoryResult res = predict(ctx);
    if (!res.critical_points.supercritical)
        config_error("GAMP check needs a supercritical configuration");
    GampCheck g;
    g.a_star = *res.critical_points.a_star;
    g.gamma_star = *res.critical_points.gamma_star;
    const SEContext se = make_se_context(ctx, g.a_star, g.gamma_star);
    g.fp = se_fixed_points(se);
    const double es = cov->measure.mean();
    g.se_norm = g.fp.plus.chi * g.fp.plus.chi * es + g.fp.plus.sigma_v * g.fp.plus.sigma_v;
    g.se_corr = g.fp.plus.chi * es;

    const int n = int(std::lround(delta * cov->dim()));
    const Dataset ds = sample_dataset(cov, link, n, seed, trial, prior);
    const GampContext gc = make_gamp_context(ds, se, ctx.preproc());
    const Eigen::MatrixXd D = build_D(ds, ctx.preproc());
    const SurrogateResult sr = run_power_surrogate(gc, g.fp, D, std::max(t_max, t_compare), seed);
    g.steps = sr.steps;
    for (int t = 0; t < t_compare && t < int(sr.steps.size()); ++t) {
        g.max_rel_norm = std::max(g.max_rel_norm, std::abs(sr.steps[t].norm_v / g.se_norm - 1.0));
        g.max_rel_corr = std::max(g.max_rel_corr, std::abs(sr.steps[t].corr_v / g.se_corr - 1.0));
    }
    // the vector after t_max steps, even when t_compare ran longer
    const SurrogateResult at_max =
        t_max >= t_compare ? sr : run_power_surrogate(gc, g.fp, D, t_max, seed);
    const auto [p1, p2] = top2_eigs(D);
    (void)p2;
    g.overlap_vhat_v1 = overlap(at_max.v_hat, p1.vector);
    g.final_residual = at_max.steps.back().residual;
    g.b = gc.b;
    g.c_emp = gc.F.mean();
    g.c_theory = gc.c;
    return g;
}

int cmd_secheck(const ExperimentConfig& cfg, std::ostream& log) {
    if (cfg.deltas.empty()) config_error("secheck needs a delta");
    if (cfg.preprocessors.empty()) config_error("secheck needs a preprocessor");
    CovarianceSpec spec = cfg.covariance;
    spec.d = cfg.gamp_d;
    auto cov = std::make_shared<const CovarianceFactors>(build_covariance(spec));
    const double delta = cfg.deltas.front();
    const PreprocSpec& p = cfg.preprocessors.front();
    log << std::setprecision(4) << std::scientific;

    auto line = [&](bool ok, const std::string& what, double value) {
        log << (ok ? "PASS " : "FAIL ") << what << " " << value << "\n";
        return ok;
    };
    const TheoryContext ctx = point_context(cov->measure, cfg.link, p, delta);
    const TheoryResult res = predict(ctx);
    if (!res.critical_points.supercritical) config_error("secheck needs a supercritical configuration");
    const SEContext se = make_se_context(ctx, *res.critical_points.a_star, *res.critical_points.gamma_star);
    const SEFixedPoints fp = se_fixed_points(se);
    const SEPersistence sp = se_persistence(se, fp, 50);
    bool all = true;
    all &= line(sp.drift_plus < 1e-8, "fp_plus drift over 50 steps", sp.drift_plus);
    all &= line(sp.drift_minus < 1e-8, "fp_minus drift over 50 steps", sp.drift_minus);
    all &= line(sp.drift_zero < 1e-8, "fp_zero drift over 50 steps", sp.drift_zero);
    all &= line(sp.max_gamma_dev < 1e-10 * std::max(1.0, se.gamma_star), "gamma_t stays at gamma*",
                sp.max_gamma_dev);

    const GampCheck g = run_gamp_check(cov, cfg.link, p, delta, cfg.seed, 0, cfg.t_compare, cfg.t_max, cfg.prior);
    all &= line(g.max_rel_norm < 0.05, "GAMP (1/d)||v||^2 vs SE, max rel dev", g.max_rel_norm);
    all &= line(g.max_rel_corr < 0.05, "GAMP (1/d)<v, S^1/2 b*> vs SE, max rel dev", g.max_rel_corr);
    all &= line(g.overlap_vhat_v1 > 0.95, "overlap(v_hat, v1(D)) at t_max", g.overlap_vhat_v1);
    log << "info eigen-residual at t_max " << g.final_residual << ", b " << g.b << ", c_emp " << g.c_emp
        << ", c " << g.c_theory << "\n";
    return all ? 0 : 2;
}

} // namespace glmspec::app
