// Experiment harness behind the command line: config parsing, delta sweeps,
// theory tables, threshold scans and state-evolution checks.
#pragma once

#include "glmspec/errors.hpp"
#include "glmspec/gamp.hpp"
#include "glmspec/model.hpp"
#include "glmspec/preprocess.hpp"
#include "glmspec/spectral.hpp"
#include "glmspec/theory.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace glmspec::app {

inline constexpr const char* kVersion = "0.1.0";

struct PreprocSpec {
    PreprocKind kind = PreprocKind::OptimalLimit;
    PreprocParams params;
    std::string label() const;
};

struct ExperimentConfig {
    CovarianceSpec covariance = CovarianceSpec::identity(100);
    LinkModel link = LinkModel::phase_retrieval();
    Prior prior = Prior::Spherical;
    std::vector<PreprocSpec> preprocessors;
    std::vector<double> deltas;
    int trials = 1;
    std::uint64_t seed = 1;
    std::string out;
    bool whitened = false;
    bool gamp_check = false;
    bool dump_curves = false;
    bool timing = true;       // runtime_ms column; off gives byte-stable output
    int workers = 1;
    std::string dump_dir;     // per-trial dataset CSVs when set
    // secheck
    int gamp_d = 2000;
    int t_compare = 10;
    int t_max = 30;
    // threshold scan
    double scan_lo = 1e-3, scan_hi = 1e3;
    int scan_points = 400;

    int d() const { return covariance.d; }
};

// throws Error(ConfigError) on unknown keys or violated invariants
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& c);
void validate(const ExperimentConfig& c);
std::string config_hash(const ExperimentConfig& c);

// shortest text that parses back to the same double
std::string fmt_double(double x);

struct SweepRow {
    double delta = 0;
    std::string preproc;
    int trial = 0;
    double overlap_emp = 0, lambda1_emp = 0, lambda2_emp = 0;
    double overlap_theory = 0, lambda1_theory = 0, lambda2_theory = 0;
    bool supercritical = false;
    double whitened_overlap_emp = std::numeric_limits<double>::quiet_NaN();
    double whitened_overlap_theory = std::numeric_limits<double>::quiet_NaN();
    double runtime_ms = 0;
    std::string status = "ok";
};

const std::vector<std::string>& sweep_columns();
std::string format_row(const SweepRow& r);
SweepRow parse_row(const std::string& line);
// rows of a sweep CSV, skipping comments and the header
std::vector<SweepRow> read_sweep_csv(const std::string& path);

struct PointSummary {
    double delta = 0;
    std::string preproc;
    int count = 0;
    double mean_overlap = 0, std_overlap = 0;
    double mean_lambda1 = 0, std_lambda1 = 0;
    double mean_lambda2 = 0, std_lambda2 = 0;
    double overlap_theory = 0, lambda1_theory = 0, lambda2_theory = 0;
    bool supercritical = false;
};
std::vector<PointSummary> summarize(const std::vector<SweepRow>& rows);

struct SweepResult {
    std::vector<SweepRow> rows;  // (delta, preprocessor, trial) order
    std::vector<PointSummary> summary;
    std::vector<std::string> errors;
};
// runs every (delta, preprocessor, trial) with cfg.workers threads
SweepResult run_sweep(const ExperimentConfig& cfg);

// Subcommands. Each returns the process exit code (0, 2 or 3) and writes
// human-readable output to `log`.
int cmd_theory(const ExperimentConfig& cfg, std::ostream& log);
int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log);
int cmd_threshold(const ExperimentConfig& cfg, std::ostream& log);
int cmd_secheck(const ExperimentConfig& cfg, std::ostream& log);

int exit_code(ErrorKind k);

// --- pieces shared with the acceptance checks ---

TheoryContext point_context(const ScalarMeasure& sigma, const LinkModel& link, const PreprocSpec& p, double delta);

struct CurvePoint {
    double a, phi, psi, zeta;
};
std::vector<CurvePoint> theory_curves(const TheoryContext& ctx, double a_circ, int points = 400);

struct SEPersistence {
    double drift_plus = 0, drift_minus = 0, drift_zero = 0;  // summed over steps
    double max_gamma_dev = 0;                                // |gamma_t - gamma*| from fp_plus
};
SEPersistence se_persistence(const SEContext& se, const SEFixedPoints& fp, int steps = 50);

struct GampCheck {
    double a_star = 0, gamma_star = 0;
    SEFixedPoints fp;
    std::vector<SurrogateStep> steps;
    double max_rel_norm = 0;   // max over t <= t_compare of |emp/SE - 1| for (1/d)||v||^2
    double max_rel_corr = 0;   // same for (1/d)<v, Sigma^{1/2} beta*>
    double se_norm = 0, se_corr = 0;
    double overlap_vhat_v1 = 0;
    double final_residual = 0;
    double b = 0, c_emp = 0, c_theory = 0;
};
GampCheck run_gamp_check(std::shared_ptr<const CovarianceFactors> cov, const LinkModel& link,
                         const PreprocSpec& p, double delta, std::uint64_t seed, std::uint64_t trial,
                         int t_compare, int t_max, Prior prior = Prior::Spherical);

} // namespace glmspec::app
