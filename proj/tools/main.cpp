// glmspec_cli: theory | sweep | threshold | secheck
#include "experiment.hpp"

#include "glmspec/errors.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace glmspec;
using namespace glmspec::app;

namespace {

struct Overrides {
    std::string config;
    std::uint64_t seed = 0;
    std::string out;
    int workers = 0;
    bool dump_curves = false;
    bool whitened = false;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("-c,--config", o.config, "experiment JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed (overrides config)");
    sub->add_option("-o,--out", o.out, "output CSV (overrides config)");
    sub->add_option("-j,--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--dump-curves", o.dump_curves, "write phi/psi/zeta curves");
    sub->add_flag("--whitened", o.whitened, "include the whitened estimator");
}

ExperimentConfig resolve(const Overrides& o, const CLI::App* sub) {
    ExperimentConfig cfg = load_config(o.config);
    if (sub->count("--seed")) cfg.seed = o.seed;
    if (!o.out.empty()) cfg.out = o.out;
    if (o.workers > 0) cfg.workers = o.workers;
    if (o.dump_curves) cfg.dump_curves = true;
    if (o.whitened) cfg.whitened = true;
    validate(cfg);
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Spectral estimators for GLMs with correlated Gaussian designs"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Overrides o;
    auto* theory = app.add_subcommand("theory", "asymptotic predictions over the delta grid");
    auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep against the predictions");
    auto* threshold = app.add_subcommand("threshold", "Delta(delta) and its fixed point");
    auto* secheck = app.add_subcommand("secheck", "state-evolution and GAMP consistency checks");
    for (auto* s : {theory, sweep, threshold, secheck}) add_common(s, o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 3;
    }

    try {
        if (theory->parsed()) return cmd_theory(resolve(o, theory), std::cout);
        if (sweep->parsed()) return cmd_sweep(resolve(o, sweep), std::cout);
        if (threshold->parsed()) return cmd_threshold(resolve(o, threshold), std::cout);
        if (secheck->parsed()) return cmd_secheck(resolve(o, secheck), std::cout);
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.kind()) << "]: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
