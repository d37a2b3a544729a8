// Preprocessing functions T and the map F_a = T/(a - T).
#pragma once

#include "glmspec/observation.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace glmspec {

enum class PreprocKind { OptimalThreshold, OptimalLimit, Trimming, Subset, IdentityTrunc, Custom };

struct PreprocParams {
    // truncation level; NaN selects the kind's default
    double K = std::numeric_limits<double>::quiet_NaN();
    // lower clamp -K* for the optimal kinds
    double clamp = 10.0;
    // Delta(delta), required by OptimalThreshold
    double delta_cap = std::numeric_limits<double>::quiet_NaN();
};

double default_truncation(PreprocKind kind);

class Preprocessor {
public:
    Preprocessor(PreprocKind kind, std::string id, std::function<double(double)> fn, double t_inf,
                 double t_sup, PreprocParams params = {}, double delta = 0.0, double g_variance = 0.0);

    static Preprocessor custom(std::string id, std::function<double(double)> fn, double t_inf, double t_sup);

    double operator()(double y) const { return fn_(y); }

    PreprocKind kind() const { return kind_; }
    const std::string& id() const { return id_; }
    double t_sup() const { return t_sup_; }
    double t_inf() const { return t_inf_; }
    const PreprocParams& params() const { return params_; }
    double delta() const { return delta_; }
    double g_variance() const { return g_variance_; }

    // same function scaled by s > 0
    Preprocessor scaled(double s) const;

    // y values where T jumps or kinks; quadrature panels are cut there
    const std::vector<double>& breaks() const { return breaks_; }
    void set_breaks(std::vector<double> b) { breaks_ = std::move(b); }

private:
    PreprocKind kind_;
    std::string id_;
    std::function<double(double)> fn_;
    double t_inf_, t_sup_;
    PreprocParams params_;
    double delta_, g_variance_;
    std::vector<double> breaks_;
};

Preprocessor make_preprocessor(PreprocKind kind, const PreprocParams& params, const ObservationLaw& law,
                               double delta);

// T(y)/(a - T(y)); throws ADomain unless a > t_sup
double f_a(const Preprocessor& p, double a, double y);

// (t_inf, t_sup)
std::pair<double, double> t_support(const Preprocessor& p, const ObservationLaw& law);

PreprocKind parse_preproc_kind(const std::string& name);
std::string kind_name(PreprocKind kind);

} // namespace glmspec
