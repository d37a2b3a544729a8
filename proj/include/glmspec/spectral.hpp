// Finite-dimensional spectral estimation.
#pragma once

#include "glmspec/model.hpp"
#include "glmspec/preprocess.hpp"

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <utility>

namespace glmspec {

struct EigenPair {
    double value = 0;
    Eigen::VectorXd vector;
};

// D = X^T diag(T(y)) X
Eigen::MatrixXd build_D(const Dataset& ds, const Preprocessor& p);
Eigen::MatrixXd build_D(const Eigen::MatrixXd& X, const Eigen::VectorXd& t);

enum class EigMethod { Auto, Dense, Lanczos };

// The two algebraically largest eigenpairs. Dense tridiagonalization up to
// d = 2500, Lanczos with full reorthogonalization above.
std::pair<EigenPair, EigenPair> top2_eigs(const Eigen::MatrixXd& D, EigMethod method = EigMethod::Auto);

double overlap(const Eigen::VectorXd& u, const Eigen::VectorXd& v);

struct EstimateReport {
    double lambda1_emp = 0, lambda2_emp = 0;
    double overlap_emp = 0;
    std::optional<double> whitened_overlap_emp;
    std::uint64_t seed = 0;
    int n = 0, d = 0;
    double delta = 0;
    std::string preproc_id;
    Eigen::VectorXd v1;  // top eigenvector (the estimate)
};

EstimateReport spectral_estimate(const Dataset& ds, const Preprocessor& p);

struct WhitenedReport {
    double lambda1 = 0, lambda2 = 0;
    double overlap = 0;
    Eigen::VectorXd beta_hat;  // S^{-1/2} v1(D_K)
};
WhitenedReport whitened_estimate(const Dataset& ds, const Preprocessor& p);

} // namespace glmspec
