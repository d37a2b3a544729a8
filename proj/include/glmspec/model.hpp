// Finite-size problem synthesis: covariances, designs, observations.
#pragma once

#include "glmspec/measure.hpp"
#include "glmspec/observation.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>

namespace glmspec {

struct CovarianceSpec {
    enum class Kind { Identity, Toeplitz, Circulant, Explicit };

    Kind kind = Kind::Identity;
    int d = 1;
    double rho = 0.0;               // toeplitz
    double c0 = 1.0, c1 = 0.0;      // circulant
    int ell = 0;                    // circulant bandwidth
    Eigen::MatrixXd matrix;         // explicit

    static CovarianceSpec identity(int d);
    static CovarianceSpec toeplitz(int d, double rho);
    static CovarianceSpec circulant(int d, double c0, double c1, int ell);
    static CovarianceSpec explicit_matrix(Eigen::MatrixXd m);

    std::string name() const;
    Eigen::MatrixXd dense() const;
};

struct CovarianceFactors {
    CovarianceSpec spec;
    Eigen::MatrixXd sigma;
    Eigen::MatrixXd sqrt;
    Eigen::MatrixXd inv_sqrt;
    Eigen::VectorXd eigenvalues;   // ascending
    Eigen::MatrixXd eigenvectors;
    ScalarMeasure measure;         // eigenvalues, weight 1/d
    bool is_identity = false;

    int dim() const { return int(sigma.rows()); }
};

CovarianceFactors build_covariance(const CovarianceSpec& spec);

enum class Prior { Spherical, Rademacher, Gaussian };
Prior parse_prior(const std::string& name);

struct Dataset {
    Eigen::MatrixXd X;          // n x d, rows N(0, Sigma/n)
    Eigen::VectorXd beta_star;
    Eigen::VectorXd y;
    std::uint64_t seed = 0;
    std::uint64_t trial = 0;
    std::shared_ptr<const CovarianceFactors> cov;  // kept for whitening

    int n() const { return int(X.rows()); }
    int d() const { return int(X.cols()); }
};

Dataset sample_dataset(std::shared_ptr<const CovarianceFactors> cov, const LinkModel& link, int n,
                       std::uint64_t seed, std::uint64_t trial = 0, Prior prior = Prior::Spherical);

// (1/d) tr(X^T X), a consistent estimate of E[Sigma]
double plugin_trace(const Eigen::MatrixXd& X);

// X row-major, then beta*, then y
void write_dataset_csv(const Dataset& ds, const std::string& path);

} // namespace glmspec
