// Symmetric eigensolver wrappers.
#pragma once

#include <Eigen/Dense>

namespace glmspec {

struct SymEig {
    Eigen::VectorXd values;   // ascending
    Eigen::MatrixXd vectors;  // columns
};

// full decomposition (Householder tridiagonalization + implicit QL)
SymEig sym_eig(const Eigen::MatrixXd& a);

// the k algebraically largest eigenpairs, ascending
SymEig sym_eig_top(const Eigen::MatrixXd& a, int k);

} // namespace glmspec
