#include "glmspec/linalg.hpp"

#include "glmspec/errors.hpp"

#include <Eigen/Eigenvalues>

namespace glmspec {

SymEig sym_eig(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::ConvergenceFail, "symmetric eigensolver did not converge");
    return {es.eigenvalues(), es.eigenvectors()};
}

SymEig sym_eig_top(const Eigen::MatrixXd& a, int k) {
    const Eigen::Index n = a.rows();
    if (k < 1 || k > n) throw Error(ErrorKind::InvariantViolation, "sym_eig_top: bad k");
    SymEig full = sym_eig(a);
    return {full.values.tail(k), full.vectors.rightCols(k)};
}

} // namespace glmspec
