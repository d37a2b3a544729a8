#include "glmspec/spectral.hpp"

#include "glmspec/errors.hpp"
#include "glmspec/linalg.hpp"
#include "glmspec/rng.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace glmspec {

namespace {

Eigen::VectorXd apply_preproc(const Eigen::VectorXd& y, const Preprocessor& p) {
    Eigen::VectorXd t(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) t(i) = p(y(i));
    return t;
}

void fix_sign(Eigen::VectorXd& v) {
    Eigen::Index k;
    v.cwiseAbs().maxCoeff(&k);
    if (v(k) < 0.0) v = -v;
}

// Lanczos with full reorthogonalization; the Krylov dimension doubles until
// both Ritz pairs have small residuals (m = d is exact).
std::pair<EigenPair, EigenPair> lanczos_top2(const Eigen::MatrixXd& D, double tol) {
    const Eigen::Index d = D.rows();
    Philox4x32 rng(0x5eed, 0, StreamTag::Misc);
    std::normal_distribution<double> nd;
    Eigen::VectorXd q0(d);
    for (Eigen::Index i = 0; i < d; ++i) q0(i) = nd(rng);
    q0.normalize();

    Eigen::Index m = std::min<Eigen::Index>(d, 80);
    while (true) {
        Eigen::MatrixXd Q(d, m);
        Eigen::VectorXd alpha(m), beta(m);
        Q.col(0) = q0;
        Eigen::Index steps = m;
        for (Eigen::Index j = 0; j < m; ++j) {
            Eigen::VectorXd w = D * Q.col(j);
            alpha(j) = Q.col(j).dot(w);
            // two passes of classical Gram-Schmidt against the whole basis
            for (int pass = 0; pass < 2; ++pass) {
                const Eigen::VectorXd h = Q.leftCols(j + 1).transpose() * w;
                w.noalias() -= Q.leftCols(j + 1) * h;
            }
            beta(j) = w.norm();
            if (j + 1 == m) break;
            if (beta(j) < 1e-14 * std::max(1.0, std::abs(alpha(j)))) {
                steps = j + 1;  // invariant subspace found
                break;
            }
            Q.col(j + 1) = w / beta(j);
        }
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(steps, steps);
        for (Eigen::Index j = 0; j < steps; ++j) {
            T(j, j) = alpha(j);
            if (j + 1 < steps) T(j, j + 1) = T(j + 1, j) = beta(j);
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        const Eigen::Index k = steps;
        if (k < 2) throw Error(ErrorKind::ConvergenceFail, "Krylov space collapsed below dimension 2");
        const double res1 = std::abs(beta(steps - 1) * es.eigenvectors()(k - 1, k - 1));
        const double res2 = std::abs(beta(steps - 1) * es.eigenvectors()(k - 1, k - 2));
        const bool exact = steps < m || m == d;
        if (exact || (res1 <= tol && res2 <= tol)) {
            EigenPair p1{es.eigenvalues()(k - 1), Q.leftCols(steps) * es.eigenvectors().col(k - 1)};
            EigenPair p2{es.eigenvalues()(k - 2), Q.leftCols(steps) * es.eigenvectors().col(k - 2)};
            p1.vector.normalize();
            p2.vector.normalize();
            return {p1, p2};
        }
        if (m == d) throw Error(ErrorKind::ConvergenceFail, "Lanczos did not converge");
        m = std::min<Eigen::Index>(d, 2 * m);
    }
}

} // namespace

Eigen::MatrixXd build_D(const Eigen::MatrixXd& X, const Eigen::VectorXd& t) {
    if (X.rows() != t.size()) throw Error(ErrorKind::InvariantViolation, "build_D: n mismatch");
    const Eigen::MatrixXd TX = t.asDiagonal() * X;
    Eigen::MatrixXd D = X.transpose() * TX;
    // the two triangles round differently
    D = 0.5 * (D + D.transpose()).eval();
    return D;
}

Eigen::MatrixXd build_D(const Dataset& ds, const Preprocessor& p) { return build_D(ds.X, apply_preproc(ds.y, p)); }

std::pair<EigenPair, EigenPair> top2_eigs(const Eigen::MatrixXd& D, EigMethod method) {
    const Eigen::Index d = D.rows();
    if (D.cols() != d || d < 2) throw Error(ErrorKind::InvariantViolation, "top2_eigs needs a square matrix, d >= 2");
    const double fro = D.norm();
    const double asym = (D - D.transpose()).cwiseAbs().maxCoeff();
    if (asym > 1e-10 * std::max(1.0, D.cwiseAbs().maxCoeff())) {
        std::ostringstream os;
        os << "matrix asymmetry " << asym;
        throw Error(ErrorKind::InvariantViolation, os.str());
    }
    if (method == EigMethod::Auto) method = d <= 2500 ? EigMethod::Dense : EigMethod::Lanczos;

    std::pair<EigenPair, EigenPair> out;
    // a lower bound on ||D||_2
    double norm_lb = fro / std::sqrt(double(d));
    if (method == EigMethod::Dense) {
        SymEig e = sym_eig_top(D, 2);
        out.first = {e.values(1), e.vectors.col(1)};
        out.second = {e.values(0), e.vectors.col(0)};
    } else {
        out = lanczos_top2(D, 1e-11 * std::max(norm_lb, 1e-300));
    }
    norm_lb = std::max({norm_lb, std::abs(out.first.value), std::abs(out.second.value)});
    for (EigenPair* p : {&out.first, &out.second}) {
        fix_sign(p->vector);
        const double res = (D * p->vector - p->value * p->vector).norm();
        if (res > 1e-8 * std::max(norm_lb, 1e-300)) {
            std::ostringstream os;
            os << "eigen-residual " << res << " for value " << p->value;
            throw Error(ErrorKind::ConvergenceFail, os.str());
        }
    }
    return out;
}

double overlap(const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
    const double nu = u.norm(), nv = v.norm();
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::abs(u.dot(v)) / (nu * nv);
}

EstimateReport spectral_estimate(const Dataset& ds, const Preprocessor& p) {
    const Eigen::MatrixXd D = build_D(ds, p);
    auto [p1, p2] = top2_eigs(D);
    EstimateReport r;
    r.lambda1_emp = p1.value;
    r.lambda2_emp = p2.value;
    r.overlap_emp = overlap(p1.vector, ds.beta_star);
    r.seed = ds.seed;
    r.n = ds.n();
    r.d = ds.d();
    r.delta = double(ds.n()) / double(ds.d());
    r.preproc_id = p.id();
    r.v1 = std::move(p1.vector);
    return r;
}

WhitenedReport whitened_estimate(const Dataset& ds, const Preprocessor& p) {
    if (!ds.cov) throw Error(ErrorKind::InvariantViolation, "dataset carries no covariance factors");
    const Eigen::VectorXd t = apply_preproc(ds.y, p);
    WhitenedReport r;
    if (ds.cov->is_identity) {
        auto [p1, p2] = top2_eigs(build_D(ds.X, t));
        r.lambda1 = p1.value;
        r.lambda2 = p2.value;
        r.beta_hat = std::move(p1.vector);
    } else {
        const Eigen::MatrixXd Xw = ds.X * ds.cov->inv_sqrt;
        auto [p1, p2] = top2_eigs(build_D(Xw, t));
        r.lambda1 = p1.value;
        r.lambda2 = p2.value;
        r.beta_hat = ds.cov->inv_sqrt * p1.vector;
    }
    r.overlap = overlap(r.beta_hat, ds.beta_star);
    return r;
}

} // namespace glmspec
