#include "glmspec/model.hpp"

#include "glmspec/errors.hpp"
#include "glmspec/linalg.hpp"
#include "glmspec/rng.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace glmspec {

CovarianceSpec CovarianceSpec::identity(int d) {
    CovarianceSpec s;
    s.kind = Kind::Identity;
    s.d = d;
    return s;
}

CovarianceSpec CovarianceSpec::toeplitz(int d, double rho) {
    CovarianceSpec s;
    s.kind = Kind::Toeplitz;
    s.d = d;
    s.rho = rho;
    return s;
}

CovarianceSpec CovarianceSpec::circulant(int d, double c0, double c1, int ell) {
    CovarianceSpec s;
    s.kind = Kind::Circulant;
    s.d = d;
    s.c0 = c0;
    s.c1 = c1;
    s.ell = ell;
    return s;
}

CovarianceSpec CovarianceSpec::explicit_matrix(Eigen::MatrixXd m) {
    CovarianceSpec s;
    s.kind = Kind::Explicit;
    s.d = int(m.rows());
    s.matrix = std::move(m);
    return s;
}

std::string CovarianceSpec::name() const {
    std::ostringstream os;
    switch (kind) {
    case Kind::Identity: os << "identity"; break;
    case Kind::Toeplitz: os << "toeplitz(rho=" << rho << ")"; break;
    case Kind::Circulant: os << "circulant(c0=" << c0 << ",c1=" << c1 << ",l=" << ell << ")"; break;
    case Kind::Explicit: os << "explicit"; break;
    }
    return os.str();
}

Eigen::MatrixXd CovarianceSpec::dense() const {
    if (d < 1) throw Error(ErrorKind::ConfigError, "covariance dimension must be >= 1");
    switch (kind) {
    case Kind::Identity: return Eigen::MatrixXd::Identity(d, d);
    case Kind::Toeplitz: {
        if (!(rho > -1.0 && rho < 1.0)) throw Error(ErrorKind::ConfigError, "toeplitz rho must lie in (-1, 1)");
        Eigen::MatrixXd m(d, d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) m(i, j) = std::pow(rho, std::abs(i - j));
        return m;
    }
    case Kind::Circulant: {
        if (ell < 0 || 2 * ell >= d) throw Error(ErrorKind::ConfigError, "circulant bandwidth must satisfy l < d/2");
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(d, d);
        for (int j = 0; j < d; ++j)
            for (int i = 0; i < d; ++i) {
                const int gap = std::abs(i - j);
                const int cyc = std::min(gap, d - gap);
                if (cyc == 0) m(i, j) = c0;
                else if (cyc <= ell) m(i, j) = c1;
            }
        return m;
    }
    case Kind::Explicit: {
        if (matrix.rows() != matrix.cols()) throw Error(ErrorKind::ConfigError, "explicit covariance not square");
        if ((matrix - matrix.transpose()).cwiseAbs().maxCoeff() > 1e-12)
            throw Error(ErrorKind::ConfigError, "explicit covariance not symmetric");
        return matrix;
    }
    }
    return {};
}

CovarianceFactors build_covariance(const CovarianceSpec& spec) {
    Eigen::MatrixXd sigma = spec.dense();
    const int d = int(sigma.rows());
    const bool ident = spec.kind == CovarianceSpec::Kind::Identity;

    Eigen::VectorXd lam;
    Eigen::MatrixXd q;
    if (ident) {
        lam = Eigen::VectorXd::Ones(d);
        q = Eigen::MatrixXd::Identity(d, d);
    } else {
        SymEig e = sym_eig(sigma);
        lam = std::move(e.values);
        q = std::move(e.vectors);
    }
    if (lam.minCoeff() <= 1e-12) {
        std::ostringstream os;
        os << spec.name() << " has min eigenvalue " << lam.minCoeff();
        throw Error(ErrorKind::NotPositiveDefinite, os.str());
    }

    Eigen::MatrixXd root, inv_root;
    if (ident) {
        root = Eigen::MatrixXd::Identity(d, d);
        inv_root = Eigen::MatrixXd::Identity(d, d);
    } else {
        root = q * lam.cwiseSqrt().asDiagonal() * q.transpose();
        inv_root = q * lam.cwiseSqrt().cwiseInverse().asDiagonal() * q.transpose();
        // symmetrise away rounding
        root = 0.5 * (root + root.transpose()).eval();
        inv_root = 0.5 * (inv_root + inv_root.transpose()).eval();
    }

    std::vector<double> atoms(lam.data(), lam.data() + d);
    return CovarianceFactors{spec, std::move(sigma), std::move(root), std::move(inv_root),
                             lam, std::move(q), ScalarMeasure::uniform(std::move(atoms)), ident};
}

Prior parse_prior(const std::string& name) {
    if (name == "spherical") return Prior::Spherical;
    if (name == "rademacher") return Prior::Rademacher;
    if (name == "gaussian") return Prior::Gaussian;
    throw Error(ErrorKind::ConfigError, "unknown prior '" + name + "'");
}

Dataset sample_dataset(std::shared_ptr<const CovarianceFactors> cov, const LinkModel& link, int n,
                       std::uint64_t seed, std::uint64_t trial, Prior prior) {
    if (n < 1) throw Error(ErrorKind::ConfigError, "n must be >= 1");
    const int d = cov->dim();
    Dataset ds;
    ds.seed = seed;
    ds.trial = trial;
    ds.cov = cov;

    {
        Philox4x32 rng(seed, trial, StreamTag::Design);
        std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(double(n)));
        Eigen::MatrixXd g(n, d);
        for (Eigen::Index k = 0; k < g.size(); ++k) g.data()[k] = nd(rng);
        if (cov->is_identity) ds.X = std::move(g);
        else ds.X = g * cov->sqrt;
    }
    {
        Philox4x32 rng(seed, trial, StreamTag::Signal);
        std::normal_distribution<double> nd(0.0, 1.0);
        ds.beta_star.resize(d);
        switch (prior) {
        case Prior::Spherical:
            for (int i = 0; i < d; ++i) ds.beta_star(i) = nd(rng);
            ds.beta_star *= std::sqrt(double(d)) / ds.beta_star.norm();
            break;
        case Prior::Gaussian:
            for (int i = 0; i < d; ++i) ds.beta_star(i) = nd(rng);
            break;
        case Prior::Rademacher: {
            std::bernoulli_distribution coin(0.5);
            for (int i = 0; i < d; ++i) ds.beta_star(i) = coin(rng) ? 1.0 : -1.0;
            break;
        }
        }
    }
    {
        Philox4x32 rng(seed, trial, StreamTag::Noise);
        const Eigen::VectorXd g = ds.X * ds.beta_star;
        ds.y.resize(n);
        for (int i = 0; i < n; ++i) ds.y(i) = link.sample(g(i), rng);
    }
    return ds;
}

double plugin_trace(const Eigen::MatrixXd& X) {
    if (X.size() == 0) throw Error(ErrorKind::InvariantViolation, "plugin_trace of an empty matrix");
    return X.squaredNorm() / double(X.cols());
}

void write_dataset_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::ConfigError, "cannot open " + path);
    out.precision(17);
    out << "# n=" << ds.n() << " d=" << ds.d() << " seed=" << ds.seed << " trial=" << ds.trial << "\n";
    out << "# X\n";
    for (int i = 0; i < ds.n(); ++i) {
        for (int j = 0; j < ds.d(); ++j) out << (j ? "," : "") << ds.X(i, j);
        out << "\n";
    }
    out << "# beta_star\n";
    for (int j = 0; j < ds.d(); ++j) out << (j ? "," : "") << ds.beta_star(j);
    out << "\n# y\n";
    for (int i = 0; i < ds.n(); ++i) out << (i ? "," : "") << ds.y(i);
    out << "\n";
}

} // namespace glmspec
