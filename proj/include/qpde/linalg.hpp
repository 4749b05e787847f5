// Dense complex linear algebra layer shared by all modules.
// Thin wrappers around Eigen with the sign/ordering conventions fixed
// so downstream optimization trajectories are deterministic.
#ifndef QPDE_LINALG_HPP
#define QPDE_LINALG_HPP

#include <complex>
#include <stdexcept>
#include <Eigen/Dense>

namespace qpde {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SVDResult {
    Matrix u;       // isometry, columns orthonormal
    RealVector s;   // non-negative, descending
    Matrix vh;      // isometry, rows orthonormal
};

inline SVDResult svd(const Matrix& m) {
    if (m.rows() == 0 || m.cols() == 0)
        throw std::invalid_argument("svd: empty matrix");
    Eigen::JacobiSVD<Matrix> dec(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    if (dec.info() != Eigen::Success)
        throw NumericalError("svd: did not converge");
    return {dec.matrixU(), dec.singularValues(), dec.matrixV().adjoint()};
}

struct QRResult {
    Matrix q;
    Matrix r;                   // upper triangular, diag real >= 0
    bool rank_deficient = false;
};

// QR with the diagonal of R rotated to the non-negative real axis, so the
// factorization (and the Stiefel retraction built on it) is a deterministic
// function of the input.
inline QRResult qr_factor(const Matrix& m) {
    if (m.rows() < m.cols())
        throw std::invalid_argument("qr_factor: requires rows >= cols");
    Eigen::HouseholderQR<Matrix> dec(m);
    const Eigen::Index k = m.cols();
    Matrix q = dec.householderQ() * Matrix::Identity(m.rows(), k);
    Matrix r = dec.matrixQR().topRows(k).triangularView<Eigen::Upper>();

    QRResult out;
    const double scale = std::max(1.0, m.norm());
    for (Eigen::Index j = 0; j < k; ++j) {
        const Complex d = r(j, j);
        if (std::abs(d) < 1e-13 * scale) {
            out.rank_deficient = true;
            continue;
        }
        const Complex phase = d / std::abs(d);
        q.col(j) *= phase;
        r.row(j) *= std::conj(phase);
    }
    if (out.rank_deficient) {
        // Column-pivoted fallback still returns q*r == m (pivoting undone on R).
        Eigen::ColPivHouseholderQR<Matrix> piv(m);
        Matrix qp = piv.householderQ() * Matrix::Identity(m.rows(), k);
        Matrix rp = piv.matrixR().topRows(k).triangularView<Eigen::Upper>();
        rp = rp * piv.colsPermutation().inverse();
        for (Eigen::Index j = 0; j < k; ++j) {
            const Complex d = rp(j, j);
            if (std::abs(d) < 1e-13 * scale) continue;
            const Complex phase = d / std::abs(d);
            qp.col(j) *= phase;
            rp.row(j) *= std::conj(phase);
        }
        out.q = std::move(qp);
        out.r = std::move(rp);
        return out;
    }
    out.q = std::move(q);
    out.r = std::move(r);
    return out;
}

inline double frobenius_norm(const Matrix& m) { return m.norm(); }

// Completes an isometry to a square unitary via modified Gram-Schmidt over
// the canonical basis. Accepts tall inputs (orthonormal columns) or wide
// inputs (orthonormal rows); the input occupies the leading columns (rows)
// of the result.
inline Matrix gram_schmidt_complete(const Matrix& iso) {
    if (iso.rows() < iso.cols()) {
        // orthonormal rows: complete the adjoint and flip back
        return gram_schmidt_complete(iso.adjoint()).adjoint();
    }
    const Eigen::Index d = iso.rows();
    const Eigen::Index k = iso.cols();
    if (((iso.adjoint() * iso) - Matrix::Identity(k, k)).norm() > 1e-8)
        throw std::invalid_argument("gram_schmidt_complete: input not isometric");
    if (k == d) return iso;

    Matrix u(d, d);
    u.leftCols(k) = iso;
    Eigen::Index filled = k;
    for (Eigen::Index cand = 0; cand < d && filled < d; ++cand) {
        Vector v = Vector::Zero(d);
        v(cand) = 1.0;
        for (int pass = 0; pass < 2; ++pass)
            for (Eigen::Index j = 0; j < filled; ++j)
                v -= u.col(j).dot(v) * u.col(j);
        const double nrm = v.norm();
        if (nrm < 1e-6) continue;
        u.col(filled++) = v / nrm;
    }
    if (filled != d)
        throw NumericalError("gram_schmidt_complete: completion failed");
    return u;
}

inline bool is_unitary(const Matrix& m, double tol = 1e-10) {
    if (m.rows() != m.cols()) return false;
    return ((m.adjoint() * m) - Matrix::Identity(m.cols(), m.cols())).norm() <= tol;
}

// |a-b| <= atol + rtol*|b| hybrid used across the test suites.
inline bool close(double a, double b, double atol = 1e-12, double rtol = 1e-10) {
    return std::abs(a - b) <= atol + rtol * std::abs(b);
}

}  // namespace qpde

#endif
