#include "qpde/mps.hpp"

#include <cmath>

namespace qpde {

Mps mps_from_dense(const Vector& v, int chi_max, double tol) {
    const Eigen::Index N = v.size();
    int n = 0;
    while ((1LL << n) < N) ++n;
    if ((1LL << n) != N || N < 2) throw std::invalid_argument("mps_from_dense: length not a power of two");
    const double nrm = v.norm();
    if (nrm == 0.0) throw std::invalid_argument("mps_from_dense: zero vector");
    if (chi_max < 1) throw std::invalid_argument("mps_from_dense: chi_max < 1");

    Mps m;
    m.n = n;
    m.norm = nrm;
    // Split off one site at a time; remainder carries the tail of the vector.
    Matrix rest = Matrix::Map(const_cast<Complex*>(v.data()), N, 1).transpose() / nrm;  // 1 x N
    Eigen::Index l = 1;
    for (int j = 0; j < n - 1; ++j) {
        const Eigen::Index cols = rest.cols() / 2;
        Matrix mat(l * 2, cols);  // rows (l, sigma), sigma fast in the grid index
        for (Eigen::Index i = 0; i < l; ++i) {
            mat.row(i * 2) = rest.row(i).head(cols);
            mat.row(i * 2 + 1) = rest.row(i).tail(cols);
        }
        auto dec = svd(mat);
        Eigen::Index keep = std::min<Eigen::Index>(dec.s.size(), chi_max);
        while (keep > 1 && dec.s(keep - 1) <= 1e-14 * dec.s(0)) --keep;  // numerical rank
        double discarded = 0.0;
        while (keep > 1) {
            const double s2 = dec.s(keep - 1) * dec.s(keep - 1);
            if (std::sqrt(discarded + s2) <= tol / std::sqrt(static_cast<double>(n))) {
                discarded += s2;
                --keep;
            } else {
                break;
            }
        }
        MpsCore core(l, keep);
        for (Eigen::Index i = 0; i < l; ++i)
            for (int s = 0; s < 2; ++s)
                core.blocks[s].row(i) = dec.u.row(i * 2 + s).head(keep);
        m.cores.push_back(std::move(core));
        rest = dec.s.head(keep).cast<Complex>().asDiagonal() * dec.vh.topRows(keep);
        l = keep;
    }
    MpsCore last(l, 1);
    for (Eigen::Index i = 0; i < l; ++i) {
        last.blocks[0](i, 0) = rest(i, 0);
        last.blocks[1](i, 0) = rest(i, 1);
    }
    // keep cores normalized: pull the residual norm (< 1 after truncation)
    // into the stored scalar
    double tail = 0.0;
    for (int s = 0; s < 2; ++s) tail += last.blocks[s].squaredNorm();
    tail = std::sqrt(tail);
    if (tail > 0) {
        for (int s = 0; s < 2; ++s) last.blocks[s] /= tail;
        m.norm *= tail;
    }
    m.cores.push_back(std::move(last));
    return m;
}

Vector mps_to_dense(const Mps& m) {
    if (m.n > 24) throw std::invalid_argument("mps_to_dense: n too large");
    Matrix acc = Matrix::Ones(1, 1);  // (grid-prefix) x bond
    for (const auto& c : m.cores) {
        Matrix next(acc.rows() * 2, c.right_dim());
        next.topRows(acc.rows()).setZero();
        next.bottomRows(acc.rows()).setZero();
        Matrix a0 = acc * c.blocks[0];
        Matrix a1 = acc * c.blocks[1];
        for (Eigen::Index i = 0; i < acc.rows(); ++i) {
            next.row(i * 2) = a0.row(i);
            next.row(i * 2 + 1) = a1.row(i);
        }
        acc = std::move(next);
    }
    return m.norm * acc.col(0);
}

double mps_truncation_error(const Vector& v, int chi) {
    Mps m = mps_from_dense(v, chi, 0.0);
    Vector w = mps_to_dense(m);
    const Complex ov = w.dot(v);
    const double f = std::norm(ov) / (w.squaredNorm() * v.squaredNorm());
    return 1.0 - f;
}

int min_bond_for_accuracy(const Vector& v, double target_err) {
    if (target_err <= 0 || target_err >= 1)
        throw std::invalid_argument("min_bond_for_accuracy: target out of range");
    const Eigen::Index N = v.size();
    int n = 0;
    while ((1LL << n) < N) ++n;
    const int chi_full = 1 << (n / 2);
    for (int chi = 1; chi <= chi_full; ++chi)
        if (mps_truncation_error(v, chi) <= target_err) return chi;
    return chi_full;
}

CostModelReport cost_models(int n, int chi, int n_params, double eps) {
    if (n <= 0 || chi <= 0 || n_params <= 0 || eps <= 0)
        throw std::invalid_argument("cost_models: inputs must be positive");
    CostModelReport r;
    r.t_mps = static_cast<double>(n) * chi * chi * chi;
    r.t_qc_best = n_params / eps;
    r.t_qc_worst = n_params / (eps * eps);
    r.ratio_best = r.t_qc_best / r.t_mps;
    r.ratio_worst = r.t_qc_worst / r.t_mps;
    return r;
}

}  // namespace qpde
