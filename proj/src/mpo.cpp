#include "qpde/mpo.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include <cmath>
#include <sstream>
#include <iomanip>

namespace qpde {

namespace {

Matrix local_i() { return Matrix::Identity(2, 2); }
Matrix local_i1() { Matrix m = Matrix::Zero(2, 2); m(0, 0) = 1; return m; }
Matrix local_i2() { Matrix m = Matrix::Zero(2, 2); m(1, 1) = 1; return m; }
Matrix local_j() { Matrix m = Matrix::Zero(2, 2); m(0, 1) = 1; return m; }
Matrix local_jt() { Matrix m = Matrix::Zero(2, 2); m(1, 0) = 1; return m; }
Matrix local_x() { Matrix m = Matrix::Zero(2, 2); m(0, 1) = 1; m(1, 0) = 1; return m; }

// Assemble a core from an op-valued bond matrix: entry (l, r) is a 2x2 local op.
MpoCore core_from_blocks(const std::vector<std::vector<Matrix>>& rows) {
    const Eigen::Index l = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index r = static_cast<Eigen::Index>(rows[0].size());
    MpoCore c(l, r);
    for (Eigen::Index i = 0; i < l; ++i)
        for (Eigen::Index j = 0; j < r; ++j)
            for (int so = 0; so < 2; ++so)
                for (int si = 0; si < 2; ++si)
                    c.op(so, si)(i, j) = rows[i][j](so, si);
    return c;
}

Matrix zero2() { return Matrix::Zero(2, 2); }

}  // namespace

Mpo product_mpo(const std::vector<Matrix>& site_ops, double coeff) {
    Mpo m;
    m.n = static_cast<int>(site_ops.size());
    m.cores.reserve(m.n);
    for (int j = 0; j < m.n; ++j) {
        Matrix op = site_ops[j];
        if (j == 0) op *= coeff;
        m.cores.push_back(core_from_blocks({{op}}));
    }
    return m;
}

Mpo identity_mpo(int n) {
    return product_mpo(std::vector<Matrix>(n, local_i()));
}

Mpo zero_mpo(int n) {
    return product_mpo(std::vector<Matrix>(n, zero2()));
}

Mpo shift_mpo(int n, int k) {
    if (n < 1) throw std::invalid_argument("shift_mpo: n < 1");
    if (std::abs(k) >= (1LL << n)) throw std::invalid_argument("shift_mpo: offset out of range");
    if (k == 0) return identity_mpo(n);
    if (k < 0) return mpo_transpose(shift_mpo(n, -k));
    // k == 1 base case: bond-2 carry construction, then powers for larger k.
    Mpo s;
    s.n = n;
    if (n == 1) {
        s.cores.push_back(core_from_blocks({{local_j()}}));
        return s;
    }
    s.cores.push_back(core_from_blocks({{local_i(), local_j()}}));
    for (int j = 1; j < n - 1; ++j)
        s.cores.push_back(core_from_blocks({{local_i(), local_j()},
                                            {zero2(), local_jt()}}));
    s.cores.push_back(core_from_blocks({{local_j()}, {local_jt()}}));
    if (k == 1) return s;
    Mpo acc = s;
    for (int i = 1; i < k; ++i) acc = mpo_compress(mpo_multiply(acc, s), k + 1, 1e-14);
    return acc;
}

Mpo cyclic_shift_mpo(int n, int k) {
    if (n < 1) throw std::invalid_argument("cyclic_shift_mpo: n < 1");
    const long long N = 1LL << n;
    k = static_cast<int>(((k % N) + N) % N);
    if (k == 0) return identity_mpo(n);
    // C = J + corner, corner = |N-1><0| = (J^T)^{tensor n}
    Mpo c1 = mpo_compress(
        mpo_add(shift_mpo(n, 1), product_mpo(std::vector<Matrix>(n, local_jt()))), 2, 1e-14);
    Mpo acc = c1;
    for (int i = 1; i < k; ++i) acc = mpo_compress(mpo_multiply(acc, c1), 2, 1e-14);
    return acc;
}

Mpo tridiag_toeplitz_mpo(double alpha, double beta, double gamma, int n) {
    if (n < 2) throw std::invalid_argument("tridiag_toeplitz_mpo: n < 2");
    Mpo m = mpo_add(mpo_scale(identity_mpo(n), alpha),
                    mpo_add(mpo_scale(shift_mpo(n, 1), beta),
                            mpo_scale(shift_mpo(n, -1), gamma)));
    return mpo_compress(m, 3, 1e-13);
}

Mpo cnot_mpo() {
    Mpo m;
    m.n = 2;
    m.cores.push_back(core_from_blocks({{local_i1(), local_i2()}}));
    m.cores.push_back(core_from_blocks({{local_i()}, {local_x()}}));
    return m;
}

Mpo banded_toeplitz_mpo(const StencilSpec& spec, int n) {
    if (spec.offsets.size() != spec.coefficients.size() || spec.offsets.empty())
        throw std::invalid_argument("banded_toeplitz_mpo: bad stencil");
    int max_off = 0;
    for (int k : spec.offsets) {
        if (std::abs(k) >= (1LL << n))
            throw std::invalid_argument("banded_toeplitz_mpo: offset out of range");
        max_off = std::max(max_off, std::abs(k));
    }
    Mpo acc = zero_mpo(n);
    for (size_t i = 0; i < spec.offsets.size(); ++i)
        acc = mpo_add(acc, mpo_scale(shift_mpo(n, spec.offsets[i]), spec.coefficients[i]));
    return mpo_compress(acc, 2 * max_off + 2, 1e-13);
}

Mpo apply_boundary_correction(const Mpo& m, Boundary boundary, const StencilSpec& spec) {
    if (boundary == Boundary::dirichlet) return m;
    if (boundary != Boundary::periodic)
        throw std::invalid_argument("apply_boundary_correction: unsupported boundary");
    const int n = m.n;
    Mpo acc = m;
    for (size_t i = 0; i < spec.offsets.size(); ++i) {
        const int k = spec.offsets[i];
        if (k == 0) continue;
        Mpo wrap = mpo_add(cyclic_shift_mpo(n, k), mpo_scale(shift_mpo(n, k), -1.0));
        acc = mpo_add(acc, mpo_scale(wrap, spec.coefficients[i]));
    }
    int max_off = 0;
    for (int k : spec.offsets) max_off = std::max(max_off, std::abs(k));
    return mpo_compress(acc, 2 * max_off + 2, 1e-13);
}

RealVector sponge_profile(double kappa, int n_tilde, int n) {
    const long long N = 1LL << n;
    const long long edge = 1LL << n_tilde;
    const double pf = 1.0 / (std::exp((edge - 1) * kappa) - 1.0);
    RealVector d = RealVector::Zero(N);
    for (long long x = 0; x < N; ++x) {
        if (x >= N - edge) {                       // right edge, grows outward
            const long long r = x - (N - edge);
            d(x) = (std::exp(kappa * r) - 1.0) * pf;
        } else if (x < edge) {                     // left edge, mirrored
            d(x) = (std::exp(kappa * (edge - 1 - x)) - 1.0) * pf;
        }
    }
    return d;
}

Mpo sponge_mpo(double kappa, int n_tilde, int n) {
    if (n_tilde < 1 || n_tilde >= n) throw std::invalid_argument("sponge_mpo: need 1 <= n_tilde < n");
    if (kappa <= 0) throw std::invalid_argument("sponge_mpo: kappa must be positive");
    const double pf = 1.0 / (std::exp(((1LL << n_tilde) - 1) * kappa) - 1.0);

    auto grow = [&](int j) {  // J1(j) = diag(1, e^{kappa 2^{n-j}}), j is 1-based
        Matrix m = Matrix::Zero(2, 2);
        m(0, 0) = 1.0;
        m(1, 1) = std::exp(kappa * static_cast<double>(1LL << (n - j)));
        return m;
    };
    std::vector<Matrix> b1, b2, b3, b4;
    for (int j = 1; j <= n; ++j) {
        const bool selector = (j <= n - n_tilde);
        b1.push_back(selector ? local_i2() : grow(j));
        b2.push_back(selector ? local_i1() : Matrix(grow(j).colwise().reverse().rowwise().reverse()));
        b3.push_back(selector ? local_i2() : local_i());
        b4.push_back(selector ? local_i1() : local_i());
    }
    Mpo m = mpo_add(mpo_add(product_mpo(b1, pf), product_mpo(b2, pf)),
                    mpo_add(product_mpo(b3, -pf), product_mpo(b4, -pf)));
    return m;  // bond 4 by construction
}

Mpo mpo_add(const Mpo& a, const Mpo& b) {
    if (a.n != b.n) throw std::invalid_argument("mpo_add: size mismatch");
    Mpo out;
    out.n = a.n;
    out.cores.reserve(a.n);
    for (int j = 0; j < a.n; ++j) {
        const auto& ca = a.cores[j];
        const auto& cb = b.cores[j];
        const Eigen::Index la = ca.left_dim(), ra = ca.right_dim();
        const Eigen::Index lb = cb.left_dim(), rb = cb.right_dim();
        const Eigen::Index l = (j == 0) ? 1 : la + lb;
        const Eigen::Index r = (j == a.n - 1) ? 1 : ra + rb;
        MpoCore c(l, r);
        for (int p = 0; p < 4; ++p) {
            if (j == 0 && j == a.n - 1) {
                c.blocks[p] = ca.blocks[p] + cb.blocks[p];
            } else if (j == 0) {
                c.blocks[p].block(0, 0, 1, ra) = ca.blocks[p];
                c.blocks[p].block(0, ra, 1, rb) = cb.blocks[p];
            } else if (j == a.n - 1) {
                c.blocks[p].block(0, 0, la, 1) = ca.blocks[p];
                c.blocks[p].block(la, 0, lb, 1) = cb.blocks[p];
            } else {
                c.blocks[p].block(0, 0, la, ra) = ca.blocks[p];
                c.blocks[p].block(la, ra, lb, rb) = cb.blocks[p];
            }
        }
        out.cores.push_back(std::move(c));
    }
    return out;
}

Mpo mpo_scale(const Mpo& a, double s) {
    Mpo out = a;
    if (out.n == 0) return out;
    for (auto& b : out.cores[0].blocks) b *= s;
    return out;
}

Mpo mpo_multiply(const Mpo& a, const Mpo& b) {
    if (a.n != b.n) throw std::invalid_argument("mpo_multiply: size mismatch");
    Mpo out;
    out.n = a.n;
    out.cores.reserve(a.n);
    for (int j = 0; j < a.n; ++j) {
        const auto& ca = a.cores[j];
        const auto& cb = b.cores[j];
        const Eigen::Index l = ca.left_dim() * cb.left_dim();
        const Eigen::Index r = ca.right_dim() * cb.right_dim();
        MpoCore c(l, r);
        for (int so = 0; so < 2; ++so)
            for (int si = 0; si < 2; ++si)
                for (int s = 0; s < 2; ++s)
                    c.op(so, si) += Eigen::kroneckerProduct(ca.op(so, s), cb.op(s, si)).eval();
        out.cores.push_back(std::move(c));
    }
    return out;
}

Mpo mpo_transpose(const Mpo& a) {
    Mpo out = a;
    for (auto& c : out.cores) {
        std::swap(c.blocks[1], c.blocks[2]);  // (so,si) -> (si,so)
    }
    return out;
}

namespace {

// Matricize core as (l*4) x r; physical pair index p = so*2+si is the fast
// part of the row index.
Matrix core_as_l4r(const MpoCore& c) {
    const Eigen::Index l = c.left_dim(), r = c.right_dim();
    Matrix m(l * 4, r);
    for (int p = 0; p < 4; ++p)
        for (Eigen::Index i = 0; i < l; ++i)
            m.row(i * 4 + p) = c.blocks[p].row(i);
    return m;
}

MpoCore core_from_l4r(const Matrix& m, Eigen::Index l) {
    const Eigen::Index r = m.cols();
    MpoCore c(l, r);
    for (int p = 0; p < 4; ++p)
        for (Eigen::Index i = 0; i < l; ++i)
            c.blocks[p].row(i) = m.row(i * 4 + p);
    return c;
}

Matrix core_as_l4r_right(const MpoCore& c) {  // l x (4*r), p fast in columns
    const Eigen::Index l = c.left_dim(), r = c.right_dim();
    Matrix m(l, 4 * r);
    for (int p = 0; p < 4; ++p)
        for (Eigen::Index k = 0; k < r; ++k)
            m.col(k * 4 + p) = c.blocks[p].col(k);
    return m;
}

MpoCore core_from_l4r_right(const Matrix& m, Eigen::Index r) {
    const Eigen::Index l = m.rows();
    MpoCore c(l, r);
    for (int p = 0; p < 4; ++p)
        for (Eigen::Index k = 0; k < r; ++k)
            c.blocks[p].col(k) = m.col(k * 4 + p);
    return c;
}

}  // namespace

Mpo mpo_compress(const Mpo& a, int max_bond, double tol) {
    if (a.n == 1) return a;
    Mpo m = a;
    // Left-to-right QR sweep gathers the norm into the last core.
    for (int j = 0; j < m.n - 1; ++j) {
        Matrix mat = core_as_l4r(m.cores[j]);
        Eigen::HouseholderQR<Matrix> qr(mat);
        const Eigen::Index k = std::min(mat.rows(), mat.cols());
        Matrix q = qr.householderQ() * Matrix::Identity(mat.rows(), k);
        Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
        m.cores[j] = core_from_l4r(q, m.cores[j].left_dim());
        for (auto& b : m.cores[j + 1].blocks) b = (r * b).eval();
    }
    const double total = core_as_l4r(m.cores[m.n - 1]).norm();
    const double budget = (m.n > 1) ? tol * total / std::sqrt(static_cast<double>(m.n - 1)) : 0.0;
    // Right-to-left SVD sweep with truncation.
    for (int j = m.n - 1; j > 0; --j) {
        Matrix mat = core_as_l4r_right(m.cores[j]);
        auto dec = svd(mat);
        Eigen::Index keep = dec.s.size();
        double discarded = 0.0;
        while (keep > 1) {
            const double s2 = dec.s(keep - 1) * dec.s(keep - 1);
            if (keep > max_bond || std::sqrt(discarded + s2) <= budget) {
                discarded += s2;
                --keep;
            } else {
                break;
            }
        }
        Matrix vh = dec.vh.topRows(keep);
        Matrix us = dec.u.leftCols(keep) * dec.s.head(keep).asDiagonal();
        m.cores[j] = core_from_l4r_right(vh, m.cores[j].right_dim());
        for (auto& b : m.cores[j - 1].blocks) b = (b * us).eval();
    }
    return m;
}

Complex mpo_inner(const Mpo& a, const Mpo& b) {
    if (a.n != b.n) throw std::invalid_argument("mpo_inner: size mismatch");
    Matrix e = Matrix::Ones(1, 1);
    for (int j = 0; j < a.n; ++j) {
        Matrix next = Matrix::Zero(a.cores[j].right_dim(), b.cores[j].right_dim());
        for (int p = 0; p < 4; ++p)
            next += a.cores[j].blocks[p].adjoint() * e * b.cores[j].blocks[p];
        e = std::move(next);
    }
    return e(0, 0);
}

double mpo_frobenius_norm(const Mpo& a) {
    return std::sqrt(std::max(0.0, mpo_inner(a, a).real()));
}

Matrix mpo_to_dense(const Mpo& a) {
    if (a.n > 14) throw std::invalid_argument("mpo_to_dense: n too large");
    std::vector<Matrix> acc{Matrix::Ones(1, 1)};
    for (int j = 0; j < a.n; ++j) {
        const auto& c = a.cores[j];
        const Eigen::Index l = c.left_dim(), r = c.right_dim();
        const Eigen::Index d = acc[0].rows();
        std::vector<Matrix> next(r, Matrix::Zero(d * 2, d * 2));
        for (Eigen::Index rr = 0; rr < r; ++rr)
            for (Eigen::Index ll = 0; ll < l; ++ll) {
                Matrix local(2, 2);
                for (int so = 0; so < 2; ++so)
                    for (int si = 0; si < 2; ++si)
                        local(so, si) = c.op(so, si)(ll, rr);
                if (local.isZero(0)) continue;
                next[rr] += Eigen::kroneckerProduct(acc[ll], local).eval();
            }
        acc = std::move(next);
    }
    return acc[0];
}

std::string mpo_dump(const Mpo& a) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "MPO v1\n" << "n " << a.n << "\n";
    for (int j = 0; j < a.n; ++j) {
        const auto& c = a.cores[j];
        os << "core " << j << " " << c.left_dim() << " " << c.right_dim() << "\n";
        for (int p = 0; p < 4; ++p) {
            for (Eigen::Index i = 0; i < c.left_dim(); ++i)
                for (Eigen::Index k = 0; k < c.right_dim(); ++k)
                    os << c.blocks[p](i, k).real() << " " << c.blocks[p](i, k).imag() << "\n";
        }
    }
    return os.str();
}

Mpo mpo_load(const std::string& text) {
    std::istringstream is(text);
    std::string tag, ver;
    is >> tag >> ver;
    if (tag != "MPO" || ver != "v1") throw std::invalid_argument("mpo_load: bad header");
    Mpo m;
    is >> tag >> m.n;
    if (tag != "n" || m.n <= 0) throw std::invalid_argument("mpo_load: bad size");
    m.cores.reserve(m.n);
    for (int j = 0; j < m.n; ++j) {
        int idx;
        Eigen::Index l, r;
        is >> tag >> idx >> l >> r;
        if (tag != "core" || idx != j) throw std::invalid_argument("mpo_load: bad core record");
        MpoCore c(l, r);
        for (int p = 0; p < 4; ++p)
            for (Eigen::Index i = 0; i < l; ++i)
                for (Eigen::Index k = 0; k < r; ++k) {
                    double re, im;
                    is >> re >> im;
                    c.blocks[p](i, k) = Complex(re, im);
                }
        m.cores.push_back(std::move(c));
    }
    if (!is) throw std::invalid_argument("mpo_load: truncated input");
    return m;
}

}  // namespace qpde
