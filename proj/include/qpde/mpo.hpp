// Matrix product operators for discretized differential operators.
//
// Cores are stored in bond-matrix form: for each pair of physical indices
// (sigma_out, sigma_in) the core holds an l x r matrix over the virtual
// bonds. Site 1 is the most significant bit of the grid index (big-endian);
// boundary bonds are trivial.
#ifndef QPDE_MPO_HPP
#define QPDE_MPO_HPP

#include <array>
#include <string>
#include <vector>

#include "qpde/linalg.hpp"

namespace qpde {

struct MpoCore {
    // op(so, si) is the left-bond x right-bond matrix for physical indices so, si.
    std::array<Matrix, 4> blocks;

    MpoCore() = default;
    MpoCore(Eigen::Index l, Eigen::Index r) {
        for (auto& b : blocks) b = Matrix::Zero(l, r);
    }
    Matrix& op(int so, int si) { return blocks[so * 2 + si]; }
    const Matrix& op(int so, int si) const { return blocks[so * 2 + si]; }
    Eigen::Index left_dim() const { return blocks[0].rows(); }
    Eigen::Index right_dim() const { return blocks[0].cols(); }
};

struct Mpo {
    int n = 0;
    std::vector<MpoCore> cores;

    int max_bond() const {
        Eigen::Index b = 1;
        for (const auto& c : cores) b = std::max(b, c.right_dim());
        return static_cast<int>(b);
    }
};

enum class Boundary { dirichlet, periodic };

struct StencilSpec {
    std::vector<int> offsets;
    std::vector<double> coefficients;
    Boundary boundary = Boundary::dirichlet;
    double dx = 1.0;
};

// -- builders ---------------------------------------------------------------

// Product operator: one 2x2 local op per site, bond dimension 1.
Mpo product_mpo(const std::vector<Matrix>& site_ops, double coeff = 1.0);
Mpo identity_mpo(int n);
Mpo zero_mpo(int n);

// Single-band shift operator with ones on the k-th superdiagonal (k > 0) or
// |k|-th subdiagonal (k < 0); k = 0 gives the identity. Dirichlet truncation.
Mpo shift_mpo(int n, int k);

// Cyclic shift by k grid points (circulant single band).
Mpo cyclic_shift_mpo(int n, int k);

// TriDiag(alpha, beta, gamma): alpha on the diagonal, beta on the super-,
// gamma on the subdiagonal, zero (Dirichlet) boundaries. Bond dimension 3.
Mpo tridiag_toeplitz_mpo(double alpha, double beta, double gamma, int n);

// Two-qubit CNOT as a bond-2 MPO (control = site 1).
Mpo cnot_mpo();

// Banded Toeplitz operator from a stencil, Dirichlet truncation.
Mpo banded_toeplitz_mpo(const StencilSpec& spec, int n);

// Adds the wrap-around band entries turning the Dirichlet operator into the
// circulant one; Dirichlet requests return the input unchanged.
Mpo apply_boundary_correction(const Mpo& m, Boundary boundary, const StencilSpec& spec);

// Diagonal sponge-damping profile: 0 in the inner zone, growing to exactly 1
// at the outermost grid point of each edge zone of 2^n_tilde points.
Mpo sponge_mpo(double kappa, int n_tilde, int n);

// Dense diagonal of the sponge profile, evaluated entry by entry (oracle path).
RealVector sponge_profile(double kappa, int n_tilde, int n);

// -- arithmetic -------------------------------------------------------------

Mpo mpo_add(const Mpo& a, const Mpo& b);
Mpo mpo_scale(const Mpo& a, double s);
Mpo mpo_multiply(const Mpo& a, const Mpo& b);  // dense(a)*dense(b)
Mpo mpo_transpose(const Mpo& a);
Mpo mpo_compress(const Mpo& a, int max_bond, double tol);

// tr[a^dagger b] by transfer-matrix contraction (no densification).
Complex mpo_inner(const Mpo& a, const Mpo& b);
double mpo_frobenius_norm(const Mpo& a);

Matrix mpo_to_dense(const Mpo& a);  // n <= 14

// -- I/O --------------------------------------------------------------------

// Structured text dump: n, per-core shapes, row-major entries.
std::string mpo_dump(const Mpo& a);
Mpo mpo_load(const std::string& text);

}  // namespace qpde

#endif
