// Compilation of an MPO into isometric cores plus a scalar, and the raised
// per-site unitaries that realize the operator probabilistically.
#ifndef QPDE_COMPILE_HPP
#define QPDE_COMPILE_HPP

#include <string>
#include <vector>

#include "qpde/mpo.hpp"

namespace qpde {

struct FitOptions {
    double lr = 0.1;
    int max_iters = 5000;
    double tol = 1e-10;
    unsigned seed = 0;
    bool warm_start = false;  // zero-padded warm starts stall on generic targets
    bool use_polar = true;    // closed-form overlap-maximizing candidate per core
    int inner_steps = 25;     // per-core steps against frozen environments
    int restarts = 3;         // extra seeds tried when the tolerance is missed
    int log_every = 0;        // sweeps between stderr progress lines (0 = quiet)
};

// MPO whose cores, suitably matricized, lie on Stiefel manifolds:
//   interior (bond Z on both sides): (Z*2)x(Z*2) unitary,
//   first site: 2x(2Z) with orthonormal rows,
//   last site: (2Z)x2 with orthonormal columns.
struct IsometricMpo {
    Mpo q;  // bond profile 1, Z, ..., Z, 1
    int Z = 0;
    double c_mpo = 0.0;
    double fit_error = 0.0;  // ||c q - M||^2 / ||M||^2
    bool converged = false;
    double target_norm = 0.0;  // Frobenius norm of the fitted target
};

struct CompiledOperator {
    int n = 0;
    int n_aux = 0;
    double c_mpo = 0.0;
    double fit_error = 0.0;
    double target_norm = 0.0;
    std::vector<Matrix> gates;  // one (2Z)x(2Z) unitary per site, site order 1..n
};

// Matricization helpers (exposed for tests). `first`/`last` select the
// boundary shapes described above; the first site uses the transposed
// (2Z)x2 column-isometry form so one constraint convention covers all sites.
Matrix core_to_stiefel(const MpoCore& c, bool first, bool last);
MpoCore stiefel_to_core(const Matrix& x, Eigen::Index l, Eigen::Index r, bool first, bool last);

// Max over sites of ||X^dag X - I||_F in the matricized form.
double stiefel_residual(const IsometricMpo& q);

IsometricMpo init_isometric(const Mpo& target, int Z, unsigned seed, bool warm_start = true);

// Real scalar minimizing ||c q - target||_F^2, by tensor contraction.
double optimal_c(const Mpo& q, const Mpo& target);

// Euclidean gradient of ||c q - M||^2 with respect to the conjugate of the
// core at `site` (0-based), at the analytically optimal c. Returned in the
// core's block layout. d cost / d Re(x) = 2 Re(g), d cost / d Im(x) = 2 Im(g).
std::array<Matrix, 4> cost_core_gradient(const IsometricMpo& q, const Mpo& target, int site);

IsometricMpo riemannian_fit(const Mpo& target, int Z, const FitOptions& opt);

// Continues a fit from an existing isometric chain (e.g. one converged on a
// nearby target); the usual entry point for homotopy-style refits.
IsometricMpo riemannian_fit_from(IsometricMpo start, const Mpo& target, const FitOptions& opt);

CompiledOperator raise_to_unitaries(const IsometricMpo& q);

// Haar-average success probability (||M/c||_F / 2^n)^2-normalized form:
// ||M||_F^2 / (c^2 2^n).
double avg_success_probability(const CompiledOperator& comp);

double two_qubit_gate_bound(int n, int Z, double k);

std::string compiled_dump(const CompiledOperator& comp);
CompiledOperator compiled_load(const std::string& text);

// Fit + raise, with a content-addressed cache when cache_dir is non-empty.
CompiledOperator compile_operator(const Mpo& target, int Z, const FitOptions& opt,
                                  const std::string& cache_dir = "");

}  // namespace qpde

#endif
