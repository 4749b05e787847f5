// MPS compression of discretized fields, used by the scaling comparison.
#ifndef QPDE_MPS_HPP
#define QPDE_MPS_HPP

#include <vector>

#include "qpde/linalg.hpp"

namespace qpde {

struct MpsCore {
    // blocks[s] is the left-bond x right-bond matrix for physical index s.
    std::array<Matrix, 2> blocks;
    MpsCore() = default;
    MpsCore(Eigen::Index l, Eigen::Index r) {
        blocks[0] = Matrix::Zero(l, r);
        blocks[1] = Matrix::Zero(l, r);
    }
    Eigen::Index left_dim() const { return blocks[0].rows(); }
    Eigen::Index right_dim() const { return blocks[0].cols(); }
};

struct Mps {
    int n = 0;
    std::vector<MpsCore> cores;  // left-canonical
    double norm = 0.0;           // scalar pulled out so cores stay normalized

    int max_bond() const {
        Eigen::Index b = 1;
        for (const auto& c : cores) b = std::max(b, c.right_dim());
        return static_cast<int>(b);
    }
};

// Sequential-SVD factorization of a 2^n vector, truncated to chi_max with
// per-cut discarded-weight tolerance tol. Site 1 is the most significant bit.
Mps mps_from_dense(const Vector& v, int chi_max, double tol);

Vector mps_to_dense(const Mps& m);  // n <= 24

// Relative error 1 - F^n of the chi-truncated representation of v.
double mps_truncation_error(const Vector& v, int chi);

// Smallest chi whose truncated MPS satisfies 1 - F^n <= target_err.
int min_bond_for_accuracy(const Vector& v, double target_err);

struct CostModelReport {
    double t_mps = 0.0;       // n * chi^3
    double t_qc_best = 0.0;   // n_params / eps
    double t_qc_worst = 0.0;  // n_params / eps^2
    double ratio_best = 0.0;
    double ratio_worst = 0.0;
};

CostModelReport cost_models(int n, int chi, int n_params, double eps);

}  // namespace qpde

#endif
