// Variational time stepping: norm-correction bookkeeping, overlap training,
// explicit Euler and RK4 steps (linear, nonlinear, and coupled two-field
// forms), the three reference problems, and dense classical solvers used as
// oracles.
#ifndef QPDE_SOLVER_HPP
#define QPDE_SOLVER_HPP

#include <optional>
#include <string>
#include <vector>

#include "qpde/simulator.hpp"

namespace qpde {

// -- postselection norm corrections -----------------------------------------

// f = (1+alpha) / (2 sin phi - (sqrt(alpha) - 1/sqrt(alpha)) cos phi).
double norm_constant_f(double alpha, double phi);

// phi maximizing the ancilla expectation: 2 arctan(sqrt(alpha)).
double phi_opt(double alpha);

// Inverse of phi_opt: tan^2(phi/2).
double alpha_from_phi(double phi);

// F = (alpha sz + alpha cos phi + sz - cos phi)^2 / (4 alpha sin^2 phi),
// clipped to [0, 1].
double fidelity_from_expectation(double sigma_z, double alpha, double phi);

// Weight angle of the linear/nonlinear superposition:
// 2 arctan(theta0 |c_nonlin| / |c_lin|).
double phi_u_weight(double theta0, double c_nonlin, double c_lin);

double update_norm_linear(double theta0, double c_mpo, double f, double sigma_z);

// theta0 * sqrt(2) * c_lin * f * r_u * sigma_z with r_u = 1/cos(phi_u/2).
double update_norm_nonlinear(double theta0, double c_lin, double f, double r_u,
                             double sigma_z);

// -- training ---------------------------------------------------------------

enum class GradKind { parameter_shift, spsa };

struct OptimizerConfig {
    double lr = 0.05;
    int epochs = 751;
    GradKind grad = GradKind::parameter_shift;
    double f_threshold = 1.0 - 1e-6;  // per-(sub)step acceptance fidelity
    int polish_epochs = 400;          // line-searched descent after Adam
    unsigned seed = 0;
    double spsa_c = 0.01;
};

struct TrainReport {
    double overlap = 0.0;   // Re<phi(theta)|target>, unnormalized target
    double fidelity = 0.0;  // overlap^2 / ||target||^2
    int epochs_used = 0;
};

// Dense real amplitudes of the ansatz state, fast path used by training loops
// (equivalent to prepare_ansatz, which remains the reference implementation).
RealVector ansatz_state(const BrickwallAnsatz& a);

// Trains the angles to maximize Re<phi(theta)|target>; theta0 is not touched.
TrainReport train_overlap(BrickwallAnsatz& a, const Vector& target,
                          const OptimizerConfig& cfg);

// -- problems ---------------------------------------------------------------

enum class Scheme { euler, rk4 };

// weight * O acting on field `src`, as one right-hand-side contribution.
struct OperatorTerm {
    CompiledOperator op;
    Matrix dense;  // same stencil, built densely for the classical oracle
    double coefficient = 1.0;
    int src = 0;
};

struct SourceTerm {
    Vector shape;            // spatial profile (unit basis vector at the center)
    double amplitude = 0.0;  // time dependence: amplitude * sin(omega * t)
    double omega = 0.0;
};

struct Problem {
    std::string name;
    int n = 0;
    double dx = 0.0, dt = 0.0;
    Scheme scheme = Scheme::euler;
    std::vector<std::string> fields;

    // Euler stepping, single field: phi' = L phi (+ phi .* nonlinear_op phi),
    // where L is the product of the step_chain factors (applied left to
    // right). Identity-dominated step operators factor exactly into
    // shift-plus-identity terms that each compile far more accurately than
    // the operator does as a whole; step_fit_error is the relative squared
    // Frobenius error of the composed chain against the step operator.
    std::vector<CompiledOperator> step_chain;
    double step_fit_error = 0.0;
    std::optional<CompiledOperator> nonlinear_op;
    Matrix dense_step, dense_nonlinear;

    // RK4: d(field f)/dt = sum of rhs[f] terms + optional source
    std::vector<std::vector<OperatorTerm>> rhs;
    std::vector<std::optional<SourceTerm>> source;

    std::vector<Vector> initial;  // dense initial fields
    int ansatz_layers = 10;
    Entangler entangler = Entangler::cnot;
};

// Compile settings shared by the problem factories; cache_dir may be empty.
struct CompileConfig {
    int Z = 16;
    FitOptions fit;
    std::string cache_dir;
};

Problem make_advection_diffusion(int n, const CompileConfig& cc, double nu = 0.1,
                                 double c_adv = 20.0);
Problem make_burgers(int n, const CompileConfig& cc, double nu = 0.001);
Problem make_linear_euler(int n, const CompileConfig& cc);

// -- time stepping ----------------------------------------------------------

struct StepMetrics {
    double t = 0.0;
    int step = 0;
    std::vector<double> theta0;
    double alpha_succ = 1.0;
    double phi = 0.0;
    double sigma_z = 1.0;
    double fidelity = 1.0;          // worst sub-optimization fidelity of the step
    double rel_error = -1.0;        // vs classical oracle, -1 when not computed
};

struct SolverState {
    std::vector<BrickwallAnsatz> fields;  // theta and theta0 per field
    double t = 0.0;
    int step = 0;
    StepMetrics metrics;
};

struct StepFailure : NumericalError {
    StepFailure(const std::string& what, int sub_step_, double best_fidelity_)
        : NumericalError(what), sub_step(sub_step_), best_fidelity(best_fidelity_) {}
    int sub_step = 0;
    double best_fidelity = 0.0;
};

// Trains the initial-condition ansatz for every field (zero fields get
// theta0 = 0 and untouched angles).
SolverState init_state(const Problem& p, const OptimizerConfig& cfg);

SolverState euler_step(const Problem& p, const SolverState& s, const OptimizerConfig& cfg);
SolverState rk4_step(const Problem& p, const SolverState& s, const OptimizerConfig& cfg);

// Dense field per state: theta0 * ansatz amplitudes.
Vector state_field(const SolverState& s, int field);

// Dense classical trajectory with identical stencils/boundaries/source;
// result[j][f] is field f after j steps (j = 0 is the initial condition).
std::vector<std::vector<Vector>> classical_reference(const Problem& p, int steps);

// 1 - |<a,b>|^2 / (||a||^2 ||b||^2).
double relative_error(const Vector& qds_field, const Vector& classical_field);

// -- checkpointing ----------------------------------------------------------

std::string solver_state_dump(const SolverState& s);
SolverState solver_state_load(const std::string& text);

}  // namespace qpde

#endif
