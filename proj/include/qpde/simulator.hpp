// Exact statevector simulation of the solver's circuits: brickwall ansatz
// preparation, compiled-operator application with an auxiliary register and
// postselection, the adapted Hadamard test (standard and two-ancilla nonlinear
// form), shot sampling, and gradients of circuit costs.
#ifndef QPDE_SIMULATOR_HPP
#define QPDE_SIMULATOR_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "qpde/compile.hpp"
#include "qpde/linalg.hpp"

namespace qpde {

// Qubit order, most significant first: global ancilla (if present), weight
// ancilla (if present), aux register, then n_copy system registers. Within
// each register the first qubit is the most significant bit, matching the
// big-endian grid convention of the tensor-network code.
struct RegisterLayout {
    int n_system = 0;
    int n_aux = 0;
    bool has_ancilla = false;
    bool has_weight = false;
    int n_copy = 1;

    int total() const {
        return (has_ancilla ? 1 : 0) + (has_weight ? 1 : 0) + n_aux + n_copy * n_system;
    }
    int ancilla() const { return 0; }
    int weight() const { return has_ancilla ? 1 : 0; }
    int aux(int k) const { return (has_ancilla ? 1 : 0) + (has_weight ? 1 : 0) + k; }
    int system(int site, int copy = 0) const {  // site is 0-based within the register
        return (has_ancilla ? 1 : 0) + (has_weight ? 1 : 0) + n_aux + copy * n_system + site;
    }
};

struct StateVector {
    RegisterLayout layout;
    Vector amps;

    explicit StateVector(const RegisterLayout& l) : layout(l) {
        amps = Vector::Zero(Eigen::Index(1) << l.total());
        amps(0) = 1.0;
    }
};

enum class Entangler { cnot, cz };

struct BrickwallAnsatz {
    int n = 0;
    int layers = 0;
    Entangler entangler = Entangler::cnot;
    RealVector theta;    // 2 angles per 2-qubit block
    double theta0 = 1.0; // norm scalar, kept outside the normalized state
};

// Blocks per layer alternate between floor(n/2) (even layers, pairs starting
// at qubit 0) and floor((n-1)/2) (odd layers, pairs starting at qubit 1).
int ansatz_param_count(int n, int layers);

// A control condition: the gate acts only where qubit `q` has bit `value`.
struct Control {
    int q = 0;
    int value = 1;
};

// Applies a dense 2^k x 2^k unitary to the listed qubits (first listed qubit
// = most significant bit of the gate index), restricted to basis states
// satisfying all controls. Serial reference implementation.
void apply_gate_serial(StateVector& s, const std::vector<int>& qubits, const Matrix& u,
                       const std::vector<Control>& controls = {});

// Same contract, parallelized over the untouched index range.
void apply_gate(StateVector& s, const std::vector<int>& qubits, const Matrix& u,
                const std::vector<Control>& controls = {});

// RY(t) = [[cos t/2, -sin t/2], [sin t/2, cos t/2]].
Matrix ry_gate(double t);

// Prepares the ansatz on system copy `copy`, optionally under controls.
// Starting from |0..0> on that register this yields a normalized state with
// real amplitudes.
void apply_ansatz(StateVector& s, const BrickwallAnsatz& a, int copy = 0,
                  const std::vector<Control>& controls = {});

StateVector prepare_ansatz(const BrickwallAnsatz& a);

// Applies the compiled operator's gates in site order n..1, each acting on
// (aux register, system qubit), optionally controlled on a single qubit.
void apply_compiled(StateVector& s, const CompiledOperator& comp,
                    std::optional<int> controlled_on = {}, int copy = 0);

// Zeroes every amplitude whose listed qubits are not all |0>, returning the
// squared norm kept. The state is left unnormalized.
double project_zero(StateVector& s, const std::vector<int>& qubits);

// Projects the aux register to |0...0>.
double project_aux_zero(StateVector& s);

// Dense n-system-qubit vector of a state whose non-system registers are all
// |0> (throws if any amplitude lives outside that slice).
Vector extract_system(const StateVector& s, int copy = 0);

struct TestResult {
    double sigma_z = 0.0;
    double alpha_succ = 0.0;
};

// Adapted Hadamard test: ancilla |1> -> H, bra prepared on the anc=0 branch,
// ket and the operator chain on the anc=1 branch, aux postselected, final RY
// on the ancilla (rotation sign fixed by the dense two-branch oracle).
// Returns the exact ancilla <sigma_z> conditioned on postselection success
// and alpha_succ = ||P U_chain |ket>||^2.
TestResult hadamard_test(const BrickwallAnsatz& bra,
                         const std::vector<CompiledOperator>& op_chain,
                         const BrickwallAnsatz& ket, double phi);

// Unnormalized projected branch P U_chain |ket> as a dense system vector
// (the quantity whose overlap with the bra the Hadamard test estimates).
Vector branch_vector(const std::vector<CompiledOperator>& op_chain, const BrickwallAnsatz& ket);

// Two-ancilla form combining a linear term with a pointwise product: the
// weight ancilla is rotated by phi_u, the linear operator chain (aux
// postselected between factors) acts on the weight=0 branch, a second
// register copy + CNOT ladder realizes
// u .* (nonlin u) on the weight=1 branch, and a final Hadamard on the weight
// ancilla recombines them with weights cos(phi_u/2), sin(phi_u/2) (and an
// overall 1/sqrt(2) absorbed downstream).
TestResult nonlinear_test(const BrickwallAnsatz& bra,
                          const std::vector<CompiledOperator>& lin_chain,
                          const CompiledOperator& nonlin, const BrickwallAnsatz& ket,
                          double phi, double phi_u);

// Branch vector of the nonlinear circuit:
// (cos(phi_u/2) (1/c_lin) L u + sin(phi_u/2) u .* ((1/c_nl) N u)) / sqrt(2),
// where L is the product of the chain factors and c_lin the product of their
// scales.
Vector nonlinear_branch_vector(const std::vector<CompiledOperator>& lin_chain,
                               const CompiledOperator& nonlin,
                               const BrickwallAnsatz& ket, double phi_u);

// Dense postselected block <aux 0| gates |aux 0> of a compiled operator,
// i.e. the isometric-MPO matrix Q itself (multiply by c_mpo to approximate
// the compiled target). Intended for diagnostics and tests, n <= 12.
Matrix compiled_to_dense(const CompiledOperator& comp);

// Binomial sampling of the ancilla outcome among postselection survivors.
struct SampledResult {
    double sigma_z_hat = 0.0;
    std::int64_t kept_shots = 0;
};
SampledResult sampled_sigma_z(const TestResult& exact, std::int64_t shots, unsigned seed);

using CostFn = std::function<double(const RealVector&)>;

// Exact gradient via +-pi/2 parameter shifts at angular frequency
// `frequency` (1/2 for costs linear in a single RY-ansatz amplitude).
RealVector parameter_shift_grad(const CostFn& cost, const RealVector& theta,
                                double frequency = 0.5);

// Two-evaluation simultaneous-perturbation estimate with Rademacher
// directions.
RealVector spsa_grad(const CostFn& cost, const RealVector& theta, double c_shift,
                     unsigned seed);

}  // namespace qpde

#endif
