#include "qpde/simulator.hpp"

#include <cmath>
#include <random>

namespace qpde {

namespace {

std::int64_t bit_mask(const RegisterLayout& l, int q) {
    return std::int64_t(1) << (l.total() - 1 - q);
}

Matrix h_gate() {
    Matrix h(2, 2);
    const double s = 1.0 / std::sqrt(2.0);
    h << s, s, s, -s;
    return h;
}

Matrix x_gate() {
    Matrix x(2, 2);
    x << 0, 1, 1, 0;
    return x;
}

struct GatePlan {
    std::int64_t gmask = 0;           // union of gate-qubit bits
    std::int64_t cmask = 0;           // union of control-qubit bits
    std::int64_t cvalue = 0;          // required bit pattern under cmask
    std::vector<std::int64_t> offsets;  // gate index -> amplitude offset
};

GatePlan plan_gate(const StateVector& s, const std::vector<int>& qubits,
                   const Matrix& u, const std::vector<Control>& controls) {
    const int t = s.layout.total();
    const int k = static_cast<int>(qubits.size());
    if (u.rows() != u.cols() || u.rows() != (Eigen::Index(1) << k))
        throw std::invalid_argument("apply_gate: matrix size does not match qubit count");
    GatePlan p;
    for (int q : qubits) {
        if (q < 0 || q >= t) throw std::invalid_argument("apply_gate: qubit out of range");
        const std::int64_t m = bit_mask(s.layout, q);
        if (p.gmask & m) throw std::invalid_argument("apply_gate: repeated qubit");
        p.gmask |= m;
    }
    for (const Control& c : controls) {
        const std::int64_t m = bit_mask(s.layout, c.q);
        if ((p.gmask | p.cmask) & m)
            throw std::invalid_argument("apply_gate: control overlaps gate or control qubit");
        p.cmask |= m;
        if (c.value) p.cvalue |= m;
    }
    p.offsets.resize(std::size_t(1) << k);
    for (std::size_t g = 0; g < p.offsets.size(); ++g) {
        std::int64_t off = 0;
        for (int j = 0; j < k; ++j)
            if ((g >> (k - 1 - j)) & 1) off |= bit_mask(s.layout, qubits[j]);
        p.offsets[g] = off;
    }
    return p;
}

template <bool Parallel>
void apply_gate_impl(StateVector& s, const std::vector<int>& qubits, const Matrix& u,
                     const std::vector<Control>& controls) {
    const GatePlan p = plan_gate(s, qubits, u, controls);
    const std::int64_t dim = s.amps.size();
    const int k = static_cast<int>(qubits.size());
    const std::int64_t sub = std::int64_t(1) << k;
    Complex* a = s.amps.data();
#ifdef QPDE_HAVE_OPENMP
#pragma omp parallel for schedule(static) if (Parallel && dim >= (1 << 12))
#endif
    for (std::int64_t i = 0; i < dim; ++i) {
        if (i & p.gmask) continue;                    // not a base index
        if ((i & p.cmask) != p.cvalue) continue;      // controls unsatisfied
        Vector v(sub);
        for (std::int64_t g = 0; g < sub; ++g) v(g) = a[i | p.offsets[g]];
        Vector w = u * v;
        for (std::int64_t g = 0; g < sub; ++g) a[i | p.offsets[g]] = w(g);
    }
}

}  // namespace

int ansatz_param_count(int n, int layers) {
    if (n < 2 || layers < 0) throw std::invalid_argument("ansatz_param_count: bad shape");
    int blocks = 0;
    for (int l = 0; l < layers; ++l) blocks += (l % 2 == 0) ? n / 2 : (n - 1) / 2;
    return 2 * blocks;
}

void apply_gate_serial(StateVector& s, const std::vector<int>& qubits, const Matrix& u,
                       const std::vector<Control>& controls) {
    apply_gate_impl<false>(s, qubits, u, controls);
}

void apply_gate(StateVector& s, const std::vector<int>& qubits, const Matrix& u,
                const std::vector<Control>& controls) {
    apply_gate_impl<true>(s, qubits, u, controls);
}

Matrix ry_gate(double t) {
    Matrix m(2, 2);
    m << std::cos(t / 2), -std::sin(t / 2), std::sin(t / 2), std::cos(t / 2);
    return m;
}

void apply_ansatz(StateVector& s, const BrickwallAnsatz& a, int copy,
                  const std::vector<Control>& controls) {
    if (a.n != s.layout.n_system)
        throw std::invalid_argument("apply_ansatz: register size mismatch");
    if (a.theta.size() != ansatz_param_count(a.n, a.layers))
        throw std::invalid_argument("apply_ansatz: parameter count mismatch");
    Matrix ent(4, 4);
    ent.setZero();
    if (a.entangler == Entangler::cnot) {
        ent(0, 0) = ent(1, 1) = ent(3, 2) = ent(2, 3) = 1;
    } else {
        ent(0, 0) = ent(1, 1) = ent(2, 2) = 1;
        ent(3, 3) = -1;
    }
    Eigen::Index p = 0;
    for (int l = 0; l < a.layers; ++l) {
        const int start = l % 2;
        for (int q = start; q + 1 < a.n; q += 2) {
            const int q0 = s.layout.system(q, copy), q1 = s.layout.system(q + 1, copy);
            apply_gate(s, {q0}, ry_gate(a.theta(p++)), controls);
            apply_gate(s, {q1}, ry_gate(a.theta(p++)), controls);
            apply_gate(s, {q0, q1}, ent, controls);
        }
    }
}

StateVector prepare_ansatz(const BrickwallAnsatz& a) {
    RegisterLayout l;
    l.n_system = a.n;
    StateVector s(l);
    apply_ansatz(s, a);
    return s;
}

void apply_compiled(StateVector& s, const CompiledOperator& comp,
                    std::optional<int> controlled_on, int copy) {
    if (comp.n != s.layout.n_system)
        throw std::invalid_argument("apply_compiled: system size mismatch");
    if (comp.n_aux > s.layout.n_aux)
        throw std::invalid_argument("apply_compiled: aux register too small");
    std::vector<Control> controls;
    if (controlled_on) controls.push_back({*controlled_on, 1});
    // use the least significant aux qubits so the gate's z index matches
    const int off = s.layout.n_aux - comp.n_aux;
    std::vector<int> qubits(comp.n_aux + 1);
    for (int k = 0; k < comp.n_aux; ++k) qubits[k] = s.layout.aux(off + k);
    for (int j = comp.n - 1; j >= 0; --j) {  // site order n..1
        qubits[comp.n_aux] = s.layout.system(j, copy);
        apply_gate(s, qubits, comp.gates[j], controls);
    }
}

double project_zero(StateVector& s, const std::vector<int>& qubits) {
    std::int64_t mask = 0;
    for (int q : qubits) mask |= bit_mask(s.layout, q);
    double kept = 0.0;
    for (Eigen::Index i = 0; i < s.amps.size(); ++i) {
        if (i & mask)
            s.amps(i) = 0.0;
        else
            kept += std::norm(s.amps(i));
    }
    return kept;
}

double project_aux_zero(StateVector& s) {
    std::vector<int> aux;
    for (int k = 0; k < s.layout.n_aux; ++k) aux.push_back(s.layout.aux(k));
    const double kept = project_zero(s, aux);
    if (kept < 1e-14) throw NumericalError("project_aux_zero: all amplitudes discarded");
    return kept;
}

Vector extract_system(const StateVector& s, int copy) {
    const RegisterLayout& l = s.layout;
    std::int64_t other = 0;
    for (int q = 0; q < l.total(); ++q) other |= bit_mask(l, q);
    std::int64_t sys = 0;
    for (int j = 0; j < l.n_system; ++j) sys |= bit_mask(l, l.system(j, copy));
    other &= ~sys;

    const Eigen::Index dim = Eigen::Index(1) << l.n_system;
    Vector out = Vector::Zero(dim);
    const int shift = l.total() - (l.system(l.n_system - 1, copy) + 1);
    double outside = 0.0;
    for (Eigen::Index i = 0; i < s.amps.size(); ++i) {
        if (i & other) {
            outside += std::norm(s.amps(i));
            continue;
        }
        out((i >> shift) & (dim - 1)) += s.amps(i);
    }
    if (outside > 1e-20 * std::max(1.0, s.amps.squaredNorm()))
        throw NumericalError("extract_system: amplitude outside the system slice");
    return out;
}

namespace {

// Shared tail: aux (and extra listed registers) already projected; reads the
// ancilla statistics after the final adapted rotation.
TestResult finish_test(StateVector& s, double phi) {
    const std::int64_t amask = bit_mask(s.layout, s.layout.ancilla());
    double n1 = 0.0;
    for (Eigen::Index i = 0; i < s.amps.size(); ++i)
        if (i & amask) n1 += std::norm(s.amps(i));
    TestResult r;
    r.alpha_succ = 2.0 * n1;  // the anc=1 branch carries P U |ket> / sqrt(2)
    // final rotation; its sign is pinned by the dense two-branch oracle
    apply_gate(s, {s.layout.ancilla()}, ry_gate(phi));
    double p0 = 0.0, p1 = 0.0;
    for (Eigen::Index i = 0; i < s.amps.size(); ++i) {
        if (i & amask)
            p1 += std::norm(s.amps(i));
        else
            p0 += std::norm(s.amps(i));
    }
    if (p0 + p1 < 1e-14) throw NumericalError("hadamard_test: postselection discarded everything");
    r.sigma_z = (p0 - p1) / (p0 + p1);
    return r;
}

int chain_aux_width(const std::vector<CompiledOperator>& ops) {
    int w = 0;
    for (const auto& c : ops) w = std::max(w, c.n_aux);
    return w;
}

}  // namespace

TestResult hadamard_test(const BrickwallAnsatz& bra,
                         const std::vector<CompiledOperator>& op_chain,
                         const BrickwallAnsatz& ket, double phi) {
    if (!(phi > 0.0 && phi <= M_PI / 2 + 1e-12))
        throw std::invalid_argument("hadamard_test: phi out of (0, pi/2]");
    RegisterLayout l;
    l.n_system = ket.n;
    l.n_aux = chain_aux_width(op_chain);
    l.has_ancilla = true;
    StateVector s(l);
    const int anc = l.ancilla();
    apply_gate(s, {anc}, x_gate());
    apply_gate(s, {anc}, h_gate());
    apply_ansatz(s, bra, 0, {{anc, 0}});
    apply_ansatz(s, ket, 0, {{anc, 1}});
    for (const auto& op : op_chain) {
        apply_compiled(s, op, anc);
        project_aux_zero(s);
    }
    return finish_test(s, phi);
}

Vector branch_vector(const std::vector<CompiledOperator>& op_chain, const BrickwallAnsatz& ket) {
    RegisterLayout l;
    l.n_system = ket.n;
    l.n_aux = chain_aux_width(op_chain);
    StateVector s(l);
    apply_ansatz(s, ket);
    for (const auto& op : op_chain) {
        apply_compiled(s, op);
        project_aux_zero(s);
    }
    return extract_system(s);
}

namespace {

// Builds the weighted linear/pointwise-product branch on the anc=1 slice
// (or unconditionally when anc < 0). Leaves weight, copy 1 and aux projected.
void build_nonlinear_branch(StateVector& s, const std::vector<CompiledOperator>& lin_chain,
                            const CompiledOperator& nonlin, const BrickwallAnsatz& ket,
                            double phi_u, int anc) {
    std::vector<Control> on, w0, w1;
    if (anc >= 0) on.push_back({anc, 1});
    const int wq = s.layout.weight();
    w0 = on;
    w0.push_back({wq, 0});
    w1 = on;
    w1.push_back({wq, 1});

    apply_ansatz(s, ket, 0, on);
    apply_gate(s, {wq}, ry_gate(phi_u), on);
    // weight=0 branch: linear operator chain on copy 0, aux postselected
    // between factors (the other branches keep aux = |0> and are untouched)
    for (const CompiledOperator& lin : lin_chain) {
        const int off = s.layout.n_aux - lin.n_aux;
        std::vector<int> qubits(lin.n_aux + 1);
        for (int k = 0; k < lin.n_aux; ++k) qubits[k] = s.layout.aux(off + k);
        for (int j = lin.n - 1; j >= 0; --j) {
            qubits[lin.n_aux] = s.layout.system(j, 0);
            apply_gate(s, qubits, lin.gates[j], w0);
        }
        project_aux_zero(s);
    }
    // weight=1 branch: second copy carries (1/c) N u, then the CNOT ladder
    // correlates the copies so the surviving slice holds the pointwise product
    apply_ansatz(s, ket, 1, w1);
    {
        const int off = s.layout.n_aux - nonlin.n_aux;
        std::vector<int> qubits(nonlin.n_aux + 1);
        for (int k = 0; k < nonlin.n_aux; ++k) qubits[k] = s.layout.aux(off + k);
        for (int j = nonlin.n - 1; j >= 0; --j) {
            qubits[nonlin.n_aux] = s.layout.system(j, 1);
            apply_gate(s, qubits, nonlin.gates[j], w1);
        }
    }
    Matrix cnot(4, 4);
    cnot.setZero();
    cnot(0, 0) = cnot(1, 1) = cnot(3, 2) = cnot(2, 3) = 1;
    for (int j = 0; j < s.layout.n_system; ++j)
        apply_gate(s, {s.layout.system(j, 0), s.layout.system(j, 1)}, cnot, w1);
    // recombine the weight branches; the 1/sqrt(2) this costs is restored by
    // the norm update downstream
    apply_gate(s, {wq}, h_gate(), on);

    std::vector<int> post{wq};
    for (int k = 0; k < s.layout.n_aux; ++k) post.push_back(s.layout.aux(k));
    for (int j = 0; j < s.layout.n_system; ++j) post.push_back(s.layout.system(j, 1));
    if (project_zero(s, post) < 1e-16)
        throw NumericalError("nonlinear branch: postselection discarded everything");
}

}  // namespace

namespace {
int nonlinear_aux_width(const std::vector<CompiledOperator>& lin_chain,
                        const CompiledOperator& nonlin) {
    int w = nonlin.n_aux;
    for (const auto& op : lin_chain) w = std::max(w, op.n_aux);
    return w;
}
}  // namespace

TestResult nonlinear_test(const BrickwallAnsatz& bra,
                          const std::vector<CompiledOperator>& lin_chain,
                          const CompiledOperator& nonlin, const BrickwallAnsatz& ket,
                          double phi, double phi_u) {
    if (!(phi > 0.0 && phi <= M_PI / 2 + 1e-12))
        throw std::invalid_argument("nonlinear_test: phi out of (0, pi/2]");
    RegisterLayout l;
    l.n_system = ket.n;
    l.n_aux = nonlinear_aux_width(lin_chain, nonlin);
    l.has_ancilla = true;
    l.has_weight = true;
    l.n_copy = 2;
    StateVector s(l);
    const int anc = l.ancilla();
    apply_gate(s, {anc}, x_gate());
    apply_gate(s, {anc}, h_gate());
    apply_ansatz(s, bra, 0, {{anc, 0}});
    build_nonlinear_branch(s, lin_chain, nonlin, ket, phi_u, anc);
    return finish_test(s, phi);
}

Vector nonlinear_branch_vector(const std::vector<CompiledOperator>& lin_chain,
                               const CompiledOperator& nonlin,
                               const BrickwallAnsatz& ket, double phi_u) {
    RegisterLayout l;
    l.n_system = ket.n;
    l.n_aux = nonlinear_aux_width(lin_chain, nonlin);
    l.has_weight = true;
    l.n_copy = 2;
    StateVector s(l);
    build_nonlinear_branch(s, lin_chain, nonlin, ket, phi_u, -1);
    return extract_system(s);
}

Matrix compiled_to_dense(const CompiledOperator& comp) {
    if (comp.n > 12) throw std::invalid_argument("compiled_to_dense: n too large");
    RegisterLayout l;
    l.n_system = comp.n;
    l.n_aux = comp.n_aux;
    const Eigen::Index N = Eigen::Index(1) << comp.n;
    Matrix q(N, N);
    for (Eigen::Index k = 0; k < N; ++k) {
        StateVector s(l);
        s.amps(0) = 0.0;
        s.amps(k) = 1.0;  // aux bits are the high bits and stay |0>
        apply_compiled(s, comp);
        std::vector<int> aux;
        for (int a = 0; a < l.n_aux; ++a) aux.push_back(l.aux(a));
        project_zero(s, aux);
        q.col(k) = extract_system(s);
    }
    return q;
}

SampledResult sampled_sigma_z(const TestResult& exact, std::int64_t shots, unsigned seed) {
    if (shots < 1) throw std::invalid_argument("sampled_sigma_z: shots must be >= 1");
    std::mt19937_64 rng(seed);
    const double p_keep = std::min(1.0, (1.0 + exact.alpha_succ) / 2.0);
    std::binomial_distribution<std::int64_t> keep_dist(shots, p_keep);
    const std::int64_t kept = keep_dist(rng);
    if (kept == 0) throw NumericalError("sampled_sigma_z: no shots survived postselection");
    const double p0 = std::min(1.0, std::max(0.0, (1.0 + exact.sigma_z) / 2.0));
    std::binomial_distribution<std::int64_t> up_dist(kept, p0);
    const std::int64_t n0 = up_dist(rng);
    SampledResult r;
    r.kept_shots = kept;
    r.sigma_z_hat = static_cast<double>(2 * n0 - kept) / static_cast<double>(kept);
    return r;
}

RealVector parameter_shift_grad(const CostFn& cost, const RealVector& theta, double frequency) {
    if (frequency <= 0) throw std::invalid_argument("parameter_shift_grad: frequency <= 0");
    const double s = M_PI / 2;
    const double denom = 2.0 * std::sin(frequency * s) / frequency;
    RealVector g(theta.size());
    RealVector t = theta;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        t(i) = theta(i) + s;
        const double cp = cost(t);
        t(i) = theta(i) - s;
        const double cm = cost(t);
        t(i) = theta(i);
        g(i) = (cp - cm) / denom;
    }
    return g;
}

RealVector spsa_grad(const CostFn& cost, const RealVector& theta, double c_shift,
                     unsigned seed) {
    if (c_shift <= 0) throw std::invalid_argument("spsa_grad: c_shift must be positive");
    std::mt19937 rng(seed);
    std::bernoulli_distribution coin(0.5);
    RealVector delta(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) delta(i) = coin(rng) ? 1.0 : -1.0;
    const double cp = cost(theta + c_shift * delta);
    const double cm = cost(theta - c_shift * delta);
    return ((cp - cm) / (2.0 * c_shift)) * delta;
}

}  // namespace qpde
