#include <random>

#include "doctest.h"
#include "qpde/mpo.hpp"
#include "qpde/simulator.hpp"

using namespace qpde;

namespace {

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

RealVector random_angles(int count, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(-M_PI, M_PI);
    RealVector t(count);
    for (int i = 0; i < count; ++i) t(i) = dist(rng);
    return t;
}

BrickwallAnsatz make_ansatz(int n, int layers, unsigned seed) {
    BrickwallAnsatz a;
    a.n = n;
    a.layers = layers;
    a.theta = random_angles(ansatz_param_count(n, layers), seed);
    return a;
}

CompiledOperator compiled_cnot() {
    FitOptions o;
    o.warm_start = true;
    o.tol = 1e-13;
    o.max_iters = 200;
    return raise_to_unitaries(riemannian_fit(cnot_mpo(), 2, o));
}

CompiledOperator compiled_identity(int n) {
    FitOptions o;
    o.warm_start = true;
    o.tol = 1e-13;
    o.max_iters = 50;
    return raise_to_unitaries(riemannian_fit(identity_mpo(n), 2, o));
}

}  // namespace

TEST_CASE("brickwall parameter counts alternate full and offset layers") {
    CHECK(ansatz_param_count(6, 14) == 70);
    CHECK(ansatz_param_count(6, 10) == 50);
    CHECK(ansatz_param_count(2, 1) == 2);
    CHECK(ansatz_param_count(3, 2) == 4);
}

TEST_CASE("zero angles prepare the all-zero state") {
    BrickwallAnsatz a;
    a.n = 4;
    a.layers = 3;
    a.theta = RealVector::Zero(ansatz_param_count(4, 3));
    StateVector s = prepare_ansatz(a);
    CHECK(std::abs(s.amps(0) - 1.0) < 1e-15);
    CHECK(s.amps.tail(15).norm() < 1e-15);
}

TEST_CASE("two-qubit half-angle block gives the uniform superposition") {
    BrickwallAnsatz a;
    a.n = 2;
    a.layers = 1;
    a.theta = RealVector::Constant(2, M_PI / 2);
    StateVector s = prepare_ansatz(a);
    for (int i = 0; i < 4; ++i) CHECK(s.amps(i).real() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ansatz preparation matches the dense gate product") {
    BrickwallAnsatz a = make_ansatz(3, 2, 21);
    StateVector s = prepare_ansatz(a);
    CHECK(s.amps.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s.amps.imag().norm() < 1e-12);  // RY + CNOT keeps amplitudes real

    Matrix i2 = Matrix::Identity(2, 2);
    Matrix cnot(4, 4);
    cnot.setZero();
    cnot(0, 0) = cnot(1, 1) = cnot(3, 2) = cnot(2, 3) = 1;
    Vector psi = Vector::Zero(8);
    psi(0) = 1;
    psi = kron(kron(ry_gate(a.theta(0)), i2), i2) * psi;
    psi = kron(kron(i2, ry_gate(a.theta(1))), i2) * psi;
    psi = kron(cnot, i2) * psi;
    psi = kron(kron(i2, ry_gate(a.theta(2))), i2) * psi;
    psi = kron(kron(i2, i2), ry_gate(a.theta(3))) * psi;
    psi = kron(i2, cnot) * psi;
    CHECK((s.amps - psi).norm() < 1e-13);
}

TEST_CASE("serial and parallel gate kernels agree") {
    RegisterLayout l;
    l.n_system = 6;
    StateVector a(l), b(l);
    std::mt19937 rng(5);
    std::normal_distribution<double> dist;
    for (Eigen::Index i = 0; i < a.amps.size(); ++i) a.amps(i) = Complex(dist(rng), dist(rng));
    a.amps /= a.amps.norm();
    b.amps = a.amps;
    Matrix g = qr_factor(Matrix::Random(8, 8)).q;
    apply_gate(a, {1, 3, 4}, g, {{0, 1}});
    apply_gate_serial(b, {1, 3, 4}, g, {{0, 1}});
    CHECK((a.amps - b.amps).norm() == 0.0);
}

TEST_CASE("projection keeps the stated probability mass") {
    RegisterLayout l;
    l.n_system = 1;
    l.n_aux = 1;
    StateVector s(l);
    SUBCASE("aux already zero") {
        CHECK(project_aux_zero(s) == doctest::Approx(1.0));
        CHECK(std::abs(s.amps(0) - 1.0) < 1e-15);
    }
    SUBCASE("aux in one errors out") {
        Matrix x(2, 2);
        x << 0, 1, 1, 0;
        apply_gate(s, {l.aux(0)}, x);
        CHECK_THROWS_AS(project_aux_zero(s), NumericalError);
    }
    SUBCASE("equal superposition keeps half") {
        Matrix h(2, 2);
        const double r = 1 / std::sqrt(2.0);
        h << r, r, r, -r;
        apply_gate(s, {l.aux(0)}, h);
        CHECK(project_aux_zero(s) == doctest::Approx(0.5).epsilon(1e-12));
    }
}

TEST_CASE("identity compile leaves states unchanged, controls gate it off") {
    CompiledOperator cid = compiled_identity(3);
    RegisterLayout l;
    l.n_system = 3;
    l.n_aux = cid.n_aux;
    l.has_ancilla = true;
    StateVector s(l);
    BrickwallAnsatz a = make_ansatz(3, 2, 31);
    apply_ansatz(s, a);
    Vector before = s.amps;
    SUBCASE("uncontrolled application acts as identity after projection") {
        apply_compiled(s, cid);
        project_aux_zero(s);
        CHECK((s.amps - before).norm() < 1e-10);
    }
    SUBCASE("control on a zero ancilla disables the operator") {
        apply_compiled(s, cid, l.ancilla());
        CHECK((s.amps - before).norm() < 1e-14);
    }
}

TEST_CASE("compiled derivative action on a basis state matches the dense matrix") {
    // uses the CNOT compile as a nontrivial exactly-compilable operator
    CompiledOperator c = compiled_cnot();
    BrickwallAnsatz k = make_ansatz(2, 2, 41);
    Vector b = branch_vector({c}, k);
    Vector u = prepare_ansatz(k).amps;
    Vector want = mpo_to_dense(cnot_mpo()) * u / c.c_mpo;
    CHECK((b - want).norm() < 1e-12);
}

TEST_CASE("dense reconstruction of a compiled operator matches its target") {
    CompiledOperator c = compiled_cnot();
    CHECK((c.c_mpo * compiled_to_dense(c) - mpo_to_dense(cnot_mpo())).norm() < 1e-10);
    CompiledOperator cid = compiled_identity(3);
    CHECK((cid.c_mpo * compiled_to_dense(cid) - Matrix::Identity(8, 8)).norm() < 1e-10);
}

TEST_CASE("operator chains compose through postselected aux registers") {
    // CNOT twice is the identity; the chain must square the compiled operator
    CompiledOperator c = compiled_cnot();
    BrickwallAnsatz k = make_ansatz(2, 2, 43);
    Vector b = branch_vector({c, c}, k);
    Vector u = prepare_ansatz(k).amps;
    CHECK((b - u / (c.c_mpo * c.c_mpo)).norm() < 1e-10);
}

TEST_CASE("hadamard test trivial points") {
    BrickwallAnsatz a = make_ansatz(2, 2, 51);
    SUBCASE("identity operator and equal states give sigma_z = 1") {
        TestResult r = hadamard_test(a, {}, a, M_PI / 2);
        CHECK(r.sigma_z == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(r.alpha_succ == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("orthogonal states give sigma_z = 0") {
        BrickwallAnsatz bra;
        bra.n = 2;
        bra.layers = 1;
        bra.theta = RealVector::Zero(2);
        bra.theta(0) = M_PI;  // |10> -> CNOT -> |11>, orthogonal to |00>
        BrickwallAnsatz ket;
        ket.n = 2;
        ket.layers = 1;
        ket.theta = RealVector::Zero(2);
        TestResult r = hadamard_test(bra, {}, ket, M_PI / 2);
        CHECK(std::abs(r.sigma_z) < 1e-12);
    }
}

TEST_CASE("hadamard test matches the dense two-branch formula") {
    CompiledOperator c = compiled_cnot();
    BrickwallAnsatz bra = make_ansatz(2, 2, 61), ket = make_ansatz(2, 2, 62);
    Vector b = branch_vector({c}, ket);
    Vector a = prepare_ansatz(bra).amps;
    const double alpha = b.squaredNorm();
    const double re = (a.adjoint() * b)(0).real();
    for (double phi : {0.3, 0.9, M_PI / 2}) {
        TestResult r = hadamard_test(bra, {c}, ket, phi);
        const double want =
            (2 * std::sin(phi) * re - std::cos(phi) * (alpha - 1)) / (1 + alpha);
        CHECK(r.sigma_z == doctest::Approx(want).epsilon(1e-12));
        CHECK(r.alpha_succ == doctest::Approx(alpha).epsilon(1e-12));
    }
}

TEST_CASE("nonlinear branch realizes the weighted pointwise product") {
    CompiledOperator cid = compiled_identity(2);
    BrickwallAnsatz k = make_ansatz(2, 2, 71);
    const double phi_u = 0.8;
    Vector b = nonlinear_branch_vector({cid}, cid, k, phi_u);
    Vector u = prepare_ansatz(k).amps;
    Vector want = (std::cos(phi_u / 2) * u / cid.c_mpo +
                   std::sin(phi_u / 2) * u.cwiseProduct(u) / cid.c_mpo) /
                  std::sqrt(2.0);
    CHECK((b - want).norm() < 1e-12);
}

TEST_CASE("nonlinear test at zero weight matches the weighted linear branch") {
    CompiledOperator cid = compiled_identity(2);
    BrickwallAnsatz ket = make_ansatz(2, 2, 81);
    BrickwallAnsatz bra = ket;
    bra.theta(0) += 0.4;
    TestResult r = nonlinear_test(bra, {cid}, cid, ket, 1.0, 0.0);
    Vector b = nonlinear_branch_vector({cid}, cid, ket, 0.0);
    Vector u = prepare_ansatz(ket).amps;
    CHECK((b - u / (cid.c_mpo * std::sqrt(2.0))).norm() < 1e-12);
    Vector a = prepare_ansatz(bra).amps;
    const double alpha = b.squaredNorm();
    const double re = (a.adjoint() * b)(0).real();
    const double want = (2 * std::sin(1.0) * re - std::cos(1.0) * (alpha - 1)) / (1 + alpha);
    CHECK(r.sigma_z == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("shot sampling is deterministic and concentrates") {
    TestResult exact;
    exact.sigma_z = 1.0;
    exact.alpha_succ = 0.7;
    SUBCASE("deterministic outcome stays exact") {
        SampledResult r = sampled_sigma_z(exact, 1000, 3);
        CHECK(r.sigma_z_hat == 1.0);
    }
    SUBCASE("fixed seed reproduces") {
        exact.sigma_z = 0.37;
        SampledResult a = sampled_sigma_z(exact, 5000, 11);
        SampledResult b = sampled_sigma_z(exact, 5000, 11);
        CHECK(a.sigma_z_hat == b.sigma_z_hat);
        CHECK(a.kept_shots == b.kept_shots);
    }
    SUBCASE("large shot counts land within 5 sigma") {
        exact.sigma_z = 0.37;
        const std::int64_t shots = 1000000;
        SampledResult r = sampled_sigma_z(exact, shots, 17);
        const double kept = static_cast<double>(r.kept_shots);
        const double sd = std::sqrt((1 - 0.37 * 0.37) / kept);
        CHECK(std::abs(r.sigma_z_hat - 0.37) < 5 * sd);
    }
}

TEST_CASE("parameter-shift gradients") {
    SUBCASE("constant cost gives a zero gradient") {
        auto cost = [](const RealVector&) { return 2.5; };
        RealVector g = parameter_shift_grad(cost, RealVector::Zero(4));
        CHECK(g.norm() == doctest::Approx(0.0));
    }
    SUBCASE("single rotation matches the analytic derivative") {
        // overlap of RY(t)|0> with |0> is cos(t/2); derivative -sin(t/2)/2
        auto cost = [](const RealVector& t) { return std::cos(t(0) / 2); };
        for (double t0 : {0.2, 1.4, -2.1}) {
            RealVector t(1);
            t(0) = t0;
            RealVector g = parameter_shift_grad(cost, t);
            CHECK(g(0) == doctest::Approx(-0.5 * std::sin(t0 / 2)).epsilon(1e-12));
        }
    }
    SUBCASE("random 6-qubit overlap matches finite differences") {
        BrickwallAnsatz a = make_ansatz(6, 3, 91);
        std::mt19937 rng(13);
        std::normal_distribution<double> dist;
        Vector b(64);
        for (int i = 0; i < 64; ++i) b(i) = dist(rng);
        auto cost = [&](const RealVector& th) {
            BrickwallAnsatz c = a;
            c.theta = th;
            return (prepare_ansatz(c).amps.adjoint() * b)(0).real();
        };
        RealVector g = parameter_shift_grad(cost, a.theta);
        const double h = 1e-5;
        for (Eigen::Index i = 0; i < a.theta.size(); i += 7) {
            RealVector t = a.theta;
            t(i) += h;
            const double cp = cost(t);
            t(i) -= 2 * h;
            const double cm = cost(t);
            CHECK(g(i) == doctest::Approx((cp - cm) / (2 * h)).epsilon(1e-6));
        }
    }
}

TEST_CASE("spsa estimates are deterministic and unbiased on a quadratic") {
    auto cost = [](const RealVector& t) { return t.squaredNorm(); };
    RealVector theta(3);
    theta << 0.4, -0.9, 1.3;
    RealVector a = spsa_grad(cost, theta, 0.01, 7);
    RealVector b = spsa_grad(cost, theta, 0.01, 7);
    CHECK((a - b).norm() == 0.0);
    RealVector acc = RealVector::Zero(3);
    const int reps = 10000;
    for (int r = 0; r < reps; ++r) acc += spsa_grad(cost, theta, 0.01, 100 + r);
    acc /= reps;
    CHECK((acc - 2 * theta).norm() < 0.02 * (2 * theta).norm());
}
