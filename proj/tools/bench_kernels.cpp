// Compares the serial reference gate kernel against the parallel one on
// growing register sizes and verifies they agree bitwise-deterministically.
#include <chrono>
#include <cstdio>
#include <random>

#include "qpde/simulator.hpp"

using namespace qpde;

namespace {

double time_apply(StateVector& s, const std::vector<int>& qubits, const Matrix& g,
                  bool parallel, int reps) {
    const auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) {
        if (parallel)
            apply_gate(s, qubits, g);
        else
            apply_gate_serial(s, qubits, g);
    }
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / reps;
}

}  // namespace

int main(int argc, char** argv) {
    const int n_max = argc > 1 ? std::atoi(argv[1]) : 22;
    const int reps = argc > 2 ? std::atoi(argv[2]) : 5;
    std::mt19937 rng(1);
    std::normal_distribution<double> dist;
    Matrix g = qr_factor([&] {
        Matrix m(8, 8);
        for (auto& x : m.reshaped()) x = Complex(dist(rng), dist(rng));
        return m;
    }()).q;

    std::printf("%4s %12s %12s %8s %10s\n", "n", "serial_s", "parallel_s", "speedup",
                "agreement");
    for (int n = 12; n <= n_max; n += 2) {
        RegisterLayout l;
        l.n_system = n;
        StateVector a(l);
        for (Eigen::Index i = 0; i < a.amps.size(); ++i)
            a.amps(i) = Complex(dist(rng), dist(rng));
        a.amps /= a.amps.norm();
        StateVector b = a;
        const std::vector<int> qubits{1, n / 2, n - 2};

        const double ts = time_apply(a, qubits, g, false, reps);
        const double tp = time_apply(b, qubits, g, true, reps);
        // both states saw the same gate sequence; results must match exactly
        const double diff = (a.amps - b.amps).norm();
        std::printf("%4d %12.6f %12.6f %8.2f %10.1e\n", n, ts, tp, ts / tp, diff);
        if (diff != 0.0) {
            std::fprintf(stderr, "kernel mismatch at n=%d\n", n);
            return 1;
        }
    }
    return 0;
}
