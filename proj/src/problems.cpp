#include <cmath>
#include <tuple>

#include "qpde/solver.hpp"

namespace qpde {

namespace {

// Independent dense stencil construction used for the classical oracle path.
Matrix dense_stencil(int n, const std::vector<int>& offsets,
                     const std::vector<double>& coeffs, Boundary boundary) {
    const Eigen::Index N = Eigen::Index(1) << n;
    Matrix a = Matrix::Zero(N, N);
    for (std::size_t k = 0; k < offsets.size(); ++k)
        for (Eigen::Index i = 0; i < N; ++i) {
            const Eigen::Index j = i + offsets[k];
            if (j >= 0 && j < N)
                a(i, j) += coeffs[k];
            else if (boundary == Boundary::periodic)
                a(i, ((j % N) + N) % N) += coeffs[k];
        }
    return a;
}

Mpo stencil_mpo(int n, const std::vector<int>& offsets, const std::vector<double>& coeffs,
                Boundary boundary) {
    StencilSpec spec{offsets, coeffs, boundary, 1.0};
    Mpo m = banded_toeplitz_mpo(spec, n);
    if (boundary == Boundary::periodic) m = apply_boundary_correction(m, boundary, spec);
    return mpo_compress(m, m.max_bond(), 1e-13);
}

Vector gauss_peak(int n, double dx, double center, double sigma) {
    const Eigen::Index N = Eigen::Index(1) << n;
    Vector v(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        const double x = i * dx;
        v(i) = std::exp(-(x - center) * (x - center) / sigma);
    }
    return v;
}

// Compile `target` and insist on `accept` accuracy (default: 20x the fit
// tolerance, floored at 1e-8).  The optimizer's parallel reductions make its
// trajectory run-to-run nondeterministic, so a single unlucky descent can
// miss the target by orders of magnitude; retrying from reseeded starts is
// cheap and makes problem construction reliable.  Each seed has its own
// cache entry, so a good result is reused deterministically once found.
CompiledOperator compile_term(const Mpo& target, const CompileConfig& cc, double accept = 0.0) {
    if (accept <= 0.0) accept = std::max(cc.fit.tol * 20, 1e-8);
    CompiledOperator best;
    for (int attempt = 0; attempt < 4; ++attempt) {
        CompileConfig c2 = cc;
        c2.fit.seed = cc.fit.seed + 7919u * static_cast<unsigned>(attempt);
        CompiledOperator op = compile_operator(target, c2.Z, c2.fit, c2.cache_dir);
        if (attempt == 0 || op.fit_error < best.fit_error) best = std::move(op);
        if (best.fit_error <= accept) return best;
    }
    throw NumericalError("problem setup: compiled operator misses the accuracy target");
}

// Identity-dominated circulant tridiagonals  beta I + ap S + am S^T  (S =
// cyclic shift towards lower index, i.e. ones on the superdiagonal) sit in a
// nearly flat cost valley and resist direct isometric fitting. Because
// circulants commute, the quadratic factors exactly into two shift-dominated
// operators:  k (S^T + a I)(S + b I)  with  k a = ap,  k b = am  and
// k (1 + a b) = beta, i.e. a solves  am a^2 - beta a + ap = 0 (small root,
// a ~ ap/beta). Shift-plus-small-identity targets fit orders of magnitude
// more accurately than the identity-dominated product does as a whole.
// Returns the chain in application order together with the relative squared
// Frobenius error of the composed chain against the full operator.
std::pair<std::vector<CompiledOperator>, double> compile_step_chain(
    int n, double beta, double ap, double am, const CompileConfig& cc) {
    Mpo target = mpo_add(mpo_scale(identity_mpo(n), beta),
                         mpo_add(mpo_scale(cyclic_shift_mpo(n, 1), ap),
                                 mpo_scale(cyclic_shift_mpo(n, -1), am)));
    target = mpo_compress(target, target.max_bond(), 1e-13);

    const double disc = beta * beta - 4 * ap * am;
    if (!(ap > 0.0) || !(am > 0.0) || !(beta > 0.0) || disc <= 0.0) {
        CompiledOperator whole = compile_term(target, cc);
        const double err = whole.fit_error;
        return {{std::move(whole)}, err};
    }

    const double a = (beta - std::sqrt(disc)) / (2 * am);
    const double b = a * am / ap;
    const double k = ap / a;

    CompileConfig fc = cc;  // factors converge deep; ask for the extra digits.
    // A modest sweep budget suffices: shift-dominated factors plateau early in
    // the alternating sweeps and the conjugate-gradient polish (4x this budget)
    // carries them below tolerance; larger budgets only burn time in the sweeps.
    fc.fit.tol = std::min(cc.fit.tol, 1e-11);
    fc.fit.max_iters = std::min(cc.fit.max_iters, 600);
    // Per-factor budget: the composed chain error is roughly the sum of the
    // factor errors, so each factor must land well below the step tolerance.
    const double factor_accept = std::max(cc.fit.tol / 2.5, 1e-11);
    std::vector<CompiledOperator> chain;
    chain.push_back(compile_term(
        mpo_add(mpo_scale(cyclic_shift_mpo(n, -1), k), mpo_scale(identity_mpo(n), k * a)),
        fc, factor_accept));
    chain.push_back(compile_term(
        mpo_add(cyclic_shift_mpo(n, 1), mpo_scale(identity_mpo(n), b)), fc, factor_accept));

    Matrix approx = Matrix::Identity(1 << n, 1 << n);
    double c_eff = 1.0;
    for (const auto& op : chain) {
        approx = compiled_to_dense(op) * approx;
        c_eff *= op.c_mpo;
    }
    const Matrix md = mpo_to_dense(target);
    const double err = (c_eff * approx - md).squaredNorm() / md.squaredNorm();
    if (err > std::max(cc.fit.tol * 20, 1e-8))
        throw NumericalError("problem setup: compiled chain misses the accuracy target");
    return {chain, err};
}

}  // namespace

Problem make_advection_diffusion(int n, const CompileConfig& cc, double nu, double c_adv) {
    Problem p;
    p.name = "advection_diffusion";
    p.n = n;
    p.dx = 2 * M_PI / std::pow(2.0, n);
    p.dt = 0.1 * nu * p.dx;
    p.scheme = Scheme::euler;
    p.fields = {"u"};
    p.ansatz_layers = 10;

    const double ddx = 1.0 / (p.dx * p.dx), bx = 1.0 / p.dx;
    // backward first derivative (upwind for c_adv > 0), central second
    std::vector<int> o1{-1, 0}, o2{-1, 0, 1};
    std::vector<double> c1{-bx, bx}, c2{ddx, -2 * ddx, ddx};
    // step operator I + dt nu D2 - dt c_adv D1 as a circulant tridiagonal
    const double a2 = p.dt * nu * ddx, ab = p.dt * c_adv * bx;
    std::tie(p.step_chain, p.step_fit_error) =
        compile_step_chain(n, 1.0 - 2 * a2 - ab, a2, a2 + ab, cc);
    p.dense_step = Matrix::Identity(1 << n, 1 << n) +
                   p.dt * nu * dense_stencil(n, o2, c2, Boundary::periodic) -
                   p.dt * c_adv * dense_stencil(n, o1, c1, Boundary::periodic);
    p.initial = {gauss_peak(n, p.dx, M_PI, 0.5)};
    p.rhs.resize(1);
    p.source.resize(1);
    return p;
}

Problem make_burgers(int n, const CompileConfig& cc, double nu) {
    Problem p;
    p.name = "burgers";
    p.n = n;
    p.dx = 2 * M_PI / std::pow(2.0, n);
    p.dt = 0.5 * p.dx;
    p.scheme = Scheme::euler;
    p.fields = {"u"};
    p.ansatz_layers = 10;

    const double ddx = 1.0 / (p.dx * p.dx), bx = 1.0 / p.dx;
    std::vector<int> o1{-1, 0}, o2{-1, 0, 1};
    std::vector<double> c1{-bx, bx}, c2{ddx, -2 * ddx, ddx};
    // linear step operator I + dt nu D2 as a circulant tridiagonal
    const double a2 = p.dt * nu * ddx;
    std::tie(p.step_chain, p.step_fit_error) =
        compile_step_chain(n, 1.0 - 2 * a2, a2, a2, cc);
    Mpo nl = mpo_scale(stencil_mpo(n, o1, c1, Boundary::periodic), -p.dt);
    p.nonlinear_op = compile_term(nl, cc, cc.fit.tol);
    p.dense_step = Matrix::Identity(1 << n, 1 << n) +
                   p.dt * nu * dense_stencil(n, o2, c2, Boundary::periodic);
    p.dense_nonlinear = -p.dt * dense_stencil(n, o1, c1, Boundary::periodic);
    p.initial = {gauss_peak(n, p.dx, M_PI, 0.5)};
    p.rhs.resize(1);
    p.source.resize(1);
    return p;
}

Problem make_linear_euler(int n, const CompileConfig& cc) {
    Problem p;
    p.name = "linear_euler";
    p.n = n;
    const Eigen::Index N = Eigen::Index(1) << n;
    p.dx = 8.0 / static_cast<double>(N);  // domain [-4, 4]
    p.dt = 2.5e-4;
    p.scheme = Scheme::rk4;
    p.fields = {"u", "p"};
    p.ansatz_layers = 14;

    const double rho = 1.225, c_snd = 340.2, omega = 100.0, a0 = 0.4 * c_snd;
    const double kappa = 0.13, gamma_max = 1500.0;
    const int n_tilde = 4;

    const double bx = 1.0 / p.dx;
    std::vector<int> of{0, 1}, ob{-1, 0};
    std::vector<double> cf{-bx, bx}, cb{-bx, bx};
    // The open-boundary (zero-padded) derivatives are split exactly into the
    // circulant stencil minus its wrap-around band, a rank-one corner matrix.
    // Both pieces compile far more accurately than the open-boundary operator
    // itself, and the right-hand side is linear, so the split costs nothing:
    //   D_fwd_open = D_fwd_cyclic - |e_{N-1}><e_0| / dx
    //   D_bwd_open = D_bwd_cyclic + |e_0><e_{N-1}| / dx
    Mpo dfwd_cyc = stencil_mpo(n, of, cf, Boundary::periodic);
    Mpo dbwd_cyc = stencil_mpo(n, ob, cb, Boundary::periodic);
    Matrix lower(2, 2), raise(2, 2);
    lower << 0, 0, 1, 0;  // |1><0|
    raise << 0, 1, 0, 0;  // |0><1|
    Mpo corner_fwd = product_mpo(std::vector<Matrix>(n, lower));  // |e_{N-1}><e_0|
    Mpo corner_bwd = product_mpo(std::vector<Matrix>(n, raise));  // |e_0><e_{N-1}|
    Mpo sponge = sponge_mpo(kappa, n_tilde, n);

    Matrix dense_corner_fwd = Matrix::Zero(N, N), dense_corner_bwd = Matrix::Zero(N, N);
    dense_corner_fwd(N - 1, 0) = 1.0;
    dense_corner_bwd(0, N - 1) = 1.0;

    OperatorTerm u_from_p{compile_term(dbwd_cyc, cc),
                          dense_stencil(n, ob, cb, Boundary::periodic), -1.0 / rho, 1};
    OperatorTerm u_from_p_corner{compile_term(corner_bwd, cc), dense_corner_bwd,
                                 -bx / rho, 1};
    OperatorTerm u_damp{compile_term(sponge, cc),
                        Matrix(sponge_profile(kappa, n_tilde, n).cast<Complex>().asDiagonal()),
                        -gamma_max, 0};
    OperatorTerm p_from_u{compile_term(dfwd_cyc, cc),
                          dense_stencil(n, of, cf, Boundary::periodic), -rho * c_snd * c_snd,
                          0};
    OperatorTerm p_from_u_corner{compile_term(corner_fwd, cc), dense_corner_fwd,
                                 rho * c_snd * c_snd * bx, 0};
    OperatorTerm p_damp = u_damp;
    p_damp.src = 1;

    p.rhs = {{u_from_p, u_from_p_corner, u_damp},
             {p_from_u, p_from_u_corner, p_damp}};
    SourceTerm src;
    src.shape = Vector::Zero(N);
    src.shape(N / 2) = 1.0;  // x = 0, the domain center
    src.amplitude = a0;
    src.omega = omega;
    p.source = {std::nullopt, src};
    p.initial = {Vector::Zero(N), Vector::Zero(N)};
    return p;
}

std::vector<std::vector<Vector>> classical_reference(const Problem& p, int steps) {
    if (p.n > 14) throw std::invalid_argument("classical_reference: n too large");
    std::vector<std::vector<Vector>> traj;
    std::vector<Vector> y = p.initial;
    traj.push_back(y);
    const double init_scale = [&] {
        double s = 1.0;
        for (const auto& v : y) s = std::max(s, v.norm());
        return s;
    }();

    auto rhs = [&](const std::vector<Vector>& st, double t) {
        std::vector<Vector> g(st.size());
        for (std::size_t f = 0; f < st.size(); ++f) {
            g[f] = Vector::Zero(st[f].size());
            for (const OperatorTerm& term : p.rhs[f])
                g[f] += term.coefficient * (term.dense * st[term.src]);
            if (p.source[f])
                g[f] += (p.source[f]->amplitude * std::sin(p.source[f]->omega * t)) *
                        p.source[f]->shape;
        }
        return g;
    };

    for (int j = 0; j < steps; ++j) {
        const double t = j * p.dt;
        if (p.scheme == Scheme::euler) {
            Vector u = y[0];
            Vector next = p.dense_step * u;
            if (p.dense_nonlinear.size() > 0)
                next += u.cwiseProduct(p.dense_nonlinear * u);
            y[0] = next;
        } else {
            auto axpy = [&](const std::vector<Vector>& a, double s,
                            const std::vector<Vector>& b) {
                std::vector<Vector> r(a.size());
                for (std::size_t f = 0; f < a.size(); ++f) r[f] = a[f] + s * b[f];
                return r;
            };
            auto k1 = rhs(y, t);
            auto k2 = rhs(axpy(y, p.dt / 2, k1), t + p.dt / 2);
            auto k3 = rhs(axpy(y, p.dt / 2, k2), t + p.dt / 2);
            auto k4 = rhs(axpy(y, p.dt, k3), t + p.dt);
            for (std::size_t f = 0; f < y.size(); ++f)
                y[f] += (p.dt / 6) * (k1[f] + 2 * k2[f] + 2 * k3[f] + k4[f]);
        }
        for (const auto& v : y)
            if (v.norm() > 1e6 * init_scale)
                throw NumericalError("classical_reference: instability (norm blow-up)");
        traj.push_back(y);
    }
    return traj;
}

}  // namespace qpde
