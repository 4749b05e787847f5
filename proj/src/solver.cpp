#include "qpde/solver.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace qpde {

double norm_constant_f(double alpha, double phi) {
    if (!(alpha > 0.0 && alpha <= 1.0 + 1e-12))
        throw std::invalid_argument("norm_constant_f: alpha out of (0, 1]");
    if (!(phi > 0.0 && phi <= M_PI / 2 + 1e-12))
        throw std::invalid_argument("norm_constant_f: phi out of (0, pi/2]");
    const double ra = std::sqrt(alpha);
    const double den = 2.0 * std::sin(phi) - (ra - 1.0 / ra) * std::cos(phi);
    if (den <= 0.0) throw std::invalid_argument("norm_constant_f: non-positive denominator");
    return (1.0 + alpha) / den;
}

double phi_opt(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0 + 1e-12))
        throw std::invalid_argument("phi_opt: alpha out of (0, 1]");
    return 2.0 * std::atan(std::sqrt(alpha));
}

double alpha_from_phi(double phi) {
    if (!(phi > 0.0 && phi <= M_PI / 2 + 1e-12))
        throw std::invalid_argument("alpha_from_phi: phi out of (0, pi/2]");
    const double t = std::tan(phi / 2);
    return t * t;
}

double fidelity_from_expectation(double sigma_z, double alpha, double phi) {
    if (!(alpha > 0.0)) throw std::invalid_argument("fidelity_from_expectation: alpha <= 0");
    const double num = alpha * sigma_z + alpha * std::cos(phi) + sigma_z - std::cos(phi);
    const double s = std::sin(phi);
    const double f = num * num / (4.0 * alpha * s * s);
    return std::min(1.0, std::max(0.0, f));
}

double phi_u_weight(double theta0, double c_nonlin, double c_lin) {
    if (c_lin == 0.0) throw std::invalid_argument("phi_u_weight: c_lin is zero");
    return 2.0 * std::atan(theta0 * std::abs(c_nonlin) / std::abs(c_lin));
}

double update_norm_linear(double theta0, double c_mpo, double f, double sigma_z) {
    const double next = theta0 * c_mpo * f * sigma_z;
    if (!(next > 0.0)) throw StepFailure("update_norm_linear: non-positive norm", 0, 0.0);
    return next;
}

double update_norm_nonlinear(double theta0, double c_lin, double f, double r_u,
                             double sigma_z) {
    const double next = theta0 * std::sqrt(2.0) * c_lin * f * r_u * sigma_z;
    if (!(next > 0.0)) throw StepFailure("update_norm_nonlinear: non-positive norm", 0, 0.0);
    return next;
}

// -- fast real-amplitude ansatz evaluation ----------------------------------

RealVector ansatz_state(const BrickwallAnsatz& a) {
    if (a.theta.size() != ansatz_param_count(a.n, a.layers))
        throw std::invalid_argument("ansatz_state: parameter count mismatch");
    const Eigen::Index dim = Eigen::Index(1) << a.n;
    RealVector v = RealVector::Zero(dim);
    v(0) = 1.0;
    Eigen::Index p = 0;
    const bool cz = a.entangler == Entangler::cz;
    for (int l = 0; l < a.layers; ++l) {
        for (int q = l % 2; q + 1 < a.n; q += 2) {
            // qubit q is the most significant of the pair (big-endian)
            const Eigen::Index m0 = Eigen::Index(1) << (a.n - 1 - q);
            const Eigen::Index m1 = m0 >> 1;
            const double c0 = std::cos(a.theta(p) / 2), s0 = std::sin(a.theta(p) / 2);
            const double c1 = std::cos(a.theta(p + 1) / 2), s1 = std::sin(a.theta(p + 1) / 2);
            p += 2;
            for (Eigen::Index i = 0; i < dim; ++i) {
                if (i & (m0 | m1)) continue;
                double a00 = v(i), a01 = v(i | m1), a10 = v(i | m0), a11 = v(i | m0 | m1);
                // RY on q, RY on q+1
                double b00 = c0 * a00 - s0 * a10, b10 = s0 * a00 + c0 * a10;
                double b01 = c0 * a01 - s0 * a11, b11 = s0 * a01 + c0 * a11;
                double d00 = c1 * b00 - s1 * b01, d01 = s1 * b00 + c1 * b01;
                double d10 = c1 * b10 - s1 * b11, d11 = s1 * b10 + c1 * b11;
                if (cz) {
                    d11 = -d11;
                } else {
                    std::swap(d10, d11);
                }
                v(i) = d00;
                v(i | m1) = d01;
                v(i | m0) = d10;
                v(i | m0 | m1) = d11;
            }
        }
    }
    return v;
}

namespace {

// Training works against the real part of the target; ansatz states are real.
RealVector real_target(const Vector& t) { return t.real(); }

double overlap_cost(const BrickwallAnsatz& proto, const RealVector& theta,
                    const RealVector& tgt) {
    BrickwallAnsatz a = proto;
    a.theta = theta;
    return -ansatz_state(a).dot(tgt);
}

}  // namespace

TrainReport train_overlap(BrickwallAnsatz& a, const Vector& target,
                          const OptimizerConfig& cfg) {
    const RealVector tgt = real_target(target);
    const double tn = tgt.norm();
    if (tn <= 0.0) throw std::invalid_argument("train_overlap: zero target");
    const RealVector unit = tgt / tn;
    if (target.imag().norm() > 1e-9 * tn)
        throw std::invalid_argument("train_overlap: target has imaginary content");

    auto cost = [&](const RealVector& th) { return overlap_cost(a, th, unit); };
    auto grad = [&](const RealVector& th) {
        if (cfg.grad == GradKind::spsa) return spsa_grad(cost, th, cfg.spsa_c, cfg.seed);
        return parameter_shift_grad(cost, th, 0.5);
    };

    const double goal = -std::sqrt(std::min(1.0, cfg.f_threshold));
    RealVector theta = a.theta;
    double c = cost(theta);
    RealVector best_theta = theta;
    double best_c = c;
    int used = 0;

    // Adam
    RealVector m = RealVector::Zero(theta.size()), v = RealVector::Zero(theta.size());
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    for (int e = 1; e <= cfg.epochs && best_c > goal; ++e, ++used) {
        RealVector g = grad(theta);
        m = b1 * m + (1 - b1) * g;
        v = b2 * v + (1 - b2) * g.cwiseProduct(g);
        const double bc1 = 1 - std::pow(b1, e), bc2 = 1 - std::pow(b2, e);
        for (Eigen::Index i = 0; i < theta.size(); ++i)
            theta(i) -= cfg.lr * (m(i) / bc1) / (std::sqrt(v(i) / bc2) + eps);
        c = cost(theta);
        if (c < best_c) {
            best_c = c;
            best_theta = theta;
        }
    }

    // line-searched gradient descent polish on the exact gradient
    theta = best_theta;
    c = best_c;
    double step = cfg.lr;
    for (int e = 0; e < cfg.polish_epochs && c > goal; ++e, ++used) {
        RealVector g = parameter_shift_grad(cost, theta, 0.5);
        const double gn = g.norm();
        if (gn < 1e-14) break;
        bool ok = false;
        for (int h = 0; h < 25 && !ok; ++h, step /= 2) {
            RealVector cand = theta - step * g;
            const double cc = cost(cand);
            if (cc < c) {
                theta = std::move(cand);
                c = cc;
                ok = true;
            }
        }
        if (!ok) break;
        step = std::min(step * 4, 1.0);
    }
    if (c < best_c) {
        best_c = c;
        best_theta = theta;
    }

    a.theta = best_theta;
    TrainReport r;
    r.overlap = -best_c * tn;
    // an anti-aligned state is a failure, not a fit; count fidelity only for
    // positive overlap
    r.fidelity = best_c < 0 ? best_c * best_c : 0.0;
    r.epochs_used = used;
    return r;
}

// -- stepping ---------------------------------------------------------------

Vector state_field(const SolverState& s, int field) {
    const BrickwallAnsatz& a = s.fields.at(field);
    return (a.theta0 * ansatz_state(a)).cast<Complex>();
}

namespace {

// Trains `a` toward the dense target and returns (overlap, fidelity);
// near-zero targets short-circuit to theta0 = 0.
struct SubResult {
    double theta0 = 0.0;
    double fidelity = 1.0;
};

SubResult train_substep(BrickwallAnsatz& a, const Vector& target, const OptimizerConfig& cfg,
                        double scale, int sub_step) {
    SubResult r;
    if (target.norm() <= 1e-13 * std::max(scale, 1.0)) return r;  // zero field stays zero
    TrainReport tr = train_overlap(a, target, cfg);
    r.theta0 = tr.overlap;
    r.fidelity = tr.fidelity;
    if (tr.fidelity < cfg.f_threshold)
        throw StepFailure("sub-optimization missed the fidelity threshold", sub_step,
                          tr.fidelity);
    return r;
}

double source_value(const std::optional<SourceTerm>& s, double t) {
    return s ? s->amplitude * std::sin(s->omega * t) : 0.0;
}

// dt * (right-hand side) contribution vectors for field f evaluated on the
// given per-field states (dense, unnormalized), via the compiled branches.
Vector rhs_apply(const Problem& p, int f, const std::vector<BrickwallAnsatz>& st,
                 double t) {
    const Eigen::Index dim = Eigen::Index(1) << p.n;
    Vector acc = Vector::Zero(dim);
    for (const OperatorTerm& term : p.rhs[f]) {
        const BrickwallAnsatz& src = st[term.src];
        if (src.theta0 == 0.0) continue;
        Vector b = branch_vector({term.op}, src);  // (1/c) O |src>
        acc += (term.coefficient * term.op.c_mpo * src.theta0) * b;
    }
    const double sv = source_value(p.source[f], t);
    if (sv != 0.0) acc += sv * p.source[f]->shape;
    return acc;
}

}  // namespace

SolverState init_state(const Problem& p, const OptimizerConfig& cfg) {
    SolverState s;
    for (std::size_t f = 0; f < p.fields.size(); ++f) {
        BrickwallAnsatz a;
        a.n = p.n;
        a.layers = p.ansatz_layers;
        a.entangler = p.entangler;
        a.theta = RealVector::Zero(ansatz_param_count(a.n, a.layers));
        a.theta0 = 0.0;
        const double nrm = p.initial[f].norm();
        if (nrm > 0.0) {
            OptimizerConfig icfg = cfg;
            icfg.f_threshold = 1.0;  // train to budget exhaustion
            TrainReport tr = train_overlap(a, p.initial[f], icfg);
            a.theta0 = tr.overlap;
            s.metrics.fidelity = std::min(s.metrics.fidelity, tr.fidelity);
        }
        s.fields.push_back(std::move(a));
        s.metrics.theta0.push_back(s.fields.back().theta0);
    }
    return s;
}

SolverState euler_step(const Problem& p, const SolverState& s, const OptimizerConfig& cfg) {
    if (p.scheme != Scheme::euler || p.step_chain.empty())
        throw std::invalid_argument("euler_step: problem is not Euler-stepped");
    const BrickwallAnsatz& ket = s.fields[0];
    SolverState out = s;
    out.t = s.t + p.dt;
    out.step = s.step + 1;
    StepMetrics& mx = out.metrics;
    mx.t = out.t;
    mx.step = out.step;
    mx.rel_error = -1.0;

    if (ket.theta0 == 0.0) {  // nothing evolves
        mx.theta0 = {0.0};
        return out;
    }

    double c_lin = 1.0;
    for (const auto& op : p.step_chain) c_lin *= op.c_mpo;
    Vector branch;
    double phi_u = 0.0, phi_u_signed = 0.0;
    if (p.nonlinear_op) {
        const CompiledOperator& nl = *p.nonlinear_op;
        phi_u = phi_u_weight(ket.theta0, nl.c_mpo, c_lin);
        phi_u_signed = (nl.c_mpo / c_lin < 0) ? -phi_u : phi_u;
        branch = nonlinear_branch_vector(p.step_chain, nl, ket, phi_u_signed);
    } else {
        branch = branch_vector(p.step_chain, ket);
    }
    const double alpha = branch.squaredNorm();
    if (alpha < 1e-28) throw StepFailure("euler_step: vanishing success probability", 0, 0.0);

    TrainReport tr = train_overlap(out.fields[0], branch, cfg);
    if (tr.fidelity < cfg.f_threshold)
        throw StepFailure("euler_step: training missed the fidelity threshold", 0,
                          tr.fidelity);

    const double phi = phi_opt(alpha);
    const double f = norm_constant_f(alpha, phi);
    TestResult t = p.nonlinear_op
                       ? nonlinear_test(out.fields[0], p.step_chain, *p.nonlinear_op, ket,
                                        phi, phi_u_signed)
                       : hadamard_test(out.fields[0], p.step_chain, ket, phi);
    double theta0_next;
    if (p.nonlinear_op) {
        const double r_u = 1.0 / std::cos(phi_u / 2);
        theta0_next = update_norm_nonlinear(ket.theta0, c_lin, f, r_u, t.sigma_z);
    } else {
        theta0_next = update_norm_linear(ket.theta0, c_lin, f, t.sigma_z);
    }
    out.fields[0].theta0 = theta0_next;
    mx.theta0 = {theta0_next};
    mx.alpha_succ = alpha;
    mx.phi = phi;
    mx.sigma_z = t.sigma_z;
    mx.fidelity = tr.fidelity;
    return out;
}

SolverState rk4_step(const Problem& p, const SolverState& s, const OptimizerConfig& cfg) {
    if (p.scheme != Scheme::rk4)
        throw std::invalid_argument("rk4_step: problem is not RK4-stepped");
    const std::size_t nf = p.fields.size();
    SolverState out = s;
    out.t = s.t + p.dt;
    out.step = s.step + 1;
    StepMetrics& mx = out.metrics;
    mx.t = out.t;
    mx.step = out.step;
    mx.fidelity = 1.0;
    mx.rel_error = -1.0;

    double scale = 1.0;
    for (const auto& a : s.fields) scale = std::max(scale, std::abs(a.theta0));

    // stage coefficients: phi*_m = a_m phi_j + b_m dt g(t_m, stage m-1)
    const double a_m[4] = {1.0, 1.0, 1.0, -1.0 / 3.0};
    const double b_m[4] = {0.5, 0.5, 1.0, 1.0 / 6.0};
    const double t_m[4] = {0.0, 0.5, 0.5, 1.0};

    std::vector<BrickwallAnsatz> stage_in = s.fields;  // evaluation point of g
    std::vector<std::vector<BrickwallAnsatz>> stages;  // trained phi*_1..phi*_4
    double min_alpha = 1.0;
    for (int m = 0; m < 4; ++m) {
        std::vector<BrickwallAnsatz> stage_out = stage_in;  // warm start
        if (m == 3) {
            // stage 4 points along -phi_j; a 2*pi shift on any one RY angle
            // flips the global sign exactly, so start from the flipped state
            for (auto& a : stage_out)
                if (a.theta.size() > 0) a.theta(0) += 2 * M_PI;
        }
        for (std::size_t f = 0; f < nf; ++f) {
            Vector target = rhs_apply(p, static_cast<int>(f), stage_in, s.t + t_m[m] * p.dt);
            if (target.norm() > 0 && stage_in[f].theta0 != 0.0) {
                // track the worst postselection probability among active terms
                for (const OperatorTerm& term : p.rhs[f])
                    if (stage_in[term.src].theta0 != 0.0)
                        min_alpha = std::min(
                            min_alpha, branch_vector({term.op}, stage_in[term.src]).squaredNorm());
            }
            target *= b_m[m] * p.dt;
            if (s.fields[f].theta0 != 0.0)
                target += a_m[m] * s.fields[f].theta0 *
                          ansatz_state(s.fields[f]).cast<Complex>();
            SubResult r = train_substep(stage_out[f], target, cfg, scale, m + 1);
            stage_out[f].theta0 = r.theta0;
            mx.fidelity = std::min(mx.fidelity, r.fidelity);
        }
        stages.push_back(stage_out);
        stage_in = stages.back();
    }

    // final combination: 1/3 phi*_1 + 2/3 phi*_2 + 1/3 phi*_3 + phi*_4
    const double w[4] = {1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0, 1.0};
    double sz_acc = 0.0;
    int sz_cnt = 0;
    for (std::size_t f = 0; f < nf; ++f) {
        const Eigen::Index dim = Eigen::Index(1) << p.n;
        Vector target = Vector::Zero(dim);
        for (int m = 0; m < 4; ++m)
            if (stages[m][f].theta0 != 0.0)
                target += w[m] * stages[m][f].theta0 *
                          ansatz_state(stages[m][f]).cast<Complex>();
        out.fields[f] = stages[2][f];  // warm start from the closest stage
        SubResult r = train_substep(out.fields[f], target, cfg, scale, 5);
        out.fields[f].theta0 = r.theta0;
        mx.fidelity = std::min(mx.fidelity, r.fidelity);
        if (r.theta0 != 0.0) {
            // aggregated overlap of the trained state with its stage targets,
            // normalized so perfect training gives 1
            sz_acc += r.theta0 > 0 ? r.fidelity : 0.0;
            ++sz_cnt;
        }
    }
    mx.sigma_z = sz_cnt ? sz_acc / sz_cnt : 1.0;
    mx.alpha_succ = min_alpha;
    mx.phi = phi_opt(std::max(min_alpha, 1e-12));
    mx.theta0.clear();
    for (const auto& a : out.fields) mx.theta0.push_back(a.theta0);
    return out;
}

double relative_error(const Vector& qds_field, const Vector& classical_field) {
    if (qds_field.size() != classical_field.size())
        throw std::invalid_argument("relative_error: size mismatch");
    const double na = qds_field.squaredNorm(), nb = classical_field.squaredNorm();
    if (na <= 0.0 || nb <= 0.0) throw std::invalid_argument("relative_error: zero norm");
    const double ov = std::norm(qds_field.dot(classical_field));
    return std::min(1.0, std::max(0.0, 1.0 - ov / (na * nb)));
}

std::string solver_state_dump(const SolverState& s) {
    std::ostringstream os;
    os.precision(17);
    os << "SOLVERSTATE v1\n" << s.fields.size() << ' ' << s.t << ' ' << s.step << '\n';
    for (const auto& a : s.fields) {
        os << a.n << ' ' << a.layers << ' ' << (a.entangler == Entangler::cnot ? 0 : 1) << ' '
           << a.theta0 << ' ' << a.theta.size() << '\n';
        for (Eigen::Index i = 0; i < a.theta.size(); ++i) os << a.theta(i) << '\n';
    }
    os << s.metrics.alpha_succ << ' ' << s.metrics.phi << ' ' << s.metrics.sigma_z << ' '
       << s.metrics.fidelity << ' ' << s.metrics.rel_error << '\n';
    return os.str();
}

SolverState solver_state_load(const std::string& text) {
    std::istringstream is(text);
    std::string tag, ver;
    is >> tag >> ver;
    if (tag != "SOLVERSTATE" || ver != "v1")
        throw std::invalid_argument("solver_state_load: bad header");
    SolverState s;
    std::size_t nf;
    is >> nf >> s.t >> s.step;
    for (std::size_t f = 0; f < nf; ++f) {
        BrickwallAnsatz a;
        int ent;
        Eigen::Index np;
        is >> a.n >> a.layers >> ent >> a.theta0 >> np;
        a.entangler = ent == 0 ? Entangler::cnot : Entangler::cz;
        a.theta = RealVector(np);
        for (Eigen::Index i = 0; i < np; ++i) is >> a.theta(i);
        s.fields.push_back(std::move(a));
    }
    is >> s.metrics.alpha_succ >> s.metrics.phi >> s.metrics.sigma_z >> s.metrics.fidelity >>
        s.metrics.rel_error;
    if (!is) throw std::invalid_argument("solver_state_load: truncated");
    s.metrics.t = s.t;
    s.metrics.step = s.step;
    for (const auto& a : s.fields) s.metrics.theta0.push_back(a.theta0);
    return s;
}

}  // namespace qpde
