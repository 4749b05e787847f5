// Config-driven command line front end: operator compilation, time evolution,
// success-probability sweeps, loss-landscape scans, and the MPS-vs-circuit
// scaling study. Emits plot-ready CSV/JSONL artifacts.
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "qpde/mpo.hpp"
#include "qpde/mps.hpp"
#include "qpde/solver.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace qpde;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Merges user keys into the defaults, rejecting keys the schema doesn't know.
json resolve_config(const json& defaults, const json& user) {
    json out = defaults;
    for (auto it = user.begin(); it != user.end(); ++it) {
        if (!defaults.contains(it.key()))
            throw ConfigError("unknown config key: " + it.key());
        out[it.key()] = it.value();
    }
    return out;
}

json load_user_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
}

fs::path resolve_out_dir(const std::string& flag, const std::string& subcommand) {
    if (!flag.empty()) return flag;
    const char* root = std::getenv("QPDE_OUT_ROOT");
    return fs::path(root ? root : "qpde_out") / subcommand;
}

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
}

void echo_config(const fs::path& dir, const json& cfg) {
    write_text(dir / "config_echo.json", cfg.dump(2) + "\n");
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

CompileConfig compile_config(const json& cfg) {
    CompileConfig cc;
    cc.Z = cfg["Z"].get<int>();
    cc.fit.tol = cfg["fit_tol"].get<double>();
    cc.fit.max_iters = cfg["fit_max_iters"].get<int>();
    cc.fit.lr = cfg["fit_lr"].get<double>();
    cc.fit.restarts = cfg["fit_restarts"].get<int>();
    cc.fit.seed = cfg["seed"].get<unsigned>();
    cc.cache_dir = cfg["cache_dir"].get<std::string>();
    return cc;
}

OptimizerConfig optimizer_config(const json& cfg) {
    OptimizerConfig oc;
    oc.lr = cfg["opt_lr"].get<double>();
    oc.epochs = cfg["epochs"].get<int>();
    oc.polish_epochs = cfg["polish_epochs"].get<int>();
    oc.f_threshold = cfg["f_threshold"].get<double>();
    oc.seed = cfg["seed"].get<unsigned>();
    const std::string g = cfg["grad"].get<std::string>();
    if (g == "parameter_shift")
        oc.grad = GradKind::parameter_shift;
    else if (g == "spsa")
        oc.grad = GradKind::spsa;
    else
        throw ConfigError("grad must be parameter_shift or spsa");
    return oc;
}

Problem make_problem(const json& cfg) {
    const std::string name = cfg["problem"].get<std::string>();
    const int n = cfg["n"].get<int>();
    const CompileConfig cc = compile_config(cfg);
    Problem p;
    if (name == "advection_diffusion")
        p = make_advection_diffusion(n, cc, cfg["nu"].get<double>(),
                                     cfg["c_adv"].get<double>());
    else if (name == "burgers")
        p = make_burgers(n, cc, cfg["nu"].get<double>());
    else if (name == "linear_euler")
        p = make_linear_euler(n, cc);
    else
        throw ConfigError("problem must be advection_diffusion, burgers, or linear_euler");
    if (cfg["layers"].get<int>() > 0) p.ansatz_layers = cfg["layers"].get<int>();
    return p;
}

double domain_origin(const Problem& p) { return p.name == "linear_euler" ? -4.0 : 0.0; }

// -- evolve -------------------------------------------------------------------

const json evolve_defaults = {
    {"problem", "advection_diffusion"},
    {"n", 6},
    {"steps", 100},
    {"layers", 0},  // 0 = problem default
    {"nu", 0.1},
    {"c_adv", 20.0},
    {"Z", 16},
    {"fit_tol", 5e-10},
    {"fit_max_iters", 1500},
    {"fit_lr", 0.2},
    {"fit_restarts", 2},
    {"cache_dir", "compile_cache"},
    {"opt_lr", 0.05},
    {"epochs", 751},
    {"polish_epochs", 400},
    {"f_threshold", 0.999999},
    {"grad", "parameter_shift"},
    {"mode", "exact"},
    {"shots", 100000},
    {"oracle", true},
    {"seed", 0},
};

void append_fields(std::ostream& os, const Problem& p, const SolverState& s) {
    const double x0 = domain_origin(p);
    for (std::size_t f = 0; f < p.fields.size(); ++f) {
        Vector v = state_field(s, static_cast<int>(f));
        for (Eigen::Index i = 0; i < v.size(); ++i)
            os << s.step << ',' << fmt(s.t) << ',' << fmt(x0 + i * p.dx) << ','
               << p.fields[f] << ',' << fmt(v(i).real()) << '\n';
    }
}

json metrics_record(const SolverState& s, const json& cfg) {
    const StepMetrics& m = s.metrics;
    json r = {{"step", m.step},       {"t", m.t},
              {"theta0", m.theta0},   {"alpha_succ", m.alpha_succ},
              {"phi", m.phi},         {"sigma_z", m.sigma_z},
              {"fidelity", m.fidelity}, {"rel_error", m.rel_error}};
    if (cfg["mode"].get<std::string>() == "shots" && m.step > 0) {
        TestResult exact;
        exact.sigma_z = std::min(1.0, m.sigma_z);
        exact.alpha_succ = m.alpha_succ;
        SampledResult sr = sampled_sigma_z(exact, cfg["shots"].get<std::int64_t>(),
                                           cfg["seed"].get<unsigned>() + 977u * m.step);
        r["sigma_z_sampled"] = sr.sigma_z_hat;
        r["kept_shots"] = sr.kept_shots;
    }
    return r;
}

int run_evolve(const json& cfg, const fs::path& dir) {
    Problem p = make_problem(cfg);
    OptimizerConfig oc = optimizer_config(cfg);
    const int steps = cfg["steps"].get<int>();
    const bool oracle = cfg["oracle"].get<bool>();

    std::vector<std::vector<Vector>> ref;
    if (oracle) ref = classical_reference(p, steps);

    std::ofstream fields(dir / "fields.csv");
    fields << "step,t,x,field,value\n";
    std::ofstream metrics(dir / "metrics.jsonl");

    SolverState s = init_state(p, oc);
    auto record = [&](const SolverState& st) {
        SolverState annotated = st;
        if (oracle) {
            double worst = -1.0;
            for (std::size_t f = 0; f < p.fields.size(); ++f) {
                const Vector& rv = ref[st.step][f];
                if (rv.norm() == 0.0) continue;
                Vector qv = state_field(st, static_cast<int>(f));
                if (qv.norm() == 0.0) continue;
                worst = std::max(worst, relative_error(qv, rv));
            }
            annotated.metrics.rel_error = worst;
        }
        append_fields(fields, p, annotated);
        metrics << metrics_record(annotated, cfg).dump() << '\n';
    };
    record(s);
    for (int j = 0; j < steps; ++j) {
        s = p.scheme == Scheme::euler ? euler_step(p, s, oc) : rk4_step(p, s, oc);
        record(s);
    }
    write_text(dir / "state_final.txt", solver_state_dump(s));
    return 0;
}

// -- compile ------------------------------------------------------------------

const json compile_defaults = {
    {"problem", "advection_diffusion"},
    {"n", 6},
    {"layers", 0},
    {"nu", 0.1},
    {"c_adv", 20.0},
    {"Z", 16},
    {"fit_tol", 5e-10},
    {"fit_max_iters", 1500},
    {"fit_lr", 0.2},
    {"fit_restarts", 2},
    {"cache_dir", "compile_cache"},
    {"seed", 0},
};

int run_compile(const json& cfg, const fs::path& dir) {
    Problem p = make_problem(cfg);
    std::ofstream csv(dir / "compile_report.csv");
    csv << "operator,n,Z,n_aux,fit_error,c_mpo,alpha_bar\n";
    auto row = [&](const std::string& name, const CompiledOperator& op) {
        csv << name << ',' << op.n << ',' << (Eigen::Index(1) << op.n_aux) << ','
            << op.n_aux << ',' << fmt(op.fit_error) << ',' << fmt(op.c_mpo) << ','
            << fmt(avg_success_probability(op)) << '\n';
    };
    for (std::size_t k = 0; k < p.step_chain.size(); ++k)
        row(p.name + ".step.factor" + std::to_string(k), p.step_chain[k]);
    if (!p.step_chain.empty()) {
        // composed-chain accuracy, reported against the full step operator
        csv << p.name << ".step," << p.n << ",,," << fmt(p.step_fit_error) << ",,\n";
    }
    if (p.nonlinear_op) row(p.name + ".nonlinear", *p.nonlinear_op);
    for (std::size_t f = 0; f < p.rhs.size(); ++f)
        for (std::size_t t = 0; t < p.rhs[f].size(); ++t)
            row(p.name + "." + p.fields[f] + ".term" + std::to_string(t), p.rhs[f][t].op);
    return 0;
}

// -- sweep-alpha --------------------------------------------------------------

const json sweep_defaults = {
    {"n_min", 4},
    {"n_max", 10},
    {"sigma_list", json::array({2.0, 1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125})},
    {"grid_rmse", 0.001},
    {"seed", 0},
};

Matrix dense_operator(const std::string& name, int n, double dx) {
    const Eigen::Index N = Eigen::Index(1) << n;
    Matrix m = Matrix::Zero(N, N);
    auto band = [&](int off, double c) {
        for (Eigen::Index i = 0; i < N; ++i) m(i, (((i + off) % N) + N) % N) += c;
    };
    if (name == "identity") {
        band(0, 1.0);
    } else if (name == "d1_central") {
        band(1, 0.5 / dx);
        band(-1, -0.5 / dx);
    } else if (name == "d1_backward") {
        band(0, 1.0 / dx);
        band(-1, -1.0 / dx);
    } else if (name == "d2_central") {
        band(1, 1.0 / (dx * dx));
        band(0, -2.0 / (dx * dx));
        band(-1, 1.0 / (dx * dx));
    } else {
        throw ConfigError("unknown operator: " + name);
    }
    return m;
}

// Best-case average success probability over the compile scalar: with
// c >= sigma_max(M) required for a contraction, alpha_bar = |M|_F^2/(2^n c^2)
// is maximized at c = sigma_max(M).
double alpha_bar_dense(const Matrix& m, int n) {
    const double smax = svd(m).s(0);
    return m.squaredNorm() / (std::pow(2.0, n) * smax * smax);
}

Vector unit_gaussian(int n, double sigma) {
    const Eigen::Index N = Eigen::Index(1) << n;
    const double dx = 2 * M_PI / static_cast<double>(N);
    Vector v(N);
    for (Eigen::Index i = 0; i < N; ++i) {
        const double x = i * dx - M_PI;
        v(i) = std::exp(-x * x / sigma);
    }
    return v / v.norm();
}

// Midpoint-interpolation RMSE of the sampled Gaussian: gates whether the
// grid resolves the profile.
double grid_rmse(int n, double sigma) {
    const Eigen::Index N = Eigen::Index(1) << n;
    const double dx = 2 * M_PI / static_cast<double>(N);
    double acc = 0.0, nrm = 0.0;
    auto g = [&](double x) { return std::exp(-(x - M_PI) * (x - M_PI) / sigma); };
    for (Eigen::Index i = 0; i + 1 < N; ++i) {
        const double mid = g((i + 0.5) * dx), lin = 0.5 * (g(i * dx) + g((i + 1) * dx));
        acc += (mid - lin) * (mid - lin);
        nrm += mid * mid;
    }
    return std::sqrt(acc / std::max(nrm, 1e-300));
}

int run_sweep_alpha(const json& cfg, const fs::path& dir) {
    const int n_min = cfg["n_min"].get<int>(), n_max = cfg["n_max"].get<int>();
    if (n_min < 2 || n_max > 12 || n_min > n_max) throw ConfigError("bad n range");

    {
        std::ofstream csv(dir / "alpha_ops.csv");
        csv << "operator,n,alpha_bar\n";
        for (const char* op : {"identity", "d1_central", "d1_backward", "d2_central"})
            for (int n = n_min; n <= n_max; ++n) {
                const double dx = 2 * M_PI / std::pow(2.0, n);
                csv << op << ',' << n << ','
                    << fmt(alpha_bar_dense(dense_operator(op, n, dx), n)) << '\n';
            }
    }
    {
        // pointwise-product success probability on a normalized Gaussian:
        // alpha = |u .* (D u)|^2 / sigma_max(D)^2
        std::ofstream csv(dir / "alpha_product.csv");
        csv << "sigma,n,alpha_succ\n";
        for (double sigma : cfg["sigma_list"].get<std::vector<double>>())
            for (int n = n_min; n <= n_max; ++n) {
                const double dx = 2 * M_PI / std::pow(2.0, n);
                const Matrix d = dense_operator("d1_backward", n, dx);
                const double smax = svd(d).s(0);
                Vector u = unit_gaussian(n, sigma);
                const double a = u.cwiseProduct(d * u).squaredNorm() / (smax * smax);
                csv << fmt(sigma) << ',' << n << ',' << fmt(a) << '\n';
            }
    }
    {
        // constant-grid-error protocol: per n, the narrowest sigma from a
        // geometric grid whose midpoint RMSE stays under the gate
        std::ofstream csv(dir / "alpha_gridconst.csv");
        csv << "n,sigma,rmse,alpha_succ\n";
        const double gate = cfg["grid_rmse"].get<double>();
        for (int n = n_min; n <= n_max; ++n) {
            double chosen = -1.0, rm = -1.0;
            for (double sigma = 256.0; sigma > 1e-6; sigma /= 2) {
                const double r = grid_rmse(n, sigma);
                if (r < gate) {
                    chosen = sigma;
                    rm = r;
                } else {
                    break;
                }
            }
            if (chosen < 0) throw NumericalError("no sigma passes the grid-error gate");
            const double dx = 2 * M_PI / std::pow(2.0, n);
            const Matrix d = dense_operator("d1_backward", n, dx);
            const double smax = svd(d).s(0);
            Vector u = unit_gaussian(n, chosen);
            const double a = u.cwiseProduct(d * u).squaredNorm() / (smax * smax);
            csv << n << ',' << fmt(chosen) << ',' << fmt(rm) << ',' << fmt(a) << '\n';
        }
    }
    return 0;
}

// -- landscape ----------------------------------------------------------------

const json landscape_defaults = {
    {"n_list", json::array({4, 6, 8})},
    {"layers", 4},
    {"sigma", 0.5},
    {"param_index", 0},
    {"theta_points", 41},
    {"shot_list", json::array({0, 1000, 100000})},
    {"epochs", 400},
    {"opt_lr", 0.05},
    {"polish_epochs", 200},
    {"f_threshold", 0.999999},
    {"grad", "parameter_shift"},
    {"seed", 0},
};

// a sin(theta/2) + b cos(theta/2) + c least squares; returns rms residual,
// fitted values not needed downstream.
double sine_fit_residual(const RealVector& theta, const RealVector& cost) {
    Eigen::MatrixXd A(theta.size(), 3);
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        A(i, 0) = std::sin(theta(i) / 2);
        A(i, 1) = std::cos(theta(i) / 2);
        A(i, 2) = 1.0;
    }
    Eigen::VectorXd x = A.colPivHouseholderQr().solve(cost);
    return std::sqrt((A * x - cost).squaredNorm() / theta.size());
}

int run_landscape(const json& cfg, const fs::path& dir) {
    const auto n_list = cfg["n_list"].get<std::vector<int>>();
    const auto shot_list = cfg["shot_list"].get<std::vector<std::int64_t>>();
    const int points = cfg["theta_points"].get<int>();
    const int pidx = cfg["param_index"].get<int>();
    if (points < 5) throw ConfigError("theta_points too small");

    std::ofstream csv(dir / "landscape.csv");
    csv << "n,theta";
    for (auto s : shot_list) csv << (s == 0 ? ",exact" : ",sampled_" + std::to_string(s));
    csv << '\n';
    std::ofstream sum(dir / "landscape_summary.csv");
    sum << "n,amplitude,sine_residual";
    for (auto s : shot_list)
        if (s != 0) sum << ",rmse_" << s;
    sum << '\n';

    for (int n : n_list) {
        // trained snapshot: the ansatz fitted to a Gaussian profile
        BrickwallAnsatz target_state;
        target_state.n = n;
        target_state.layers = cfg["layers"].get<int>();
        target_state.theta =
            RealVector::Zero(ansatz_param_count(n, target_state.layers));
        OptimizerConfig oc = optimizer_config(cfg);
        oc.f_threshold = 1.0;  // train to budget; the slice only needs a snapshot
        Vector g = unit_gaussian(n, cfg["sigma"].get<double>()).cast<Complex>();
        train_overlap(target_state, g, oc);
        if (pidx < 0 || pidx >= target_state.theta.size())
            throw ConfigError("param_index out of range");

        BrickwallAnsatz probe = target_state;
        const double t0 = target_state.theta(pidx);
        RealVector thetas(points);
        std::vector<RealVector> cols(shot_list.size(), RealVector(points));
        for (int i = 0; i < points; ++i) {
            const double th = t0 - M_PI + 2 * M_PI * i / (points - 1);
            thetas(i) = th;
            probe.theta(pidx) = th;
            TestResult r = hadamard_test(probe, {}, target_state, M_PI / 2);
            for (std::size_t s = 0; s < shot_list.size(); ++s) {
                if (shot_list[s] == 0) {
                    cols[s](i) = 1.0 - r.sigma_z;
                } else {
                    SampledResult sr = sampled_sigma_z(
                        r, shot_list[s],
                        cfg["seed"].get<unsigned>() + 131u * n + 7u * i +
                            static_cast<unsigned>(s));
                    cols[s](i) = 1.0 - sr.sigma_z_hat;
                }
            }
        }
        std::size_t exact_col = 0;
        for (std::size_t s = 0; s < shot_list.size(); ++s)
            if (shot_list[s] == 0) exact_col = s;
        for (int i = 0; i < points; ++i) {
            csv << n << ',' << fmt(thetas(i));
            for (std::size_t s = 0; s < shot_list.size(); ++s) csv << ',' << fmt(cols[s](i));
            csv << '\n';
        }
        sum << n << ',' << fmt(cols[exact_col].maxCoeff() - cols[exact_col].minCoeff())
            << ',' << fmt(sine_fit_residual(thetas, cols[exact_col]));
        for (std::size_t s = 0; s < shot_list.size(); ++s) {
            if (shot_list[s] == 0) continue;
            sum << ','
                << fmt(std::sqrt((cols[s] - cols[exact_col]).squaredNorm() / points));
        }
        sum << '\n';
    }
    return 0;
}

// -- scaling ------------------------------------------------------------------

const json scaling_defaults = {
    {"n_list", json::array({4, 6, 8})},
    {"fields", json::array({"constant", "random", "multiscale"})},
    {"target_err", 0.01},
    {"eps", 0.01},
    {"max_layers", 8},
    {"epochs", 400},
    {"opt_lr", 0.05},
    {"polish_epochs", 200},
    {"f_threshold", 0.999999},
    {"grad", "parameter_shift"},
    {"seed", 0},
};

Vector synthetic_field(const std::string& kind, int n, unsigned seed) {
    const Eigen::Index N = Eigen::Index(1) << n;
    Vector v(N);
    if (kind == "constant") {
        v.setConstant(1.0);
    } else if (kind == "random") {
        std::mt19937 rng(seed);
        std::normal_distribution<double> dist;
        for (Eigen::Index i = 0; i < N; ++i) v(i) = dist(rng);
    } else if (kind == "multiscale") {
        // three Gaussians with widths spanning coarse to fine scales
        const double centers[3] = {0.2, 0.55, 0.8};
        const double widths[3] = {0.08, 0.02, 0.005};
        for (Eigen::Index i = 0; i < N; ++i) {
            const double x = static_cast<double>(i) / N;
            double a = 0.0;
            for (int k = 0; k < 3; ++k)
                a += std::exp(-(x - centers[k]) * (x - centers[k]) / widths[k]);
            v(i) = a;
        }
    } else {
        throw ConfigError("unknown field kind: " + kind);
    }
    return v / v.norm();
}

int run_scaling(const json& cfg, const fs::path& dir) {
    const double target = cfg["target_err"].get<double>();
    std::ofstream csv(dir / "scaling.csv");
    csv << "n,field,chi_min,mps_params,l_min,qc_params,ratio,t_mps,t_qc_best,t_qc_worst,"
           "flag\n";
    for (int n : cfg["n_list"].get<std::vector<int>>()) {
        for (const auto& kind : cfg["fields"].get<std::vector<std::string>>()) {
            Vector v = synthetic_field(kind, n, cfg["seed"].get<unsigned>() + n);
            const int chi = min_bond_for_accuracy(v, target);
            const int mps_params = n * chi * chi;
            int l_min = -1;
            int qc_params = 0;
            std::string flag = "ok";
            if (chi == 1) {
                // product state: single-qubit rotations suffice, no entangling
                // layers needed
                l_min = 0;
                qc_params = n;
            } else {
                for (int L = 1; L <= cfg["max_layers"].get<int>(); ++L) {
                    BrickwallAnsatz a;
                    a.n = n;
                    a.layers = L;
                    a.theta = RealVector::Zero(ansatz_param_count(n, L));
                    OptimizerConfig oc = optimizer_config(cfg);
                    oc.f_threshold = 1.0;
                    TrainReport r = train_overlap(a, v, oc);
                    if (r.fidelity >= 1.0 - target) {
                        l_min = L;
                        qc_params = ansatz_param_count(n, L);
                        break;
                    }
                }
                if (l_min < 0) {
                    flag = "layer_cap";
                    l_min = cfg["max_layers"].get<int>();
                    qc_params = ansatz_param_count(n, l_min);
                }
            }
            CostModelReport cm = cost_models(n, chi, std::max(qc_params, 1),
                                             cfg["eps"].get<double>());
            csv << n << ',' << kind << ',' << chi << ',' << mps_params << ',' << l_min
                << ',' << qc_params << ','
                << fmt(qc_params / static_cast<double>(std::max(mps_params, 1))) << ','
                << fmt(cm.t_mps) << ',' << fmt(cm.t_qc_best) << ',' << fmt(cm.t_qc_worst)
                << ',' << flag << '\n';
        }
    }
    return 0;
}

// -- driver -------------------------------------------------------------------

int dispatch(const std::string& sub, const json& defaults, const std::string& config_path,
             const std::string& out_flag, int seed_flag,
             int (*runner)(const json&, const fs::path&)) {
    json cfg = resolve_config(defaults, load_user_config(config_path));
    if (seed_flag >= 0) cfg["seed"] = seed_flag;
    const fs::path dir = resolve_out_dir(out_flag, sub);
    fs::create_directories(dir);
    echo_config(dir, cfg);
    return runner(cfg, dir);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Variational quantum-inspired PDE solver toolkit"};
    app.require_subcommand(1);
    app.fallthrough();  // --config/--out/--seed may follow the subcommand

    std::string config_path, out_dir;
    int seed = -1;
    app.add_option("--config", config_path, "JSON config file")->capture_default_str();
    app.add_option("--out", out_dir,
                   "Output directory (default: $QPDE_OUT_ROOT/<subcommand>)");
    app.add_option("--seed", seed, "Override the config seed");

    struct Sub {
        const char* name;
        const char* desc;
        const json* defaults;
        int (*runner)(const json&, const fs::path&);
    };
    const Sub subs[] = {
        {"compile", "Compile and cache the operators of a problem", &compile_defaults,
         run_compile},
        {"evolve", "Run a variational time evolution", &evolve_defaults, run_evolve},
        {"sweep-alpha", "Success-probability sweeps over operators and widths",
         &sweep_defaults, run_sweep_alpha},
        {"landscape", "Single-parameter loss-landscape scan with shot noise",
         &landscape_defaults, run_landscape},
        {"scaling", "MPS-vs-circuit parameter and cost scaling study",
         &scaling_defaults, run_scaling},
    };
    for (const Sub& s : subs) app.add_subcommand(s.name, s.desc);

    CLI11_PARSE(app, argc, argv);

    try {
        for (const Sub& s : subs)
            if (app.get_subcommand(s.name)->parsed())
                return dispatch(s.name, *s.defaults, config_path, out_dir, seed, s.runner);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const StepFailure& e) {
        std::cerr << "step failure (sub-step " << e.sub_step
                  << ", best fidelity " << e.best_fidelity << "): " << e.what() << '\n';
        return 4;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
