#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcmclab/mcmclab.hpp"

using namespace mcmclab;

namespace {

enum ExitCode { exit_ok = 0, exit_input = 2, exit_certificate = 3, exit_minorization = 4, exit_numeric = 5 };

int exit_code_for(Errc e) {
    switch (e) {
    case Errc::CertificateInvalid:
    case Errc::NoValidDrift:
    case Errc::EmptyK:
        return exit_certificate;
    case Errc::AlphaZero:
        return exit_minorization;
    case Errc::SingularSystem:
    case Errc::EigensolverFailure:
    case Errc::NonDiagonalizable:
    case Errc::TailMassTooLarge:
    case Errc::SeriesDiverges:
    case Errc::NotContracting:
        return exit_numeric;
    default:
        return exit_input;
    }
}

void print_error(const std::string& code, const std::string& message, const std::optional<std::string>& hint = {},
                 const Error* err = nullptr) {
    Json e;
    e["code"] = code;
    e["message"] = message;
    if (hint) e["hint"] = *hint;
    if (err && err->index()) e["index"] = *err->index();
    if (err && err->value() && std::isfinite(*err->value())) e["value"] = *err->value();
    std::cout << Json{{"error", e}}.dump(2) << "\n";
}

// Shared by every subcommand.
struct Common {
    std::uint64_t seed = 0;
    std::string out;
    std::string format = "json";
};

void write_output(const Common& c, const std::string& text) {
    if (c.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(c.out, std::ios::binary);
    if (!f) fail(Errc::ParseError, "cannot write '" + c.out + "'");
    f << text;
}

void emit_json(const Common& c, const Json& doc) { write_output(c, doc.dump(2) + "\n"); }

Json echo_base(const std::string& command, const Common& c) {
    Json e;
    e["command"] = command;
    e["seed"] = c.seed;
    e["format"] = c.format;
    if (!c.out.empty()) e["out"] = c.out;
    return e;
}

void require_json_format(const Common& c, const char* command) {
    if (c.format != "json")
        fail(Errc::InvalidArgument, std::string(command) + " writes JSON only; CSV is reserved for time series");
}

template <class T>
Json opt_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

// A vector file is a JSON array or decimals separated by commas or newlines.
Vector load_vector(const std::string& path) {
    const std::string text = read_file(path);
    const auto t = detail::trim(text);
    std::vector<double> vals;
    if (!t.empty() && t.front() == '[') {
        Json j;
        try {
            j = Json::parse(t);
        } catch (const std::exception& e) {
            fail(Errc::ParseError, std::string("invalid JSON: ") + e.what());
        }
        for (const auto& x : j) {
            if (!x.is_number()) fail(Errc::ParseError, "non-numeric vector entry");
            vals.push_back(x.get<double>());
        }
    } else {
        std::string s(t);
        std::replace(s.begin(), s.end(), '\n', ',');
        std::size_t line = 1, pos = 0;
        while (pos <= s.size()) {
            const auto comma = s.find(',', pos);
            const std::string tok(detail::trim(s.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos)));
            if (!tok.empty() && tok.front() != '#') vals.push_back(detail::parse_double(tok, line));
            if (comma == std::string::npos) break;
            pos = comma + 1;
            ++line;
        }
    }
    if (vals.empty()) fail(Errc::ParseError, "vector file '" + path + "' is empty");
    return Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

double tv_distance(const Vector& p, const Vector& q) { return 0.5 * (p - q).lpNorm<1>(); }

// ---------------------------------------------------------------------------
// analyze

struct AnalyzeArgs {
    std::string matrix;
};

Json cmd_analyze(const AnalyzeArgs& a, const Common& c) {
    require_json_format(c, "analyze");
    const StochasticMatrix P = StochasticMatrix::validate(load_matrix(a.matrix));
    const ChainStructureReport r = classify(P);
    Json doc;
    Json echo = echo_base("analyze", c);
    echo["matrix"] = a.matrix;
    doc["config_echo"] = echo;
    doc["n"] = P.size();
    doc["irreducible"] = r.irreducible;
    doc["period"] = r.irreducible ? Json(r.periods[0]) : Json(nullptr);
    doc["aperiodic"] = r.aperiodic;
    const Json s = structure_json(r);
    doc["classes"] = s["classes"];
    doc["closed"] = s["closed"];
    doc["periods"] = s["periods"];
    doc["reversible_alpha"] = s["reversible_alpha"];
    const SpectralReport spec = full_spectrum(P);
    Json sj = spectral_json(spec);
    doc["pi"] = r.irreducible ? sj["pi"] : Json(nullptr);
    if (r.irreducible) {
        const Vector& pi = spec.pi.weights();
        doc["residual_l1"] = l1_residual(pi, P.matrix());
        doc["mean_return_times"] = vector_json(pi.cwiseInverse());
    }
    doc["eigenvalues"] = sj["eigenvalues"];
    doc["rho"] = sj["rho"];
    doc["gap"] = sj["gap"];
    doc["unit_modulus_count"] = sj["unit_modulus_count"];
    return doc;
}

// ---------------------------------------------------------------------------
// certify

struct CertifyArgs {
    std::string matrix;
    std::string model;
    std::size_t n = 16;
    double beta = 0.5;
    double h = 0.5;
    std::string V = "m2";
    std::size_t T = 1;
    std::optional<double> R;
    std::optional<double> alpha0;
    std::optional<double> gamma0;
    std::optional<double> c;
    std::optional<double> d;
    bool lazy = false;
    std::size_t audit_pairs = 200;
    std::size_t horizon = 100;
};

struct CertifyResult {
    Json doc;
    bool passed = false;
};

CertifyResult cmd_certify(const CertifyArgs& a, const Common& c) {
    require_json_format(c, "certify");
    if (a.matrix.empty() == a.model.empty()) fail(Errc::InvalidArgument, "give exactly one of --matrix or --model");
    if (a.T < 1) fail(Errc::InvalidArgument, "--T must be at least 1");

    std::optional<IsingModel> ising;
    Matrix raw;
    if (!a.matrix.empty()) {
        raw = load_matrix(a.matrix);
    } else if (a.model == "ehrenfest-m") {
        raw = magnetization_chain(a.n).matrix();
    } else if (a.model == "ising") {
        if (a.n > 14) fail(Errc::InvalidArgument, "--model ising builds the full matrix; use --n <= 14");
        ising = IsingModel::make(a.n, a.beta, a.h);
        raw = ising_glauber_matrix(*ising, AcceptanceRule::for_model(*ising)).matrix();
    } else {
        fail(Errc::InvalidArgument, "unknown --model '" + a.model + "' (ehrenfest-m, ising)");
    }
    if (a.lazy) raw = 0.5 * (Matrix::Identity(raw.rows(), raw.cols()) + raw);
    const StochasticMatrix P = StochasticMatrix::validate(std::move(raw));
    const auto n = static_cast<Eigen::Index>(P.size());

    Vector V;
    if (a.V == "m2") {
        if (ising) {
            V.resize(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                const double m = magnetization(SpinConfig::from_index(a.n, static_cast<std::uint64_t>(i)));
                V(i) = m * m;
            }
        } else {
            // state k carries m = 2k - (n-1)
            V = magnetization_values(static_cast<std::size_t>(n - 1)).array().square();
        }
    } else if (a.V == "energy-gap") {
        if (!ising) fail(Errc::InvalidArgument, "--V energy-gap needs --model ising");
        const Vector H = ising_energies(*ising);
        V = H.array() - H.minCoeff();
    } else {
        V = load_vector(a.V);
    }
    check_dim(P, V.size(), "V");

    DriftCertificate base;
    if (a.c || a.d) {
        if (!(a.c && a.d)) fail(Errc::InvalidArgument, "--c and --d go together");
        base = DriftCertificate{DriftKind::geometric, *a.c, *a.d, V, {}, {}};
        if (!verify_drift(P, base))
            fail(Errc::CertificateInvalid, "supplied drift constants violate the inequality", std::nullopt,
                 drift_violation(P, base));
    } else {
        base = fit_geometric_drift(P, V);
    }
    const StochasticMatrix PT = matrix_power(P, a.T);
    const DriftCertificate drift = accelerate_drift(base, a.T);
    if (!verify_drift(PT, drift))
        fail(Errc::CertificateInvalid, "accelerated drift fails on the T-step chain", std::nullopt,
             drift_violation(PT, drift));
    const double R = a.R.value_or(4.0 * drift.d / drift.c);
    const MinorizationCertificate minor = find_minorization(PT, drift, R);
    const ConvergenceCertificate cert = hairer_mattingly_constants(drift, minor, a.alpha0, a.gamma0);

    RngStream rng(c.seed);
    const ContractionAudit audit = contraction_audit(PT, drift, minor, cert, a.audit_pairs, rng);

    // Bound check with f = V from the states of smallest and largest V.
    Eigen::Index lo = 0, hi = 0;
    V.minCoeff(&lo);
    V.maxCoeff(&hi);
    double excess = -INFINITY, excess_beta = -INFINITY;
    for (Eigen::Index x : {lo, hi}) {
        for (const auto& pt : convergence_bound_series(PT, drift, minor, cert, V, static_cast<std::size_t>(x), a.horizon)) {
            excess = std::max(excess, pt.exact - pt.bound);
            excess_beta = std::max(excess_beta, pt.exact - pt.bound_beta);
        }
    }
    const bool bound_ok = excess <= 1e-9 && excess_beta <= 1e-9;

    Json echo = echo_base("certify", c);
    if (!a.matrix.empty()) echo["matrix"] = a.matrix;
    if (!a.model.empty()) {
        echo["model"] = a.model;
        echo["n"] = a.n;
        if (ising) {
            echo["beta"] = a.beta;
            echo["h"] = a.h;
        }
    }
    echo["V"] = a.V;
    echo["T"] = a.T;
    echo["R"] = R;
    echo["alpha0"] = cert.alpha0;
    echo["gamma0"] = cert.gamma0;
    if (a.c) echo["c"] = *a.c;
    if (a.d) echo["d"] = *a.d;
    echo["lazy"] = a.lazy;
    echo["audit-pairs"] = a.audit_pairs;
    echo["horizon"] = a.horizon;

    CertifyResult res;
    res.doc["config_echo"] = echo;
    res.doc["certificate"] = certificate_json(drift, minor, cert);
    res.doc["base_drift"] = Json{{"c", base.c}, {"d", base.d}};
    res.doc["M_sup"] = opt_json(cert.M_sup);
    Json au;
    au["pairs"] = audit.pairs;
    au["worst_ratio"] = audit.worst_ratio;
    au["gamma_bar"] = cert.gamma_bar;
    au["contraction_passed"] = audit.passed;
    au["horizon"] = a.horizon;
    au["bound_max_excess"] = excess;
    au["bound_beta_max_excess"] = excess_beta;
    au["bound_passed"] = bound_ok;
    au["passed"] = audit.passed && bound_ok;
    res.doc["audit"] = au;
    res.passed = audit.passed && bound_ok;
    return res;
}

// ---------------------------------------------------------------------------
// ising

struct IsingArgs {
    std::size_t n = 8;
    double beta = 0.5;
    double h = 0.5;
    std::optional<double> q;
    std::string rule = "metropolis";
    std::string start = "plus";
    std::size_t steps = 100000;
    std::size_t burn_in = 0;
    std::size_t replicas = 1;
    std::size_t record_every = 0;
};

std::string cmd_ising(const IsingArgs& a, const Common& c, Json& doc) {
    if (a.replicas < 1) fail(Errc::InvalidArgument, "--replicas must be at least 1");
    const IsingModel model = IsingModel::make(a.n, a.beta, a.h, a.q.value_or(-1.0));
    AcceptanceKind kind;
    if (a.rule == "metropolis") kind = AcceptanceKind::metropolis;
    else if (a.rule == "heatbath") kind = AcceptanceKind::heatbath;
    else fail(Errc::InvalidArgument, "unknown --rule '" + a.rule + "' (metropolis, heatbath)");
    const AcceptanceRule rule = AcceptanceRule::for_model(model, kind);
    if (a.start != "plus" && a.start != "minus" && a.start != "alternating" && a.start != "random")
        fail(Errc::InvalidArgument, "unknown --start '" + a.start + "' (plus, minus, alternating, random)");

    const bool exact = a.n <= 20;
    const bool csv = c.format == "csv";
    const std::size_t record_every = a.record_every > 0 ? a.record_every : (csv ? std::max<std::size_t>(1, a.steps / 1000) : 0);
    const RngStream master(c.seed);
    std::vector<GlauberRun> runs(a.replicas);
    parallel_for(a.replicas, [&](std::size_t r) {
        RngStream rng = master.derive(r);
        SpinConfig x = a.start == "minus"         ? SpinConfig::all_minus(a.n)
                       : a.start == "alternating" ? SpinConfig::alternating(a.n)
                       : a.start == "random"      ? SpinConfig::from_index(a.n, rng.index(std::uint64_t{1} << a.n))
                                                  : SpinConfig::all_plus(a.n);
        if (a.burn_in > 0) x = simulate_glauber(model, x, rule, a.burn_in, rng).final_state;
        runs[r] = simulate_glauber(model, x, rule, a.steps, rng, r == 0 ? record_every : 0, exact);
    });

    Json echo = echo_base("ising", c);
    echo["n"] = a.n;
    echo["beta"] = a.beta;
    echo["h"] = a.h;
    echo["q"] = model.q;
    echo["rule"] = a.rule;
    echo["start"] = a.start;
    echo["steps"] = a.steps;
    echo["burn-in"] = a.burn_in;
    echo["replicas"] = a.replicas;
    echo["record-every"] = record_every;

    if (csv) {
        std::ostringstream out;
        out << "# config_echo " << echo.dump() << "\n";
        out << "step,magnetization,energy\n";
        for (const auto& p : runs[0].trace) out << p.step << ',' << p.magnetization << ',' << Json(p.energy).dump() << '\n';
        doc = Json{{"config_echo", echo}};
        return out.str();
    }

    std::size_t accepted = 0;
    Json finals = Json::array();
    for (const auto& run : runs) {
        accepted += run.accepted;
        finals.push_back(Json{{"magnetization", run.magnetization}, {"energy", run.energy}});
    }
    doc["config_echo"] = echo;
    doc["total_steps"] = a.steps * a.replicas;
    doc["acceptance_rate"] = a.steps > 0 ? double(accepted) / double(a.steps * a.replicas) : 0.0;
    doc["final"] = finals;
    if (exact && a.steps > 0) {
        const Vector gibbs = gibbs_distribution(model);
        Vector emp = Vector::Zero(gibbs.size());
        for (const auto& run : runs)
            for (Eigen::Index i = 0; i < emp.size(); ++i) emp(i) += static_cast<double>(run.visits[static_cast<std::size_t>(i)]);
        emp /= emp.sum();
        double mean_m = 0.0, mean_m_exact = 0.0, mean_e = 0.0, mean_e_exact = 0.0;
        const Vector H = ising_energies(model);
        for (Eigen::Index i = 0; i < emp.size(); ++i) {
            const double m = magnetization(SpinConfig::from_index(a.n, static_cast<std::uint64_t>(i)));
            mean_m += emp(i) * m;
            mean_m_exact += gibbs(i) * m;
            mean_e += emp(i) * H(i);
            mean_e_exact += gibbs(i) * H(i);
        }
        doc["mean_magnetization"] = mean_m;
        doc["mean_magnetization_exact"] = mean_m_exact;
        doc["mean_energy"] = mean_e;
        doc["mean_energy_exact"] = mean_e_exact;
        doc["tv_exact"] = tv_distance(emp, gibbs);
    } else {
        doc["tv_exact"] = nullptr;
    }
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// ehrenfest

struct EhrenfestArgs {
    std::size_t n = 10;
    std::size_t start = 0;
    std::size_t steps = 100000;
    std::size_t burn_in = 0;
    std::size_t replicas = 1;
};

std::string cmd_ehrenfest(const EhrenfestArgs& a, const Common& c, Json& doc) {
    if (a.replicas < 1) fail(Errc::InvalidArgument, "--replicas must be at least 1");
    const StochasticMatrix P = ehrenfest_matrix(a.n);
    if (a.start > a.n) fail(Errc::InvalidArgument, "--start must lie in 0..n");
    const RowSampler sampler(P);
    const RngStream master(c.seed);
    const bool csv = c.format == "csv";
    std::vector<std::vector<std::uint64_t>> counts(a.replicas, std::vector<std::uint64_t>(a.n + 1, 0));
    std::vector<std::size_t> path;
    parallel_for(a.replicas, [&](std::size_t r) {
        RngStream rng = master.derive(r);
        std::size_t x = a.start;
        for (std::size_t s = 0; s < a.burn_in; ++s) x = sampler.step(x, rng);
        std::vector<std::size_t> local;
        if (r == 0 && csv) local.push_back(x);
        for (std::size_t s = 0; s < a.steps; ++s) {
            x = sampler.step(x, rng);
            ++counts[r][x];
            if (r == 0 && csv) local.push_back(x);
        }
        if (r == 0) path = std::move(local);
    });

    Json echo = echo_base("ehrenfest", c);
    echo["n"] = a.n;
    echo["start"] = a.start;
    echo["steps"] = a.steps;
    echo["burn-in"] = a.burn_in;
    echo["replicas"] = a.replicas;
    if (csv) {
        std::ostringstream out;
        out << "# config_echo " << echo.dump() << "\n";
        out << "step,state\n";
        for (std::size_t s = 0; s < path.size(); ++s) out << s << ',' << path[s] << '\n';
        doc = Json{{"config_echo", echo}};
        return out.str();
    }

    Vector pi(static_cast<Eigen::Index>(a.n + 1));
    for (std::size_t k = 0; k <= a.n; ++k)
        pi(static_cast<Eigen::Index>(k)) = std::exp(std::lgamma(double(a.n) + 1) - std::lgamma(double(k) + 1) -
                                                    std::lgamma(double(a.n - k) + 1) - double(a.n) * std::log(2.0));
    Vector occ = Vector::Zero(pi.size());
    for (const auto& cnt : counts)
        for (std::size_t k = 0; k <= a.n; ++k) occ(static_cast<Eigen::Index>(k)) += static_cast<double>(cnt[k]);
    const double visits_start = occ(static_cast<Eigen::Index>(a.start));
    if (occ.sum() > 0) occ /= occ.sum();

    doc["config_echo"] = echo;
    doc["pi_exact"] = vector_json(pi);
    doc["occupation"] = vector_json(occ);
    doc["tv_exact"] = a.steps > 0 ? Json(tv_distance(occ, pi)) : Json(nullptr);
    doc["mean_return_time_exact"] = mean_return_time(P, a.start);
    doc["mean_return_time_empirical"] =
        visits_start > 0 ? Json(double(a.steps * a.replicas) / visits_start) : Json(nullptr);
    Vector ev(static_cast<Eigen::Index>(a.n + 1));
    for (std::size_t k = 0; k <= a.n; ++k) ev(static_cast<Eigen::Index>(k)) = 1.0 - 2.0 * double(k) / double(a.n);
    doc["eigenvalues"] = vector_json(ev);
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// ar1 (and the other kernel presets)

struct KernelArgs {
    std::string kernel = "ar1:a=0.5,sigma=1";
    std::size_t M = 513;
    std::optional<double> L;
    std::optional<double> R;
    std::optional<double> alpha0;
    std::optional<double> gamma0;
    double x0 = 0.0;
    std::size_t steps = 0;
    std::size_t burn_in = 0;
    std::size_t replicas = 0;
    double hit_lo = -1.0;
    double hit_hi = 1.0;
    std::size_t cap = 10000;
};

std::string cmd_ar1(const KernelArgs& a, const Common& c, Json& doc) {
    const KernelPreset preset = parse_kernel_preset(a.kernel);
    const double L = a.L.value_or(preset.default_L);
    const RngStream master(c.seed);
    const bool csv = c.format == "csv";

    // Trajectory on stream 0, Harris replicas on derived streams.
    std::vector<double> path;
    double sim_mean = 0.0, sim_m2 = 0.0;
    if (a.steps > 0) {
        RngStream rng = master.derive(0);
        double x = a.x0;
        for (std::size_t s = 0; s < a.burn_in; ++s) x = preset.kernel.sampler(x, rng);
        if (csv) path.push_back(x);
        detail::Welford w;
        for (std::size_t s = 0; s < a.steps; ++s) {
            x = preset.kernel.sampler(x, rng);
            w.add(x);
            if (csv) path.push_back(x);
        }
        sim_mean = w.mean;
        sim_m2 = w.sample_variance();
    }

    Json echo = echo_base("ar1", c);
    echo["kernel"] = a.kernel;
    echo["M"] = a.M;
    echo["L"] = L;
    if (a.R) echo["R"] = *a.R;
    if (a.alpha0) echo["alpha0"] = *a.alpha0;
    if (a.gamma0) echo["gamma0"] = *a.gamma0;
    echo["x0"] = a.x0;
    echo["steps"] = a.steps;
    echo["burn-in"] = a.burn_in;
    echo["replicas"] = a.replicas;
    echo["hit-lo"] = a.hit_lo;
    echo["hit-hi"] = a.hit_hi;
    echo["cap"] = a.cap;

    if (csv) {
        if (a.steps == 0) fail(Errc::InvalidArgument, "CSV output is the simulated trajectory; give --steps");
        std::ostringstream out;
        out << "# config_echo " << echo.dump() << "\n";
        out << "step,x\n";
        for (std::size_t s = 0; s < path.size(); ++s) out << s << ',' << Json(path[s]).dump() << '\n';
        doc = Json{{"config_echo", echo}};
        return out.str();
    }

    doc["config_echo"] = echo;
    doc["kernel"] = preset.kernel.name;
    const GridChain grid = discretize(preset.kernel, L, a.M);
    const ProbabilityVector inv = grid_invariant(grid);
    const Vector density = inv.weights().cwiseQuotient(grid.weights);
    const double grid_mean = inv.weights().dot(grid.nodes);
    const double grid_var = inv.weights().dot(grid.nodes.cwiseProduct(grid.nodes)) - grid_mean * grid_mean;

    if (preset.ar1) {
        const Ar1Model m = *preset.ar1;
        const DriftCertificate drift = ar1_drift(m);
        const ContinuousMinorization cm = ar1_minorization(m, a.R);
        MinorizationCertificate minor;
        minor.R = cm.R;
        minor.alpha = cm.alpha;
        const ConvergenceCertificate cert = hairer_mattingly_constants(drift, minor, a.alpha0, a.gamma0);
        Json cj;
        cj["c"] = drift.c;
        cj["d"] = drift.d;
        cj["R"] = cm.R;
        cj["K_interval"] = Json::array({-cm.k_half_width, cm.k_half_width});
        cj["alpha"] = cm.alpha;
        cj["alpha0"] = cert.alpha0;
        cj["gamma0"] = cert.gamma0;
        cj["beta"] = cert.beta;
        cj["gamma_bar"] = cert.gamma_bar;
        cj["M_bound"] = cert.M_bound;
        doc["certificate"] = cj;
        // Generator of V = x^2 on the grid, compared with -(1-a^2)x^2 + sigma^2 on the middle half.
        const Vector V = grid.nodes.cwiseProduct(grid.nodes);
        const Vector LV = generator_apply(grid.matrix, V);
        double err = 0.0;
        for (Eigen::Index i = 0; i < V.size(); ++i)
            if (std::abs(grid.nodes(i)) <= 0.5 * L) err = std::max(err, std::abs(LV(i) - (-drift.c * V(i) + drift.d)));
        doc["generator_max_error"] = err;
        doc["invariant_variance"] = Json{{"closed_form", ar1_invariant(m).variance},
                                         {"grid", grid_var},
                                         {"simulated", a.steps > 1 ? Json(sim_m2) : Json(nullptr)}};
    } else {
        doc["invariant_variance"] = Json{{"grid", grid_var}, {"simulated", a.steps > 1 ? Json(sim_m2) : Json(nullptr)}};
    }
    doc["invariant_mean"] = Json{{"grid", grid_mean}, {"simulated", a.steps > 0 ? Json(sim_mean) : Json(nullptr)}};

    if (a.replicas > 0) {
        const HarrisDiagnostics hd =
            harris_diagnostics(preset.kernel, a.x0, a.hit_lo, a.hit_hi, a.cap, a.replicas, master.derive(1));
        doc["harris"] = Json{{"hit_fraction", hd.hit_fraction},
                             {"mean_hitting_estimate", hd.mean_hitting_estimate},
                             {"censored", hd.censored},
                             {"censoring", hd.censoring}};
    }
    doc["grid"] = Json{{"L", grid.L},
                       {"M", grid.size()},
                       {"max_defect", grid.defects.cwiseAbs().maxCoeff()},
                       {"nodes", vector_json(grid.nodes)},
                       {"invariant_density", vector_json(density)},
                       {"defects", vector_json(grid.defects)}};
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// mc-volume

struct VolumeArgs {
    std::size_t dim = 2;
    std::optional<double> ball;
    std::string inequalities;
    std::size_t samples = 100000;
    double eps = 1e-3;
    double delta = 1e-2;
};

Json cmd_mc_volume(const VolumeArgs& a, const Common& c) {
    require_json_format(c, "mc-volume");
    std::vector<Inequality> ineq;
    if (a.ball) {
        if (!(*a.ball > 0.0)) fail(Errc::ParameterOutOfRange, "--ball radius must be positive", std::nullopt, *a.ball);
        ineq.push_back(ball_inequality(Vector::Constant(static_cast<Eigen::Index>(a.dim), 0.5), *a.ball));
    }
    if (!a.inequalities.empty()) {
        Json j;
        try {
            j = Json::parse(read_file(a.inequalities));
        } catch (const Json::exception& e) {
            fail(Errc::ParseError, std::string("invalid JSON: ") + e.what());
        }
        for (auto& f : inequalities_from_json(j, a.dim)) ineq.push_back(std::move(f));
    }
    if (ineq.empty()) fail(Errc::InvalidArgument, "give --ball or --inequalities");
    RngStream rng(c.seed);
    const EstimatorReport r = mc_volume(a.dim, ineq, a.samples, rng, a.eps, a.delta);

    Json echo = echo_base("mc-volume", c);
    echo["dim"] = a.dim;
    if (a.ball) echo["ball"] = *a.ball;
    if (!a.inequalities.empty()) echo["inequalities"] = a.inequalities;
    echo["samples"] = a.samples;
    echo["eps"] = a.eps;
    echo["delta"] = a.delta;
    Json doc;
    doc["config_echo"] = echo;
    const Json est = estimator_json(r);
    for (auto it = est.begin(); it != est.end(); ++it) doc[it.key()] = it.value();
    // Ball centred in the cube with radius <= 1/2 lies inside it: closed-form volume.
    if (a.ball && a.inequalities.empty() && *a.ball <= 0.5) {
        const double d = static_cast<double>(a.dim);
        const double exact = std::pow(std::numbers::pi, d / 2.0) / std::tgamma(d / 2.0 + 1.0) * std::pow(*a.ball, d);
        doc["exact"] = exact;
        doc["within_ci"] = std::abs(r.mean - exact) <= r.ci_halfwidth;
    }
    return doc;
}

// ---------------------------------------------------------------------------
// textgen

struct TextArgs {
    std::string corpus;
    std::size_t length = 500;
    std::string policy = "letters-punct";
    double smoothing = 0.0;
};

Json cmd_textgen(const TextArgs& a, const Common& c) {
    require_json_format(c, "textgen");
    AlphabetPolicy policy;
    if (a.policy == "letters-punct") policy = AlphabetPolicy::letters_punct;
    else if (a.policy == "sixty") policy = AlphabetPolicy::sixty;
    else if (a.policy == "all") policy = AlphabetPolicy::all;
    else fail(Errc::InvalidArgument, "unknown --policy '" + a.policy + "' (letters-punct, sixty, all)");
    const CorpusModel model = corpus_fit(read_file(a.corpus), policy, a.smoothing);
    RngStream rng(c.seed);
    const std::string text = corpus_generate(model, a.length, rng);

    Json echo = echo_base("textgen", c);
    echo["corpus"] = a.corpus;
    echo["length"] = a.length;
    echo["policy"] = a.policy;
    echo["smoothing"] = a.smoothing;
    std::string alphabet;
    for (char32_t s : model.alphabet) detail::append_utf8(alphabet, s);
    Json doc;
    doc["config_echo"] = echo;
    doc["alphabet"] = alphabet;
    doc["alphabet_size"] = model.alphabet.size();
    doc["symbols"] = a.length;
    doc["text"] = text;
    return doc;
}

// ---------------------------------------------------------------------------
// --config replay: the echoed keys become flags placed before the explicit
// arguments, so anything given on the command line wins (options take the last value).

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
    std::string path;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) {
            path = args[++i];
        } else if (args[i].rfind("--config=", 0) == 0) {
            path = args[i].substr(9);
        } else {
            rest.push_back(args[i]);
        }
    }
    if (path.empty()) return args;
    Json j;
    try {
        j = Json::parse(read_file(path));
    } catch (const Json::exception& e) {
        fail(Errc::ParseError, std::string("invalid config JSON: ") + e.what());
    }
    const Json& echo = j.contains("config_echo") ? j["config_echo"] : j;
    if (!echo.is_object() || !echo.contains("command") || !echo["command"].is_string())
        fail(Errc::ParseError, "config needs a \"command\" entry");
    const std::string command = echo["command"].get<std::string>();
    std::vector<std::string> out{command};
    for (auto it = echo.begin(); it != echo.end(); ++it) {
        if (it.key() == "command" || it.value().is_null()) continue;
        const std::string flag = "--" + it.key();
        if (it.value().is_boolean()) {
            if (it.value().get<bool>()) out.push_back(flag);
        } else if (it.value().is_string()) {
            out.push_back(flag);
            out.push_back(it.value().get<std::string>());
        } else if (it.value().is_number()) {
            out.push_back(flag);
            out.push_back(it.value().dump());
        } else {
            fail(Errc::ParseError, "config entry '" + it.key() + "' must be a scalar");
        }
    }
    std::size_t skip = (!rest.empty() && rest[0] == command) ? 1 : 0;
    out.insert(out.end(), rest.begin() + static_cast<std::ptrdiff_t>(skip), rest.end());
    return out;
}

void add_common(CLI::App* sub, Common& c, bool csv) {
    sub->add_option("--seed", c.seed, "Master seed (64-bit)")->capture_default_str();
    sub->add_option("--out", c.out, "Write the report to this file instead of stdout");
    sub->add_option("--format", c.format, csv ? "json, or csv for the time series" : "Output format (json)")
        ->check(CLI::IsMember({"json", "csv"}))
        ->capture_default_str();
    sub->add_option("--config", "Replay a run from a JSON report or its config_echo block");
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config(args);
    } catch (const Error& e) {
        print_error(std::string(errc_name(e.code())), e.detail(), {}, &e);
        return exit_input;
    }

    CLI::App app{"Finite and continuous Markov chains: analysis, drift certificates and MCMC sampling.\n"
                 "MCMCLAB_THREADS caps the number of worker threads (0 or unset = all cores); results do not "
                 "depend on it.\nExit codes: 0 ok, 2 input error, 3 certificate invalid, 4 minorization failed "
                 "(alpha = 0), 5 numerical failure."};
    app.name("mcmclab");
    app.set_help_flag("--help", "Print this help message and exit");
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);
    Common common;

    AnalyzeArgs an;
    auto* s_an = app.add_subcommand("analyze", "Structure and spectrum of a stochastic matrix (CSV or JSON file)");
    s_an->add_option("--matrix", an.matrix, "Matrix file: CSV rows or {\"n\":..,\"rows\":[..]}")->required();
    add_common(s_an, common, false);

    CertifyArgs ce;
    auto* s_ce = app.add_subcommand("certify", "Drift + minorization certificate with an audit");
    s_ce->add_option("--matrix", ce.matrix, "Matrix file");
    s_ce->add_option("--model", ce.model, "Built-in chain: ehrenfest-m (magnetization) or ising (Glauber)");
    s_ce->add_option("--n", ce.n, "Size parameter N of the built-in model")->capture_default_str();
    s_ce->add_option("--beta", ce.beta, "Inverse temperature for --model ising")->capture_default_str();
    s_ce->add_option("--h", ce.h, "Field for --model ising")->capture_default_str();
    s_ce->add_option("--V", ce.V, "Lyapunov function: m2, energy-gap, or a vector file")->capture_default_str();
    s_ce->add_option("--T", ce.T, "Certify the T-step chain")->capture_default_str();
    s_ce->add_option("--R", ce.R, "Level of the small set {V < R} (default 4d/c)");
    s_ce->add_option("--alpha0", ce.alpha0, "alpha0 in (0, alpha) (default alpha/2)");
    s_ce->add_option("--gamma0", ce.gamma0, "gamma0 in (gamma + 2d/R, 1) (default midpoint)");
    s_ce->add_option("--c", ce.c, "Use this drift rate instead of fitting one (needs --d)");
    s_ce->add_option("--d", ce.d, "Use this drift constant instead of fitting one (needs --c)");
    s_ce->add_flag("--lazy", ce.lazy, "Certify (I + P)/2 instead of P");
    s_ce->add_option("--audit-pairs", ce.audit_pairs, "Random measure pairs in the contraction audit")
        ->capture_default_str();
    s_ce->add_option("--horizon", ce.horizon, "Check the convergence bound for n up to this")->capture_default_str();
    add_common(s_ce, common, false);

    IsingArgs is;
    auto* s_is = app.add_subcommand("ising", "Glauber dynamics for the Ising model on a circle");
    s_is->add_option("--n", is.n, "Number of spins")->capture_default_str();
    s_is->add_option("--beta", is.beta, "Inverse temperature")->capture_default_str();
    s_is->add_option("--h", is.h, "External field in (0,1]")->capture_default_str();
    s_is->add_option("--q", is.q, "Per-site proposal weight, qN <= 1 (default 1/N)");
    s_is->add_option("--rule", is.rule, "metropolis or heatbath")->capture_default_str();
    s_is->add_option("--start", is.start, "plus, minus, alternating or random")->capture_default_str();
    s_is->add_option("--steps", is.steps, "Steps per replica")->capture_default_str();
    s_is->add_option("--burn-in", is.burn_in, "Discarded steps before recording")->capture_default_str();
    s_is->add_option("--replicas", is.replicas, "Independent replicas, pooled")->capture_default_str();
    s_is->add_option("--record-every", is.record_every, "CSV sampling stride (default steps/1000)");
    add_common(s_is, common, true);

    EhrenfestArgs eh;
    auto* s_eh = app.add_subcommand("ehrenfest", "Simulate the Ehrenfest urn and compare with the binomial law");
    s_eh->add_option("--n", eh.n, "Number of balls")->capture_default_str();
    s_eh->add_option("--start", eh.start, "Initial number of balls in the first urn")->capture_default_str();
    s_eh->add_option("--steps", eh.steps, "Steps per replica")->capture_default_str();
    s_eh->add_option("--burn-in", eh.burn_in, "Discarded steps")->capture_default_str();
    s_eh->add_option("--replicas", eh.replicas, "Independent replicas, pooled")->capture_default_str();
    add_common(s_eh, common, true);

    KernelArgs ar;
    auto* s_ar = app.add_subcommand("ar1", "AR(1) and other 1D kernels: grid chain, certificate, simulation");
    s_ar->add_option("--kernel", ar.kernel, "Preset: ar1:a=..,sigma=.. | gaussian-walk:sigma=.. | "
                                            "noisy-map:logistic,r=..,sigma=..")
        ->capture_default_str();
    s_ar->add_option("--M", ar.M, "Grid nodes")->capture_default_str();
    s_ar->add_option("--L", ar.L, "Grid half-width (default from the preset)");
    s_ar->add_option("--R", ar.R, "Small-set level for the AR(1) certificate (default 4 sigma^2/(1-a^2))");
    s_ar->add_option("--alpha0", ar.alpha0, "alpha0 for the certificate");
    s_ar->add_option("--gamma0", ar.gamma0, "gamma0 for the certificate");
    s_ar->add_option("--x0", ar.x0, "Starting point")->capture_default_str();
    s_ar->add_option("--steps", ar.steps, "Length of the simulated trajectory")->capture_default_str();
    s_ar->add_option("--burn-in", ar.burn_in, "Discarded steps")->capture_default_str();
    s_ar->add_option("--replicas", ar.replicas, "Replicas for the hitting-time diagnostic (0 = skip)")
        ->capture_default_str();
    s_ar->add_option("--hit-lo", ar.hit_lo, "Lower end of the target interval")->capture_default_str();
    s_ar->add_option("--hit-hi", ar.hit_hi, "Upper end of the target interval")->capture_default_str();
    s_ar->add_option("--cap", ar.cap, "Censoring horizon for hitting times")->capture_default_str();
    add_common(s_ar, common, true);

    VolumeArgs vo;
    auto* s_vo = app.add_subcommand("mc-volume", "Hit-or-miss volume of a region of the unit cube");
    s_vo->add_option("--dim", vo.dim, "Dimension")->capture_default_str();
    s_vo->add_option("--ball", vo.ball, "Ball of this radius centred in the cube");
    s_vo->add_option("--inequalities", vo.inequalities,
                     "JSON file: [{\"type\":\"affine\",\"a\":[..],\"b\":..}, {\"type\":\"ball\",\"center\":[..],"
                     "\"radius\":..}]");
    s_vo->add_option("--samples", vo.samples, "Number of uniform points")->capture_default_str();
    s_vo->add_option("--eps", vo.eps, "Confidence level parameter of the Chebychev interval")->capture_default_str();
    s_vo->add_option("--delta", vo.delta, "Target half-width for the sample-size planner")->capture_default_str();
    add_common(s_vo, common, false);

    TextArgs tx;
    auto* s_tx = app.add_subcommand("textgen", "Fit a bigram chain to a UTF-8 corpus and generate text");
    s_tx->add_option("--corpus", tx.corpus, "Corpus file (UTF-8)")->required();
    s_tx->add_option("--length", tx.length, "Symbols to generate")->capture_default_str();
    s_tx->add_option("--policy", tx.policy, "Alphabet: letters-punct, sixty or all")->capture_default_str();
    s_tx->add_option("--smoothing", tx.smoothing, "Additive smoothing of bigram counts")->capture_default_str();
    add_common(s_tx, common, false);

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("ParseError", e.what());
        return exit_input;
    }

    try {
        if (*s_an) {
            emit_json(common, cmd_analyze(an, common));
        } else if (*s_ce) {
            CertifyResult r;
            try {
                r = cmd_certify(ce, common);
            } catch (const Error& e) {
                if (e.code() == Errc::AlphaZero) {
                    print_error(std::string(errc_name(e.code())), e.detail(), std::string("increase --T"), &e);
                    return exit_minorization;
                }
                throw;
            }
            emit_json(common, r.doc);
            return r.passed ? exit_ok : exit_certificate;
        } else if (*s_is) {
            Json doc;
            write_output(common, cmd_ising(is, common, doc));
        } else if (*s_eh) {
            Json doc;
            write_output(common, cmd_ehrenfest(eh, common, doc));
        } else if (*s_ar) {
            Json doc;
            write_output(common, cmd_ar1(ar, common, doc));
        } else if (*s_vo) {
            emit_json(common, cmd_mc_volume(vo, common));
        } else if (*s_tx) {
            emit_json(common, cmd_textgen(tx, common));
        }
    } catch (const Error& e) {
        print_error(std::string(errc_name(e.code())), e.detail(), {}, &e);
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        print_error("InternalError", e.what());
        return exit_numeric;
    }
    return exit_ok;
}
