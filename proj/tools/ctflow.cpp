#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <ctflow/ctflow.hpp>

using ctflow::cplx;
using ctflow::cvec;
using ctflow::json;

namespace {

std::vector<double> parse_number_list(const std::string& s, const char* what) {
    std::vector<double> values;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            size_t used = 0;
            values.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw ctflow::ConfigError(std::string(what) + ": cannot parse number '" + item + "'");
        }
    }
    if (values.empty())
        throw ctflow::ConfigError(std::string(what) + ": empty list");
    return values;
}

json parse_range(const std::string& s, const char* what) {
    const size_t colon = s.find(':');
    if (colon == std::string::npos)
        throw ctflow::ConfigError(std::string(what) + ": expected lo:hi, got '" + s + "'");
    const auto lo = parse_number_list(s.substr(0, colon), what);
    const auto hi = parse_number_list(s.substr(colon + 1), what);
    if (lo.size() != 1 || hi.size() != 1)
        throw ctflow::ConfigError(std::string(what) + ": expected lo:hi, got '" + s + "'");
    return json::array({lo[0], hi[0]});
}

json parse_grid(const std::string& s) {
    const size_t x = s.find('x');
    if (x == std::string::npos)
        throw ctflow::ConfigError("grid: expected NxM, got '" + s + "'");
    try {
        const int n_re = std::stoi(s.substr(0, x));
        const int n_im = std::stoi(s.substr(x + 1));
        return json::array({n_re, n_im});
    } catch (const std::exception&) {
        throw ctflow::ConfigError("grid: expected NxM, got '" + s + "'");
    }
}

json load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ctflow::ConfigError("cannot open config file: " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw ctflow::ConfigError("config file " + path + ": " + e.what());
    }
    if (!cfg.is_object())
        throw ctflow::ConfigError("config file " + path + ": top level must be an object");
    return cfg;
}

void reject_unknown_keys(const json& cfg, const std::vector<std::string>& allowed) {
    for (const auto& [key, value] : cfg.items()) {
        (void)value;
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ctflow::ConfigError("unknown config key: " + key);
    }
}

const json& need(const json& eff, const char* key) {
    if (!eff.contains(key))
        throw ctflow::ConfigError(std::string("missing required option: ") + key);
    return eff.at(key);
}

double num(const json& eff, const char* key) {
    const json& v = need(eff, key);
    if (!v.is_number())
        throw ctflow::ConfigError(std::string(key) + " must be a number");
    return v.get<double>();
}

int inum(const json& eff, const char* key) {
    const json& v = need(eff, key);
    if (!v.is_number_integer())
        throw ctflow::ConfigError(std::string(key) + " must be an integer");
    return v.get<int>();
}

std::string str(const json& eff, const char* key) {
    const json& v = need(eff, key);
    if (!v.is_string())
        throw ctflow::ConfigError(std::string(key) + " must be a string");
    return v.get<std::string>();
}

std::vector<double> numbers(const json& eff, const char* key) {
    const json& v = need(eff, key);
    if (!v.is_array() || v.empty())
        throw ctflow::ConfigError(std::string(key) + " must be a non-empty array of numbers");
    std::vector<double> out;
    for (const auto& item : v) {
        if (!item.is_number())
            throw ctflow::ConfigError(std::string(key) + " must contain only numbers");
        out.push_back(item.get<double>());
    }
    return out;
}

cvec state_from(const json& eff, const char* key) {
    const auto values = numbers(eff, key);
    cvec z(static_cast<Eigen::Index>(values.size()));
    for (size_t k = 0; k < values.size(); ++k) z(static_cast<Eigen::Index>(k)) = cplx(values[k], 0.0);
    return z;
}

ctflow::ModelSpec build_model(const json& eff) {
    const std::string id = str(eff, "model");
    const double gamma = num(eff, "gamma");
    const std::string sign = str(eff, "fast_sign");
    const std::string grouping = str(eff, "grouping");
    ctflow::FastSign fs;
    if (sign == "consistent")
        fs = ctflow::FastSign::critical_manifold_consistent;
    else if (sign == "printed")
        fs = ctflow::FastSign::paper_printed;
    else
        throw ctflow::ConfigError("fast_sign must be consistent|printed, got '" + sign + "'");
    ctflow::Eps2Grouping gr;
    if (grouping == "outer")
        gr = ctflow::Eps2Grouping::brace_outermost;
    else if (grouping == "inner")
        gr = ctflow::Eps2Grouping::brace_inner;
    else
        throw ctflow::ConfigError("grouping must be outer|inner, got '" + grouping + "'");
    return ctflow::make_model(id, gamma, fs, gr);
}

ctflow::Tolerances tolerances_from(const json& eff) {
    ctflow::Tolerances tol;
    tol.rtol = num(eff, "rtol");
    tol.atol = num(eff, "atol");
    return tol;
}

ctflow::DetectionConfig detection_from(const json& eff) {
    ctflow::DetectionConfig config;
    config.tau_max = num(eff, "tau_max");
    config.n_samples = inum(eff, "n_samples");
    config.window = ctflow::parse_window(str(eff, "window"));
    config.detrend = ctflow::parse_detrend(str(eff, "detrend"));
    if (eff.contains("cutoff")) config.cutoff = num(eff, "cutoff");
    config.energy_ratio_threshold = num(eff, "threshold");
    config.tail_fraction = num(eff, "tail_fraction");
    config.tol = tolerances_from(eff);
    return config;
}

// Merge order: built-in defaults, then config-file values, then explicit
// flags. `flagged` holds the keys whose flags were given on the command line.
struct EffectiveConfig {
    json eff;
    std::vector<std::string> flagged;

    void set_default(const char* key, const json& value) { eff[key] = value; }

    void set_flag(const char* key, const json& value) {
        eff[key] = value;
        flagged.push_back(key);
    }

    void merge_file(const json& cfg, const std::vector<std::string>& allowed) {
        reject_unknown_keys(cfg, allowed);
        for (const auto& [key, value] : cfg.items())
            if (std::find(flagged.begin(), flagged.end(), key) == flagged.end())
                eff[key] = value;
    }
};

struct OutputTarget {
    std::ofstream file;
    std::ostream* stream = &std::cout;

    explicit OutputTarget(const std::string& path) {
        if (path.empty()) return;
        file.open(path);
        if (!file)
            throw ctflow::ConfigError("cannot open output file: " + path);
        stream = &file;
    }
};

void maybe_echo(bool echo, const json& eff) {
    if (echo) std::cout << eff.dump(2) << "\n";
}

int cmd_surface(const json& eff, const std::string& out_path) {
    const auto model = build_model(eff);
    const cvec z0 = state_from(eff, "z0");
    const auto re = numbers(eff, "re");
    const auto im = numbers(eff, "im");
    if (re.size() != 2 || im.size() != 2)
        throw ctflow::ConfigError("re and im must each hold [lo, hi]");
    const json& grid_spec = need(eff, "grid");
    if (!grid_spec.is_array() || grid_spec.size() != 2)
        throw ctflow::ConfigError("grid must hold [n_re, n_im]");
    const int n_re = grid_spec.at(0).get<int>();
    const int n_im = grid_spec.at(1).get<int>();

    const auto grid = ctflow::sample_surface(model, z0, re[0], re[1], im[0], im[1],
                                             n_re, n_im, tolerances_from(eff));
    OutputTarget out(out_path);
    ctflow::surface_to_csv(grid, model.dim, *out.stream);
    return 0;
}

int cmd_spectrum(const json& eff, const std::string& out_path) {
    const auto model = build_model(eff);
    const cvec z0 = state_from(eff, "z0");
    const double tau_max = num(eff, "tau_max");
    const int n = inum(eff, "n_samples");
    const int component = inum(eff, "component");
    if (component < 1 || component > model.dim)
        throw ctflow::ConfigError("component must lie in 1.." + std::to_string(model.dim));
    const auto window = ctflow::parse_window(str(eff, "window"));
    const auto detrend = ctflow::parse_detrend(str(eff, "detrend"));
    if (n < 1)
        throw ctflow::ConfigError("n_samples must be positive");

    auto traj = ctflow::integrate_imaginary_ray(model, z0, tau_max, n + 1,
                                                tolerances_from(eff));
    traj.times.pop_back();
    traj.states.pop_back();

    cplx fp_value = 0.0;
    if (detrend == ctflow::Detrend::fixed_point)
        fp_value = ctflow::find_attracting_fixed_point(model)(component - 1);
    const auto spec = ctflow::dft_spectrum(traj, component - 1, window, detrend, fp_value);

    double max_amp = 0.0;
    for (const cplx& a : spec.amplitudes) max_amp = std::max(max_amp, std::abs(a));
    if (max_amp == 0.0)
        throw ctflow::ZeroSignal("spectrum carries no energy");

    OutputTarget out(out_path);
    *out.stream << ctflow::spectrum_to_json(model.name, z0, spec).dump(2) << "\n";
    return 0;
}

int cmd_detect(const json& eff, const std::string& out_path) {
    const auto model = build_model(eff);
    const cvec z0 = state_from(eff, "z0");
    const auto report = ctflow::classify(model, z0, detection_from(eff));

    json j = ctflow::report_to_json(report);
    j["model"] = model.name;
    json z0j = json::array();
    for (int k = 0; k < model.dim; ++k)
        z0j.push_back({{"re", z0(k).real()}, {"im", z0(k).imag()}});
    j["z0"] = z0j;

    OutputTarget out(out_path);
    *out.stream << j.dump(2) << "\n";
    return report.verdict == ctflow::Verdict::off_sim ? 4 : 0;
}

int cmd_sweep(const json& eff, const std::string& out_path) {
    const auto offsets = numbers(eff, "offsets");
    const auto gammas = numbers(eff, "gammas");
    const double z1_base = num(eff, "z1_base");
    const auto config = detection_from(eff);

    std::vector<ctflow::SweepRow> rows;
    for (double offset : offsets) {
        for (double gamma : gammas) {
            json model_eff = eff;
            model_eff["gamma"] = gamma;
            const auto model = build_model(model_eff);
            const double z2 = ctflow::sim_graph(model, z1_base, 2) + offset;
            cvec z0(2);
            z0 << cplx(z1_base, 0.0), cplx(z2, 0.0);
            const auto report = ctflow::classify(model, z0, config);
            rows.push_back({offset, gamma, report.high_low_ratio, report.lambda_supp,
                            report.verdict});
        }
    }

    OutputTarget out(out_path);
    ctflow::sweep_to_csv(rows, *out.stream);
    return 0;
}

int cmd_validate(const json& eff) {
    ctflow::Tolerances tol;
    tol.rtol = num(eff, "rtol");
    tol.atol = 1e-12;

    int failures = 0;
    auto line = [&failures](const std::string& name, bool pass, const std::string& detail) {
        std::cout << (pass ? "PASS  " : "FAIL  ") << name;
        if (!detail.empty()) std::cout << "  (" << detail << ")";
        std::cout << "\n";
        if (!pass) ++failures;
    };

    {
        bool pass = false;
        std::string detail;
        try {
            auto ds = ctflow::make_davis_skodje(3.0);
            cvec z0(2);
            z0 << cplx(2, 0), cplx(0.9, 0);
            const auto traj = ctflow::integrate_imaginary_ray(ds, z0, 4.0, 33, tol);
            cvec c(2);
            c << cplx(2, 0), cplx(0.9 - 2.0 / 3.0, 0);
            double worst = 0.0;
            for (size_t q = 0; q < traj.times.size(); ++q) {
                const cvec ref =
                    ctflow::closed_form_solution(ds, ctflow::FlowCoefficients{c}, traj.times[q]);
                worst = std::max(worst, (traj.states[q] - ref).cwiseAbs().maxCoeff());
            }
            pass = worst <= 1e-6;
            detail = "max closed-form error " + ctflow::detail::fmt17(worst);
        } catch (const std::exception& e) {
            detail = e.what();
        }
        line("closed-form oracle", pass, detail);
    }

    {
        bool pass = false;
        std::string detail;
        try {
            auto ds = ctflow::make_davis_skodje(5.0);
            cvec z0(2);
            z0 << cplx(2, 0), cplx(2.0 / 3.0 + 0.3, 0);
            auto traj = ctflow::integrate_imaginary_ray(ds, z0, 16.0 * ctflow::pi, 513, tol);
            traj.times.pop_back();
            traj.states.pop_back();
            const auto spec = ctflow::dft_spectrum(traj, 1);
            double worst = 0.0;
            for (int k = 0; k <= 4; ++k) {
                const size_t m = static_cast<size_t>(256 + k * 8);
                const cplx exact = (k % 2 == 0 ? 1.0 : -1.0) * std::pow(2.0, -k);
                worst = std::max(worst, std::abs(spec.amplitudes[m] - exact));
            }
            const size_t fast_bin = static_cast<size_t>(256 - 5 * 8);
            worst = std::max(worst, std::abs(spec.amplitudes[fast_bin] - cplx(0.3, 0)));
            pass = worst <= 1e-3;
            detail = "max comb amplitude error " + ctflow::detail::fmt17(worst);
        } catch (const std::exception& e) {
            detail = e.what();
        }
        line("comb amplitudes", pass, detail);
    }

    {
        bool pass = false;
        std::string detail;
        try {
            auto ds = ctflow::make_davis_skodje(3.0);
            cvec z0(2), w0(2);
            z0 << cplx(1, 0), cplx(0.5, 0);
            w0 << cplx(1, 0), cplx(1, 0);
            double errs[3];
            const double taus[3] = {0.1, 0.05, 0.025};
            for (int q = 0; q < 3; ++q) {
                const cvec wl = ctflow::propagate_variational(
                    ds, z0, taus[q], w0, ctflow::VariationalMethod::linearized);
                const cvec wi = ctflow::propagate_variational(
                    ds, z0, taus[q], w0, ctflow::VariationalMethod::integrated, tol);
                errs[q] = (wl - wi).norm();
            }
            const double s1 = std::log2(errs[0] / errs[1]);
            const double s2 = std::log2(errs[1] / errs[2]);
            pass = std::abs(s1 - 2.0) <= 0.4 && std::abs(s2 - 2.0) <= 0.4;
            detail = "order slopes " + ctflow::detail::fmt17(s1) + ", " +
                     ctflow::detail::fmt17(s2);
        } catch (const std::exception& e) {
            detail = e.what();
        }
        line("variational order", pass, detail);
    }

    {
        bool pass = false;
        std::string detail;
        try {
            Eigen::MatrixXd A(2, 2);
            A << -1, 0, 0, -2;
            auto lin = ctflow::make_linear(A);
            cvec z0(2);
            z0 << cplx(1, 0), cplx(1, 0);
            ctflow::DetectionConfig config;
            config.tau_max = 64.0 * ctflow::pi;
            config.n_samples = 4096;
            config.window = ctflow::Window::rectangular;
            config.tol = tol;
            const auto pw = ctflow::paley_wiener_consistency(lin, z0, config);
            const double dxi = 2.0 * ctflow::pi / config.tau_max;
            pass = pw.consistent && std::abs(pw.lambda_supp - 2.0) <= 2.0 * dxi &&
                   std::abs(pw.lambda_growth - 1.9700439441503117) <= 0.01;
            detail = "lambda_supp " + ctflow::detail::fmt17(pw.lambda_supp) +
                     ", lambda_growth " + ctflow::detail::fmt17(pw.lambda_growth);
        } catch (const std::exception& e) {
            detail = e.what();
        }
        line("paley-wiener duality", pass, detail);
    }

    return failures == 0 ? 0 : 1;
}

struct CommonFlags {
    std::string config_path;
    std::string out_path;
    bool echo = false;
    std::string model;
    double gamma = 3.0;
    std::string fast_sign = "consistent";
    std::string grouping = "outer";
};

void add_common(CLI::App* sub, CommonFlags& flags, bool with_model) {
    sub->add_option("--config", flags.config_path, "JSON config file merged under the flags");
    sub->add_flag("--echo-config", flags.echo, "print the materialized config to stdout");
    if (with_model) {
        sub->add_option("--model", flags.model, "model id (davis-skodje|michaelis-menten)");
        sub->add_option("--gamma", flags.gamma, "timescale separation parameter");
        sub->add_option("--fast-sign", flags.fast_sign,
                        "michaelis-menten fast-equation sign (consistent|printed)");
        sub->add_option("--grouping", flags.grouping,
                        "michaelis-menten second-order grouping (outer|inner)");
        sub->add_option("--out", flags.out_path, "output file (default stdout)");
    }
}

void collect_common(const CLI::App* sub, const CommonFlags& flags, EffectiveConfig& ec) {
    ec.set_default("gamma", flags.gamma);
    ec.set_default("fast_sign", flags.fast_sign);
    ec.set_default("grouping", flags.grouping);
    if (sub->count("--model")) ec.set_flag("model", flags.model);
    if (sub->count("--gamma")) ec.set_flag("gamma", flags.gamma);
    if (sub->count("--fast-sign")) ec.set_flag("fast_sign", flags.fast_sign);
    if (sub->count("--grouping")) ec.set_flag("grouping", flags.grouping);
}

const std::vector<std::string> surface_keys = {"model", "gamma", "fast_sign", "grouping",
                                               "z0", "re", "im", "grid", "rtol", "atol"};
const std::vector<std::string> spectrum_keys = {"model", "gamma", "fast_sign", "grouping",
                                                "z0", "tau_max", "n_samples", "component",
                                                "window", "detrend", "rtol", "atol"};
const std::vector<std::string> detect_keys = {"model", "gamma", "fast_sign", "grouping",
                                              "z0", "tau_max", "n_samples", "window",
                                              "detrend", "cutoff", "threshold",
                                              "tail_fraction", "rtol", "atol"};
const std::vector<std::string> sweep_keys = {"model", "gamma", "fast_sign", "grouping",
                                             "offsets", "gammas", "z1_base", "tau_max",
                                             "n_samples", "window", "detrend", "cutoff",
                                             "threshold", "tail_fraction", "rtol", "atol"};
const std::vector<std::string> validate_keys = {"rtol"};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ctflow: complex-time flow continuation and spectral SIM detection"};
    app.require_subcommand(0, 1);

    auto* surface = app.add_subcommand("surface", "sample a flow over a complex-time grid");
    CommonFlags surface_common;
    std::string surface_z0, surface_re, surface_im, surface_grid;
    double surface_rtol = 1e-9, surface_atol = 1e-12;
    add_common(surface, surface_common, true);
    surface->add_option("--z0", surface_z0, "initial state, comma separated");
    surface->add_option("--re", surface_re, "real range lo:hi");
    surface->add_option("--im", surface_im, "imaginary range lo:hi");
    surface->add_option("--grid", surface_grid, "grid size NxM");
    surface->add_option("--rtol", surface_rtol, "relative integration tolerance");
    surface->add_option("--atol", surface_atol, "absolute integration tolerance");

    auto* spectrum = app.add_subcommand("spectrum", "imaginary-time Fourier spectrum");
    CommonFlags spectrum_common;
    std::string spectrum_z0, spectrum_window, spectrum_detrend = "none";
    double spectrum_tau = 10.0 * ctflow::pi, spectrum_rtol = 1e-9, spectrum_atol = 1e-12;
    int spectrum_n = 512, spectrum_component = 1;
    add_common(spectrum, spectrum_common, true);
    spectrum->add_option("--z0", spectrum_z0, "initial state, comma separated");
    spectrum->add_option("--tau-max", spectrum_tau, "imaginary-time horizon");
    spectrum->add_option("--n", spectrum_n, "number of samples (power of two)");
    spectrum->add_option("--component", spectrum_component, "1-based state component");
    spectrum->add_option("--window", spectrum_window, "rectangular|hann");
    spectrum->add_option("--detrend", spectrum_detrend, "none|mean|fixed_point");
    spectrum->add_option("--rtol", spectrum_rtol, "relative integration tolerance");
    spectrum->add_option("--atol", spectrum_atol, "absolute integration tolerance");

    auto* detect = app.add_subcommand("detect", "classify a point against the SIM");
    CommonFlags detect_common;
    std::string detect_z0, detect_window = "hann", detect_detrend = "none";
    double detect_tau = 10.0 * ctflow::pi, detect_cutoff = 0.0, detect_threshold = 1e-3;
    double detect_tail = 1e-6, detect_rtol = 1e-9, detect_atol = 1e-12;
    int detect_n = 512;
    add_common(detect, detect_common, true);
    detect->add_option("--z0", detect_z0, "initial state, comma separated");
    detect->add_option("--tau-max", detect_tau, "imaginary-time horizon");
    detect->add_option("--n", detect_n, "number of samples (power of two)");
    detect->add_option("--window", detect_window, "rectangular|hann");
    detect->add_option("--detrend", detect_detrend, "none|mean|fixed_point");
    detect->add_option("--cutoff", detect_cutoff, "band split frequency (default: auto)");
    detect->add_option("--threshold", detect_threshold, "high/low energy ratio threshold");
    detect->add_option("--tail", detect_tail, "support tail fraction");
    detect->add_option("--rtol", detect_rtol, "relative integration tolerance");
    detect->add_option("--atol", detect_atol, "absolute integration tolerance");

    auto* sweep = app.add_subcommand("sweep", "classify a family of offset points");
    CommonFlags sweep_common;
    std::string sweep_offsets, sweep_gammas, sweep_window = "hann", sweep_detrend = "none";
    double sweep_z1 = 2.5, sweep_tau = 10.0 * ctflow::pi, sweep_cutoff = 0.0;
    double sweep_threshold = 1e-3, sweep_tail = 1e-6, sweep_rtol = 1e-9, sweep_atol = 1e-12;
    int sweep_n = 512;
    add_common(sweep, sweep_common, true);
    sweep->add_option("--offsets", sweep_offsets, "SIM-normal offsets, comma separated");
    sweep->add_option("--gammas", sweep_gammas, "gamma values, comma separated");
    sweep->add_option("--z1-base", sweep_z1, "base z1 for the swept points");
    sweep->add_option("--tau-max", sweep_tau, "imaginary-time horizon");
    sweep->add_option("--n", sweep_n, "number of samples (power of two)");
    sweep->add_option("--window", sweep_window, "rectangular|hann");
    sweep->add_option("--detrend", sweep_detrend, "none|mean|fixed_point");
    sweep->add_option("--cutoff", sweep_cutoff, "band split frequency (default: auto)");
    sweep->add_option("--threshold", sweep_threshold, "high/low energy ratio threshold");
    sweep->add_option("--tail", sweep_tail, "support tail fraction");
    sweep->add_option("--rtol", sweep_rtol, "relative integration tolerance");
    sweep->add_option("--atol", sweep_atol, "absolute integration tolerance");

    auto* validate = app.add_subcommand("validate", "run the built-in validation suites");
    CommonFlags validate_common;
    double validate_rtol = 1e-9;
    add_common(validate, validate_common, false);
    validate->add_option("--rtol", validate_rtol, "relative integration tolerance");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 2;
    }

    try {
        if (surface->parsed()) {
            EffectiveConfig ec;
            ec.set_default("rtol", surface_rtol);
            ec.set_default("atol", surface_atol);
            collect_common(surface, surface_common, ec);
            if (surface->count("--z0"))
                ec.set_flag("z0", parse_number_list(surface_z0, "z0"));
            if (surface->count("--re")) ec.set_flag("re", parse_range(surface_re, "re"));
            if (surface->count("--im")) ec.set_flag("im", parse_range(surface_im, "im"));
            if (surface->count("--grid")) ec.set_flag("grid", parse_grid(surface_grid));
            if (surface->count("--rtol")) ec.set_flag("rtol", surface_rtol);
            if (surface->count("--atol")) ec.set_flag("atol", surface_atol);
            if (!surface_common.config_path.empty())
                ec.merge_file(load_config_file(surface_common.config_path), surface_keys);
            reject_unknown_keys(ec.eff, surface_keys);
            maybe_echo(surface_common.echo, ec.eff);
            return cmd_surface(ec.eff, surface_common.out_path);
        }

        if (spectrum->parsed()) {
            EffectiveConfig ec;
            ec.set_default("tau_max", spectrum_tau);
            ec.set_default("n_samples", spectrum_n);
            ec.set_default("component", spectrum_component);
            ec.set_default("detrend", spectrum_detrend);
            ec.set_default("rtol", spectrum_rtol);
            ec.set_default("atol", spectrum_atol);
            collect_common(spectrum, spectrum_common, ec);
            if (spectrum->count("--z0"))
                ec.set_flag("z0", parse_number_list(spectrum_z0, "z0"));
            if (spectrum->count("--tau-max")) ec.set_flag("tau_max", spectrum_tau);
            if (spectrum->count("--n")) ec.set_flag("n_samples", spectrum_n);
            if (spectrum->count("--component")) ec.set_flag("component", spectrum_component);
            if (spectrum->count("--window"))
                ec.set_flag("window",
                            ctflow::window_name(ctflow::parse_window(spectrum_window)));
            if (spectrum->count("--detrend")) ec.set_flag("detrend", spectrum_detrend);
            if (spectrum->count("--rtol")) ec.set_flag("rtol", spectrum_rtol);
            if (spectrum->count("--atol")) ec.set_flag("atol", spectrum_atol);
            if (!spectrum_common.config_path.empty())
                ec.merge_file(load_config_file(spectrum_common.config_path), spectrum_keys);
            if (!ec.eff.contains("window"))
                ec.eff["window"] = str(ec.eff, "model") == "michaelis-menten"
                                       ? "hann"
                                       : "rectangular";
            reject_unknown_keys(ec.eff, spectrum_keys);
            maybe_echo(spectrum_common.echo, ec.eff);
            return cmd_spectrum(ec.eff, spectrum_common.out_path);
        }

        if (detect->parsed()) {
            EffectiveConfig ec;
            ec.set_default("tau_max", detect_tau);
            ec.set_default("n_samples", detect_n);
            ec.set_default("window", detect_window);
            ec.set_default("detrend", detect_detrend);
            ec.set_default("threshold", detect_threshold);
            ec.set_default("tail_fraction", detect_tail);
            ec.set_default("rtol", detect_rtol);
            ec.set_default("atol", detect_atol);
            collect_common(detect, detect_common, ec);
            if (detect->count("--z0"))
                ec.set_flag("z0", parse_number_list(detect_z0, "z0"));
            if (detect->count("--tau-max")) ec.set_flag("tau_max", detect_tau);
            if (detect->count("--n")) ec.set_flag("n_samples", detect_n);
            if (detect->count("--window"))
                ec.set_flag("window", ctflow::window_name(ctflow::parse_window(detect_window)));
            if (detect->count("--detrend")) ec.set_flag("detrend", detect_detrend);
            if (detect->count("--cutoff")) ec.set_flag("cutoff", detect_cutoff);
            if (detect->count("--threshold")) ec.set_flag("threshold", detect_threshold);
            if (detect->count("--tail")) ec.set_flag("tail_fraction", detect_tail);
            if (detect->count("--rtol")) ec.set_flag("rtol", detect_rtol);
            if (detect->count("--atol")) ec.set_flag("atol", detect_atol);
            if (!detect_common.config_path.empty())
                ec.merge_file(load_config_file(detect_common.config_path), detect_keys);
            reject_unknown_keys(ec.eff, detect_keys);
            maybe_echo(detect_common.echo, ec.eff);
            return cmd_detect(ec.eff, detect_common.out_path);
        }

        if (sweep->parsed()) {
            EffectiveConfig ec;
            ec.set_default("z1_base", sweep_z1);
            ec.set_default("tau_max", sweep_tau);
            ec.set_default("n_samples", sweep_n);
            ec.set_default("window", sweep_window);
            ec.set_default("detrend", sweep_detrend);
            ec.set_default("threshold", sweep_threshold);
            ec.set_default("tail_fraction", sweep_tail);
            ec.set_default("rtol", sweep_rtol);
            ec.set_default("atol", sweep_atol);
            collect_common(sweep, sweep_common, ec);
            if (sweep->count("--offsets"))
                ec.set_flag("offsets", parse_number_list(sweep_offsets, "offsets"));
            if (sweep->count("--gammas"))
                ec.set_flag("gammas", parse_number_list(sweep_gammas, "gammas"));
            if (sweep->count("--z1-base")) ec.set_flag("z1_base", sweep_z1);
            if (sweep->count("--tau-max")) ec.set_flag("tau_max", sweep_tau);
            if (sweep->count("--n")) ec.set_flag("n_samples", sweep_n);
            if (sweep->count("--window"))
                ec.set_flag("window", ctflow::window_name(ctflow::parse_window(sweep_window)));
            if (sweep->count("--detrend")) ec.set_flag("detrend", sweep_detrend);
            if (sweep->count("--cutoff")) ec.set_flag("cutoff", sweep_cutoff);
            if (sweep->count("--threshold")) ec.set_flag("threshold", sweep_threshold);
            if (sweep->count("--tail")) ec.set_flag("tail_fraction", sweep_tail);
            if (sweep->count("--rtol")) ec.set_flag("rtol", sweep_rtol);
            if (sweep->count("--atol")) ec.set_flag("atol", sweep_atol);
            if (!sweep_common.config_path.empty())
                ec.merge_file(load_config_file(sweep_common.config_path), sweep_keys);
            if (!ec.eff.contains("gammas"))
                ec.eff["gammas"] = json::array({num(ec.eff, "gamma")});
            reject_unknown_keys(ec.eff, sweep_keys);
            maybe_echo(sweep_common.echo, ec.eff);
            return cmd_sweep(ec.eff, sweep_common.out_path);
        }

        if (validate->parsed()) {
            EffectiveConfig ec;
            ec.set_default("rtol", validate_rtol);
            if (validate->count("--rtol")) ec.set_flag("rtol", validate_rtol);
            if (!validate_common.config_path.empty())
                ec.merge_file(load_config_file(validate_common.config_path), validate_keys);
            reject_unknown_keys(ec.eff, validate_keys);
            maybe_echo(validate_common.echo, ec.eff);
            return cmd_validate(ec.eff);
        }
    } catch (const ctflow::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ctflow::NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const ctflow::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }

    std::cerr << app.help();
    return 2;
}
