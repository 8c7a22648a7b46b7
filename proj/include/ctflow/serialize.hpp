#pragma once

#include <cstdio>
#include <ostream>
#include <string>

#include <json.hpp>

#include "detect.hpp"

namespace ctflow {

using json = nlohmann::json;

namespace detail {

inline std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.16e", x);
    return buf;
}

} // namespace detail

inline std::string window_name(Window w) {
    return w == Window::hann ? "hann" : "rectangular";
}

inline Window parse_window(const std::string& s) {
    if (s == "hann") return Window::hann;
    if (s == "rectangular" || s == "rect") return Window::rectangular;
    throw ConfigError("unknown window '" + s + "' (expected rectangular|hann)");
}

inline std::string detrend_name(Detrend d) {
    switch (d) {
        case Detrend::mean: return "mean";
        case Detrend::fixed_point: return "fixed_point";
        default: return "none";
    }
}

inline Detrend parse_detrend(const std::string& s) {
    if (s == "none") return Detrend::none;
    if (s == "mean") return Detrend::mean;
    if (s == "fixed_point") return Detrend::fixed_point;
    throw ConfigError("unknown detrend '" + s + "' (expected none|mean|fixed_point)");
}

inline std::string verdict_name(Verdict v) {
    return v == Verdict::off_sim ? "off_sim" : "on_sim_consistent";
}

inline void surface_to_csv(const SurfaceGrid& grid, int dim, std::ostream& out) {
    out << "re_t,im_t,valid";
    for (int j = 1; j <= dim; ++j) out << ",re_z" << j << ",im_z" << j;
    out << "\n";
    for (int i = 0; i < grid.n_re; ++i) {
        for (int k = 0; k < grid.n_im; ++k) {
            const size_t idx = static_cast<size_t>(i) * grid.n_im + k;
            const bool valid = grid.mask[idx] != 0;
            out << detail::fmt17(grid.re_at(i)) << ',' << detail::fmt17(grid.im_at(k))
                << ',' << (valid ? 1 : 0);
            for (int j = 0; j < dim; ++j) {
                const cplx z = valid ? grid.values[idx](j) : cplx(0, 0);
                out << ',' << detail::fmt17(z.real()) << ',' << detail::fmt17(z.imag());
            }
            out << "\n";
        }
    }
}

inline json spectrum_to_json(const std::string& model_name, const cvec& z0,
                             const SpectrumEstimate& spec) {
    json j;
    j["model"] = model_name;
    json z0j = json::array();
    for (int k = 0; k < z0.size(); ++k)
        z0j.push_back({{"re", z0(k).real()}, {"im", z0(k).imag()}});
    j["z0"] = z0j;
    j["component"] = spec.component + 1;
    j["convention"] = "e^-i xi tau / sqrt(2pi)";
    j["window"] = window_name(spec.window);
    j["T"] = spec.T;
    j["delta_xi"] = spec.delta_xi;
    j["frequencies"] = spec.frequencies;
    json re_amp = json::array(), im_amp = json::array();
    for (const cplx& a : spec.amplitudes) {
        re_amp.push_back(a.real());
        im_amp.push_back(a.imag());
    }
    j["re_amp"] = re_amp;
    j["im_amp"] = im_amp;
    return j;
}

inline json report_to_json(const DetectionReport& report) {
    json j;
    j["verdict"] = verdict_name(report.verdict);
    j["high_low_ratio"] = report.high_low_ratio;
    j["lambda_supp"] = report.lambda_supp;
    j["cutoff_used"] = report.cutoff_used;
    j["low_energy"] = report.low_energy;
    j["high_energy"] = report.high_energy;
    j["low_energy_per_component"] = report.low_energy_per_component;
    j["high_energy_per_component"] = report.high_energy_per_component;
    json peaks = json::array();
    for (const auto& p : report.peaks)
        peaks.push_back({{"component", p.component + 1},
                         {"xi", p.xi},
                         {"re_amp", p.amplitude.real()},
                         {"im_amp", p.amplitude.imag()}});
    j["peaks"] = peaks;
    return j;
}

struct SweepRow {
    double offset = 0.0;
    double gamma = 0.0;
    double high_low_ratio = 0.0;
    double lambda_supp = 0.0;
    Verdict verdict = Verdict::on_sim_consistent;
};

inline void sweep_to_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "offset,gamma,high_low_ratio,lambda_supp,verdict\n";
    for (const auto& r : rows)
        out << detail::fmt17(r.offset) << ',' << detail::fmt17(r.gamma) << ','
            << detail::fmt17(r.high_low_ratio) << ',' << detail::fmt17(r.lambda_supp)
            << ',' << verdict_name(r.verdict) << "\n";
}

} // namespace ctflow
