#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "spectral.hpp"

namespace ctflow {

struct DetectionConfig {
    double tau_max = 10.0 * pi;
    int n_samples = 512;                  // power of two
    std::optional<double> cutoff;         // empty = auto via spectral gap
    double tail_fraction = 1e-6;
    double energy_ratio_threshold = 1e-3;
    Window window = Window::hann;
    Detrend detrend = Detrend::none;
    Tolerances tol;

    void validate(double fast_rate_estimate = 0.0) const {
        if (!(tau_max > 0.0))
            throw ConfigError("tau_max must be positive");
        if (n_samples < 2 || (n_samples & (n_samples - 1)) != 0)
            throw ConfigError("n_samples must be a power of two");
        if (cutoff && !(*cutoff > 0.0))
            throw ConfigError("explicit cutoff must be positive");
        if (!(tail_fraction > 0.0) || !(tail_fraction < 1.0))
            throw ConfigError("tail_fraction must lie in (0,1)");
        if (!(energy_ratio_threshold > 0.0))
            throw ConfigError("energy_ratio_threshold must be positive");
        tol.validate();
        const double nyq = pi * n_samples / tau_max;
        if (fast_rate_estimate > 0.0 && nyq < 2.0 * fast_rate_estimate)
            throw ConfigError("Nyquist rate " + std::to_string(nyq) +
                              " does not cover twice the fast rate " +
                              std::to_string(fast_rate_estimate));
    }
};

enum class Verdict { on_sim_consistent, off_sim };

struct DetectionReport {
    std::vector<double> low_energy_per_component;
    std::vector<double> high_energy_per_component;
    double low_energy = 0.0;
    double high_energy = 0.0;
    double high_low_ratio = 0.0;
    double lambda_supp = 0.0;
    Verdict verdict = Verdict::on_sim_consistent;
    double cutoff_used = 0.0;
    std::vector<SpectralLineEntry> peaks;
};

struct GrowthFit {
    double lambda_growth = 0.0;
    int n_poly = 1;
    double c_fit = 0.0;
    double residual = 0.0;
};

struct PaleyWienerReport {
    double lambda_growth = 0.0;
    double lambda_supp = 0.0;
    bool consistent = false;
    double gap = 0.0;       // lambda_growth - lambda_supp
    bool heuristic = false; // set when entire-ness was not asserted
};

inline cvec find_attracting_fixed_point(const ModelSpec& model, int max_iters = 50) {
    cvec z = cvec::Zero(model.dim);
    for (int it = 0; it < max_iters; ++it) {
        const cvec f = eval_field(model, z);
        const double fn = f.cwiseAbs().maxCoeff();
        if (fn <= 1e-13 * (1.0 + z.cwiseAbs().maxCoeff())) {
            const cmat J = eval_jacobian(model, z);
            Eigen::ComplexEigenSolver<cmat> es(J);
            if (es.info() != Eigen::Success)
                throw NoFixedPointFound(model.name + ": eigensolver failed at fixed point");
            for (int k = 0; k < model.dim; ++k)
                if (es.eigenvalues()(k).real() >= 0.0)
                    throw NoFixedPointFound(model.name + ": fixed point is not attracting");
            return z;
        }
        const cmat J = eval_jacobian(model, z);
        const cvec step = J.fullPivLu().solve(-f);
        if (!detail::finite(step))
            throw NoFixedPointFound(model.name + ": Newton step is not finite");

        double damping = 1.0;
        cvec z_next = z + step;
        for (int back = 0; back < 30; ++back) {
            bool ok = detail::finite(z_next) && !model.singular_locus_test(z_next);
            if (ok) {
                const double fn_next = eval_field(model, z_next).cwiseAbs().maxCoeff();
                ok = fn_next < fn;
            }
            if (ok) break;
            damping *= 0.5;
            z_next = z + damping * step;
        }
        z = z_next;
    }
    throw NoFixedPointFound(model.name + ": damped Newton did not converge in 50 iterations");
}

inline double auto_cutoff(const ModelSpec& model) {
    const cvec zstar = find_attracting_fixed_point(model);
    const cmat J = eval_jacobian(model, zstar);
    Eigen::ComplexEigenSolver<cmat> es(J);
    if (es.info() != Eigen::Success)
        throw NoFixedPointFound(model.name + ": eigensolver failed at fixed point");

    std::vector<double> rates(model.dim);
    for (int k = 0; k < model.dim; ++k) rates[k] = std::abs(es.eigenvalues()(k).real());
    std::sort(rates.begin(), rates.end(), std::greater<>());
    if (model.dim < 2)
        throw NoSpectralGap(model.name + ": needs at least two eigenrates");

    const double fast = rates[0], slow = rates[1];
    if (!(slow > 0.0) || fast < 2.0 * slow)
        throw NoSpectralGap(model.name + ": eigenrates " + std::to_string(fast) + ", " +
                            std::to_string(slow) + " are within a factor 2");
    return std::sqrt(fast * slow);
}

namespace detail {

// Union spectral support: combines per-component bin energies on the shared
// frequency grid, then applies the single-spectrum tail rule.
inline double support_of_union(const std::vector<SpectrumEstimate>& spectra,
                               double tail_fraction) {
    SpectrumEstimate combined = spectra.front();
    for (size_t m = 0; m < combined.amplitudes.size(); ++m) {
        double e = 0.0;
        for (const auto& s : spectra) e += std::norm(s.amplitudes[m]);
        combined.amplitudes[m] = std::sqrt(e);
    }
    return estimate_support(combined, tail_fraction);
}

} // namespace detail

inline DetectionReport classify(const ModelSpec& model, const cvec& z0,
                                const DetectionConfig& config = {}) {
    config.validate(model.fast_rate_estimate);
    check_state_dim(model, z0);

    DetectionReport report;
    report.cutoff_used = config.cutoff ? *config.cutoff : auto_cutoff(model);

    cplx fp_value = 0.0;
    cvec zstar;
    bool have_fp = false;
    if (config.detrend == Detrend::fixed_point) {
        zstar = find_attracting_fixed_point(model);
        have_fp = true;
    }

    // Exactly-at-a-fixed-point inputs produce a constant (zero after detrend)
    // signal; report the degenerate verdict instead of failing downstream.
    const double f0 = eval_field(model, z0).cwiseAbs().maxCoeff();
    if (f0 <= 1e-14 * (1.0 + z0.cwiseAbs().maxCoeff())) {
        report.low_energy_per_component.assign(model.dim, 0.0);
        report.high_energy_per_component.assign(model.dim, 0.0);
        report.verdict = Verdict::on_sim_consistent;
        return report;
    }

    Trajectory traj = integrate_imaginary_ray(model, z0, config.tau_max,
                                              config.n_samples + 1, config.tol);
    traj.times.pop_back();
    traj.states.pop_back();

    std::vector<SpectrumEstimate> spectra;
    spectra.reserve(model.dim);
    for (int j = 0; j < model.dim; ++j) {
        const cplx offset = have_fp ? zstar(j) : fp_value;
        spectra.push_back(
            dft_spectrum(traj, j, config.window, config.detrend, offset));
    }

    report.low_energy_per_component.assign(model.dim, 0.0);
    report.high_energy_per_component.assign(model.dim, 0.0);
    for (int j = 0; j < model.dim; ++j) {
        const auto& s = spectra[j];
        double lo = 0.0, hi = 0.0;
        for (size_t m = 0; m < s.amplitudes.size(); ++m) {
            const double e = std::norm(s.amplitudes[m]) * s.delta_xi;
            if (std::abs(s.frequencies[m]) <= report.cutoff_used)
                lo += e;
            else
                hi += e;
        }
        report.low_energy_per_component[j] = lo;
        report.high_energy_per_component[j] = hi;
        report.low_energy += lo;
        report.high_energy += hi;

        for (const auto& pk : detect_peaks(s, 1e-3))
            report.peaks.push_back({j, pk.xi, pk.amplitude});
    }

    if (report.low_energy > 0.0)
        report.high_low_ratio = report.high_energy / report.low_energy;
    else
        report.high_low_ratio =
            report.high_energy > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;

    try {
        report.lambda_supp = detail::support_of_union(spectra, config.tail_fraction);
    } catch (const ZeroSignal&) {
        report.lambda_supp = 0.0;
    }

    report.verdict = report.high_low_ratio > config.energy_ratio_threshold
                         ? Verdict::off_sim
                         : Verdict::on_sim_consistent;
    return report;
}

inline GrowthFit growth_fit(const ModelSpec& model, const cvec& z0, double re_max,
                            int n_points, int n_poly = 1, const Tolerances& tol = {}) {
    if (!(re_max > 0.0))
        throw ConfigError("re_max must be positive");
    if (n_points < 3)
        throw ConfigError("n_points must be at least 3");
    check_state_dim(model, z0);

    GrowthFit fit;
    fit.n_poly = n_poly;

    double best_lambda = 0.0, best_c = 0.0, best_res = 0.0;
    bool degenerate = true;
    for (int dir = 0; dir < 2; ++dir) {
        TimePath path;
        path.vertices = {cplx(0, 0), cplx(dir == 0 ? re_max : -re_max, 0.0)};
        path.samples_per_segment = n_points - 1;
        const Trajectory traj = integrate_path(model, z0, path, tol);

        // Least squares on log||z||_1 - n_poly log(1+|t|) = log C + lambda |t|.
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        long cnt = 0;
        std::vector<std::pair<double, double>> pts;
        for (size_t q = 0; q < traj.times.size(); ++q) {
            const double at = std::abs(traj.times[q].real());
            const double norm1 = traj.states[q].cwiseAbs().sum();
            if (norm1 <= 1e-300) continue;
            const double yv = std::log(norm1) - n_poly * std::log1p(at);
            pts.emplace_back(at, yv);
            sx += at;
            sy += yv;
            sxx += at * at;
            sxy += at * yv;
            ++cnt;
        }
        if (cnt < 2) continue;
        degenerate = false;
        const double denom = cnt * sxx - sx * sx;
        const double slope = (cnt * sxy - sx * sy) / denom;
        const double intercept = (sy - slope * sx) / cnt;
        double ss = 0.0;
        for (const auto& [x, yv] : pts) {
            const double r = yv - (intercept + slope * x);
            ss += r * r;
        }
        const double res = std::sqrt(ss / cnt);
        if (dir == 0 || slope > best_lambda) {
            best_lambda = slope;
            best_c = std::exp(intercept);
            best_res = res;
        }
    }

    if (degenerate) {
        fit.lambda_growth = 0.0;
        fit.c_fit = 0.0;
        fit.residual = 0.0;
        return fit;
    }
    fit.lambda_growth = std::max(best_lambda, 0.0);
    fit.c_fit = best_c;
    fit.residual = best_res;
    return fit;
}

struct GrowthFitOptions {
    double re_max = 100.0;
    int n_points = 51;
};

inline PaleyWienerReport paley_wiener_consistency(const ModelSpec& model, const cvec& z0,
                                                  const DetectionConfig& config = {},
                                                  const GrowthFitOptions& growth = {},
                                                  bool entire_assumed = true) {
    config.validate(model.fast_rate_estimate);
    check_state_dim(model, z0);

    PaleyWienerReport pw;
    pw.heuristic = !entire_assumed;

    const GrowthFit fit =
        growth_fit(model, z0, growth.re_max, growth.n_points, 1, config.tol);
    pw.lambda_growth = fit.lambda_growth;

    const double fnorm = eval_field(model, z0).cwiseAbs().maxCoeff();
    double delta_xi = 2.0 * pi / config.tau_max;
    if (fnorm <= 1e-14 * (1.0 + z0.cwiseAbs().maxCoeff())) {
        pw.lambda_supp = 0.0;
    } else {
        Trajectory traj = integrate_imaginary_ray(model, z0, config.tau_max,
                                                  config.n_samples + 1, config.tol);
        traj.times.pop_back();
        traj.states.pop_back();
        std::vector<SpectrumEstimate> spectra;
        for (int j = 0; j < model.dim; ++j)
            spectra.push_back(dft_spectrum(traj, j, config.window, config.detrend));
        delta_xi = spectra.front().delta_xi;
        try {
            pw.lambda_supp = detail::support_of_union(spectra, config.tail_fraction);
        } catch (const ZeroSignal&) {
            pw.lambda_supp = 0.0;
        }
    }

    pw.gap = pw.lambda_growth - pw.lambda_supp;
    pw.consistent = std::abs(pw.gap) <= std::max(2.0 * delta_xi, 0.1 * pw.lambda_growth);
    return pw;
}

} // namespace ctflow
