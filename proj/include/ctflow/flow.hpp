#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "model.hpp"

namespace ctflow {

namespace dopri {

// Dormand-Prince 5(4) tableau with the Hairer dense-output coefficients.
constexpr double a21 = 1.0 / 5.0;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                 a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                 a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
constexpr double c2 = 1.0 / 5.0, c3 = 3.0 / 10.0, c4 = 4.0 / 5.0,
                 c5 = 8.0 / 9.0;
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;
constexpr double d1 = -12715105075.0 / 11282082432.0,
                 d3 = 87487479700.0 / 32700410799.0,
                 d4 = -10690763975.0 / 1880347072.0,
                 d5 = 701980252875.0 / 199316789632.0,
                 d6 = -1453857185.0 / 822651844.0,
                 d7 = 69997945.0 / 29380423.0;

constexpr double safe = 0.9, fac_min = 0.2, fac_max = 10.0;

} // namespace dopri

struct Tolerances {
    double rtol = 1e-9;
    double atol = 1e-12;
    double h_min = 1e-12;

    void validate() const {
        if (!(rtol > 0.0) || !(atol > 0.0) || !(h_min > 0.0))
            throw ConfigError("tolerances must be positive");
    }
};

struct StepStats {
    long accepted = 0;
    long rejected = 0;
    double min_step = std::numeric_limits<double>::infinity();
};

using ComplexTimePoint = cplx;

struct TimePath {
    std::vector<cplx> vertices;
    int samples_per_segment = 64;

    void validate() const {
        if (vertices.empty())
            throw ConfigError("path needs at least one vertex");
        if (vertices.front() != cplx(0.0, 0.0))
            throw ConfigError("path must start at t = 0");
        for (size_t i = 1; i < vertices.size(); ++i)
            if (vertices[i] == vertices[i - 1])
                throw ConfigError("consecutive path vertices must be distinct");
        if (samples_per_segment < 1)
            throw ConfigError("samples_per_segment must be positive");
    }
};

struct Trajectory {
    std::vector<cplx> times;
    std::vector<cvec> states;
    StepStats stats;
};

struct SurfaceGrid {
    double re_lo = 0, re_hi = 0, im_lo = 0, im_hi = 0;
    int n_re = 0, n_im = 0;
    std::vector<cvec> values;         // row-major: index = i_re * n_im + j_im
    std::vector<unsigned char> mask;  // 1 = valid

    double re_at(int i) const {
        return n_re == 1 ? re_lo : re_lo + (re_hi - re_lo) * i / (n_re - 1);
    }
    double im_at(int j) const {
        return n_im == 1 ? im_lo : im_lo + (im_hi - im_lo) * j / (n_im - 1);
    }
};

namespace detail {

enum class StepOutcome { ok, singular, step_limit };

struct SegmentResult {
    StepOutcome outcome = StepOutcome::ok;
    size_t samples_filled = 0;
    double s_reached = 0.0;
};

inline bool finite(const cvec& y) {
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (!std::isfinite(y(i).real()) || !std::isfinite(y(i).imag()))
            return false;
    return true;
}

// Weighted RMS over the 2n real components, Hairer-style.
inline double error_norm(const cvec& y0, const cvec& y1, const cvec& err,
                         double rtol, double atol) {
    double acc = 0.0;
    const Eigen::Index n = y0.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sc_re =
            atol + rtol * std::max(std::abs(y0(i).real()), std::abs(y1(i).real()));
        const double sc_im =
            atol + rtol * std::max(std::abs(y0(i).imag()), std::abs(y1(i).imag()));
        const double er = err(i).real() / sc_re;
        const double ei = err(i).imag() / sc_im;
        acc += er * er + ei * ei;
    }
    return std::sqrt(acc / (2.0 * n));
}

// Integrates dy/ds = u * F(y) for s in [0, s_len] and fills `out` at the
// arc-length positions `sample_s` (ascending, within [0, s_len]). Returns
// early with outcome != ok when the step size underflows, a state leaves the
// finite/nonsingular domain, or the step budget is exhausted.
template <typename Field, typename Locus>
SegmentResult integrate_segment(const Field& field, const Locus& locus, cvec& y,
                                cplx u, double s_len,
                                const std::vector<double>& sample_s, cvec* out,
                                const Tolerances& tol, StepStats& stats,
                                long max_steps = 50'000'000) {
    SegmentResult res;
    while (res.samples_filled < sample_s.size() && sample_s[res.samples_filled] <= 0.0)
        out[res.samples_filled++] = y;
    if (s_len == 0.0) {
        for (; res.samples_filled < sample_s.size(); ++res.samples_filled)
            out[res.samples_filled] = y;
        return res;
    }

    double s = 0.0;
    cvec k1 = u * field(y);
    if (!finite(k1)) {
        res.outcome = StepOutcome::singular;
        return res;
    }

    const double y_scale = 1.0 + y.cwiseAbs().maxCoeff();
    const double f_scale = 1.0 + k1.cwiseAbs().maxCoeff();
    double h = std::min({0.1 * s_len, 0.1, 0.01 * y_scale / f_scale});
    h = std::max(h, tol.h_min);

    cvec k2, k3, k4, k5, k6, k7, y1, yerr;
    const Eigen::Index n = y.size();
    cvec rc1(n), rc2(n), rc3(n), rc4(n), rc5(n);

    long steps = 0;
    while (s < s_len) {
        if (++steps > max_steps) {
            res.outcome = StepOutcome::step_limit;
            res.s_reached = s;
            return res;
        }
        h = std::min(h, s_len - s);

        using namespace dopri;
        k2 = u * field(y + h * (a21 * k1));
        k3 = u * field(y + h * (a31 * k1 + a32 * k2));
        k4 = u * field(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        k5 = u * field(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        k6 = u * field(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        k7 = u * field(y1);
        yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        bool hard_reject = !finite(y1) || !finite(k7) || locus(y1);
        if (!hard_reject) {
            // A pole can fool the embedded error estimate when a step jumps
            // clean across it; capping the per-step state change forces the
            // step size to track the distance to the singularity instead.
            const double dy = (y1 - y).cwiseAbs().maxCoeff();
            hard_reject = dy > 0.5 * (y.cwiseAbs().maxCoeff() + 1.0);
        }

        double err = hard_reject ? -1.0 : error_norm(y, y1, yerr, tol.rtol, tol.atol);
        if (hard_reject || !std::isfinite(err)) {
            ++stats.rejected;
            h *= 0.5;
            if (h < tol.h_min) {
                res.outcome = StepOutcome::singular;
                res.s_reached = s;
                return res;
            }
            continue;
        }

        if (err > 1.0) {
            ++stats.rejected;
            h *= std::max(fac_min, safe * std::pow(err, -0.2));
            if (h < tol.h_min) {
                res.outcome = StepOutcome::singular;
                res.s_reached = s;
                return res;
            }
            continue;
        }

        rc1 = y;
        rc2 = y1 - y;
        rc3 = h * k1 - rc2;
        rc4 = rc2 - h * k7 - rc3;
        rc5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);

        const double s_new = s + h;
        while (res.samples_filled < sample_s.size() &&
               sample_s[res.samples_filled] <= s_new + 1e-14 * s_len) {
            const double th = std::clamp((sample_s[res.samples_filled] - s) / h, 0.0, 1.0);
            out[res.samples_filled] =
                rc1 + th * (rc2 + (1.0 - th) * (rc3 + th * (rc4 + (1.0 - th) * rc5)));
            ++res.samples_filled;
        }

        ++stats.accepted;
        stats.min_step = std::min(stats.min_step, h);
        s = s_new;
        y = y1;
        k1 = k7;
        h *= std::clamp(safe * std::pow(std::max(err, 1e-10), -0.2), fac_min, fac_max);
    }

    res.s_reached = s_len;
    // Guard against sample positions equal to s_len up to roundoff.
    for (; res.samples_filled < sample_s.size(); ++res.samples_filled)
        out[res.samples_filled] = y;
    return res;
}

inline int thread_budget() {
    if (const char* env = std::getenv("CTFLOW_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1 && v < 1024) return static_cast<int>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

} // namespace detail

inline Trajectory integrate_path(const ModelSpec& model, const cvec& z0,
                                 const TimePath& path, const Tolerances& tol = {}) {
    path.validate();
    tol.validate();
    check_state_dim(model, z0);
    if (model.singular_locus_test(z0))
        throw SingularState(model.name + ": initial state on singular locus");

    Trajectory traj;
    traj.times.push_back(path.vertices[0]);
    traj.states.push_back(z0);

    cvec y = z0;
    auto locus = [&model](const cvec& v) { return model.singular_locus_test(v); };
    auto field = [&model](const cvec& v) { return model.field_eval(v); };

    for (size_t seg = 1; seg < path.vertices.size(); ++seg) {
        const cplx t0 = path.vertices[seg - 1];
        const cplx t1 = path.vertices[seg];
        const double s_len = std::abs(t1 - t0);
        const cplx u = (t1 - t0) / s_len;

        const int m = path.samples_per_segment;
        std::vector<double> sample_s(m);
        for (int q = 1; q <= m; ++q) sample_s[q - 1] = s_len * q / m;
        std::vector<cvec> out(m);

        auto res = detail::integrate_segment(field, locus, y, u, s_len, sample_s,
                                             out.data(), tol, traj.stats);
        for (size_t q = 0; q < res.samples_filled; ++q) {
            traj.times.push_back(t0 + u * sample_s[q]);
            traj.states.push_back(out[q]);
        }
        if (res.outcome == detail::StepOutcome::singular)
            throw SingularityEncountered(
                model.name + ": singularity encountered along path",
                t0 + u * res.s_reached);
        if (res.outcome == detail::StepOutcome::step_limit)
            throw ToleranceNotMet(model.name + ": step budget exhausted");
    }
    return traj;
}

inline Trajectory integrate_imaginary_ray(const ModelSpec& model, const cvec& z0,
                                          double tau_max, int n_samples,
                                          const Tolerances& tol = {}) {
    if (!(tau_max > 0.0))
        throw ConfigError("tau_max must be positive");
    if (n_samples < 2)
        throw ConfigError("n_samples must be at least 2");
    TimePath path;
    path.vertices = {cplx(0.0, 0.0), cplx(0.0, tau_max)};
    path.samples_per_segment = n_samples - 1;
    return integrate_path(model, z0, path, tol);
}

inline SurfaceGrid sample_surface(const ModelSpec& model, const cvec& z0,
                                  double re_lo, double re_hi, double im_lo,
                                  double im_hi, int n_re, int n_im,
                                  const Tolerances& tol = {}) {
    tol.validate();
    check_state_dim(model, z0);
    if (!(re_lo <= re_hi) || !(im_lo <= im_hi) || !std::isfinite(re_lo) ||
        !std::isfinite(re_hi) || !std::isfinite(im_lo) || !std::isfinite(im_hi))
        throw ConfigError("invalid surface ranges");
    if (n_re < 1 || n_im < 1)
        throw ConfigError("grid shape must be at least 1x1");
    if (re_lo > 0.0 || re_hi < 0.0 || im_lo > 0.0 || im_hi < 0.0)
        throw AnchorOutsideGrid("surface ranges must contain t = 0");
    if (model.singular_locus_test(z0))
        throw SingularState(model.name + ": initial state on singular locus");

    SurfaceGrid grid;
    grid.re_lo = re_lo;
    grid.re_hi = re_hi;
    grid.im_lo = im_lo;
    grid.im_hi = im_hi;
    grid.n_re = n_re;
    grid.n_im = n_im;
    grid.values.assign(static_cast<size_t>(n_re) * n_im, cvec::Zero(model.dim));
    grid.mask.assign(static_cast<size_t>(n_re) * n_im, 0);

    auto locus = [&model](const cvec& v) { return model.singular_locus_test(v); };
    auto field = [&model](const cvec& v) { return model.field_eval(v); };

    auto run_column = [&](int i_re) {
        const double re = grid.re_at(i_re);
        StepStats stats;

        cvec anchor = z0;
        if (re != 0.0) {
            std::vector<double> no_samples;
            // Backward legs run the attracting fast direction in reverse, so local
            // error committed early is amplified by up to exp(fast * |re|) at the
            // column base; tighten the local target by that factor to keep the
            // delivered accuracy near the requested tolerance.
            Tolerances leg_tol = tol;
            if (re < 0.0 && model.fast_rate_estimate > 0.0) {
                const double squeeze = std::exp(-model.fast_rate_estimate * std::abs(re));
                leg_tol.rtol = std::max(tol.rtol * squeeze, 1e-14);
                leg_tol.atol = std::max(tol.atol * squeeze, 1e-16);
            }
            auto res = detail::integrate_segment(field, locus, anchor,
                                                 re > 0.0 ? cplx(1, 0) : cplx(-1, 0),
                                                 std::abs(re), no_samples, nullptr,
                                                 leg_tol, stats);
            if (res.outcome != detail::StepOutcome::ok)
                return;  // whole column unreachable, stays masked
        }

        // Rows split at tau2 = 0 into an upward and a downward ray.
        std::vector<double> up_s, down_s;
        std::vector<int> up_j, down_j;
        for (int j = 0; j < n_im; ++j) {
            const double im = grid.im_at(j);
            if (im >= 0.0) {
                up_s.push_back(im);
                up_j.push_back(j);
            } else {
                down_s.push_back(-im);
                down_j.push_back(j);
            }
        }
        std::sort(up_j.begin(), up_j.end(),
                  [&](int a, int b) { return grid.im_at(a) < grid.im_at(b); });
        std::sort(up_s.begin(), up_s.end());
        std::sort(down_j.begin(), down_j.end(),
                  [&](int a, int b) { return grid.im_at(a) > grid.im_at(b); });
        std::sort(down_s.begin(), down_s.end());

        for (int dir = 0; dir < 2; ++dir) {
            const auto& ss = dir == 0 ? up_s : down_s;
            const auto& jj = dir == 0 ? up_j : down_j;
            if (ss.empty()) continue;
            std::vector<cvec> out(ss.size());
            cvec y = anchor;
            auto res = detail::integrate_segment(
                field, locus, y, dir == 0 ? cplx(0, 1) : cplx(0, -1), ss.back(),
                ss, out.data(), tol, stats);
            for (size_t q = 0; q < res.samples_filled; ++q) {
                grid.values[static_cast<size_t>(i_re) * n_im + jj[q]] = out[q];
                grid.mask[static_cast<size_t>(i_re) * n_im + jj[q]] = 1;
            }
        }
    };

    const int workers = std::min(detail::thread_budget(), n_re);
    if (workers <= 1) {
        for (int i = 0; i < n_re; ++i) run_column(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < n_re; i = next.fetch_add(1))
                    run_column(i);
            });
        for (auto& th : pool) th.join();
    }
    return grid;
}

enum class VariationalMethod { linearized, integrated };

inline cvec propagate_variational(const ModelSpec& model, const cvec& z0, double tau,
                                  const cvec& w0, VariationalMethod method,
                                  const Tolerances& tol = {}) {
    check_state_dim(model, z0);
    check_state_dim(model, w0);
    if (!std::isfinite(tau))
        throw ConfigError("tau must be finite");
    if (tau == 0.0)
        return w0;

    if (method == VariationalMethod::linearized) {
        const cmat J = eval_jacobian(model, z0);
        const cmat propagator = (cplx(0.0, tau) * J).exp();
        return propagator * w0;
    }

    const int n = model.dim;
    auto coupled_field = [&model, n](const cvec& zw) -> cvec {
        const cvec z = zw.head(n);
        const cvec w = zw.tail(n);
        cvec out(2 * n);
        out.head(n) = model.field_eval(z);
        out.tail(n) = model.jacobian_eval(z) * w;
        return out;
    };
    auto coupled_locus = [&model, n](const cvec& zw) {
        return model.singular_locus_test(zw.head(n));
    };

    cvec y(2 * n);
    y.head(n) = z0;
    y.tail(n) = w0;
    StepStats stats;
    std::vector<double> no_samples;
    auto res = detail::integrate_segment(coupled_field, coupled_locus, y,
                                         tau > 0 ? cplx(0, 1) : cplx(0, -1),
                                         std::abs(tau), no_samples, nullptr, tol, stats);
    if (res.outcome == detail::StepOutcome::singular)
        throw SingularityEncountered(
            model.name + ": singularity during variational propagation",
            cplx(0.0, res.s_reached));
    if (res.outcome == detail::StepOutcome::step_limit)
        throw ToleranceNotMet(model.name + ": step budget exhausted");
    return y.tail(n);
}

} // namespace ctflow
