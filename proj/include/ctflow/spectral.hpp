#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "flow.hpp"

namespace ctflow {

inline constexpr double pi = 3.141592653589793238462643383279502884;

enum class Window { rectangular, hann };
enum class Detrend { none, mean, fixed_point };

// Signed-frequency spectrum under the fixed convention
// F[f](xi) = (1/sqrt(2pi)) \int f(tau) e^{-i xi tau} dtau, discretized so an
// on-grid tone a e^{i lambda tau} yields a single bin of amplitude a.
struct SpectrumEstimate {
    int component = 0;
    std::vector<double> frequencies;  // ascending, (m - N/2) * delta_xi
    std::vector<cplx> amplitudes;
    Window window = Window::rectangular;
    double T = 0.0;
    double delta_xi = 0.0;
    cplx detrend_offset = 0.0;
    // (2pi)^2/(dtau S^2) * sum w_j^2 |f_j|^2 with S = sum w_j; satisfies
    // sum |amp|^2 dxi = windowed_energy / (2pi) exactly.
    double windowed_energy = 0.0;

    double nyquist() const { return frequencies.empty() ? 0.0 : -frequencies.front(); }

    double total_energy() const {
        double e = 0.0;
        for (const cplx& a : amplitudes) e += std::norm(a);
        return e * delta_xi;
    }
};

struct SpectralLine {
    double xi = 0.0;
    cplx amplitude = 0.0;
};

namespace detail {

inline bool is_power_of_two(size_t n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 FFT, kernel e^{-2pi i jm/N}.
inline void fft_radix2(std::vector<cplx>& a) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * pi / static_cast<double>(len);
        const cplx wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (size_t j = 0; j < len / 2; ++j) {
                const cplx even = a[i + j];
                const cplx odd = a[i + j + len / 2] * w;
                a[i + j] = even + odd;
                a[i + j + len / 2] = even - odd;
                w *= wl;
            }
        }
    }
}

} // namespace detail

inline SpectrumEstimate dft_spectrum(const Trajectory& traj, int component,
                                     Window window = Window::rectangular,
                                     Detrend detrend = Detrend::none,
                                     cplx fixed_point_value = 0.0) {
    const size_t N = traj.times.size();
    if (!detail::is_power_of_two(N))
        throw LengthNotPowerOfTwo("sample count " + std::to_string(N) +
                                  " is not a power of two");
    if (N < 2)
        throw ConfigError("need at least two samples");
    if (component < 0 || component >= traj.states[0].size())
        throw ConfigError("component index out of range");

    const double dtau = traj.times[1].imag() - traj.times[0].imag();
    if (!(dtau > 0.0))
        throw NonUniformSampling("imaginary parts must be strictly increasing");
    for (size_t j = 1; j < N; ++j) {
        const double step = traj.times[j].imag() - traj.times[j - 1].imag();
        if (std::abs(step - dtau) > 1e-12 * std::max(1.0, std::abs(dtau)))
            throw NonUniformSampling("sample spacing varies beyond 1e-12");
        if (std::abs(traj.times[j].real() - traj.times[0].real()) >
            1e-12 * (1.0 + std::abs(traj.times[0].real())))
            throw NonUniformSampling("samples must lie on one imaginary ray");
    }

    SpectrumEstimate spec;
    spec.component = component;
    spec.window = window;
    spec.T = static_cast<double>(N) * dtau;
    spec.delta_xi = 2.0 * pi / spec.T;

    cplx offset = 0.0;
    if (detrend == Detrend::mean) {
        for (size_t j = 0; j < N; ++j) offset += traj.states[j](component);
        offset /= static_cast<double>(N);
    } else if (detrend == Detrend::fixed_point) {
        offset = fixed_point_value;
    }
    spec.detrend_offset = offset;

    std::vector<cplx> buf(N);
    double S = 0.0, wsq_energy = 0.0;
    for (size_t j = 0; j < N; ++j) {
        const double w = window == Window::rectangular
                             ? 1.0
                             : 0.5 * (1.0 - std::cos(2.0 * pi * j / N));
        const cplx f = traj.states[j](component) - offset;
        buf[j] = w * f;
        S += w;
        wsq_energy += w * w * std::norm(f);
    }
    detail::fft_radix2(buf);

    spec.windowed_energy = (2.0 * pi) * (2.0 * pi) / (dtau * S * S) * wsq_energy;
    spec.frequencies.resize(N);
    spec.amplitudes.resize(N);
    const long half = static_cast<long>(N / 2);
    for (long m = 0; m < static_cast<long>(N); ++m) {
        // FFT bin m holds frequency m*delta_xi modulo the sampling rate;
        // shift to the signed grid (m - N/2)*delta_xi in ascending order.
        const long m_signed = m - half;
        const size_t src = static_cast<size_t>((m_signed + static_cast<long>(N)) % static_cast<long>(N));
        spec.frequencies[static_cast<size_t>(m)] = m_signed * spec.delta_xi;
        spec.amplitudes[static_cast<size_t>(m)] = buf[src] / S;
    }

    // The FFT kernel e^{-2pi i jm/N} equals e^{-i xi_m tau_j} only up to the
    // phase of tau_0; compensate so amplitudes refer to absolute tau.
    const double tau0 = traj.times[0].imag();
    if (tau0 != 0.0)
        for (size_t m = 0; m < N; ++m)
            spec.amplitudes[m] *= std::exp(cplx(0.0, -spec.frequencies[m] * tau0));

    return spec;
}

inline std::vector<SpectralLine> detect_peaks(const SpectrumEstimate& spec,
                                              double rel_threshold) {
    if (spec.amplitudes.empty())
        throw ConfigError("empty spectrum");
    if (!(rel_threshold > 0.0) || !(rel_threshold < 1.0))
        throw ConfigError("rel_threshold must lie in (0,1)");

    const size_t N = spec.amplitudes.size();
    double max_mag = 0.0;
    for (const cplx& a : spec.amplitudes) max_mag = std::max(max_mag, std::abs(a));
    if (max_mag == 0.0) return {};
    const double floor = rel_threshold * max_mag;

    std::vector<SpectralLine> peaks;
    for (size_t m = 0; m < N; ++m) {
        const double b = std::abs(spec.amplitudes[m]);
        if (b < floor) continue;
        const double a = m > 0 ? std::abs(spec.amplitudes[m - 1]) : -1.0;
        const double c = m + 1 < N ? std::abs(spec.amplitudes[m + 1]) : -1.0;
        if (b < a || b <= c) continue;  // left-inclusive to dedupe plateaus

        double xi = spec.frequencies[m];
        cplx amp = spec.amplitudes[m];
        if (m > 0 && m + 1 < N) {
            const double denom = a - 2.0 * b + c;
            if (denom < 0.0) {
                const double delta = std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
                xi += delta * spec.delta_xi;
                const double refined = b - 0.25 * (a - c) * delta;
                if (refined > 0.0 && b > 0.0) amp *= refined / b;
            }
        }
        peaks.push_back({xi, amp});
    }

    std::sort(peaks.begin(), peaks.end(), [](const SpectralLine& x, const SpectralLine& y) {
        const double mx = std::abs(x.amplitude), my = std::abs(y.amplitude);
        if (mx != my) return mx > my;
        return std::abs(x.xi) < std::abs(y.xi);
    });
    return peaks;
}

inline double band_energy(const SpectrumEstimate& spec, double xi_lo, double xi_hi) {
    if (!(xi_lo >= 0.0) || !(xi_lo < xi_hi))
        throw ConfigError("band requires 0 <= xi_lo < xi_hi");
    double e = 0.0;
    for (size_t m = 0; m < spec.amplitudes.size(); ++m) {
        const double axi = std::abs(spec.frequencies[m]);
        if (axi >= xi_lo && axi <= xi_hi) e += std::norm(spec.amplitudes[m]);
    }
    return e * spec.delta_xi;
}

inline double estimate_support(const SpectrumEstimate& spec, double tail_fraction) {
    if (!(tail_fraction > 0.0) || !(tail_fraction < 1.0))
        throw ConfigError("tail_fraction must lie in (0,1)");
    double total = 0.0;
    for (const cplx& a : spec.amplitudes) total += std::norm(a);
    if (total <= 0.0)
        throw ZeroSignal("spectrum carries no energy");

    std::vector<size_t> idx(spec.amplitudes.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&spec](size_t i, size_t j) {
        return std::abs(spec.frequencies[i]) < std::abs(spec.frequencies[j]);
    });

    // Walk inward from the largest |xi|; lambda is the smallest grid value
    // whose exterior holds at most the tail fraction.
    double outside = 0.0;
    double lambda = std::abs(spec.frequencies[idx.back()]);
    for (size_t q = idx.size(); q-- > 0;) {
        const double next_outside = outside + std::norm(spec.amplitudes[idx[q]]);
        if (next_outside > tail_fraction * total) break;
        outside = next_outside;
        lambda = q > 0 ? std::abs(spec.frequencies[idx[q - 1]]) : 0.0;
    }
    return lambda;
}

} // namespace ctflow
