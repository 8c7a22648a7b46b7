#include <cstdio>
#include <ctflow/ctflow.hpp>

using namespace ctflow;

int main() {
    auto model = make_davis_skodje(10.0);

    cvec z0(2);
    z0 << cplx(2.0, 0.0), cplx(2.0 / 3.0 + 0.3, 0.0);

    auto traj = integrate_imaginary_ray(model, z0, 16.0 * pi, 513);
    std::printf("integrated %zu samples along the imaginary axis (%ld steps, %ld rejected)\n",
                traj.states.size(), traj.stats.accepted, traj.stats.rejected);
    traj.times.pop_back();
    traj.states.pop_back();

    const auto spec = dft_spectrum(traj, 1, Window::rectangular);
    const auto peaks = detect_peaks(spec, 1e-3);
    std::printf("component 2 spectrum: %zu bins, %zu peaks\n", spec.amplitudes.size(),
                peaks.size());
    for (size_t k = 0; k < peaks.size() && k < 5; ++k)
        std::printf("  peak at xi = %+.4f with |amplitude| %.4f\n", peaks[k].xi,
                    std::abs(peaks[k].amplitude));

    for (double offset : {0.0, 0.3}) {
        cvec z(2);
        z << cplx(2.5, 0.0), cplx(2.5 / 3.5 + offset, 0.0);
        const auto rep = classify(model, z);
        std::printf("offset %.1f: verdict %s, high/low energy ratio %.3e (cutoff %.4f)\n",
                    offset,
                    rep.verdict == Verdict::off_sim ? "off_sim" : "on_sim_consistent",
                    rep.high_low_ratio, rep.cutoff_used);
    }

    GrowthFitOptions growth;
    growth.re_max = 3.0;
    const auto pw = paley_wiener_consistency(model, z0, {}, growth);
    std::printf("paley-wiener check: support %.4f vs growth %.4f (%s)\n", pw.lambda_supp,
                pw.lambda_growth, pw.consistent ? "consistent" : "inconsistent");
    return 0;
}
