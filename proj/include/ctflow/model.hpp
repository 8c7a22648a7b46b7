#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace ctflow {

using cplx = std::complex<double>;
using cvec = Eigen::VectorXcd;
using cmat = Eigen::MatrixXcd;

constexpr double default_delta_pole = 1e-8;
constexpr double default_amp_floor = 1e-12;

// One Dirac line of an analytic spectrum (or a detected peak): state
// component index (0-based), signed frequency, complex amplitude.
struct SpectralLineEntry {
    int component;
    double xi;
    cplx amplitude;
};

// Integration constants: (c1, c2) for Davis-Skodje, alpha_k for the linear
// model (eigenbasis coordinates).
struct FlowCoefficients {
    cvec c;
};

enum class FastSign { paper_printed, critical_manifold_consistent };
enum class Eps2Grouping { brace_outermost, brace_inner };

// Eigen-decomposition of the linear model's matrix, validated at
// construction: real eigenvalues, A*v = lambda*v to 1e-10 relative.
struct LinearData {
    Eigen::MatrixXd A;
    Eigen::VectorXd lambda;
    Eigen::MatrixXd V;
    Eigen::MatrixXd Vinv;
};

struct ModelSpec {
    std::string name;
    int dim = 0;
    std::map<std::string, double> params;

    std::function<cvec(const cvec&)> field_eval;
    std::function<cmat(const cvec&)> jacobian_eval;
    std::function<bool(const cvec&)> singular_locus_test;

    bool has_closed_form = false;
    bool has_sim_graph = false;

    std::function<FlowCoefficients(const cvec&)> fit_fn;
    std::function<cvec(const FlowCoefficients&, cplx, double)> closed_form_fn;
    std::function<double(double, int)> sim_graph_fn;
    std::function<std::vector<SpectralLineEntry>(const FlowCoefficients&, double)> comb_fn;

    // Magnitude of the fastest linear rate when known (gamma, max|lambda_k|);
    // 0 means unknown. Used for Nyquist sanity checks only.
    double fast_rate_estimate = 0.0;

    std::shared_ptr<const LinearData> linear;
};

inline void check_state_dim(const ModelSpec& model, const cvec& state) {
    if (state.size() != model.dim)
        throw ConfigError("state dimension " + std::to_string(state.size()) +
                          " does not match model dimension " + std::to_string(model.dim));
}

inline cvec eval_field(const ModelSpec& model, const cvec& state) {
    check_state_dim(model, state);
    if (model.singular_locus_test && model.singular_locus_test(state))
        throw SingularState(model.name + ": state on singular locus");
    return model.field_eval(state);
}

inline cmat eval_jacobian(const ModelSpec& model, const cvec& state) {
    check_state_dim(model, state);
    if (model.singular_locus_test && model.singular_locus_test(state))
        throw SingularState(model.name + ": state on singular locus");
    return model.jacobian_eval(state);
}

inline cvec closed_form_solution(const ModelSpec& model, const FlowCoefficients& coeffs,
                                 cplx t, double delta_pole = default_delta_pole) {
    if (!model.has_closed_form)
        throw NoClosedForm(model.name + " has no closed-form solution");
    return model.closed_form_fn(coeffs, t, delta_pole);
}

inline FlowCoefficients fit_coefficients(const ModelSpec& model, const cvec& z0) {
    if (!model.has_closed_form)
        throw NoClosedForm(model.name + " has no closed-form solution");
    check_state_dim(model, z0);
    return model.fit_fn(z0);
}

inline double sim_graph(const ModelSpec& model, double z1, int order) {
    if (!model.has_sim_graph)
        throw NoSimGraph(model.name + " has no SIM graph");
    if (order < 0 || order > 2)
        throw ConfigError("sim_graph order must be in 0..2");
    return model.sim_graph_fn(z1, order);
}

inline std::vector<SpectralLineEntry> analytic_spectrum(
    const ModelSpec& model, const FlowCoefficients& coeffs,
    double amp_floor = default_amp_floor) {
    if (!model.has_closed_form)
        throw NoClosedForm(model.name + " has no analytic spectrum");
    return model.comb_fn(coeffs, amp_floor);
}

inline ModelSpec make_linear(const Eigen::MatrixXd& A, double max_condition = 1e8) {
    const int n = static_cast<int>(A.rows());
    if (A.rows() != A.cols() || n < 1)
        throw ConfigError("linear model requires a square matrix");

    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    if (es.info() != Eigen::Success)
        throw ConfigError("eigendecomposition failed");

    const double scale = A.cwiseAbs().maxCoeff() + 1.0;
    if (es.eigenvalues().imag().cwiseAbs().maxCoeff() > 1e-10 * scale)
        throw ConfigError("linear model requires real eigenvalues");

    auto data = std::make_shared<LinearData>();
    data->A = A;
    data->lambda = es.eigenvalues().real();
    data->V = es.eigenvectors().real();

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(data->V);
    const double cond = svd.singularValues()(0) / svd.singularValues()(n - 1);
    if (!std::isfinite(cond) || cond > max_condition)
        throw ConfigError("eigenvector matrix condition number " + std::to_string(cond) +
                          " exceeds bound");
    data->Vinv = data->V.inverse();

    for (int k = 0; k < n; ++k) {
        const double res = (A * data->V.col(k) - data->lambda(k) * data->V.col(k)).norm();
        if (res > 1e-10 * (1.0 + std::abs(data->lambda(k))) * data->V.col(k).norm())
            throw ConfigError("eigenpair residual exceeds 1e-10");
    }

    ModelSpec m;
    m.name = "linear";
    m.dim = n;
    m.linear = data;
    m.has_closed_form = true;
    m.fast_rate_estimate = data->lambda.cwiseAbs().maxCoeff();

    m.field_eval = [data](const cvec& z) -> cvec { return data->A.cast<cplx>() * z; };
    m.jacobian_eval = [data](const cvec&) -> cmat { return data->A.cast<cplx>(); };
    m.singular_locus_test = [](const cvec&) { return false; };

    m.fit_fn = [data](const cvec& z0) -> FlowCoefficients {
        return FlowCoefficients{data->Vinv.cast<cplx>() * z0};
    };
    m.closed_form_fn = [data, n](const FlowCoefficients& coeffs, cplx t, double) -> cvec {
        cvec z = cvec::Zero(n);
        for (int k = 0; k < n; ++k)
            z += coeffs.c(k) * std::exp(data->lambda(k) * t) * data->V.col(k).cast<cplx>();
        return z;
    };
    m.comb_fn = [data, n](const FlowCoefficients& coeffs,
                          double amp_floor) -> std::vector<SpectralLineEntry> {
        // Mode alpha_k e^{lambda_k t} sampled at t = i tau is a tone
        // e^{i lambda_k tau}, which the fixed kernel places at xi = lambda_k.
        std::vector<SpectralLineEntry> lines;
        for (int j = 0; j < n; ++j) {
            std::map<double, cplx> by_xi;
            for (int k = 0; k < n; ++k)
                by_xi[data->lambda(k)] += coeffs.c(k) * data->V(j, k);
            for (const auto& [xi, amp] : by_xi)
                if (std::abs(amp) >= amp_floor)
                    lines.push_back({j, xi, amp});
        }
        return lines;
    };
    return m;
}

inline ModelSpec make_davis_skodje(double gamma) {
    if (!(gamma > 1.0))
        throw ConfigError("davis-skodje requires gamma > 1");

    ModelSpec m;
    m.name = "davis-skodje";
    m.dim = 2;
    m.params["gamma"] = gamma;
    m.has_closed_form = true;
    m.has_sim_graph = true;
    m.fast_rate_estimate = gamma;

    m.field_eval = [gamma](const cvec& z) -> cvec {
        const cplx z1 = z(0), z2 = z(1);
        const cplx d = 1.0 + z1;
        cvec f(2);
        f(0) = -z1;
        f(1) = -gamma * z2 + ((gamma - 1.0) * z1 + gamma * z1 * z1) / (d * d);
        return f;
    };
    m.jacobian_eval = [gamma](const cvec& z) -> cmat {
        const cplx z1 = z(0);
        const cplx d = 1.0 + z1;
        cmat J(2, 2);
        J(0, 0) = -1.0;
        J(0, 1) = 0.0;
        J(1, 0) = ((gamma - 1.0) + (gamma + 1.0) * z1) / (d * d * d);
        J(1, 1) = -gamma;
        return J;
    };
    m.singular_locus_test = [](const cvec& z) {
        return std::abs(1.0 + z(0)) <= default_delta_pole;
    };

    m.fit_fn = [](const cvec& z0) -> FlowCoefficients {
        const cplx z1 = z0(0);
        if (std::abs(1.0 + z1) <= default_delta_pole)
            throw SingularState("davis-skodje: z1 = -1 is singular");
        cvec c(2);
        c(0) = z1;
        c(1) = z0(1) - z1 / (1.0 + z1);
        return FlowCoefficients{c};
    };
    m.closed_form_fn = [gamma](const FlowCoefficients& coeffs, cplx t,
                               double delta_pole) -> cvec {
        const cplx c1 = coeffs.c(0), c2 = coeffs.c(1);
        const cplx e = c1 * std::exp(-t);
        if (std::abs(e + 1.0) < delta_pole)
            throw SolutionPole("davis-skodje closed form pole: |c1 e^{-t} + 1| < delta");
        cvec z(2);
        z(0) = e;
        z(1) = e / (e + 1.0) + c2 * std::exp(-gamma * t);
        return z;
    };
    m.sim_graph_fn = [](double z1, int) -> double {
        if (z1 <= -1.0)
            throw DomainError("sim_graph requires z1 > -1");
        return z1 / (1.0 + z1);
    };
    m.comb_fn = [gamma](const FlowCoefficients& coeffs,
                        double amp_floor) -> std::vector<SpectralLineEntry> {
        const cplx c1 = coeffs.c(0), c2 = coeffs.c(1);
        if (std::abs(c1.imag()) > 1e-12 * (1.0 + std::abs(c1)))
            throw DomainError("analytic spectrum requires real c1");
        const double c1r = c1.real();
        if (c1r == 0.0 || c1r == -1.0)
            throw DomainError("analytic spectrum requires c1 not in {-1, 0}");
        const double a = std::abs(c1r);
        if (std::abs(a - 1.0) < 1e-9)
            throw BranchAmbiguity("analytic spectrum undefined for |c1| within 1e-9 of 1");

        std::vector<SpectralLineEntry> lines;
        lines.push_back({0, -1.0, c1});
        if (std::abs(c2) >= amp_floor)
            lines.push_back({1, -gamma, c2});

        // Slow part of z2: c1 e^{-i tau} / (c1 e^{-i tau} + 1) expanded as a
        // geometric series on the branch selected by |c1| vs 1.
        if (a > 1.0) {
            double mag = 1.0;
            for (int k = 0; mag >= amp_floor; ++k) {
                const double amp = (k % 2 == 0 ? 1.0 : -1.0) * std::pow(c1r, -k);
                lines.push_back({1, static_cast<double>(k), amp});
                mag = std::abs(amp / c1r);
            }
        } else {
            double mag = a;
            for (int k = 1; mag >= amp_floor; ++k) {
                const double amp = (k % 2 == 0 ? -1.0 : 1.0) * std::pow(c1r, k);
                lines.push_back({1, static_cast<double>(-k), amp});
                mag = std::abs(amp * c1r);
            }
        }
        return lines;
    };
    return m;
}

inline ModelSpec make_michaelis_menten(
    double gamma, FastSign fast_sign = FastSign::critical_manifold_consistent,
    Eps2Grouping grouping = Eps2Grouping::brace_outermost) {
    if (!(gamma > 1.0))
        throw ConfigError("michaelis-menten requires gamma > 1");
    const double eps = 1.0 / gamma;
    // +z2 as printed versus -z2, which makes the order-0 manifold of the fast
    // equation coincide with the SIM expansion's leading term z1/(1+z1).
    const double s = (fast_sign == FastSign::paper_printed) ? 1.0 : -1.0;

    ModelSpec m;
    m.name = "michaelis-menten";
    m.dim = 2;
    m.params["gamma"] = gamma;
    m.params["epsilon"] = eps;
    m.has_sim_graph = true;
    m.fast_rate_estimate = 1.0 + 1.0 / (2.0 * gamma);

    m.field_eval = [eps, s](const cvec& z) -> cvec {
        const cplx z1 = z(0), z2 = z(1);
        cvec f(2);
        f(0) = eps * (-z1 + z1 * z2 + 0.5 * z2);
        f(1) = z1 - z1 * z2 + s * z2;
        return f;
    };
    m.jacobian_eval = [eps, s](const cvec& z) -> cmat {
        const cplx z1 = z(0), z2 = z(1);
        cmat J(2, 2);
        J(0, 0) = eps * (-1.0 + z2);
        J(0, 1) = eps * (z1 + 0.5);
        J(1, 0) = 1.0 - z2;
        J(1, 1) = -z1 + s;
        return J;
    };
    m.singular_locus_test = [](const cvec&) { return false; };

    m.sim_graph_fn = [eps, grouping](double z1, int order) -> double {
        if (z1 <= -1.0)
            throw DomainError("sim_graph requires z1 > -1");
        const double d = 1.0 + z1;
        double v = z1 / d;
        if (order >= 1)
            v += eps * z1 / (2.0 * d);
        if (order >= 2) {
            const double denom = (grouping == Eps2Grouping::brace_outermost)
                                     ? std::pow(2.0 * d, 7)
                                     : 2.0 * std::pow(d, 7);
            v += eps * eps * z1 * (1.0 - 2.5 * z1) / denom;
        }
        return v;
    };
    return m;
}

inline ModelSpec make_model(const std::string& id, double gamma,
                            FastSign fast_sign = FastSign::critical_manifold_consistent,
                            Eps2Grouping grouping = Eps2Grouping::brace_outermost) {
    if (id == "davis-skodje")
        return make_davis_skodje(gamma);
    if (id == "michaelis-menten")
        return make_michaelis_menten(gamma, fast_sign, grouping);
    throw ConfigError("unknown model id: " + id);
}

} // namespace ctflow
