#pragma once

// Decay certification of simulated trajectories.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <vector>

#include "svbs/controller.hpp"
#include "svbs/errors.hpp"
#include "svbs/lyapunov.hpp"
#include "svbs/sim_engine.hpp"

namespace svbs {

/// amplitude * exp(-rate t). The rate is the least-squares slope of the log
/// of the running maximum from the right (sup over s >= t, positive samples
/// only); the amplitude is then raised until the envelope bounds every sample.
struct Envelope {
    double rate = 0.0;
    double amplitude = 0.0;
    int fitted_samples = 0;

    double operator()(double t) const { return amplitude * std::exp(-rate * t); }
};

inline Envelope exponential_envelope(const std::vector<double>& t, const std::vector<double>& y) {
    if (t.size() != y.size()) throw DimensionError("exponential_envelope: size mismatch");
    std::vector<double> sup(y.size());
    double run = 0.0;
    for (std::size_t k = y.size(); k-- > 0;) sup[k] = run = std::max(run, y[k]);
    double st = 0, sy = 0, stt = 0, sty = 0;
    int count = 0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!(sup[k] > 0.0)) continue;
        const double ly = std::log(sup[k]);
        st += t[k];
        sy += ly;
        stt += t[k] * t[k];
        sty += t[k] * ly;
        ++count;
    }
    Envelope e;
    e.fitted_samples = count;
    if (count >= 2) {
        const double den = count * stt - st * st;
        if (den > 0.0) e.rate = -(count * sty - st * sy) / den;
    }
    for (std::size_t k = 0; k < t.size(); ++k) e.amplitude = std::max(e.amplitude, y[k] * std::exp(e.rate * t[k]));
    return e;
}

struct DecayReport {
    int samples = 0;
    double theoretical_rate = 0.0;  // c
    double fitted_rate = 0.0;       // from log V, samples with V > 0
    int fitted_samples = 0;
    double worst_ratio = 0.0;       // max V_{k+1} / (V_k e^{-c dt}); 0 when every step passes with V_k = 0
    double worst_time = 0.0;
    bool certificate = true;        // every step within (1 + tolerance)
    double tolerance = 0.05;
    double V0 = 0.0;
    double VT = 0.0;
    double norm0 = 0.0;
    double normT = 0.0;
    double final_bound = 0.0;       // sqrt(C2/C1) |z(0)| e^{-c T / 2}
    std::vector<double> V;

    bool passed() const { return certificate && (fitted_samples < 2 || fitted_rate > 0.0) && normT <= final_bound; }
};

/// Re-maps each stored state to target coordinates and checks
///   V(t_{k+1}) <= V(t_k) exp(-c (t_{k+1} - t_k)) (1 + tolerance).
inline DecayReport certify_decay(const LyapunovParams& params, const SimTrace& trace, const KernelSet& ks,
                                 const HeteroSystem& sys, double tolerance = 0.05) {
    if (trace.states.size() < 2) throw DomainError("certify_decay: need a trace with at least 2 stored states");
    const TargetTransform target(ks, SimGrid(trace.states.front().cells()));
    DecayReport rep;
    rep.samples = static_cast<int>(trace.states.size());
    rep.theoretical_rate = params.c;
    rep.tolerance = tolerance;
    std::vector<double> times, norms;
    for (const auto& s : trace.states) {
        const TargetState z = target(s);
        rep.V.push_back(evaluate_V(params, z, sys));
        times.push_back(s.t);
        norms.push_back(std::sqrt(target_norm_squared(z)));
    }
    for (std::size_t k = 0; k + 1 < rep.V.size(); ++k) {
        const double allowed = rep.V[k] * std::exp(-params.c * (times[k + 1] - times[k]));
        double ratio = 0.0;
        if (allowed > 0.0) ratio = rep.V[k + 1] / allowed;
        else if (rep.V[k + 1] > 0.0) ratio = std::numeric_limits<double>::infinity();
        if (ratio > rep.worst_ratio) {
            rep.worst_ratio = ratio;
            rep.worst_time = times[k + 1];
        }
        if (ratio > 1.0 + tolerance) rep.certificate = false;
    }
    const Envelope fit = exponential_envelope(times, rep.V);
    rep.fitted_rate = fit.rate;
    rep.fitted_samples = fit.fitted_samples;
    rep.V0 = rep.V.front();
    rep.VT = rep.V.back();
    rep.norm0 = norms.front();
    rep.normT = norms.back();
    const double T = times.back() - times.front();
    rep.final_bound = std::sqrt(params.C2 / params.C1) * rep.norm0 * std::exp(-0.5 * params.c * T);
    return rep;
}

inline void write_decay_report(std::ostream& os, const DecayReport& r) {
    os << std::setprecision(10);
    os << "samples = " << r.samples << '\n'
       << "theoretical_rate_c = " << r.theoretical_rate << '\n'
       << "fitted_rate = " << r.fitted_rate << " (" << r.fitted_samples << " samples with V > 0)\n"
       << "worst_step_ratio = " << r.worst_ratio << " at t = " << r.worst_time << " (allowed " << 1.0 + r.tolerance
       << ")\n"
       << "V0 = " << r.V0 << '\n'
       << "VT = " << r.VT << '\n'
       << "norm0 = " << r.norm0 << '\n'
       << "normT = " << r.normT << '\n'
       << "final_bound = " << r.final_bound << '\n'
       << "certificate = " << (r.certificate ? "pass" : "fail") << '\n'
       << "result = " << (r.passed() ? "pass" : "fail") << '\n';
}

}  // namespace svbs
