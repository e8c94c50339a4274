#ifndef NCOPT_TESTS_ORACLES_HPP
#define NCOPT_TESTS_ORACLES_HPP

// Independent oracles used by the test and acceptance suites.  These stay
// deliberately separate from the library implementation paths they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

namespace oracles {

/// Mean-field ODE of the two-compartment benchmark (source compartment with
/// constant release, one cell compartment with binding), integrated with
/// fixed-step RK4.  State: [free_src, free_cell, receptors, complexes,
/// internalized].  bind_rate is the stochastic per-pair rate [1/s]; the
/// receptor is recycled on internalization.
struct MeanFieldParams {
    double release;
    double hop_rate;
    double bind_rate;
    double unbind_rate;
    double internal_rate;
    double receptors0;
};

inline std::array<double, 5> mean_field_rk4(const MeanFieldParams& p, double t_end,
                                            double dt = 1.0) {
    std::array<double, 5> y{0.0, 0.0, p.receptors0, 0.0, 0.0};
    auto deriv = [&](const std::array<double, 5>& s) {
        const double hop = p.hop_rate * (s[0] - s[1]);
        const double bind = p.bind_rate * s[1] * s[2];
        const double unbind = p.unbind_rate * s[3];
        const double internal = p.internal_rate * s[3];
        return std::array<double, 5>{p.release - hop,
                                     hop - bind + unbind,
                                     -bind + unbind + internal,
                                     bind - unbind - internal, internal};
    };
    double t = 0.0;
    while (t < t_end - 1e-12) {
        const double h = std::min(dt, t_end - t);
        const auto k1 = deriv(y);
        std::array<double, 5> y2, y3, y4;
        for (int i = 0; i < 5; ++i) y2[i] = y[i] + 0.5 * h * k1[i];
        const auto k2 = deriv(y2);
        for (int i = 0; i < 5; ++i) y3[i] = y[i] + 0.5 * h * k2[i];
        const auto k3 = deriv(y3);
        for (int i = 0; i < 5; ++i) y4[i] = y[i] + h * k3[i];
        const auto k4 = deriv(y4);
        for (int i = 0; i < 5; ++i)
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        t += h;
    }
    return y;
}

/// Two-sample Kolmogorov-Smirnov test.  Returns the asymptotic p-value.
inline double ks_two_sample_pvalue(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(i / na - j / nb));
    }
    const double en = std::sqrt(na * nb / (na + nb));
    const double lambda = (en + 0.12 + 0.11 / en) * d;
    double p = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
        p += sign * 2.0 * std::exp(-2.0 * lambda * lambda * k * k);
        sign = -sign;
    }
    return std::clamp(p, 0.0, 1.0);
}

/// Nearest-rank percentile by explicit sort-and-index, used against the
/// library's implementation.
inline double percentile_sort_oracle(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * n));
    if (rank < 1) rank = 1;
    return v[rank - 1];
}

} // namespace oracles

#endif
