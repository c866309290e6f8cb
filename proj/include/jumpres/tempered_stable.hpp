#ifndef JUMPRES_TEMPERED_STABLE_HPP
#define JUMPRES_TEMPERED_STABLE_HPP

#include <cmath>
#include <cstdint>
#include <string>

#include "jumpres/errors.hpp"
#include "jumpres/gamma.hpp"
#include "jumpres/rng.hpp"

namespace jumpres {

/// Parameters of the tempered-stable jump kernel a z^{-1-alpha} e^{-b z} dz.
///
/// alpha in (0,1) controls intermittency, a > 0 the jump frequency, and
/// b > 0 the exponential tempering of large jumps. The first tempering
/// moment must satisfy M1 < 1 or the self-excited inflow has no stationary
/// mean.
struct TemperedStableParams {
    double alpha = 0.5;  ///< stability index, in (0, 1)
    double a = 0.0;      ///< jump frequency coefficient, > 0 for an active kernel
    double b = 1.0;      ///< tempering rate, > 0

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw Error("alpha must lie in (0, 1)");
        if (!(a >= 0.0)) throw Error("jump frequency a must be nonnegative");
        if (!(b > 0.0)) throw Error("tempering rate b must be positive");
    }
};

/// k-th moment of the kernel, M_k = a b^{alpha-k} Gamma(k - alpha).
inline double tempering_moment(const TemperedStableParams& ts, int k) {
    return ts.a * std::pow(ts.b, ts.alpha - static_cast<double>(k)) *
           gamma_fn(static_cast<double>(k) - ts.alpha);
}

/// Mean of a TS(alpha, c, b) increment with kernel c z^{-1-alpha} e^{-bz}.
inline double ts_mean(double alpha, double c, double b) {
    return c * gamma_fn(1.0 - alpha) * std::pow(b, alpha - 1.0);
}

/// Variance of a TS(alpha, c, b) increment.
inline double ts_variance(double alpha, double c, double b) {
    return c * gamma_fn(2.0 - alpha) * std::pow(b, alpha - 2.0);
}

/// k-th cumulant of a TS(alpha, c, b) increment, c Gamma(k-alpha) b^{alpha-k}.
inline double ts_cumulant(double alpha, double c, double b, int k) {
    return c * gamma_fn(static_cast<double>(k) - alpha) *
           std::pow(b, alpha - static_cast<double>(k));
}

namespace detail {

/// One-sided alpha-stable variate with Laplace transform exp(-u^alpha),
/// via the Kanter representation: (Z(theta)/xi)^{(1-alpha)/alpha} with
/// theta uniform on (0, pi) and xi standard exponential.
inline double stable_subordinator(double alpha, Rng& rng) {
    static const double pi = 3.14159265358979323846;
    const double theta = pi * rng.uniform_open();
    const double xi = rng.exponential();
    const double z = std::pow(std::pow(std::sin(alpha * theta), alpha) *
                                  std::pow(std::sin((1.0 - alpha) * theta), 1.0 - alpha) /
                                  std::sin(theta),
                              1.0 / (1.0 - alpha));
    return std::pow(z / xi, (1.0 - alpha) / alpha);
}

}  // namespace detail

/// Draw from TS(alpha, c, b): a stable subordinator increment with Levy
/// density c z^{-1-alpha}, tempered by accept-reject against exp(-b z).
/// The proposal scale is sigma = (c Gamma(1-alpha) / alpha)^{1/alpha}.
///
/// Throws RetryExhausted when the acceptance loop exceeds `retry_cap`,
/// which signals pathologically large c b^alpha.
inline double sample_tempered_stable(double alpha, double c, double b, Rng& rng,
                                     std::uint64_t retry_cap = 1000000) {
    if (c == 0.0) return 0.0;
    if (!(c > 0.0)) throw Error("tempered-stable scale c must be nonnegative");
    const double sigma = std::pow(c * gamma_fn(1.0 - alpha) / alpha, 1.0 / alpha);
    for (std::uint64_t attempt = 0; attempt < retry_cap; ++attempt) {
        const double proposal = sigma * detail::stable_subordinator(alpha, rng);
        if (rng.uniform() <= std::exp(-b * proposal)) return proposal;
    }
    throw RetryExhausted("tempered-stable acceptance failed " + std::to_string(retry_cap) +
                         " times (alpha=" + std::to_string(alpha) +
                         ", c=" + std::to_string(c) + ", b=" + std::to_string(b) + ")");
}

}  // namespace jumpres

#endif
