#ifndef JUMPRES_ERRORS_HPP
#define JUMPRES_ERRORS_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace jumpres {

/// Base class for all library failures so callers can catch one type.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Acceptance-rejection sampler exceeded its retry cap.
struct RetryExhausted : Error {
    explicit RetryExhausted(const std::string& msg) : Error(msg) {}
};

/// Mean-reverting condition violated; stationary moments do not exist.
struct NonStationary : Error {
    explicit NonStationary(const std::string& msg) : Error(msg) {}
};

/// Zero-variance sample; skewness/kurtosis undefined.
struct DegenerateDistribution : Error {
    explicit DegenerateDistribution(const std::string& msg) : Error(msg) {}
};

/// Riccati coefficient exceeded the magnitude cap during integration.
struct BlowUp : Error {
    BlowUp(const std::string& msg, double when) : Error(msg), time(when) {}
    double time;  ///< backward time at which the cap was hit
};

/// Query outside the integrated time grid.
struct OutOfHorizon : Error {
    explicit OutOfHorizon(const std::string& msg) : Error(msg) {}
};

/// Conjugate gradient failed to reach its residual tolerance.
struct CgStalled : Error {
    CgStalled(const std::string& msg, double res) : Error(msg), residual(res) {}
    double residual;
};

/// Bundle count does not divide the ensemble size.
struct IndivisibleEnsemble : Error {
    explicit IndivisibleEnsemble(const std::string& msg) : Error(msg) {}
};

/// Picard iteration did not meet the convergence criterion.
struct NoConvergence : Error {
    NoConvergence(const std::string& msg, std::vector<double> history)
        : Error(msg), residuals(std::move(history)) {}
    std::vector<double> residuals;  ///< per-iteration residual history
};

/// Moment matching found no stationary parameter set.
struct InfeasibleFit : Error {
    explicit InfeasibleFit(const std::string& msg) : Error(msg) {}
};

/// Autocorrelations nonpositive before enough lags were collected.
struct NonPositiveACF : Error {
    explicit NonPositiveACF(const std::string& msg) : Error(msg) {}
};

/// Singular design matrix in a least-squares fit.
struct RankDeficient : Error {
    explicit RankDeficient(const std::string& msg) : Error(msg) {}
};

/// Malformed input file; carries the 1-based line number.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t line_no) : Error(msg), line(line_no) {}
    std::size_t line;
};

/// Negative discharge value in a data file.
struct NegativeDischarge : Error {
    NegativeDischarge(const std::string& msg, std::size_t line_no) : Error(msg), line(line_no) {}
    std::size_t line;
};

/// Timestamps not strictly increasing.
struct NonMonotoneTime : Error {
    NonMonotoneTime(const std::string& msg, std::size_t line_no) : Error(msg), line(line_no) {}
    std::size_t line;
};

}  // namespace jumpres

#endif
