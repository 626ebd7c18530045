#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace mixlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Base for all library errors; specific conditions get their own type so
// callers can distinguish configuration mistakes from numeric failures.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MismatchedSupport : Error { using Error::Error; };
struct EmptyMeasure : Error { using Error::Error; };
struct SampleOutOfBox : Error { using Error::Error; };
struct SolverFailure : Error { using Error::Error; };
struct LeftInvariantSet : Error { using Error::Error; };
struct Blowup : Error { using Error::Error; };
struct NotDissipative : Error { using Error::Error; };
struct BudgetExceeded : Error { using Error::Error; };
struct DegenerateDensity : Error { using Error::Error; };
struct ResolutionTooCoarse : Error { using Error::Error; };
struct MinorizationFails : Error { using Error::Error; };
struct MismatchedBuffers : Error { using Error::Error; };
struct NewtonDivergence : Error { using Error::Error; };
struct SurjectivityLost : Error { using Error::Error; };
struct NotLocallyInjective : Error { using Error::Error; };
struct EpsilonTooLarge : Error { using Error::Error; };
struct EmptyMinorization : Error { using Error::Error; };
struct CertificateContradicted : Error { using Error::Error; };
struct InsufficientDecorrelation : Error { using Error::Error; };
struct TooFewPoints : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };

inline Vec vec1(double x) {
    Vec v(1);
    v[0] = x;
    return v;
}

inline Vec vec2(double x, double y) {
    Vec v(2);
    v[0] = x;
    v[1] = y;
    return v;
}

} // namespace mixlab
