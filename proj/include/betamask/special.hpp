#pragma once

namespace betamask::special {

/// ln Γ(x) for x > 0.
double log_gamma(double x);

/// ln B(a, b) = ln Γ(a) + ln Γ(b) − ln Γ(a + b).
double log_beta(double a, double b);

/// ψ(x) = d/dx ln Γ(x), x > 0. Shifts upward to x >= 6, then uses the
/// asymptotic series.
double digamma(double x);

/// ψ'(x), x > 0, same scheme as digamma.
double trigamma(double x);

}  // namespace betamask::special
