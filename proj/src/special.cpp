#include "betamask/special.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace betamask::special {

namespace {

constexpr double kShiftThreshold = 6.0;

void require_positive(double x, const char* fn) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::domain_error(std::string(fn) + ": argument must be positive and finite");
  }
}

}  // namespace

double log_gamma(double x) {
  require_positive(x, "log_gamma");
#if defined(__GLIBC__)
  int sign = 0;
  return ::lgamma_r(x, &sign);
#else
  return std::lgamma(x);
#endif
}

double log_beta(double a, double b) {
  return log_gamma(a) + log_gamma(b) - log_gamma(a + b);
}

double digamma(double x) {
  require_positive(x, "digamma");
  double acc = 0.0;
  while (x < kShiftThreshold) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  // ψ(x) ~ ln x − 1/(2x) − Σ B_2k / (2k x^2k)
  static constexpr double kCoef[] = {1.0 / 12.0,       -1.0 / 120.0,   1.0 / 252.0,
                                     -1.0 / 240.0,     1.0 / 132.0,    -691.0 / 32760.0,
                                     1.0 / 12.0,       -3617.0 / 8160.0, 43867.0 / 14364.0};
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 0.0;
  for (int k = 8; k >= 0; --k) series = inv2 * (kCoef[k] + series);
  return acc + std::log(x) - 0.5 * inv - series;
}

double trigamma(double x) {
  require_positive(x, "trigamma");
  double acc = 0.0;
  while (x < kShiftThreshold) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  // ψ'(x) ~ 1/x + 1/(2x²) + Σ B_2k / x^(2k+1)
  static constexpr double kBernoulli[] = {1.0 / 6.0,   -1.0 / 30.0,       1.0 / 42.0,
                                          -1.0 / 30.0, 5.0 / 66.0,        -691.0 / 2730.0,
                                          7.0 / 6.0,   -3617.0 / 510.0,   43867.0 / 798.0};
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = 0.0;
  for (int k = 8; k >= 0; --k) series = inv2 * (kBernoulli[k] + series);
  series *= inv;
  return acc + inv + 0.5 * inv2 + series;
}

}  // namespace betamask::special
