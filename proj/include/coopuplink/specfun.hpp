#pragma once

#include <vector>

namespace coopuplink::specfun {

/// Truncation control for the series evaluations in this module.
struct Tolerance {
    double abs_tol = 1e-14;
    double rel_tol = 1e-12;
    int max_terms = 20000;

    /// Throws DomainError unless abs_tol > 0, rel_tol > 0 and max_terms >= 1.
    void validate() const;
};

/// Modified Bessel function of the first kind, I_order(x), for x >= 0.
///
/// Uses the ascending power series up to x = 30 and the Hankel expansion of
/// e^{-x} I_0(x) beyond, lifted to higher orders through the ratio
/// I_{k+1}/I_k obtained by backward recurrence. Throws NumericFailure when the
/// power series needs more than tol.max_terms terms.
double bessel_i(int order, double x, const Tolerance& tol = {});

/// e^{-x} I_order(x). Finite for every x >= 0.
double bessel_i_scaled(int order, double x, const Tolerance& tol = {});

/// Generalised Marcum Q-function Q_m(a, b) for m >= 1 and a, b >= 0.
///
/// Q_m(a, b) is the probability that a non-central chi variable with 2m
/// degrees of freedom and non-centrality a exceeds b.
double marcum_q(int order, double a, double b, const Tolerance& tol = {});

/// 1 - Q_m(a, b), evaluated without cancellation in the lower tail.
double marcum_cdf(int order, double a, double b, const Tolerance& tol = {});

/// 1 - Q_m(a, b) for every m = 1..max_order at once. Element [m - 1] holds
/// order m. Shares one Bessel-ratio table across orders.
std::vector<double> marcum_cdf_orders(int max_order, double a, double b,
                                      const Tolerance& tol = {});

/// sin(pi x) / (pi x), equal to 1 at x = 0.
double sinc_norm(double x);

/// 1 - sinc_norm(x), accurate for small |x|.
double one_minus_sinc_norm(double x);

/// E[cos e] for e ~ N(0, sigma^2).
double gauss_cos_moment(double sigma_eps);

/// E[cos^2 e] for e ~ N(0, sigma^2), i.e. (1 + exp(-2 sigma^2)) / 2.
double gauss_cos2_moment(double sigma_eps);

/// E[sin^2 e] for e ~ N(0, sigma^2), i.e. (1 - exp(-2 sigma^2)) / 2.
double gauss_sin2_moment(double sigma_eps);

/// E[sqrt(g)] where sqrt(g) is Rician with E[g] = mean_power and
/// Rice factor rice_factor.
double rice_amplitude_mean(double mean_power, double rice_factor);

}  // namespace coopuplink::specfun
