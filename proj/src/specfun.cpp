#include "coopuplink/specfun.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "coopuplink/errors.hpp"

namespace coopuplink::specfun {

namespace {

constexpr double kSeriesLimit = 30.0;

void require_finite_nonneg(double v, const char* name) {
    if (!(v >= 0.0) || !std::isfinite(v))
        throw DomainError(std::string(name) + " must be finite and >= 0");
}

// e^{-x} I_order(x) from the ascending series, x <= kSeriesLimit.
double scaled_series(int order, double x, const Tolerance& tol) {
    if (x == 0.0) return order == 0 ? 1.0 : 0.0;
    const double log_lead = order * std::log(0.5 * x) - std::lgamma(order + 1.0) - x;
    const double q = 0.25 * x * x;
    double term = 1.0;
    double sum = 1.0;
    for (int j = 1;; ++j) {
        if (j > tol.max_terms)
            throw NumericFailure("bessel_i: power series did not converge",
                                 std::exp(log_lead) * sum);
        term *= q / (static_cast<double>(j) * (j + order));
        sum += term;
        if (term <= 0.5 * DBL_EPSILON * sum) break;
    }
    return std::exp(log_lead) * sum;
}

// e^{-x} I_0(x) by the Hankel expansion, x > kSeriesLimit.
double scaled_i0_asymptotic(double x) {
    const double inv8x = 1.0 / (8.0 * x);
    double term = 1.0;
    double sum = 1.0;
    for (int k = 1; k < 200; ++k) {
        const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) * inv8x / k;
        if (next >= term) break;
        term = next;
        sum += term;
        if (term <= 0.25 * DBL_EPSILON * sum) break;
    }
    return sum / std::sqrt(2.0 * std::numbers::pi * x);
}

// s_k = I_{k+1}(x) / (x I_k(x)) for k = 0..count-1, by backward recurrence
// s_{k-1} = 1 / (2k + x^2 s_k). Finite at x = 0, where s_k = 1 / (2k + 2).
std::vector<double> ratio_table(double x, int count) {
    const double c = static_cast<double>(count);
    const int top = count + 16 + static_cast<int>(std::ceil(std::sqrt(c * c + 40.0 * x)));
    const double n1 = top + 1.0;
    double s = 1.0 / (n1 + std::sqrt(n1 * n1 + x * x));
    const double x2 = x * x;
    std::vector<double> out(static_cast<std::size_t>(count));
    for (int k = top; k >= 1; --k) {
        s = 1.0 / (2.0 * k + x2 * s);
        if (k - 1 < count) out[static_cast<std::size_t>(k - 1)] = s;
    }
    return out;
}

struct QPair {
    double q;
    double cdf;
};

// Both Q_m and 1 - Q_m for m = 1..max_order. Each order is evaluated on the
// side that is the smaller probability; the other is its complement.
//
// With t_k = exp(-(a^2+b^2)/2) (b/a)^k I_k(ab):
//   1 - Q_m = sum_{k>=m} t_k                       (lower form)
//   Q_m     = Q_1 + sum_{k=1}^{m-1} t_k,
//   Q_1     = exp(-(a^2+b^2)/2) sum_{k>=0} (a/b)^k I_k(ab)   (upper form)
// Term ratios are b^2 s_k and a^2 s_k, so a = 0 needs no special case.
std::vector<QPair> marcum_pairs(int max_order, double a, double b, const Tolerance& tol) {
    tol.validate();
    if (max_order < 1) throw DomainError("marcum_q: order must be >= 1");
    require_finite_nonneg(a, "marcum_q: a");
    require_finite_nonneg(b, "marcum_q: b");

    std::vector<QPair> out(static_cast<std::size_t>(max_order), QPair{1.0, 0.0});
    if (b == 0.0) return out;

    const double x = a * b;
    const double a2 = a * a;
    const double b2 = b * b;
    const double log_base = -0.5 * (a - b) * (a - b) + std::log(bessel_i_scaled(0, x, tol));

    // Orders 1..upper_orders are closer to the upper tail.
    const double excess = 0.5 * (b2 - a2);
    const int upper_orders = excess >= 1.0 ? static_cast<int>(std::min<double>(std::floor(excess), max_order)) : 0;
    const bool need_suffix = upper_orders < max_order;

    int table_size = max_order + 64 +
                     static_cast<int>(std::ceil(0.5 * b2 + 10.0 * b + 12.0 * std::sqrt(x)));
    table_size = std::min(table_size, tol.max_terms + 1);

    std::vector<double> terms;
    for (;;) {
        const auto s = ratio_table(x, table_size);
        terms.clear();
        double log_t = log_base;
        double suffix = 0.0;
        bool done = false;
        for (int k = 0; k < table_size; ++k) {
            const double t = std::exp(log_t);
            terms.push_back(t);
            if (!need_suffix) {
                if (k + 1 >= max_order) {
                    done = true;
                    break;
                }
            } else if (k >= max_order) {
                suffix += t;
                const double ratio = b2 * s[static_cast<std::size_t>(k)];
                if (ratio < 1.0) {
                    const double tail = t * ratio / (1.0 - ratio);
                    if (tail <= tol.rel_tol * 1e-2 * suffix || tail < 1e-300) {
                        done = true;
                        break;
                    }
                }
            }
            log_t += std::log(b2 * s[static_cast<std::size_t>(k)]);
        }
        if (done) break;
        if (table_size > tol.max_terms) {
            double partial = 0.0;
            for (std::size_t k = static_cast<std::size_t>(max_order); k < terms.size(); ++k)
                partial += terms[k];
            throw NumericFailure("marcum_q: lower-tail series did not converge", partial);
        }
        table_size = std::min(2 * table_size, tol.max_terms + 1);
    }

    if (upper_orders > 0) {
        double q1 = 0.0;
        if (a == 0.0) {
            q1 = std::exp(log_base);
        } else {
            int size = 64 + static_cast<int>(std::ceil(12.0 * std::sqrt(x) + 4.0 * a));
            size = std::min(size, tol.max_terms + 1);
            for (;;) {
                const auto s = ratio_table(x, size);
                double log_u = log_base;
                double sum = 0.0;
                bool done = false;
                for (int k = 0; k < size; ++k) {
                    const double u = std::exp(log_u);
                    sum += u;
                    const double ratio = a2 * s[static_cast<std::size_t>(k)];
                    const double tail = u * ratio / (1.0 - ratio);
                    if (tail <= tol.rel_tol * 1e-2 * sum || tail < 1e-300) {
                        done = true;
                        break;
                    }
                    log_u += std::log(ratio);
                }
                if (done) {
                    q1 = sum;
                    break;
                }
                if (size > tol.max_terms)
                    throw NumericFailure("marcum_q: upper-tail series did not converge", sum);
                size = std::min(2 * size, tol.max_terms + 1);
            }
        }
        double q = q1;
        for (int m = 1; m <= upper_orders; ++m) {
            const double qm = std::min(q, 1.0);
            out[static_cast<std::size_t>(m - 1)] = QPair{qm, 1.0 - qm};
            q += terms[static_cast<std::size_t>(m)];
        }
    }

    if (need_suffix) {
        double acc = 0.0;
        for (int k = static_cast<int>(terms.size()) - 1; k > upper_orders; --k) {
            acc += terms[static_cast<std::size_t>(k)];
            if (k <= max_order) {
                const double c = std::min(acc, 1.0);
                out[static_cast<std::size_t>(k - 1)] = QPair{1.0 - c, c};
            }
        }
    }
    return out;
}

}  // namespace

void Tolerance::validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_terms < 1)
        throw DomainError("Tolerance: abs_tol and rel_tol must be > 0, max_terms >= 1");
}

double bessel_i_scaled(int order, double x, const Tolerance& tol) {
    tol.validate();
    if (order < 0) throw DomainError("bessel_i: order must be >= 0");
    require_finite_nonneg(x, "bessel_i: x");
    if (x <= kSeriesLimit) return scaled_series(order, x, tol);

    double value = scaled_i0_asymptotic(x);
    if (order > 0) {
        const auto s = ratio_table(x, order);
        for (int k = 0; k < order; ++k) value *= x * s[static_cast<std::size_t>(k)];
    }
    return value;
}

double bessel_i(int order, double x, const Tolerance& tol) {
    double scaled;
    try {
        scaled = bessel_i_scaled(order, x, tol);
    } catch (const NumericFailure& e) {
        throw NumericFailure(e.what(), e.partial_value() * std::exp(x));
    }
    if (scaled == 0.0) return 0.0;
    return std::exp(std::log(scaled) + x);
}

double marcum_q(int order, double a, double b, const Tolerance& tol) {
    if (b == std::numeric_limits<double>::infinity() && std::isfinite(a) && a >= 0.0 && order >= 1)
        return 0.0;
    return marcum_pairs(order, a, b, tol).back().q;
}

double marcum_cdf(int order, double a, double b, const Tolerance& tol) {
    if (b == std::numeric_limits<double>::infinity() && std::isfinite(a) && a >= 0.0 && order >= 1)
        return 1.0;
    return marcum_pairs(order, a, b, tol).back().cdf;
}

std::vector<double> marcum_cdf_orders(int max_order, double a, double b, const Tolerance& tol) {
    if (b == std::numeric_limits<double>::infinity() && std::isfinite(a) && a >= 0.0 &&
        max_order >= 1)
        return std::vector<double>(static_cast<std::size_t>(max_order), 1.0);
    const auto pairs = marcum_pairs(max_order, a, b, tol);
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(p.cdf);
    return out;
}

double sinc_norm(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

double one_minus_sinc_norm(double x) {
    const double px = std::numbers::pi * x;
    if (std::abs(px) < 1.0) {
        // -sum_{k>=1} (-y)^k / (2k+1)!
        const double y = px * px;
        double term = 1.0, sum = 0.0;
        for (int k = 1; k < 12; ++k) {
            term *= -y / ((2.0 * k) * (2.0 * k + 1.0));
            sum -= term;
        }
        return sum;
    }
    return 1.0 - std::sin(px) / px;
}

double gauss_cos_moment(double sigma_eps) {
    require_finite_nonneg(sigma_eps, "sigma_eps");
    return std::exp(-0.5 * sigma_eps * sigma_eps);
}

double gauss_cos2_moment(double sigma_eps) {
    require_finite_nonneg(sigma_eps, "sigma_eps");
    return 0.5 * (1.0 + std::exp(-2.0 * sigma_eps * sigma_eps));
}

double gauss_sin2_moment(double sigma_eps) {
    require_finite_nonneg(sigma_eps, "sigma_eps");
    // 1 - cos2 so the pair sums to one; -expm1 keeps small sigma accurate.
    return -0.5 * std::expm1(-2.0 * sigma_eps * sigma_eps);
}

double rice_amplitude_mean(double mean_power, double rice_factor) {
    if (!(mean_power > 0.0) || !std::isfinite(mean_power))
        throw DomainError("rice_amplitude_mean: mean_power must be > 0");
    require_finite_nonneg(rice_factor, "rice_amplitude_mean: rice_factor");
    const double half = 0.5 * rice_factor;
    const double bracket = (1.0 + rice_factor) * bessel_i_scaled(0, half) +
                           rice_factor * bessel_i_scaled(1, half);
    return std::sqrt(std::numbers::pi * mean_power / (4.0 * (1.0 + rice_factor))) * bracket;
}

}  // namespace coopuplink::specfun
