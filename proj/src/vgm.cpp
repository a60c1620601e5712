#include "synthdata/vgm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "synthdata/errors.hpp"
#include "synthdata/rng.hpp"

namespace synthdata {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double digamma(double x) {
    double result = 0.0;
    while (x < 6.0) {
        result -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0))));
    return result;
}

// KL(Dir(alpha) || Dir(alpha0 * 1))
double kl_dirichlet(const std::vector<double>& alpha, double alpha0) {
    const double K = static_cast<double>(alpha.size());
    double sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    double kl = std::lgamma(sum) - std::lgamma(K * alpha0) + K * std::lgamma(alpha0);
    const double psi_sum = digamma(sum);
    for (double a : alpha) kl += -std::lgamma(a) + (a - alpha0) * (digamma(a) - psi_sum);
    return kl;
}

// KL of a Normal-Gamma posterior (m, beta, a, b) against the prior (m0, beta0, a0, b0)
double kl_normal_gamma(double m, double beta, double a, double b, double m0, double beta0,
                       double a0, double b0) {
    const double e_lambda = a / b;
    const double kl_normal =
        0.5 * std::log(beta / beta0) - 0.5 + 0.5 * beta0 * (1.0 / beta + e_lambda * (m - m0) * (m - m0));
    const double kl_gamma = (a - a0) * digamma(a) - std::lgamma(a) + std::lgamma(a0) +
                            a0 * (std::log(b) - std::log(b0)) + a * (b0 - b) / b;
    return kl_normal + kl_gamma;
}

}  // namespace

std::vector<double> VgmColumnModel::responsibilities(double value) const {
    if (active.empty()) throw validation_error("vgm: model has no active components");
    std::vector<double> logp(active.size());
    double best = -std::numeric_limits<double>::infinity();
    for (size_t a = 0; a < active.size(); ++a) {
        const VgmComponent& c = components[static_cast<size_t>(active[a])];
        const double z = (value - c.mean) / c.std;
        logp[a] = std::log(c.weight) - std::log(c.std) - 0.5 * z * z;
        best = std::max(best, logp[a]);
    }
    double denom = 0.0;
    for (double lp : logp) denom += std::exp(lp - best);
    std::vector<double> r(active.size());
    for (size_t a = 0; a < active.size(); ++a) r[a] = std::exp(logp[a] - best) / denom;
    return r;
}

VgmColumnModel fit_vgm(const std::vector<double>& values, int max_modes, double weight_threshold,
                       uint64_t seed, const VgmOptions& options) {
    if (max_modes < 1) throw validation_error("fit_vgm: max_modes must be >= 1");
    if (values.size() < 2) throw validation_error("fit_vgm: need at least 2 values");

    const size_t n = values.size();
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(n);

    VgmColumnModel model;

    // constant column: degenerate single mode at the configured std floor
    if (var < options.std_floor * options.std_floor) {
        model.components = {{1.0, mean, options.std_floor}};
        model.active = {0};
        model.converged = true;
        return model;
    }

    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    const size_t distinct = static_cast<size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    const int K = static_cast<int>(std::min<size_t>(static_cast<size_t>(max_modes), distinct));
    const double lo = sorted.front();
    const double hi = sorted[distinct - 1];

    // priors: broad Normal-Gamma around the column's own spread
    const double alpha0 = options.dirichlet_prior;
    const double beta0 = 1.0;
    const double m0 = mean;
    const double a0 = 1.0;
    const double b0 = var;

    // init: means spread over the data range with slight seeded jitter, every
    // component starting broad enough to cover all the data
    RandomStream rng(hash_combine(seed, 0x76676dull));
    std::vector<double> alpha(K), beta(K), m(K), ga(K), gb(K);
    const double n_per = static_cast<double>(n) / K;
    for (int k = 0; k < K; ++k) {
        double frac = K == 1 ? 0.5 : static_cast<double>(k) / (K - 1);
        m[k] = lo + frac * (hi - lo) + 0.01 * (hi - lo) * rng.normal() / std::max(K, 1);
        alpha[k] = alpha0 + n_per;
        beta[k] = beta0 + n_per;
        ga[k] = a0 + 0.5 * n_per;
        gb[k] = ga[k] * var;  // E[lambda] = 1/var: broad
    }

    std::vector<double> r(static_cast<size_t>(K) * n);
    std::vector<double> logrho(K);
    double prev_obj = -std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < options.max_iterations; ++iter) {
        // E-step
        const double psi_alpha_sum = digamma(std::accumulate(alpha.begin(), alpha.end(), 0.0));
        std::vector<double> e_log_pi(K), e_log_lambda(K), e_lambda(K);
        for (int k = 0; k < K; ++k) {
            e_log_pi[k] = digamma(alpha[k]) - psi_alpha_sum;
            e_log_lambda[k] = digamma(ga[k]) - std::log(gb[k]);
            e_lambda[k] = ga[k] / gb[k];
        }
        double obj = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double best = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < K; ++k) {
                const double d = values[i] - m[k];
                logrho[k] = e_log_pi[k] + 0.5 * e_log_lambda[k] - 0.5 * kLog2Pi -
                            0.5 * (e_lambda[k] * d * d + 1.0 / beta[k]);
                best = std::max(best, logrho[k]);
            }
            double denom = 0.0;
            for (int k = 0; k < K; ++k) denom += std::exp(logrho[k] - best);
            for (int k = 0; k < K; ++k) r[static_cast<size_t>(k) * n + i] = std::exp(logrho[k] - best) / denom;
            obj += best + std::log(denom);
        }
        obj -= kl_dirichlet(alpha, alpha0);
        for (int k = 0; k < K; ++k)
            obj -= kl_normal_gamma(m[k], beta[k], ga[k], gb[k], m0, beta0, a0, b0);
        model.objective_trace.push_back(obj);
        model.iterations = iter + 1;
        if (iter > 0 && std::abs(obj - prev_obj) < options.rel_tolerance * (std::abs(obj) + 1e-12)) {
            model.converged = true;
            break;
        }
        prev_obj = obj;

        // M-step
        for (int k = 0; k < K; ++k) {
            const double* rk = &r[static_cast<size_t>(k) * n];
            double nk = 0.0, sx = 0.0;
            for (size_t i = 0; i < n; ++i) {
                nk += rk[i];
                sx += rk[i] * values[i];
            }
            const double xbar = nk > 1e-300 ? sx / nk : m0;
            double sk = 0.0;
            for (size_t i = 0; i < n; ++i) {
                const double d = values[i] - xbar;
                sk += rk[i] * d * d;
            }
            alpha[k] = alpha0 + nk;
            beta[k] = beta0 + nk;
            m[k] = (beta0 * m0 + sx) / beta[k];
            ga[k] = a0 + 0.5 * nk;
            gb[k] = b0 + 0.5 * (sk + beta0 * nk * (xbar - m0) * (xbar - m0) / beta[k]);
        }
    }

    const double alpha_sum = std::accumulate(alpha.begin(), alpha.end(), 0.0);
    model.components.resize(K);
    for (int k = 0; k < K; ++k) {
        model.components[k].weight = alpha[k] / alpha_sum;
        model.components[k].mean = m[k];
        model.components[k].std = std::max(std::sqrt(gb[k] / ga[k]), options.std_floor);
    }
    for (int k = 0; k < K; ++k)
        if (model.components[k].weight >= weight_threshold) model.active.push_back(k);
    if (model.active.empty()) {
        int best = 0;
        for (int k = 1; k < K; ++k)
            if (model.components[k].weight > model.components[best].weight) best = k;
        model.active.push_back(best);
    }
    return model;
}

}  // namespace synthdata
