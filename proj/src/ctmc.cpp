#include "mdm/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mdm {

double forward_rate(double t, const NoiseSchedule& schedule) {
    const AlphaValue a = schedule.eval(t);
    if (a.alpha <= 0.0) throw std::domain_error("forward_rate: alpha(t) = 0");
    return -a.alpha_prime / a.alpha;
}

double reverse_rate_marginal(const Sequence& x_t, size_t d, Token v, double t,
                             const NoiseSchedule& schedule, const Denoiser& denoiser) {
    const StateSpace& space = denoiser.space();
    if (!space.is_data_token(v)) throw std::invalid_argument("reverse_rate_marginal: v must be a data token");
    if (x_t[d] != space.mask_id()) return 0.0;
    const AlphaValue a = schedule.eval(t);
    if (a.alpha >= 1.0) throw std::domain_error("reverse_rate_marginal: alpha(t) = 1");
    return std::abs(a.alpha_prime) / (1.0 - a.alpha) * denoiser.predict(x_t)[d][static_cast<size_t>(v)];
}

double reverse_rate_ratio(const Sequence& x_t, size_t d, Token v, double t,
                          const NoiseSchedule& schedule, const DataDistribution& q0) {
    const StateSpace& space = q0.space();
    if (!space.is_data_token(v)) throw std::invalid_argument("reverse_rate_ratio: v must be a data token");
    if (x_t[d] != space.mask_id()) return 0.0;
    const AlphaValue a = schedule.eval(t);
    if (a.alpha >= 1.0) throw std::domain_error("reverse_rate_ratio: alpha(t) = 1");
    if (a.alpha <= 0.0) throw std::domain_error("reverse_rate_ratio: alpha(t) = 0");
    const double lambda = -a.alpha_prime / a.alpha;

    // Posterior weights q_{0|t}(x0 | x_t) with the time-t masking factors
    // written out explicitly.
    double z = 0.0;
    double hit = 0.0;
    for (size_t j = 0; j < q0.support_size(); ++j) {
        const Sequence& x0 = q0.support()[j];
        double w = q0.probs()[j];
        for (size_t c = 0; c < x_t.size() && w > 0.0; ++c) {
            if (x_t[c] == space.mask_id())
                w *= (1.0 - a.alpha);
            else
                w *= (x_t[c] == x0[c]) ? a.alpha : 0.0;
        }
        z += w;
        if (x0[d] == v) hit += w;
    }
    if (z <= 0.0)
        throw InconsistentStateError("reverse_rate_ratio: state inconsistent with the support");
    // Forward-kernel ratio for the single changed coordinate: mask -> v
    // contributes alpha_t * delta / (1 - alpha_t).
    return lambda * (a.alpha / (1.0 - a.alpha)) * (hit / z);
}

double cumulative_hazard(double s, double t, const NoiseSchedule& schedule) {
    if (s > t) throw std::domain_error("cumulative_hazard: requires s <= t");
    const double alpha_s = schedule.alpha(s);
    const double alpha_t = schedule.alpha(t);
    if (alpha_s >= 1.0 && alpha_t < 1.0)
        throw std::domain_error("cumulative_hazard: alpha(s) = 1 (infinite hazard)");
    if (s == t) return 0.0;
    return std::log((1.0 - alpha_t) / (1.0 - alpha_s));
}

namespace {

// Solve n * log((1 - alpha_t) / (1 - alpha_s)) = E for the next jump time s.
// Closed form on the linear schedule; bisection otherwise. Returns 0 when
// the solution underflows past representable times.
double solve_jump_time(double t, double total_log, const NoiseSchedule& schedule) {
    const double one_minus_target = (1.0 - schedule.alpha(t)) * std::exp(-total_log);
    if (schedule.kind == ScheduleKind::Linear) return one_minus_target;  // 1 - alpha_s = s

    double lo = 0.0, hi = t;
    if (one_minus_target <= 0.0) return 0.0;
    for (int iter = 0; iter < 200 && hi - lo > 1e-12; ++iter) {
        double mid = 0.5 * (lo + hi);
        if (1.0 - schedule.alpha(mid) < one_minus_target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

Sequence gillespie_sample(const Denoiser& denoiser, int dims, const NoiseSchedule& schedule,
                          Rng& rng) {
    const StateSpace& space = denoiser.space();
    Sequence x(static_cast<size_t>(dims), space.mask_id());
    double t = 1.0;

    std::vector<size_t> masked(static_cast<size_t>(dims));
    for (size_t d = 0; d < masked.size(); ++d) masked[d] = d;

    while (!masked.empty()) {
        const double e = rng.exponential();
        const double s = solve_jump_time(t, e / static_cast<double>(masked.size()), schedule);
        if (s <= 0.0) {
            // Absorbing endpoint: the remaining coordinates all unmask as
            // t -> 0, in uniformly random order, one prediction per jump.
            while (!masked.empty()) {
                const int pick = rng.uniform_int(static_cast<int>(masked.size()));
                const size_t d = masked[static_cast<size_t>(pick)];
                const PositionDistributions p = denoiser.predict(x);
                x[d] = static_cast<Token>(rng.categorical(p[d].probs));
                masked.erase(masked.begin() + pick);
            }
            break;
        }
        const int pick = rng.uniform_int(static_cast<int>(masked.size()));
        const size_t d = masked[static_cast<size_t>(pick)];
        const PositionDistributions p = denoiser.predict(x);
        x[d] = static_cast<Token>(rng.categorical(p[d].probs));
        masked.erase(masked.begin() + pick);
        t = s;
    }
    return x;
}

void partial_unmask_step(Sequence& x, double p_unmask, const PositionDistributions& predicted,
                         const StateSpace& space, Rng& rng) {
    for (size_t d = 0; d < x.size(); ++d) {
        if (x[d] != space.mask_id()) continue;
        if (rng.uniform() < p_unmask)
            x[d] = static_cast<Token>(rng.categorical(predicted[d].probs));
    }
}

Sequence tau_leaping_step(const Sequence& x_t, double t, double s, const NoiseSchedule& schedule,
                          const Denoiser& denoiser, Rng& rng) {
    if (s >= t) throw std::domain_error("tau_leaping_step: requires s < t");
    const StateSpace& space = denoiser.space();
    Sequence x = x_t;
    if (masked_count(x, space) == 0) return x;

    const double alpha_t = schedule.alpha(t);
    const double alpha_s = schedule.alpha(s);
    const double p_unmask = (alpha_s - alpha_t) / (1.0 - alpha_t);
    const PositionDistributions predicted = denoiser.predict(x_t);
    partial_unmask_step(x, p_unmask, predicted, space, rng);
    return x;
}

}  // namespace mdm
