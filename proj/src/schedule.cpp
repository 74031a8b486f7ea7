#include "mdm/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace mdm {

AlphaValue NoiseSchedule::eval(double t) const {
    if (t < 0.0 || t > 1.0) throw std::domain_error("NoiseSchedule: t outside [0,1]");
    switch (kind) {
        case ScheduleKind::Linear:
            return {1.0 - t, -1.0};
        case ScheduleKind::Cosine: {
            const double h = std::numbers::pi / 2.0;
            return {std::cos(h * t), -h * std::sin(h * t)};
        }
    }
    throw std::logic_error("NoiseSchedule: unknown kind");
}

SigmaValue eval_sigma(const RemaskSchedule& schedule, int step_index, int total_steps,
                      double alpha_t, double alpha_s) {
    if (step_index < 1 || step_index > total_steps)
        throw std::domain_error("eval_sigma: step_index outside [1, T]");
    if (alpha_s < alpha_t) throw std::domain_error("eval_sigma: alpha_s < alpha_t");

    double raw = schedule.eta;
    if (schedule.kind == RemaskKind::ZeroTail && step_index > total_steps - schedule.tail_off)
        raw = 0.0;

    double cap = 1.0;
    if (alpha_t > 0.0) cap = std::min(1.0, (1.0 - alpha_s) / alpha_t);

    SigmaValue out;
    out.sigma = std::clamp(raw, 0.0, cap);
    // CappedConstant declares the cap as part of its definition; for the
    // other kinds a firing clamp is diagnostic information.
    out.clamped = raw > cap && schedule.kind != RemaskKind::CappedConstant;
    return out;
}

Sequence forward_sample(const Sequence& x0, double t, const NoiseSchedule& schedule,
                        const StateSpace& space, Rng& rng) {
    validate_sequence(x0, space);
    for (Token v : x0)
        if (v == space.mask_id())
            throw std::invalid_argument("forward_sample: input already contains mask tokens");

    const double alpha = schedule.alpha(t);
    Sequence x = x0;
    for (auto& v : x)
        if (rng.uniform() >= alpha) v = space.mask_id();
    return x;
}

Categorical reverse_kernel_prob(Token x_t_d, double alpha_t, double alpha_s,
                                const Categorical& predicted, const StateSpace& space) {
    if (alpha_s < alpha_t) throw std::domain_error("reverse_kernel_prob: alpha_s < alpha_t");
    const int n = space.vocab_size + 1;
    if (x_t_d != space.mask_id()) return Categorical::delta(n, x_t_d);

    if (alpha_t >= 1.0) throw std::domain_error("reverse_kernel_prob: alpha_t = 1 with masked input");
    std::vector<double> row(static_cast<size_t>(n), 0.0);
    const double unmask = (alpha_s - alpha_t) / (1.0 - alpha_t);
    for (int v = 0; v < space.vocab_size; ++v)
        row[static_cast<size_t>(v)] = unmask * predicted[static_cast<size_t>(v)];
    row[static_cast<size_t>(space.vocab_size)] = (1.0 - alpha_s) / (1.0 - alpha_t);
    return Categorical(std::move(row));
}

Categorical remask_kernel_prob(Token x_t_d, double alpha_t, double alpha_s, double sigma,
                               const Categorical& predicted, const StateSpace& space) {
    if (alpha_s < alpha_t) throw std::domain_error("remask_kernel_prob: alpha_s < alpha_t");
    if (sigma < 0.0 || sigma > 1.0)
        throw std::invalid_argument("remask_kernel_prob: sigma outside [0,1]");
    const int n = space.vocab_size + 1;

    if (x_t_d != space.mask_id()) {
        std::vector<double> row(static_cast<size_t>(n), 0.0);
        row[static_cast<size_t>(x_t_d)] = 1.0 - sigma;
        row[static_cast<size_t>(space.vocab_size)] = sigma;
        return Categorical(std::move(row));
    }

    if (alpha_t >= 1.0) throw std::domain_error("remask_kernel_prob: alpha_t = 1 with masked input");
    const double unmask = (alpha_s - (1.0 - sigma) * alpha_t) / (1.0 - alpha_t);
    const double stay = (1.0 - alpha_s - sigma * alpha_t) / (1.0 - alpha_t);
    if (unmask < -1e-12 || stay < -1e-12)
        throw std::invalid_argument("remask_kernel_prob: sigma outside the valid clamp range");
    std::vector<double> row(static_cast<size_t>(n), 0.0);
    for (int v = 0; v < space.vocab_size; ++v)
        row[static_cast<size_t>(v)] = std::max(0.0, unmask) * predicted[static_cast<size_t>(v)];
    row[static_cast<size_t>(space.vocab_size)] = std::max(0.0, stay);
    return Categorical(std::move(row));
}

std::string to_string(ScheduleKind k) {
    return k == ScheduleKind::Linear ? "linear" : "cosine";
}

std::string to_string(RemaskKind k) {
    switch (k) {
        case RemaskKind::Constant: return "constant";
        case RemaskKind::CappedConstant: return "capped_constant";
        case RemaskKind::ZeroTail: return "zero_tail";
    }
    return "?";
}

}  // namespace mdm
