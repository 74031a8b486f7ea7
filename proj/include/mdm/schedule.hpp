#pragma once

#include <string>

#include "mdm/rng.hpp"
#include "mdm/state.hpp"

namespace mdm {

enum class ScheduleKind { Linear, Cosine };

struct AlphaValue {
    double alpha;
    double alpha_prime;
};

// Noise schedule alpha(t) with alpha(0)=1, alpha(1)=0, strictly decreasing.
struct NoiseSchedule {
    ScheduleKind kind = ScheduleKind::Linear;

    AlphaValue eval(double t) const;
    double alpha(double t) const { return eval(t).alpha; }
};

enum class RemaskKind { Constant, CappedConstant, ZeroTail };

// Remask schedule sigma_t. All kinds are clamped into the range where the
// generalized reverse kernel's branch probabilities stay in [0,1]:
// sigma <= min(1, (1 - alpha_s) / alpha_t).
struct RemaskSchedule {
    RemaskKind kind = RemaskKind::Constant;
    double eta = 0.0;    // base remask probability
    int tail_off = 0;    // ZeroTail: number of final steps with sigma = 0
};

struct SigmaValue {
    double sigma = 0.0;
    bool clamped = false;  // set when a requested sigma had to be cut down
};

// step_index counts generation iterations 1..T from the start; step T is the
// final step (t -> 0), so ZeroTail zeroes steps T - tail_off + 1 .. T.
SigmaValue eval_sigma(const RemaskSchedule& schedule, int step_index, int total_steps,
                      double alpha_t, double alpha_s);

// Independent per-coordinate masking: keep with probability alpha(t),
// replace by the mask token otherwise.
Sequence forward_sample(const Sequence& x0, double t, const NoiseSchedule& schedule,
                        const StateSpace& space, Rng& rng);

// Single-coordinate reverse transition row over (data tokens + mask); the
// mask lives at index vocab_size. Unmasked coordinates are absorbing.
Categorical reverse_kernel_prob(Token x_t_d, double alpha_t, double alpha_s,
                                const Categorical& predicted, const StateSpace& space);

// Generalized (remasking) kernel row: an unmasked coordinate returns to mask
// with probability sigma; a masked one unmasks with probability
// (alpha_s - (1-sigma) alpha_t) / (1 - alpha_t).
Categorical remask_kernel_prob(Token x_t_d, double alpha_t, double alpha_s, double sigma,
                               const Categorical& predicted, const StateSpace& space);

std::string to_string(ScheduleKind k);
std::string to_string(RemaskKind k);

}  // namespace mdm
