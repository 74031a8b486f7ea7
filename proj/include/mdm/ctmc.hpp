#pragma once

#include "mdm/denoiser.hpp"
#include "mdm/rng.hpp"
#include "mdm/schedule.hpp"
#include "mdm/state.hpp"
#include "mdm/target.hpp"

namespace mdm {

// Per-coordinate masking hazard lambda(t) = -alpha'(t) / alpha(t).
double forward_rate(double t, const NoiseSchedule& schedule);

// Reverse-time unmasking rate for coordinate d jumping to data token v,
// computed from the marginalized form |alpha'| / (1 - alpha) * p(v).
// Rates are reported as nonnegative magnitudes.
double reverse_rate_marginal(const Sequence& x_t, size_t d, Token v, double t,
                             const NoiseSchedule& schedule, const Denoiser& denoiser);

// Same rate through the ratio form: lambda(t) times the posterior-weighted
// forward-kernel ratio, with the alpha_t / (1 - alpha_t) mask->v factor made
// explicit. Enumerates the support directly (independent of predict()).
double reverse_rate_ratio(const Sequence& x_t, size_t d, Token v, double t,
                          const NoiseSchedule& schedule, const DataDistribution& q0);

// Integrated per-coordinate unmask hazard over [s, t]:
// log((1 - alpha_t) / (1 - alpha_s)); exp(-hazard) is the stay-masked
// probability of the reverse kernel.
double cumulative_hazard(double s, double t, const NoiseSchedule& schedule);

// Exact event-driven simulation of the reverse CTMC from all-mask at t = 1.
// One coordinate unmasks per event; predictions are re-evaluated after every
// jump. Output is mask-free.
Sequence gillespie_sample(const Denoiser& denoiser, int dims, const NoiseSchedule& schedule,
                          Rng& rng);

// One first-order tau-leaping step t -> s: predictions frozen at the start of
// the step, each masked coordinate independently unmasks with probability
// (alpha_s - alpha_t) / (1 - alpha_t).
Sequence tau_leaping_step(const Sequence& x_t, double t, double s, const NoiseSchedule& schedule,
                          const Denoiser& denoiser, Rng& rng);

// Shared per-coordinate update used by the tau-leaping and self-correction
// loops: each masked coordinate unmasks with probability p_unmask, drawing
// its token from the frozen predictions. Draw order is ascending d; one
// uniform per masked coordinate plus one per realized unmask.
void partial_unmask_step(Sequence& x, double p_unmask, const PositionDistributions& predicted,
                         const StateSpace& space, Rng& rng);

}  // namespace mdm
