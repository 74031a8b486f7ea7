#pragma once

#include "mdm/state.hpp"
#include "mdm/target.hpp"

namespace mdm {

// Per-position categorical predictions standing in for a pre-trained
// denoising network. predict() must be pure in x and defined at every
// position: masked positions get the posterior over the missing token,
// unmasked positions get the leave-one-out distribution (what the posterior
// at d would be if d were re-masked).
class Denoiser {
  public:
    virtual ~Denoiser() = default;
    virtual PositionDistributions predict(const Sequence& x) const = 0;
    // Probability of the current token at position d under predict with d
    // masked. Requires x[d] unmasked. Total: returns 0 for impossible tokens.
    virtual double leave_one_out(const Sequence& x, size_t d) const = 0;
    virtual const StateSpace& space() const = 0;
    virtual int dims() const = 0;
};

// Exact Bayes-posterior denoiser over an explicit q0.
//
// On states consistent with the support this is the exact posterior. Parallel
// (tau-leaping style) updates can produce partial states no support element
// matches; a network would still emit a distribution there, so the oracle
// conditions on the minimal-mismatch support elements instead of erroring.
// This extension coincides with the exact posterior whenever one exists, and
// it sends leave_one_out of a contradicting token to 0.
class OracleDenoiser final : public Denoiser {
  public:
    explicit OracleDenoiser(DataDistribution q0) : q0_(std::move(q0)) {}

    PositionDistributions predict(const Sequence& x) const override;
    double leave_one_out(const Sequence& x, size_t d) const override;

    const StateSpace& space() const override { return q0_.space(); }
    int dims() const override { return q0_.dims(); }
    const DataDistribution& target() const { return q0_; }

  private:
    DataDistribution q0_;
};

}  // namespace mdm
