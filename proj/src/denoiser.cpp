#include "mdm/denoiser.hpp"

#include <limits>

namespace mdm {

namespace {

// Minimal-mismatch conditioning. For each position d we condition on the
// unmasked positions other than d; the admissible support elements are those
// with the fewest disagreements against that set. When a fully consistent
// element exists this is the exact posterior.
PositionDistributions min_mismatch_predict(const DataDistribution& q0, const Sequence& x) {
    const StateSpace& space = q0.space();
    const size_t D = x.size();
    const int V = space.vocab_size;
    const size_t S = q0.support_size();

    std::vector<int> mismatches(S, 0);
    int global_min = std::numeric_limits<int>::max();
    for (size_t j = 0; j < S; ++j) {
        const Sequence& x0 = q0.support()[j];
        int c = 0;
        for (size_t d = 0; d < D; ++d)
            if (x[d] != space.mask_id() && x[d] != x0[d]) ++c;
        mismatches[j] = c;
        global_min = std::min(global_min, c);
    }

    PositionDistributions out(D, Categorical(std::vector<double>(static_cast<size_t>(V), 0.0)));
    for (size_t d = 0; d < D; ++d) {
        const bool unmasked = x[d] != space.mask_id();
        // Dropping position d from the conditioning set lowers element j's
        // mismatch count by one exactly when j disagreed at d.
        int level = std::numeric_limits<int>::max();
        if (unmasked) {
            for (size_t j = 0; j < S; ++j) {
                int c = mismatches[j] - (q0.support()[j][d] != x[d] ? 1 : 0);
                level = std::min(level, c);
            }
        } else {
            level = global_min;
        }

        double z = 0.0;
        auto& dist = out[d];
        for (size_t j = 0; j < S; ++j) {
            int c = mismatches[j];
            if (unmasked && q0.support()[j][d] != x[d]) --c;
            if (c != level) continue;
            const double w = q0.probs()[j];
            dist.probs[static_cast<size_t>(q0.support()[j][d])] += w;
            z += w;
        }
        for (double& p : dist.probs) p /= z;
    }
    return out;
}

}  // namespace

PositionDistributions OracleDenoiser::predict(const Sequence& x) const {
    validate_sequence(x, q0_.space());
    if (static_cast<int>(x.size()) != q0_.dims())
        throw std::invalid_argument("OracleDenoiser::predict: dimension mismatch");
    return min_mismatch_predict(q0_, x);
}

double OracleDenoiser::leave_one_out(const Sequence& x, size_t d) const {
    if (d >= x.size()) throw std::out_of_range("leave_one_out: position out of range");
    if (x[d] == q0_.space().mask_id())
        throw std::invalid_argument("leave_one_out: position is masked");
    Sequence masked = x;
    masked[d] = q0_.space().mask_id();
    return predict(masked)[d][static_cast<size_t>(x[d])];
}

}  // namespace mdm
