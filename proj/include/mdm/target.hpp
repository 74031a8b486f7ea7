#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "mdm/state.hpp"

namespace mdm {

// A conditioning set (the unmasked positions of a partial sequence) that no
// support element satisfies. The strict posterior treats this as a bug
// signal; the denoiser oracle has a documented total extension instead.
struct InconsistentStateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Explicit finite-support data distribution q0 over mask-free sequences.
class DataDistribution {
  public:
    static constexpr size_t kMaxSupport = 4096;

    DataDistribution(StateSpace space, std::vector<Sequence> support, std::vector<double> probs);

    // Uniform over the V constant sequences (v, v, ..., v).
    static DataDistribution all_equal(int dims, int vocab);
    // Uniform over even-parity binary sequences.
    static DataDistribution parity(int dims);
    // Uniform over all vocab^dims sequences (fully factorized).
    static DataDistribution product_uniform(int dims, int vocab);
    // Path measure of a stationary Markov chain; `transition` is row-major
    // vocab x vocab with rows summing to 1.
    static DataDistribution markov_chain(int dims, int vocab, const std::vector<double>& transition);
    // Convenience peaked chain: stay with probability `stay`, uniform otherwise.
    static DataDistribution markov_chain_peaked(int dims, int vocab, double stay);

    // Text format: one support element per line,
    //   "tok tok ... tok<TAB>probability"
    // '#' starts a comment; blank lines ignored.
    static DataDistribution load_table(std::istream& in, int vocab);
    static DataDistribution load_table_file(const std::string& path, int vocab);
    void save_table(std::ostream& out) const;

    const StateSpace& space() const { return space_; }
    int dims() const { return dims_; }
    size_t support_size() const { return support_.size(); }
    const std::vector<Sequence>& support() const { return support_; }
    const std::vector<double>& probs() const { return probs_; }

    // Exact probability of a mask-free sequence (0 when outside the support).
    double prob_of(const Sequence& x) const;

  private:
    StateSpace space_;
    int dims_;
    std::vector<Sequence> support_;
    std::vector<double> probs_;
};

// Exact conditioning of q0 on the unmasked positions of x. Unmasked
// positions come back as point masses; masked positions as the posterior
// marginal. Time-independent under the masking forward process.
// Throws InconsistentStateError when no support element is consistent.
PositionDistributions posterior_marginals(const DataDistribution& q0, const Sequence& x);

}  // namespace mdm
