#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace mdm {

using Token = int32_t;

// Token vector; entries are data tokens in [0, vocab_size) or the mask id.
using Sequence = std::vector<Token>;

// Finite per-coordinate state space plus the distinguished mask symbol.
// The mask is stored one past the data-token range (index == vocab_size),
// which is also how it is serialized in CSV output.
struct StateSpace {
    int vocab_size = 0;

    explicit StateSpace(int vocab) : vocab_size(vocab) {
        if (vocab < 2) throw std::invalid_argument("StateSpace: vocab_size must be >= 2");
    }

    Token mask_id() const { return vocab_size; }

    bool is_data_token(Token v) const { return v >= 0 && v < vocab_size; }
    bool is_valid_token(Token v) const { return is_data_token(v) || v == mask_id(); }
};

inline bool is_masked(const Sequence& x, size_t d, const StateSpace& space) {
    return x[d] == space.mask_id();
}

inline size_t masked_count(const Sequence& x, const StateSpace& space) {
    size_t n = 0;
    for (Token v : x)
        if (v == space.mask_id()) ++n;
    return n;
}

inline void validate_sequence(const Sequence& x, const StateSpace& space) {
    if (x.empty()) throw std::invalid_argument("Sequence: length must be >= 1");
    for (Token v : x)
        if (!space.is_valid_token(v))
            throw std::invalid_argument("Sequence: token " + std::to_string(v) +
                                        " out of range for vocab " + std::to_string(space.vocab_size));
}

// Probability vector over data tokens (or data tokens + mask, length V+1,
// when produced by a transition kernel).
struct Categorical {
    std::vector<double> probs;

    Categorical() = default;
    explicit Categorical(std::vector<double> p) : probs(std::move(p)) {}

    static Categorical uniform(int n) {
        return Categorical(std::vector<double>(static_cast<size_t>(n), 1.0 / n));
    }
    static Categorical delta(int n, int at) {
        std::vector<double> p(static_cast<size_t>(n), 0.0);
        p[static_cast<size_t>(at)] = 1.0;
        return Categorical(std::move(p));
    }

    size_t size() const { return probs.size(); }
    double operator[](size_t i) const { return probs[i]; }

    double sum() const {
        double s = 0.0;
        for (double p : probs) s += p;
        return s;
    }

    void validate(double tol = 1e-9) const {
        for (double p : probs)
            if (p < 0.0) throw std::invalid_argument("Categorical: negative probability");
        double s = sum();
        if (s < 1.0 - tol || s > 1.0 + tol)
            throw std::invalid_argument("Categorical: probabilities sum to " + std::to_string(s));
    }

    // Highest-probability index, ties broken by lowest index.
    int argmax() const {
        size_t best = 0;
        for (size_t i = 1; i < probs.size(); ++i)
            if (probs[i] > probs[best]) best = i;
        return static_cast<int>(best);
    }
};

// One Categorical over data tokens per position.
using PositionDistributions = std::vector<Categorical>;

}  // namespace mdm
