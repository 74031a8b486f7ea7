#include "mdm/target.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace mdm {

DataDistribution::DataDistribution(StateSpace space, std::vector<Sequence> support,
                                   std::vector<double> probs)
    : space_(space), dims_(0), support_(std::move(support)), probs_(std::move(probs)) {
    if (support_.empty()) throw std::invalid_argument("DataDistribution: empty support");
    if (support_.size() != probs_.size())
        throw std::invalid_argument("DataDistribution: support/probability size mismatch");
    if (support_.size() > kMaxSupport)
        throw std::invalid_argument("DataDistribution: support exceeds desk-scale cap");

    dims_ = static_cast<int>(support_.front().size());
    std::set<Sequence> seen;
    double total = 0.0;
    for (size_t j = 0; j < support_.size(); ++j) {
        const Sequence& x = support_[j];
        if (static_cast<int>(x.size()) != dims_)
            throw std::invalid_argument("DataDistribution: ragged support");
        validate_sequence(x, space_);
        for (Token v : x)
            if (v == space_.mask_id())
                throw std::invalid_argument("DataDistribution: support contains mask tokens");
        if (!seen.insert(x).second)
            throw std::invalid_argument("DataDistribution: duplicate support element");
        if (probs_[j] <= 0.0)
            throw std::invalid_argument("DataDistribution: probabilities must be > 0");
        total += probs_[j];
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("DataDistribution: probabilities sum to " + std::to_string(total));
    for (double& p : probs_) p /= total;
}

DataDistribution DataDistribution::all_equal(int dims, int vocab) {
    StateSpace space(vocab);
    std::vector<Sequence> support;
    std::vector<double> probs;
    for (int v = 0; v < vocab; ++v) {
        support.emplace_back(static_cast<size_t>(dims), static_cast<Token>(v));
        probs.push_back(1.0 / vocab);
    }
    return DataDistribution(space, std::move(support), std::move(probs));
}

DataDistribution DataDistribution::parity(int dims) {
    if (dims < 1 || dims > 13) throw std::invalid_argument("parity: dims must be in [1, 13]");
    StateSpace space(2);
    std::vector<Sequence> support;
    for (uint64_t bits = 0; bits < (1ull << dims); ++bits) {
        if (__builtin_popcountll(bits) % 2 != 0) continue;
        Sequence x(static_cast<size_t>(dims));
        for (int d = 0; d < dims; ++d) x[static_cast<size_t>(d)] = (bits >> d) & 1;
        support.push_back(std::move(x));
    }
    std::vector<double> probs(support.size(), 1.0 / static_cast<double>(support.size()));
    return DataDistribution(space, std::move(support), std::move(probs));
}

DataDistribution DataDistribution::product_uniform(int dims, int vocab) {
    double count = std::pow(static_cast<double>(vocab), dims);
    if (count > static_cast<double>(kMaxSupport))
        throw std::invalid_argument("product_uniform: state space exceeds desk-scale cap");
    StateSpace space(vocab);
    std::vector<Sequence> support;
    Sequence x(static_cast<size_t>(dims), 0);
    while (true) {
        support.push_back(x);
        int d = 0;
        for (; d < dims; ++d) {
            if (++x[static_cast<size_t>(d)] < vocab) break;
            x[static_cast<size_t>(d)] = 0;
        }
        if (d == dims) break;
    }
    std::vector<double> probs(support.size(), 1.0 / static_cast<double>(support.size()));
    return DataDistribution(space, std::move(support), std::move(probs));
}

DataDistribution DataDistribution::markov_chain(int dims, int vocab,
                                                const std::vector<double>& transition) {
    if (transition.size() != static_cast<size_t>(vocab) * static_cast<size_t>(vocab))
        throw std::invalid_argument("markov_chain: transition must be vocab x vocab");
    for (int r = 0; r < vocab; ++r) {
        double s = 0.0;
        for (int c = 0; c < vocab; ++c) {
            double p = transition[static_cast<size_t>(r * vocab + c)];
            if (p < 0.0) throw std::invalid_argument("markov_chain: negative transition entry");
            s += p;
        }
        if (std::abs(s - 1.0) > 1e-9)
            throw std::invalid_argument("markov_chain: transition row does not sum to 1");
    }

    // Stationary distribution by power iteration; vocab is tiny.
    std::vector<double> pi(static_cast<size_t>(vocab), 1.0 / vocab);
    for (int iter = 0; iter < 10000; ++iter) {
        std::vector<double> next(static_cast<size_t>(vocab), 0.0);
        for (int r = 0; r < vocab; ++r)
            for (int c = 0; c < vocab; ++c)
                next[static_cast<size_t>(c)] += pi[static_cast<size_t>(r)] *
                                                transition[static_cast<size_t>(r * vocab + c)];
        double diff = 0.0;
        for (int c = 0; c < vocab; ++c) diff += std::abs(next[static_cast<size_t>(c)] - pi[static_cast<size_t>(c)]);
        pi = std::move(next);
        if (diff < 1e-15) break;
    }

    double count = std::pow(static_cast<double>(vocab), dims);
    if (count > static_cast<double>(kMaxSupport))
        throw std::invalid_argument("markov_chain: path space exceeds desk-scale cap");

    StateSpace space(vocab);
    std::vector<Sequence> support;
    std::vector<double> probs;
    Sequence x(static_cast<size_t>(dims), 0);
    while (true) {
        double p = pi[static_cast<size_t>(x[0])];
        for (int d = 1; d < dims; ++d)
            p *= transition[static_cast<size_t>(x[static_cast<size_t>(d - 1)] * vocab +
                                                x[static_cast<size_t>(d)])];
        if (p > 0.0) {
            support.push_back(x);
            probs.push_back(p);
        }
        int d = 0;
        for (; d < dims; ++d) {
            if (++x[static_cast<size_t>(d)] < vocab) break;
            x[static_cast<size_t>(d)] = 0;
        }
        if (d == dims) break;
    }
    return DataDistribution(space, std::move(support), std::move(probs));
}

DataDistribution DataDistribution::markov_chain_peaked(int dims, int vocab, double stay) {
    if (stay <= 0.0 || stay >= 1.0)
        throw std::invalid_argument("markov_chain_peaked: stay must be in (0,1)");
    std::vector<double> transition(static_cast<size_t>(vocab) * static_cast<size_t>(vocab),
                                   (1.0 - stay) / (vocab - 1));
    for (int v = 0; v < vocab; ++v) transition[static_cast<size_t>(v * vocab + v)] = stay;
    return markov_chain(dims, vocab, transition);
}

DataDistribution DataDistribution::load_table(std::istream& in, int vocab) {
    std::vector<Sequence> support;
    std::vector<double> probs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<double> fields;
        double f;
        while (ls >> f) fields.push_back(f);
        if (fields.empty()) continue;
        if (fields.size() < 2)
            throw std::invalid_argument("table line " + std::to_string(lineno) +
                                        ": expected tokens followed by a probability");
        Sequence x;
        for (size_t i = 0; i + 1 < fields.size(); ++i) x.push_back(static_cast<Token>(fields[i]));
        support.push_back(std::move(x));
        probs.push_back(fields.back());
    }
    if (support.empty()) throw std::invalid_argument("table: no support elements");
    return DataDistribution(StateSpace(vocab), std::move(support), std::move(probs));
}

DataDistribution DataDistribution::load_table_file(const std::string& path, int vocab) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open table file: " + path);
    return load_table(in, vocab);
}

void DataDistribution::save_table(std::ostream& out) const {
    out.precision(std::numeric_limits<double>::max_digits10);
    for (size_t j = 0; j < support_.size(); ++j) {
        for (size_t d = 0; d < support_[j].size(); ++d) {
            if (d) out << ' ';
            out << support_[j][d];
        }
        out << '\t' << probs_[j] << '\n';
    }
}

double DataDistribution::prob_of(const Sequence& x) const {
    for (size_t j = 0; j < support_.size(); ++j)
        if (support_[j] == x) return probs_[j];
    return 0.0;
}

PositionDistributions posterior_marginals(const DataDistribution& q0, const Sequence& x) {
    const StateSpace& space = q0.space();
    validate_sequence(x, space);
    if (static_cast<int>(x.size()) != q0.dims())
        throw std::invalid_argument("posterior_marginals: dimension mismatch");

    const size_t D = x.size();
    const int V = space.vocab_size;
    PositionDistributions out(D, Categorical(std::vector<double>(static_cast<size_t>(V), 0.0)));

    double z = 0.0;
    for (size_t j = 0; j < q0.support_size(); ++j) {
        const Sequence& x0 = q0.support()[j];
        bool consistent = true;
        for (size_t d = 0; d < D && consistent; ++d)
            if (x[d] != space.mask_id() && x[d] != x0[d]) consistent = false;
        if (!consistent) continue;
        const double w = q0.probs()[j];
        z += w;
        for (size_t d = 0; d < D; ++d)
            out[d].probs[static_cast<size_t>(x0[d])] += w;
    }
    if (z <= 0.0)
        throw InconsistentStateError("posterior_marginals: no support element matches the unmasked positions");
    for (auto& dist : out)
        for (double& p : dist.probs) p /= z;
    return out;
}

}  // namespace mdm
