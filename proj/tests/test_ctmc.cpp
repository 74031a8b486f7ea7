#include <doctest.h>

#include <cmath>
#include <functional>
#include <map>

#include "mdm/ctmc.hpp"
#include "mdm/denoiser.hpp"

using namespace mdm;

namespace {

double simpson(double a, double b, int n, const std::function<double(double)>& f) {
    if (n % 2) ++n;
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + h * i) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("forward_rate hand values on the linear schedule") {
    NoiseSchedule lin{ScheduleKind::Linear};
    CHECK(forward_rate(0.0, lin) == doctest::Approx(1.0));
    CHECK(forward_rate(0.5, lin) == doctest::Approx(2.0));
    CHECK_THROWS_AS(forward_rate(1.0, lin), std::domain_error);
}

TEST_CASE("integrated forward rate recovers the schedule") {
    Rng rng(3);
    for (ScheduleKind kind : {ScheduleKind::Linear, ScheduleKind::Cosine}) {
        NoiseSchedule sched{kind};
        for (int i = 0; i < 10; ++i) {
            const double t = 0.05 + 0.85 * rng.uniform();
            const double integral =
                simpson(0.0, t, 2000, [&](double u) { return forward_rate(u, sched); });
            CHECK(std::exp(-integral) == doctest::Approx(sched.alpha(t)).epsilon(1e-8));
        }
    }
}

TEST_CASE("reverse_rate_marginal hand values") {
    auto q0 = DataDistribution::all_equal(2, 2);
    OracleDenoiser den{q0};
    NoiseSchedule lin{ScheduleKind::Linear};
    const Token m = q0.space().mask_id();

    CHECK(reverse_rate_marginal({0, 0}, 0, 1, 0.5, lin, den) == 0.0);
    // |alpha'| / (1 - alpha) * p(v) with uniform p: 1 / 0.5 * 0.5 = 1.
    CHECK(reverse_rate_marginal({m, m}, 0, 1, 0.5, lin, den) == doctest::Approx(1.0).epsilon(1e-12));

    double total = 0.0;
    for (int v = 0; v < 2; ++v) total += reverse_rate_marginal({m, m}, 0, v, 0.5, lin, den);
    CHECK(total == doctest::Approx(2.0).epsilon(1e-12));

    CHECK_THROWS_AS(reverse_rate_marginal({m, m}, 0, 1, 0.0, lin, den), std::domain_error);
}

TEST_CASE("reverse_rate_ratio hand value with a forced posterior") {
    auto q0 = DataDistribution::all_equal(2, 2);
    NoiseSchedule lin{ScheduleKind::Linear};
    const Token m = q0.space().mask_id();
    CHECK(reverse_rate_ratio({m, 1}, 0, 1, 0.5, lin, q0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(reverse_rate_ratio({1, 1}, 0, 1, 0.5, lin, q0) == 0.0);
}

TEST_CASE("rate forms agree on random reachable states") {
    NoiseSchedule lin{ScheduleKind::Linear};
    Rng rng(71);
    for (const auto& q0 :
         {DataDistribution::all_equal(3, 3), DataDistribution::parity(4)}) {
        OracleDenoiser den{q0};
        const StateSpace& space = q0.space();
        const int V = space.vocab_size;
        for (int trial = 0; trial < 1000; ++trial) {
            const Sequence& x0 = q0.support()[static_cast<size_t>(rng.categorical(q0.probs()))];
            const double t = 0.05 + 0.9 * rng.uniform();
            Sequence x = forward_sample(x0, t, lin, space, rng);
            const size_t d = static_cast<size_t>(rng.uniform_int(q0.dims()));
            const Token v = static_cast<Token>(rng.uniform_int(V));
            const double a = reverse_rate_marginal(x, d, v, t, lin, den);
            const double b = reverse_rate_ratio(x, d, v, t, lin, q0);
            CHECK(std::abs(a - b) <= 1e-10);
        }
    }
}

TEST_CASE("cumulative_hazard hand values and stay-probability identity") {
    NoiseSchedule lin{ScheduleKind::Linear};
    CHECK(cumulative_hazard(0.3, 0.3, lin) == doctest::Approx(0.0));
    CHECK(cumulative_hazard(0.5, 1.0, lin) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK_THROWS_AS(cumulative_hazard(0.5, 0.3, lin), std::domain_error);

    // exp(-hazard) must equal the reverse kernel's stay-masked mass.
    Rng rng(13);
    for (ScheduleKind kind : {ScheduleKind::Linear, ScheduleKind::Cosine}) {
        NoiseSchedule sched{kind};
        for (int i = 0; i < 50; ++i) {
            double s = rng.uniform() * 0.98;
            double t = s + (1.0 - s) * (0.01 + 0.99 * rng.uniform());
            const double stay = (1.0 - sched.alpha(s)) / (1.0 - sched.alpha(t));
            CHECK(std::exp(-cumulative_hazard(s, t, sched)) == doctest::Approx(stay).epsilon(1e-9));
        }
    }
}

TEST_CASE("stay probability plus integrated unmask density is 1") {
    NoiseSchedule cos_sched{ScheduleKind::Cosine};
    Rng rng(17);
    for (int i = 0; i < 10; ++i) {
        double s = 0.05 + rng.uniform() * 0.5;
        double t = s + 0.05 + rng.uniform() * (0.95 - s - 0.05);
        // Unmask-time density at u in (s, t): lambda_rev(u) exp(-hazard(u, t))
        // with lambda_rev = |alpha'| / (1 - alpha).
        auto density = [&](double u) {
            const AlphaValue a = cos_sched.eval(u);
            return (-a.alpha_prime) / (1.0 - a.alpha) * std::exp(-cumulative_hazard(u, t, cos_sched));
        };
        const double mass = simpson(s, t, 4000, density);
        CHECK(std::exp(-cumulative_hazard(s, t, cos_sched)) + mass == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("gillespie on a point-mass target always returns it") {
    DataDistribution q0(StateSpace(3), {{2, 0, 1}}, {1.0});
    OracleDenoiser den{q0};
    NoiseSchedule lin{ScheduleKind::Linear};
    Rng rng(23);
    for (int i = 0; i < 100; ++i) CHECK(gillespie_sample(den, 3, lin, rng) == Sequence{2, 0, 1});
}

TEST_CASE("gillespie is exact for a single coordinate") {
    DataDistribution q0(StateSpace(3), {{0}, {1}, {2}}, {0.6, 0.3, 0.1});
    OracleDenoiser den{q0};
    NoiseSchedule lin{ScheduleKind::Linear};
    Rng rng(29);
    std::map<Token, int> counts;
    const int n = 20000;
    for (int i = 0; i < n; ++i) ++counts[gillespie_sample(den, 1, lin, rng)[0]];
    double tv = 0.0;
    for (int v = 0; v < 3; ++v)
        tv += std::abs(static_cast<double>(counts[v]) / n - q0.prob_of({static_cast<Token>(v)}));
    CHECK(tv / 2.0 <= 0.02);
}

TEST_CASE("gillespie matches q0 on a correlated target") {
    auto q0 = DataDistribution::all_equal(3, 3);
    OracleDenoiser den{q0};
    for (ScheduleKind kind : {ScheduleKind::Linear, ScheduleKind::Cosine}) {
        NoiseSchedule sched{kind};
        Rng rng(31);
        std::map<Sequence, int> counts;
        const int n = 30000;
        for (int i = 0; i < n; ++i) ++counts[gillespie_sample(den, 3, sched, rng)];
        double l1 = 0.0;
        for (const auto& [x, c] : counts)
            l1 += std::abs(static_cast<double>(c) / n - q0.prob_of(x));
        CHECK(l1 / 2.0 <= 0.02);
    }
}

TEST_CASE("tau_leaping_step leaves unmasked coordinates unchanged") {
    auto q0 = DataDistribution::product_uniform(3, 2);
    OracleDenoiser den{q0};
    NoiseSchedule lin{ScheduleKind::Linear};
    const Token m = q0.space().mask_id();
    Rng rng(37);
    for (int i = 0; i < 200; ++i) {
        Sequence x = tau_leaping_step({1, m, 0}, 0.6, 0.4, lin, den, rng);
        CHECK(x[0] == 1);
        CHECK(x[2] == 0);
    }
}

TEST_CASE("tau_leaping_step unmask frequency matches the kernel") {
    auto q0 = DataDistribution::product_uniform(4, 2);
    OracleDenoiser den{q0};
    NoiseSchedule lin{ScheduleKind::Linear};
    const Token m = q0.space().mask_id();
    Rng rng(41);
    const int reps = 10000;
    int unmasked = 0;
    const Sequence start(4, m);
    for (int r = 0; r < reps; ++r) {
        Sequence x = tau_leaping_step(start, 0.6, 0.4, lin, den, rng);
        unmasked += 4 - static_cast<int>(masked_count(x, q0.space()));
    }
    const double n = 4.0 * reps;
    const double p = (0.6 - 0.4) / 0.6;
    const double freq = unmasked / n;
    CHECK(std::abs(freq - p) <= 4.0 * std::sqrt(p * (1.0 - p) / n));
}

TEST_CASE("one-shot tau leap is exact on a factorized target") {
    auto q0 = DataDistribution::product_uniform(2, 2);
    OracleDenoiser den{q0};
    NoiseSchedule lin{ScheduleKind::Linear};
    const Token m = q0.space().mask_id();
    Rng rng(43);
    std::map<Sequence, int> counts;
    const int n = 20000;
    for (int i = 0; i < n; ++i) ++counts[tau_leaping_step({m, m}, 1.0, 0.0, lin, den, rng)];
    for (const auto& [x, c] : counts) {
        CHECK(masked_count(x, q0.space()) == 0);
        CHECK(std::abs(static_cast<double>(c) / n - 0.25) <= 4.0 * std::sqrt(0.25 * 0.75 / n));
    }
}
