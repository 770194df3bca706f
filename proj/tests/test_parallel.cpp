#include <doctest.h>

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "arw/estimators.hpp"
#include "arw/parallel.hpp"
#include "arw/walks.hpp"

using arw::InitialLaw;
using arw::Params;

namespace {

struct SumTally {
    uint64_t sum = 0;
    std::vector<uint64_t> per_trial;

    void merge(const SumTally& other) {
        sum += other.sum;
        per_trial.insert(per_trial.end(), other.per_trial.begin(), other.per_trial.end());
    }
};

// Forces the OpenMP path even on a single-core machine; restores on exit.
struct WorkerGuard {
    explicit WorkerGuard(int n) { arw::par::set_workers(n); }
    ~WorkerGuard() { arw::par::set_workers(1); }
};

}  // namespace

TEST_SUITE("parallel") {

TEST_CASE("worker controls are sane") {
    arw::par::set_workers(3);
    CHECK(arw::par::max_workers() >= 1);
    arw::par::set_workers(1);
    CHECK(arw::par::max_workers() >= 1);
}

TEST_CASE("trial driver merges integer tallies identically in both paths") {
    const auto body = [](int& ctx, uint64_t t, SumTally& tally) {
        (void)ctx;
        tally.sum += t * t + 1;
        tally.per_trial.push_back(t);
    };
    const auto make_ctx = [] { return 0; };

    const SumTally serial = arw::par::run_trials<SumTally>(500, make_ctx, body, false);
    WorkerGuard guard(4);
    const SumTally parallel = arw::par::run_trials<SumTally>(500, make_ctx, body, true);
    CHECK(serial.sum == parallel.sum);
    // schedule(static) hands out contiguous blocks in thread order, so even
    // the concatenation order is reproducible.
    CHECK(serial.per_trial == parallel.per_trial);
}

TEST_CASE("exceptions in trial bodies surface as a single error") {
    const auto make_ctx = [] { return 0; };
    const auto body = [](int&, uint64_t t, SumTally&) {
        if (t == 37) throw std::runtime_error("trial 37 failed");
    };
    CHECK_THROWS_AS(arw::par::run_trials<SumTally>(100, make_ctx, body, false),
                    std::runtime_error);
    WorkerGuard guard(4);
    CHECK_THROWS_AS(arw::par::run_trials<SumTally>(100, make_ctx, body, true),
                    std::runtime_error);
}

TEST_CASE("estimator reports are byte-identical serial vs parallel") {
    const Params p = Params::make(2, 1.0);

    const auto occ_s = arw::estimate_occupation(2, 2, p, InitialLaw::poisson(0.6), 3000, 0x91,
                                                false);
    const auto id_s = arw::verify_identity(1, 1, Params::make(1, 1.0),
                                           InitialLaw::delta_origin(), 3000, 0x92, false);
    const auto ret_s = arw::expected_returns(3, 3000, 80, 10'000'000, 0x93, false, false);
    const auto five_s =
        arw::five_step_stats(1, 3, Params::make(1, 1.0), InitialLaw::filled_ball(), 3000, 0x94,
                             false);

    WorkerGuard guard(4);
    const auto occ_p = arw::estimate_occupation(2, 2, p, InitialLaw::poisson(0.6), 3000, 0x91,
                                                true);
    CHECK(occ_s.value == occ_p.value);
    CHECK(occ_s.std_error == occ_p.std_error);

    const auto id_p = arw::verify_identity(1, 1, Params::make(1, 1.0),
                                           InitialLaw::delta_origin(), 3000, 0x92, true);
    CHECK(id_s.direct == id_p.direct);
    CHECK(id_s.series == id_p.series);
    CHECK(id_s.chance_mean == id_p.chance_mean);
    CHECK(id_s.direct_se == id_p.direct_se);
    CHECK(id_s.series_se == id_p.series_se);
    CHECK(id_s.chance_mean_se == id_p.chance_mean_se);

    const auto ret_p = arw::expected_returns(3, 3000, 80, 10'000'000, 0x93, false, true);
    CHECK(ret_s.mean == ret_p.mean);
    CHECK(ret_s.std_error == ret_p.std_error);
    CHECK(ret_s.histogram == ret_p.histogram);

    const auto five_p =
        arw::five_step_stats(1, 3, Params::make(1, 1.0), InitialLaw::filled_ball(), 3000, 0x94,
                             true);
    CHECK(five_s.n_jump1 == five_p.n_jump1);
    CHECK(five_s.n_jump2 == five_p.n_jump2);
    CHECK(five_s.n_both == five_p.n_both);
    CHECK(five_s.n_tau1_sleeping == five_p.n_tau1_sleeping);
    CHECK(five_s.n_ch_ge_2 == five_p.n_ch_ge_2);
    CHECK(five_s.p_jump2 == five_p.p_jump2);
    CHECK(five_s.z_independence == five_p.z_independence);
}

TEST_CASE("chance tails are byte-identical serial vs parallel") {
    const Params p = Params::make(1, 1.0);
    const auto s = arw::chance_distribution(1, 1, p, InitialLaw::delta_origin(), 4000, 0x95, 4,
                                            false);
    WorkerGuard guard(4);
    const auto q = arw::chance_distribution(1, 1, p, InitialLaw::delta_origin(), 4000, 0x95, 4,
                                            true);
    CHECK(s.ch_histogram == q.ch_histogram);
    CHECK(s.tail == q.tail);
    CHECK(s.tail_se == q.tail_se);
    CHECK(s.e_ach == q.e_ach);
}

}  // TEST_SUITE
