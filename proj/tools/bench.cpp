// arw_bench: times the serial reference path against the OpenMP path on the
// same workload and, with --check, verifies the two produce byte-identical
// results. Tallies are integer-only and merged in a fixed order, so any
// difference is a bug, not rounding.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "arw/estimators.hpp"
#include "arw/parallel.hpp"
#include "arw/walks.hpp"

namespace {

double now_ms() {
    using clock = std::chrono::steady_clock;
    return std::chrono::duration<double, std::milli>(clock::now().time_since_epoch()).count();
}

template <typename F>
double timed(F&& f) {
    const double t0 = now_ms();
    f();
    return now_ms() - t0;
}

bool same(const arw::EstimateReport& a, const arw::EstimateReport& b) {
    return a.value == b.value && a.std_error == b.std_error && a.trials == b.trials;
}

bool same(const arw::IdentityReport& a, const arw::IdentityReport& b) {
    return a.direct == b.direct && a.series == b.series && a.chance_mean == b.chance_mean &&
           a.direct_se == b.direct_se && a.series_se == b.series_se &&
           a.chance_mean_se == b.chance_mean_se;
}

bool same(const arw::ReturnsEstimate& a, const arw::ReturnsEstimate& b) {
    return a.mean == b.mean && a.std_error == b.std_error && a.histogram == b.histogram &&
           a.censoring_rate == b.censoring_rate;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"serial vs parallel benchmark for the simulation kernels"};
    uint64_t trials = 20000;
    uint64_t seed = 0x2A;
    int d = 2;
    int n = 4;
    double lambda = 1.0;
    double rho = 0.6;
    int workers = 0;
    bool check = false;
    app.add_option("--trials", trials, "trials per workload")->capture_default_str();
    app.add_option("--seed", seed, "master seed")->capture_default_str();
    app.add_option("--d", d, "dimension")->capture_default_str();
    app.add_option("--n", n, "box radius")->capture_default_str();
    app.add_option("--lambda", lambda, "sleep rate")->capture_default_str();
    app.add_option("--rho", rho, "initial density")->capture_default_str();
    app.add_option("--workers", workers, "threads for the parallel runs (0 = all)")
        ->capture_default_str();
    app.add_flag("--check", check, "verify serial and parallel results are identical");
    CLI11_PARSE(app, argc, argv);

    const arw::Params params = arw::Params::make(d, lambda);
    const arw::InitialLaw law = arw::InitialLaw::poisson(rho);
    arw::par::set_workers(workers);
    std::printf("workload: d=%d n=%d lambda=%g rho=%g trials=%llu workers=%d\n", d, n, lambda,
                rho, static_cast<unsigned long long>(trials), arw::par::max_workers());

    bool all_ok = true;
    const auto report = [&](const char* name, double serial_ms, double parallel_ms, bool ok) {
        std::printf("%-12s serial %9.1f ms   parallel %9.1f ms   speedup %5.2fx%s\n", name,
                    serial_ms, parallel_ms, serial_ms / (parallel_ms > 0 ? parallel_ms : 1.0),
                    check ? (ok ? "   identical" : "   MISMATCH") : "");
        all_ok = all_ok && ok;
    };

    {
        arw::EstimateReport s, p;
        const double ts = timed([&] {
            s = arw::estimate_occupation(d, n, params, law, trials, seed, false);
        });
        const double tp = timed([&] {
            p = arw::estimate_occupation(d, n, params, law, trials, seed, true);
        });
        report("occupation", ts, tp, same(s, p));
    }
    {
        arw::IdentityReport s, p;
        const double ts = timed([&] {
            s = arw::verify_identity(d, n, params, arw::InitialLaw::delta_origin(), trials, seed,
                                     false);
        });
        const double tp = timed([&] {
            p = arw::verify_identity(d, n, params, arw::InitialLaw::delta_origin(), trials, seed,
                                     true);
        });
        report("identity", ts, tp, same(s, p));
    }
    {
        arw::ReturnsEstimate s, p;
        const double ts = timed([&] {
            s = arw::expected_returns(3, trials, 200, arw::kDefaultMaxSteps, seed, false, false);
        });
        const double tp = timed([&] {
            p = arw::expected_returns(3, trials, 200, arw::kDefaultMaxSteps, seed, false, true);
        });
        report("returns", ts, tp, same(s, p));
    }

    if (check && !all_ok) {
        std::cerr << "serial and parallel results differ\n";
        return 1;
    }
    return 0;
}
