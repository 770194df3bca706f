// arwsim: experiment runner for activated-random-walk stabilization on
// finite boxes. Subcommands: stabilize, verify, sweep, returns, bounds,
// rhoc. Exit codes: 0 success, 1 check failure, 2 usage error, 3 I/O error.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arw/engine.hpp"
#include "arw/estimators.hpp"
#include "arw/io.hpp"
#include "arw/parallel.hpp"
#include "arw/walks.hpp"

namespace {

constexpr const char* kVersion = "0.1.0";

namespace fs = std::filesystem;
using arw::io::ordered_json;

struct CheckFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Seeds are accepted in decimal or hexadecimal (0x...) form.
uint64_t parse_seed(const std::string& text) {
    try {
        size_t used = 0;
        const uint64_t v = std::stoull(text, &used, 0);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw CLI::ValidationError("seed", "expected a decimal or 0x-prefixed 64-bit integer");
    }
}

fs::path output_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("ARWSIM_OUT"); env && *env) return env;
    return ".";
}

void write_text(const fs::path& path, const std::string& text) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoFailure("cannot open " + path.string() + " for writing");
    out << text;
    if (!out) throw IoFailure("write failed for " + path.string());
}

void append_line(const fs::path& path, const std::string& line) {
    std::error_code ec;
    if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw IoFailure("cannot open " + path.string() + " for appending");
    out << line << '\n';
    if (!out) throw IoFailure("write failed for " + path.string());
}

// One record per completed command, appended to runs.jsonl; prior records
// are never rewritten.
void append_run_record(const fs::path& out_dir, const std::string& command,
                       const ordered_json& config, double wall_ms) {
    ordered_json rec;
    rec["command"] = command;
    rec["config"] = config;
    rec["wall_ms"] = wall_ms;
    rec["version"] = kVersion;
    append_line(out_dir / "runs.jsonl", rec.dump());
}

class Stopwatch {
public:
    double ms() const {
        return std::chrono::duration<double, std::milli>(clock::now() - start_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_ = clock::now();
};

struct CommonOpts {
    int d = 1;
    int n = 1;
    double lambda = 1.0;
    std::string law = "delta";
    double rho = 0.0;
    uint64_t trials = 10000;
    std::string seed_text = "1";
    int workers = 0;  // 0 = all available
    std::string out;

    uint64_t seed() const { return parse_seed(seed_text); }
    bool parallel() const { return workers != 1; }
    void apply_workers() const { arw::par::set_workers(workers); }
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_box = true) {
    if (with_box) {
        cmd->add_option("--d", o.d, "lattice dimension")->capture_default_str();
        cmd->add_option("--n", o.n, "box radius")->capture_default_str();
        cmd->add_option("--lambda", o.lambda, "sleep rate, > 0")->capture_default_str();
        cmd->add_option("--law", o.law,
                        "initial law: empty|delta|poisson|bernoulli|filled|filled-poisson|"
                        "filled-bernoulli")
            ->capture_default_str();
        cmd->add_option("--rho", o.rho, "mean density for i.i.d. laws")->capture_default_str();
    }
    cmd->add_option("--trials", o.trials, "Monte Carlo trials")->capture_default_str();
    cmd->add_option("--seed", o.seed_text, "master seed, decimal or 0x 64-bit")
        ->capture_default_str();
    cmd->add_option("--workers", o.workers, "worker threads, 0 = all available")
        ->capture_default_str();
    cmd->add_option("--out", o.out, "output directory (default $ARWSIM_OUT or .)");
}

arw::Params make_params(const CommonOpts& o) {
    try {
        return arw::Params::make(o.d, o.lambda);
    } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError("parameters", e.what());
    }
}

arw::InitialLaw make_law(const CommonOpts& o) {
    try {
        return arw::InitialLaw::parse(o.law, o.rho);
    } catch (const std::invalid_argument& e) {
        throw CLI::ValidationError("--law", e.what());
    }
}

ordered_json config_json(const CommonOpts& o, bool with_box = true) {
    ordered_json j;
    if (with_box) {
        j["d"] = o.d;
        j["n"] = o.n;
        j["lambda"] = o.lambda;
        j["law"] = o.law;
        j["rho"] = o.rho;
    }
    j["trials"] = o.trials;
    j["master_seed"] = o.seed();
    j["workers"] = o.workers;
    return j;
}

// ---------------------------------------------------------------- stabilize

int cmd_stabilize(const CommonOpts& o, const std::string& out_file) {
    Stopwatch watch;
    const arw::Params params = make_params(o);
    const arw::InitialLaw law = make_law(o);
    auto box = arw::make_box(o.d, o.n);
    arw::Engine eng(box);
    arw::Configuration cfg = arw::make_config(box);
    const uint64_t master = o.seed();
    arw::sample_initial(cfg, law, arw::derive_trial_seed(master, 0, arw::kStreamLaw));
    const arw::StackSource src(arw::derive_trial_seed(master, 0, arw::kStreamStacks), params);
    eng.stabilize(cfg, src, arw::StabilizationMode::true_stab());

    const fs::path dir = output_dir(o.out);
    const fs::path path = out_file.empty() ? dir / "snapshot.json" : fs::path(out_file);
    write_text(path, arw::io::snapshot_to_json(cfg, src.seed()).dump(2) + "\n");
    std::cout << path.string() << '\n';
    append_run_record(dir, "stabilize", config_json(o), watch.ms());
    return 0;
}

// ------------------------------------------------------------------- verify

ordered_json verify_abelian(const CommonOpts& o, const arw::Params& params) {
    auto box = arw::make_box(o.d, o.n);
    arw::Engine eng(box);
    arw::Configuration cfg = arw::make_config(box);
    const arw::InitialLaw law = arw::InitialLaw::poisson(o.rho > 0 ? o.rho : 0.8);
    const uint64_t master = o.seed();
    uint64_t mismatches = 0;
    const uint64_t instances = std::max<uint64_t>(o.trials / 100, 20);
    for (uint64_t t = 0; t < instances; ++t) {
        arw::sample_initial(cfg, law, arw::derive_trial_seed(master, t, arw::kStreamLaw));
        const arw::StackSource src(arw::derive_trial_seed(master, t, arw::kStreamStacks), params);
        arw::Configuration fifo = cfg;
        eng.stabilize(fifo, src, arw::StabilizationMode::true_stab(),
                      {arw::TopplingOrder::FifoDrain, 0, arw::kDefaultStepCeiling});
        for (int ord = 0; ord < 10; ++ord) {
            arw::Configuration other = cfg;
            eng.stabilize(other, src, arw::StabilizationMode::true_stab(),
                          {arw::TopplingOrder::RandomSingle, static_cast<uint64_t>(ord) + 1,
                           arw::kDefaultStepCeiling});
            if (other.state != fifo.state || other.odometer != fifo.odometer ||
                other.killed != fifo.killed)
                ++mismatches;
        }
    }
    ordered_json j;
    j["check"] = "abelian";
    j["instances"] = instances;
    j["orders_per_instance"] = 10;
    j["mismatches"] = mismatches;
    j["pass"] = mismatches == 0;
    return j;
}

ordered_json verify_least_action(const CommonOpts& o, const arw::Params& params) {
    auto box = arw::make_box(o.d, o.n);
    arw::Engine eng(box);
    arw::Configuration cfg = arw::make_config(box);
    const arw::InitialLaw law = arw::InitialLaw::poisson(o.rho > 0 ? o.rho : 0.8);
    const uint64_t master = o.seed();
    const uint64_t instances = std::max<uint64_t>(o.trials / 100, 20);
    uint64_t violations = 0;
    for (uint64_t t = 0; t < instances; ++t) {
        arw::sample_initial(cfg, law, arw::derive_trial_seed(master, t, arw::kStreamLaw));
        const arw::StackSource src(arw::derive_trial_seed(master, t, arw::kStreamStacks), params);
        violations += eng.least_action_replay(cfg, src, 20, master + t).violations;
    }
    ordered_json j;
    j["check"] = "least-action";
    j["instances"] = instances;
    j["orders_per_instance"] = 20;
    j["violations"] = violations;
    j["pass"] = violations == 0;
    return j;
}

ordered_json verify_coupling(const CommonOpts& o, const arw::Params& params) {
    auto box = arw::make_box(o.d, o.n);
    arw::Engine eng(box);
    arw::Configuration cfg = arw::make_config(box);
    const arw::InitialLaw law =
        o.law == "delta" ? arw::InitialLaw::delta_origin()
                         : arw::InitialLaw::poisson(o.rho > 0 ? o.rho : 0.6);
    const uint64_t master = o.seed();
    uint64_t violations = 0;
    for (uint64_t t = 0; t < o.trials; ++t) {
        arw::sample_initial(cfg, law, arw::derive_trial_seed(master, t, arw::kStreamLaw));
        const arw::StackSource src(arw::derive_trial_seed(master, t, arw::kStreamStacks), params);
        const arw::CoupledRun run = eng.coupled_true_vs_strong(cfg, src);
        if (!run.coupling_holds || !run.prediction_matches) ++violations;
    }
    ordered_json j;
    j["check"] = "coupling";
    j["trials"] = o.trials;
    j["violations"] = violations;
    j["pass"] = violations == 0;
    return j;
}

ordered_json verify_conservation(const CommonOpts& o, const arw::Params& params) {
    auto box = arw::make_box(o.d, o.n);
    arw::Engine eng(box);
    arw::Configuration cfg = arw::make_config(box);
    const arw::InitialLaw law = arw::InitialLaw::poisson(o.rho > 0 ? o.rho : 0.8);
    const uint64_t master = o.seed();
    uint64_t violations = 0;
    for (uint64_t t = 0; t < o.trials; ++t) {
        arw::sample_initial(cfg, law, arw::derive_trial_seed(master, t, arw::kStreamLaw));
        const int64_t before = cfg.particles();
        const arw::StackSource src(arw::derive_trial_seed(master, t, arw::kStreamStacks), params);
        eng.stabilize(cfg, src, arw::StabilizationMode::true_stab());
        if (cfg.particles() + static_cast<int64_t>(cfg.killed) != before) ++violations;
    }
    ordered_json j;
    j["check"] = "conservation";
    j["trials"] = o.trials;
    j["violations"] = violations;
    j["pass"] = violations == 0;
    return j;
}

ordered_json verify_identity_cmd(const CommonOpts& o, const arw::Params& params) {
    const arw::IdentityReport rep = arw::verify_identity(
        o.d, o.n, params, make_law(o), o.trials, o.seed(), o.parallel());
    ordered_json j = arw::io::to_json(rep);
    j["check"] = "identity";
    return j;
}

ordered_json verify_ach_bound_cmd(const CommonOpts& o, const arw::Params& params,
                                  int64_t escape_radius, uint64_t max_steps,
                                  uint64_t walk_trials) {
    if (o.d < 3)
        throw CLI::ValidationError("--d", "the chance bound needs a transient walk (d >= 3)");
    const arw::ReturnsEstimate ret = arw::expected_returns(
        o.d, walk_trials, escape_radius, max_steps,
        arw::derive_trial_seed(o.seed(), 0, arw::kStreamWalk), false, o.parallel());
    const arw::AchBoundReport rep = arw::verify_ach_bound(
        o.d, o.n, params, make_law(o), o.trials, o.seed(), ret, o.parallel());
    ordered_json j = arw::io::to_json(rep);
    j["check"] = "ach-bound";
    return j;
}

ordered_json verify_five_step(const CommonOpts& o, const arw::Params& params) {
    arw::InitialLaw law = make_law(o);
    if (law.kind != arw::InitialLaw::Kind::FilledBall)
        law = arw::InitialLaw::filled_ball(arw::InitialLaw::Kind::Empty, 0.0);
    const arw::FiveStepReport rep =
        arw::five_step_stats(o.d, std::max(o.n, 2), params, law, o.trials, o.seed(), o.parallel());
    ordered_json j = arw::io::to_json(rep);
    j["check"] = "five-step";
    const double target = params.p_j / (2.0 * o.d);
    const bool jump2_ok = std::abs(rep.p_jump2 - target) <= 4.0 * rep.p_jump2_se;
    const bool tau_ok = rep.p_tau1_sleeping >= params.p_s - 4.0 * rep.p_tau1_se;
    const double ch2_floor = (1.0 / (2.0 * o.d)) * (1.0 - params.p_s * params.p_j / (2.0 * o.d));
    const bool ch2_ok = rep.p_ch_ge_2 >= ch2_floor - 4.0 * rep.p_ch_ge_2_se;
    j["pass"] = rep.invariant_violations == 0 && jump2_ok && tau_ok && ch2_ok;
    return j;
}

int cmd_verify(const std::string& suite, const CommonOpts& o, int64_t escape_radius,
               uint64_t max_steps, uint64_t walk_trials, const std::string& out_file) {
    Stopwatch watch;
    const arw::Params params = make_params(o);
    o.apply_workers();
    std::vector<ordered_json> reports;
    const bool all = suite == "all";
    if (all || suite == "abelian") reports.push_back(verify_abelian(o, params));
    if (all || suite == "least-action") reports.push_back(verify_least_action(o, params));
    if (all || suite == "coupling") reports.push_back(verify_coupling(o, params));
    if (all || suite == "conservation") reports.push_back(verify_conservation(o, params));
    if (all || suite == "identity") reports.push_back(verify_identity_cmd(o, params));
    if (all || suite == "five-step") reports.push_back(verify_five_step(o, params));
    if ((all && o.d >= 3) || suite == "ach-bound")
        reports.push_back(verify_ach_bound_cmd(o, params, escape_radius, max_steps, walk_trials));
    if (reports.empty())
        throw CLI::ValidationError(
            "suite", "expected abelian|least-action|coupling|conservation|identity|ach-bound|"
                     "five-step|all");

    ordered_json out = ordered_json::array();
    bool pass = true;
    for (const auto& r : reports) {
        pass = pass && r.at("pass").get<bool>();
        out.push_back(r);
    }
    const std::string text = out.dump(2) + "\n";
    if (!out_file.empty()) write_text(out_file, text);
    std::cout << text;
    ordered_json cfg = config_json(o);
    cfg["suite"] = suite;
    append_run_record(output_dir(o.out), "verify", cfg, watch.ms());
    if (!pass) throw CheckFailure("verify suite '" + suite + "' failed");
    return 0;
}

// -------------------------------------------------------------------- sweep

struct SweepOpts {
    std::string what = "occupation";
    std::vector<int> d_list{1};
    std::vector<int> n_list{1};
    std::vector<double> lambda_list{1.0};
    std::vector<double> rho_list{0.0};
    int64_t escape_radius = arw::kDefaultEscapeRadius;
    uint64_t max_steps = arw::kDefaultMaxSteps;
};

std::string cell_key(const ordered_json& cell_config) { return cell_config.dump(); }

int cmd_sweep(const CommonOpts& o, const SweepOpts& s) {
    Stopwatch watch;
    if (s.what != "occupation" && s.what != "identity" && s.what != "bounds")
        throw CLI::ValidationError("--what", "expected occupation|identity|bounds");
    o.apply_workers();
    const fs::path dir = output_dir(o.out);
    const fs::path jsonl = dir / ("sweep_" + s.what + ".jsonl");
    const fs::path csv = dir / ("sweep_" + s.what + ".csv");

    // Completed cells are identified by their full config record; rerunning
    // with the same parameters skips them so an interrupted sweep resumes.
    std::set<std::string> done;
    std::vector<ordered_json> records;
    if (fs::exists(jsonl)) {
        std::ifstream in(jsonl);
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            ordered_json rec = ordered_json::parse(line, nullptr, false);
            if (rec.is_discarded()) continue;
            records.push_back(rec);
            if (rec.contains("cell")) done.insert(cell_key(rec["cell"]));
        }
    }

    uint64_t ran = 0, skipped = 0, failed = 0;
    for (const int d : s.d_list) {
        for (const double lambda : s.lambda_list) {
            for (const int n : s.n_list) {
                for (const double rho : s.rho_list) {
                    ordered_json cell;
                    cell["what"] = s.what;
                    cell["d"] = d;
                    cell["n"] = n;
                    cell["lambda"] = lambda;
                    cell["law"] = o.law;
                    cell["rho"] = rho;
                    cell["trials"] = o.trials;
                    cell["master_seed"] = o.seed();
                    if (s.what == "bounds") {
                        cell["escape_radius"] = s.escape_radius;
                        cell["max_steps"] = s.max_steps;
                    }
                    if (done.count(cell_key(cell))) {
                        ++skipped;
                        continue;
                    }
                    ordered_json rec;
                    rec["cell"] = cell;
                    try {
                        const arw::Params params = arw::Params::make(d, lambda);
                        if (s.what == "occupation") {
                            CommonOpts co = o;
                            co.d = d;
                            co.n = n;
                            co.rho = rho;
                            rec["result"] = arw::io::to_json(arw::estimate_occupation(
                                d, n, params, arw::InitialLaw::parse(o.law, rho), o.trials,
                                o.seed(), o.parallel()));
                        } else if (s.what == "identity") {
                            rec["result"] = arw::io::to_json(arw::verify_identity(
                                d, n, params, arw::InitialLaw::parse(o.law, rho), o.trials,
                                o.seed(), o.parallel()));
                        } else {
                            std::optional<arw::ReturnsEstimate> ret;
                            if (d >= 3)
                                ret = arw::expected_returns(
                                    d, o.trials, s.escape_radius, s.max_steps,
                                    arw::derive_trial_seed(o.seed(), static_cast<uint64_t>(d),
                                                           arw::kStreamWalk),
                                    false, o.parallel());
                            rec["result"] = arw::io::to_json(arw::bounds_report(d, params, ret));
                        }
                        rec["status"] = "ok";
                        ++ran;
                    } catch (const std::exception& e) {
                        // A failed cell is recorded and the sweep moves on.
                        rec["status"] = "failed";
                        rec["error"] = e.what();
                        ++failed;
                    }
                    append_line(jsonl, rec.dump());
                    records.push_back(rec);
                }
            }
        }
    }

    // The CSV summary is regenerated from the JSONL log every run.
    std::string table;
    if (s.what == "bounds") {
        table = arw::io::csv_header_bounds() + "\n";
        for (const auto& rec : records) {
            if (rec.value("status", "") != "ok") continue;
            const auto& r = rec.at("result");
            table += std::to_string(r.at("d").get<int>()) + ',' +
                     arw::io::format_double(r.at("lambda").get<double>()) + ',' +
                     arw::io::format_double(r.at("p_s").get<double>()) + ',' +
                     arw::io::format_double(r.at("p_j").get<double>()) + ',' +
                     arw::io::format_double(r.at("lower").get<double>()) + ',' +
                     (r.at("upper").is_null() ? "nan"
                                              : arw::io::format_double(r.at("upper").get<double>())) +
                     ',' +
                     (r.at("e_r").is_null() ? "nan"
                                            : arw::io::format_double(r.at("e_r").get<double>())) +
                     ',' + arw::io::format_double(r.at("e_r_se").get<double>()) + ',' +
                     r.at("e_r_source").get<std::string>() + '\n';
        }
    } else if (s.what == "occupation") {
        table = arw::io::csv_header_estimate() + "\n";
        for (const auto& rec : records) {
            if (rec.value("status", "") != "ok") continue;
            const auto& r = rec.at("result");
            table += r.at("what").get<std::string>() + ',' + std::to_string(r.at("d").get<int>()) +
                     ',' + std::to_string(r.at("n").get<int>()) + ',' +
                     arw::io::format_double(r.at("lambda").get<double>()) + ',' +
                     r.at("law").get<std::string>() + ',' +
                     arw::io::format_double(r.at("rho").get<double>()) + ',' +
                     std::to_string(r.at("trials").get<uint64_t>()) + ',' +
                     std::to_string(r.at("master_seed").get<uint64_t>()) + ',' +
                     arw::io::format_double(r.at("value").get<double>()) + ',' +
                     arw::io::format_double(r.at("std_error").get<double>()) + ',' +
                     arw::io::format_double(r.at("ci95")[0].get<double>()) + ',' +
                     arw::io::format_double(r.at("ci95")[1].get<double>()) + '\n';
        }
    } else {
        table = "d,n,lambda,law,rho,trials,master_seed,direct,series,chance_mean,pass\n";
        for (const auto& rec : records) {
            if (rec.value("status", "") != "ok") continue;
            const auto& r = rec.at("result");
            table += std::to_string(r.at("d").get<int>()) + ',' +
                     std::to_string(r.at("n").get<int>()) + ',' +
                     arw::io::format_double(r.at("lambda").get<double>()) + ',' +
                     r.at("law").get<std::string>() + ',' +
                     arw::io::format_double(r.at("rho").get<double>()) + ',' +
                     std::to_string(r.at("trials_per_stream").get<uint64_t>()) + ',' +
                     std::to_string(r.at("master_seed").get<uint64_t>()) + ',' +
                     arw::io::format_double(r.at("direct").get<double>()) + ',' +
                     arw::io::format_double(r.at("series").get<double>()) + ',' +
                     arw::io::format_double(r.at("chance_mean").get<double>()) + ',' +
                     (r.at("pass").get<bool>() ? "1" : "0") + '\n';
        }
    }
    write_text(csv, table);

    ordered_json cfg = config_json(o, false);
    cfg["what"] = s.what;
    cfg["cells_ran"] = ran;
    cfg["cells_skipped"] = skipped;
    cfg["cells_failed"] = failed;
    append_run_record(dir, "sweep", cfg, watch.ms());
    std::cout << "sweep " << s.what << ": ran " << ran << ", skipped " << skipped << ", failed "
              << failed << "; results in " << jsonl.string() << '\n';
    return failed == 0 ? 0 : 1;
}

// ------------------------------------------------------------ returns/bounds

int cmd_returns(const CommonOpts& o, int64_t escape_radius, uint64_t max_steps,
                bool allow_censored, const std::string& out_file) {
    Stopwatch watch;
    o.apply_workers();
    arw::ReturnsEstimate est;
    try {
        est = arw::expected_returns(o.d, o.trials, escape_radius, max_steps, o.seed(),
                                    allow_censored, o.parallel());
    } catch (const std::runtime_error& e) {
        throw CheckFailure(e.what());
    }
    const std::string text = arw::io::to_json(est).dump(2) + "\n";
    if (!out_file.empty()) write_text(out_file, text);
    std::cout << text;
    ordered_json cfg = config_json(o, false);
    cfg["d"] = o.d;
    cfg["escape_radius"] = escape_radius;
    cfg["max_steps"] = max_steps;
    append_run_record(output_dir(o.out), "returns", cfg, watch.ms());
    return 0;
}

int cmd_bounds(const CommonOpts& o, const std::string& er_source, int64_t escape_radius,
               uint64_t max_steps, const std::string& out_file) {
    Stopwatch watch;
    o.apply_workers();
    const arw::Params params = make_params(o);
    std::optional<arw::ReturnsEstimate> ret;
    if (er_source == "monte-carlo") {
        if (o.d >= 3)
            ret = arw::expected_returns(o.d, o.trials, escape_radius, max_steps, o.seed(), false,
                                        o.parallel());
    } else if (er_source != "asymptotic") {
        throw CLI::ValidationError("--er", "expected monte-carlo or asymptotic");
    }
    const arw::BoundsReport rep = arw::bounds_report(o.d, params, ret);
    const std::string text = arw::io::to_json(rep).dump(2) + "\n";
    if (!out_file.empty()) write_text(out_file, text);
    std::cout << text;
    ordered_json cfg = config_json(o, false);
    cfg["d"] = o.d;
    cfg["lambda"] = o.lambda;
    cfg["er_source"] = er_source;
    append_run_record(output_dir(o.out), "bounds", cfg, watch.ms());
    return 0;
}

// --------------------------------------------------------------------- rhoc

int cmd_rhoc(const CommonOpts& o, double rho_min, double rho_max, double rho_step,
             const std::string& out_file) {
    Stopwatch watch;
    o.apply_workers();
    const arw::Params params = make_params(o);
    if (!(rho_step > 0) || !(rho_max > rho_min))
        throw CLI::ValidationError("--rho-step", "need rho-min < rho-max and rho-step > 0");
    std::vector<double> grid;
    for (double r = rho_min; r <= rho_max + 1e-12; r += rho_step) grid.push_back(r);
    const arw::RhocBracket rep =
        arw::rhoc_bracket(o.d, o.n, params, o.trials, o.seed(), grid, o.parallel());

    const fs::path dir = output_dir(o.out);
    const fs::path path = out_file.empty() ? dir / "rhoc.json" : fs::path(out_file);
    write_text(path, arw::io::to_json(rep).dump(2) + "\n");
    write_text(dir / "rhoc_cells.csv",
               arw::io::csv_header_rhoc_cells() + "\n" + arw::io::csv_rows(rep));
    std::cout << arw::io::to_json(rep).dump(2) << '\n';
    ordered_json cfg = config_json(o);
    cfg["rho_min"] = rho_min;
    cfg["rho_max"] = rho_max;
    cfg["rho_step"] = rho_step;
    append_run_record(dir, "rhoc", cfg, watch.ms());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"activated random walk simulation lab"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    // Config-file extras are ignored (the CLI11 default); unknown
    // command-line flags stay hard errors.
    app.set_config("--config", "", "read defaults from a TOML/INI file; flags win");

    CommonOpts common;
    std::string out_file;

    auto* stab = app.add_subcommand("stabilize", "stabilize one sampled configuration");
    add_common(stab, common);
    stab->add_option("--out-file", out_file, "snapshot path (default <out>/snapshot.json)");

    std::string suite = "all";
    int64_t escape_radius = arw::kDefaultEscapeRadius;
    uint64_t max_steps = arw::kDefaultMaxSteps;
    uint64_t walk_trials = 20000;
    auto* verify = app.add_subcommand("verify", "run property checks; nonzero exit on failure");
    verify->add_option("suite", suite,
                       "abelian|least-action|coupling|conservation|identity|ach-bound|five-step|all");
    add_common(verify, common);
    verify->add_option("--escape-radius", escape_radius, "walk escape radius (ach-bound)");
    verify->add_option("--max-steps", max_steps, "walk step cap (ach-bound)");
    verify->add_option("--walk-trials", walk_trials, "walks for the returns estimate (ach-bound)");
    verify->add_option("--out-file", out_file, "also write the JSON report here");

    SweepOpts sweep;
    auto* sw = app.add_subcommand("sweep", "run an estimator over a parameter grid");
    sw->add_option("--what", sweep.what, "occupation|identity|bounds")->capture_default_str();
    sw->add_option("--d-list", sweep.d_list, "dimensions")->delimiter(',');
    sw->add_option("--n-list", sweep.n_list, "box radii")->delimiter(',');
    sw->add_option("--lambda-list", sweep.lambda_list, "sleep rates")->delimiter(',');
    sw->add_option("--rho-list", sweep.rho_list, "densities")->delimiter(',');
    sw->add_option("--escape-radius", sweep.escape_radius, "walk escape radius (bounds)");
    sw->add_option("--max-steps", sweep.max_steps, "walk step cap (bounds)");
    add_common(sw, common, false);
    sw->add_option("--law", common.law, "initial law for occupation/identity cells")
        ->capture_default_str();

    bool allow_censored = false;
    auto* ret = app.add_subcommand("returns", "estimate expected returns of the free walk");
    ret->add_option("--d", common.d, "dimension")->capture_default_str();
    add_common(ret, common, false);
    ret->add_option("--escape-radius", escape_radius, "stop at this L-inf radius")
        ->capture_default_str();
    ret->add_option("--max-steps", max_steps, "per-walk step cap")->capture_default_str();
    ret->add_flag("--allow-censored", allow_censored,
                  "report a truncated mean even when censoring exceeds 0.001");
    ret->add_option("--out-file", out_file, "also write the JSON estimate here");

    std::string er_source = "monte-carlo";
    auto* bounds = app.add_subcommand("bounds", "evaluate the critical-density bounds");
    bounds->add_option("--d", common.d, "dimension")->capture_default_str();
    bounds->add_option("--lambda", common.lambda, "sleep rate")->capture_default_str();
    add_common(bounds, common, false);
    bounds->add_option("--er", er_source, "returns source: monte-carlo|asymptotic")
        ->capture_default_str();
    bounds->add_option("--escape-radius", escape_radius, "walk escape radius");
    bounds->add_option("--max-steps", max_steps, "walk step cap");
    bounds->add_option("--out-file", out_file, "also write the JSON report here");

    double rho_min = 0.5, rho_max = 0.7, rho_step = 0.02;
    auto* rhoc = app.add_subcommand("rhoc", "bracket the finite-volume density crossover");
    add_common(rhoc, common);
    rhoc->add_option("--rho-min", rho_min, "grid start")->capture_default_str();
    rhoc->add_option("--rho-max", rho_max, "grid end")->capture_default_str();
    rhoc->add_option("--rho-step", rho_step, "grid step")->capture_default_str();
    rhoc->add_option("--out-file", out_file, "bracket JSON path (default <out>/rhoc.json)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help, --version
        app.exit(e);
        return 2;
    }

    try {
        if (stab->parsed()) return cmd_stabilize(common, out_file);
        if (verify->parsed())
            return cmd_verify(suite, common, escape_radius, max_steps, walk_trials, out_file);
        if (sw->parsed()) return cmd_sweep(common, sweep);
        if (ret->parsed())
            return cmd_returns(common, escape_radius, max_steps, allow_censored, out_file);
        if (bounds->parsed())
            return cmd_bounds(common, er_source, escape_radius, max_steps, out_file);
        if (rhoc->parsed()) return cmd_rhoc(common, rho_min, rho_max, rho_step, out_file);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const CheckFailure& e) {
        std::cerr << "check failed: " << e.what() << '\n';
        return 1;
    } catch (const IoFailure& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
