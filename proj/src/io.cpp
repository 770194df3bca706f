#include "arw/io.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace arw::io {

namespace {

ordered_json states_rle(const std::vector<int32_t>& state) {
    ordered_json runs = ordered_json::array();
    size_t i = 0;
    while (i < state.size()) {
        size_t j = i;
        while (j < state.size() && state[j] == state[i]) ++j;
        runs.push_back({j - i, state[i]});
        i = j;
    }
    return runs;
}

const char* er_source_name(BoundsReport::ERSource s) {
    switch (s) {
        case BoundsReport::ERSource::MonteCarlo: return "monte-carlo";
        case BoundsReport::ERSource::Asymptotic: return "asymptotic";
        case BoundsReport::ERSource::Divergent: return "divergent";
    }
    return "?";
}

// NaN is not representable in JSON; reports use null instead.
ordered_json num_or_null(double v) {
    if (std::isnan(v) || std::isinf(v)) return nullptr;
    return v;
}

}  // namespace

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

ordered_json snapshot_to_json(const Configuration& cfg, uint64_t seed) {
    ordered_json j;
    j["d"] = cfg.box->d();
    j["n"] = cfg.box->n();
    j["seed"] = seed;
    j["states"] = states_rle(cfg.state);
    j["odometer"] = cfg.odometer;
    return j;
}

Configuration snapshot_from_json(const ordered_json& j, uint64_t* seed_out) {
    Configuration cfg = make_config(make_box(j.at("d").get<int>(), j.at("n").get<int>()));
    if (seed_out) *seed_out = j.at("seed").get<uint64_t>();
    size_t i = 0;
    for (const auto& run : j.at("states")) {
        const size_t len = run.at(0).get<size_t>();
        const int32_t value = run.at(1).get<int32_t>();
        if (i + len > cfg.state.size()) throw std::invalid_argument("snapshot states overflow the box");
        for (size_t k = 0; k < len; ++k) cfg.state[i++] = value;
    }
    if (i != cfg.state.size()) throw std::invalid_argument("snapshot states do not cover the box");
    const auto& odo = j.at("odometer");
    if (odo.size() != cfg.odometer.size())
        throw std::invalid_argument("snapshot odometer does not cover the box");
    for (size_t k = 0; k < cfg.odometer.size(); ++k) cfg.odometer[k] = odo[k].get<uint64_t>();
    return cfg;
}

ordered_json to_json(const EstimateReport& rep) {
    ordered_json j;
    j["what"] = rep.what;
    j["d"] = rep.d;
    j["n"] = rep.n;
    j["lambda"] = rep.lambda;
    j["law"] = rep.law;
    j["rho"] = rep.rho;
    j["trials"] = rep.trials;
    j["master_seed"] = rep.master_seed;
    j["value"] = rep.value;
    j["std_error"] = rep.std_error;
    j["ci95"] = {rep.ci_lo, rep.ci_hi};
    return j;
}

ordered_json to_json(const ChanceTailReport& rep) {
    ordered_json j;
    j["what"] = "chance_tail";
    j["d"] = rep.d;
    j["n"] = rep.n;
    j["lambda"] = rep.lambda;
    j["law"] = rep.law;
    j["rho"] = rep.rho;
    j["trials"] = rep.trials;
    j["master_seed"] = rep.master_seed;
    j["tail"] = rep.tail;
    j["tail_se"] = rep.tail_se;
    j["e_ach"] = rep.e_ach;
    j["e_ach_se"] = rep.e_ach_se;
    j["ch_histogram"] = rep.ch_histogram;
    return j;
}

ordered_json to_json(const IdentityReport& rep) {
    ordered_json j;
    j["what"] = "identity";
    j["d"] = rep.d;
    j["n"] = rep.n;
    j["lambda"] = rep.lambda;
    j["law"] = rep.law;
    j["rho"] = rep.rho;
    j["trials_per_stream"] = rep.trials;
    j["master_seed"] = rep.master_seed;
    j["direct"] = rep.direct;
    j["direct_se"] = rep.direct_se;
    j["series"] = rep.series;
    j["series_se"] = rep.series_se;
    j["chance_mean"] = rep.chance_mean;
    j["chance_mean_se"] = rep.chance_mean_se;
    j["z_direct_series"] = num_or_null(rep.z_direct_series);
    j["z_direct_mean"] = num_or_null(rep.z_direct_mean);
    j["z_series_mean"] = num_or_null(rep.z_series_mean);
    j["pass"] = rep.pass;
    return j;
}

ordered_json to_json(const AchBoundReport& rep) {
    ordered_json j;
    j["what"] = "ach_bound";
    j["d"] = rep.d;
    j["n"] = rep.n;
    j["lambda"] = rep.lambda;
    j["law"] = rep.law;
    j["rho"] = rep.rho;
    j["trials"] = rep.trials;
    j["master_seed"] = rep.master_seed;
    j["e_ach"] = rep.e_ach;
    j["e_ach_se"] = rep.e_ach_se;
    j["e_r"] = rep.e_r;
    j["e_r_se"] = rep.e_r_se;
    j["slack"] = rep.slack;
    j["pass"] = rep.pass;
    return j;
}

ordered_json to_json(const MassConservationReport& rep) {
    ordered_json j;
    j["what"] = "mass_conservation";
    j["d"] = rep.d;
    j["lambda"] = rep.lambda;
    j["rho"] = rep.rho;
    j["trials"] = rep.trials;
    j["master_seed"] = rep.master_seed;
    ordered_json pts = ordered_json::array();
    for (const auto& p : rep.points) {
        ordered_json pj;
        pj["n"] = p.n;
        pj["margin"] = p.margin;
        pj["density"] = p.density;
        pj["std_error"] = p.std_error;
        pts.push_back(pj);
    }
    j["points"] = pts;
    return j;
}

ordered_json to_json(const BoundsReport& rep) {
    ordered_json j;
    j["what"] = "bounds";
    j["d"] = rep.d;
    j["lambda"] = rep.lambda;
    j["p_s"] = rep.p_s;
    j["p_j"] = rep.p_j;
    j["lower"] = rep.lower;
    j["upper"] = num_or_null(rep.upper);
    j["e_r"] = num_or_null(rep.e_r);
    j["e_r_se"] = rep.e_r_se;
    j["e_r_source"] = er_source_name(rep.er_source);
    return j;
}

ordered_json to_json(const RhocBracket& rep) {
    ordered_json j;
    j["what"] = "rhoc_bracket";
    j["d"] = rep.d;
    j["n"] = rep.n;
    j["lambda"] = rep.lambda;
    j["trials_per_cell"] = rep.trials;
    j["master_seed"] = rep.master_seed;
    ordered_json cells = ordered_json::array();
    for (const auto& c : rep.cells) {
        ordered_json cj;
        cj["rho"] = c.rho;
        cj["occupation"] = c.occupation;
        cj["std_error"] = c.std_error;
        cj["z"] = num_or_null(c.z);
        cj["supercritical"] = c.supercritical;
        cells.push_back(cj);
    }
    j["cells"] = cells;
    j["found"] = rep.found;
    j["lo"] = num_or_null(rep.lo);
    j["hi"] = num_or_null(rep.hi);
    j["note"] = rep.note;
    return j;
}

ordered_json to_json(const FiveStepReport& rep) {
    ordered_json j;
    j["what"] = "five_step";
    j["d"] = rep.d;
    j["n"] = rep.n;
    j["lambda"] = rep.lambda;
    j["law"] = rep.law;
    j["rho"] = rep.rho;
    j["trials"] = rep.trials;
    j["master_seed"] = rep.master_seed;
    j["p_jump1"] = rep.p_jump1;
    j["p_jump1_se"] = rep.p_jump1_se;
    j["p_jump2"] = rep.p_jump2;
    j["p_jump2_se"] = rep.p_jump2_se;
    j["p_tau1_sleeping"] = rep.p_tau1_sleeping;
    j["p_tau1_se"] = rep.p_tau1_se;
    j["p_ch_ge_2"] = rep.p_ch_ge_2;
    j["p_ch_ge_2_se"] = rep.p_ch_ge_2_se;
    j["p_trial1_slept"] = rep.p_trial1_slept;
    j["z_independence"] = num_or_null(rep.z_independence);
    j["invariant_violations"] = rep.invariant_violations;
    return j;
}

ordered_json to_json(const ReturnsEstimate& est) {
    ordered_json j;
    j["what"] = "returns";
    j["d"] = est.d;
    j["trials"] = est.trials;
    j["master_seed"] = est.master_seed;
    j["escape_radius"] = est.escape_radius;
    j["max_steps"] = est.max_steps;
    j["mean"] = est.mean;
    j["std_error"] = est.std_error;
    j["censoring_rate"] = est.censoring_rate;
    j["divergent"] = est.divergent;
    j["asymptotic"] = returns_asymptotic(est.d);
    return j;
}

std::string csv_header_estimate() {
    return "what,d,n,lambda,law,rho,trials,master_seed,value,std_error,ci_lo,ci_hi";
}

std::string csv_row(const EstimateReport& rep) {
    std::ostringstream os;
    os << rep.what << ',' << rep.d << ',' << rep.n << ',' << format_double(rep.lambda) << ','
       << rep.law << ',' << format_double(rep.rho) << ',' << rep.trials << ',' << rep.master_seed
       << ',' << format_double(rep.value) << ',' << format_double(rep.std_error) << ','
       << format_double(rep.ci_lo) << ',' << format_double(rep.ci_hi);
    return os.str();
}

std::string csv_header_bounds() {
    return "d,lambda,p_s,p_j,lower,upper,e_r,e_r_se,e_r_source";
}

std::string csv_row(const BoundsReport& rep) {
    std::ostringstream os;
    os << rep.d << ',' << format_double(rep.lambda) << ',' << format_double(rep.p_s) << ','
       << format_double(rep.p_j) << ',' << format_double(rep.lower) << ','
       << format_double(rep.upper) << ',' << format_double(rep.e_r) << ','
       << format_double(rep.e_r_se) << ',' << er_source_name(rep.er_source);
    return os.str();
}

std::string csv_header_rhoc_cells() {
    return "d,n,lambda,trials,rho,occupation,std_error,z,supercritical";
}

std::string csv_rows(const RhocBracket& rep) {
    std::ostringstream os;
    for (const auto& c : rep.cells) {
        os << rep.d << ',' << rep.n << ',' << format_double(rep.lambda) << ',' << rep.trials << ','
           << format_double(c.rho) << ',' << format_double(c.occupation) << ','
           << format_double(c.std_error) << ',' << format_double(c.z) << ','
           << (c.supercritical ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string csv_header_density() {
    return "d,lambda,rho,trials,n,margin,density,std_error";
}

std::string csv_rows(const MassConservationReport& rep) {
    std::ostringstream os;
    for (const auto& p : rep.points) {
        os << rep.d << ',' << format_double(rep.lambda) << ',' << format_double(rep.rho) << ','
           << rep.trials << ',' << p.n << ',' << p.margin << ',' << format_double(p.density)
           << ',' << format_double(p.std_error) << '\n';
    }
    return os.str();
}

}  // namespace arw::io
