#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "arw/engine.hpp"
#include "arw/estimators.hpp"
#include "arw/walks.hpp"

namespace arw::io {

using ordered_json = nlohmann::ordered_json;

// Snapshot format: {d, n, seed, states, odometer} with states run-length
// encoded as [count, value] pairs over the dense site order. `seed` is the
// stack seed that produced the configuration, so a snapshot is a complete
// bug report.
ordered_json snapshot_to_json(const Configuration& cfg, uint64_t seed);
Configuration snapshot_from_json(const ordered_json& j, uint64_t* seed_out = nullptr);

ordered_json to_json(const EstimateReport& rep);
ordered_json to_json(const ChanceTailReport& rep);
ordered_json to_json(const IdentityReport& rep);
ordered_json to_json(const AchBoundReport& rep);
ordered_json to_json(const MassConservationReport& rep);
ordered_json to_json(const BoundsReport& rep);
ordered_json to_json(const RhocBracket& rep);
ordered_json to_json(const FiveStepReport& rep);
ordered_json to_json(const ReturnsEstimate& est);

// CSV column orders are fixed and documented in the README.
std::string csv_header_estimate();
std::string csv_row(const EstimateReport& rep);
std::string csv_header_bounds();
std::string csv_row(const BoundsReport& rep);
std::string csv_header_rhoc_cells();
std::string csv_rows(const RhocBracket& rep);
std::string csv_header_density();
std::string csv_rows(const MassConservationReport& rep);

std::string format_double(double v);

}  // namespace arw::io
