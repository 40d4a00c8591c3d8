#pragma once

#include "json.hpp"
#include "vlaudit/ber.hpp"
#include "vlaudit/evaluation.hpp"
#include "vlaudit/probes.hpp"
#include "vlaudit/shift.hpp"

// JSON shapes of the result types. Key order is fixed (nlohmann sorts keys),
// so equal results serialise to equal bytes.
namespace vlaudit::report {

using nlohmann::json;

json to_json(const shift::WiredReport& r);
json to_json(const ber::BerReport& r);
json to_json(const eval::RocResult& r);
json to_json(const eval::SetInferenceCurve& c);
json to_json(const probe::ProbeModel& m);
json to_json(const probe::TrainReport& r);

/// Inverse of to_json(ProbeModel); throws ParseError on bad shapes.
probe::ProbeModel probe_model_from_json(const json& j);

/// Two-space indented text with a trailing newline.
std::string dump(const json& j);

}  // namespace vlaudit::report
