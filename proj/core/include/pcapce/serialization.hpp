#pragma once

#include <nlohmann/json.hpp>

#include "pcapce/doe.hpp"
#include "pcapce/pca.hpp"
#include "pcapce/pce.hpp"
#include "pcapce/surrogate.hpp"

namespace pcapce {

// JSON forms of the persisted objects. The *_from_json functions throw
// Error(SchemaInvalid) on missing or inconsistent fields.

nlohmann::json to_json(const PriorSpec& prior);
PriorSpec prior_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PcaBasis& basis);
PcaBasis pca_from_json(const nlohmann::json& j);

nlohmann::json to_json(const PceModel& model);
PceModel pce_from_json(const nlohmann::json& j, const PriorSpec& prior);

nlohmann::json to_json(const PcaPceSurrogate& s);
PcaPceSurrogate surrogate_from_json(const nlohmann::json& j);

/// Non-finite doubles become null; JSON has no representation for them.
nlohmann::json number_or_null(double v);

}  // namespace pcapce
