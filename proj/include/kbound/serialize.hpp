#pragma once

#include <nlohmann/json.hpp>

#include "kbound/types.hpp"

namespace kbound {

/// Finite doubles as numbers; infinities as "+inf"/"-inf"; NaN as null.
nlohmann::json number_to_json(double v);
double number_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ThresholdFit& fit);
ThresholdFit fit_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ConfidenceSignal& s);
ConfidenceSignal signal_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EvalOutcome& o);
EvalOutcome outcome_from_json(const nlohmann::json& j);

}  // namespace kbound
