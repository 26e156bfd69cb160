#ifndef RISKMETRIC_JSON_IO_HPP
#define RISKMETRIC_JSON_IO_HPP

#include <optional>
#include <string>

#include "json.hpp"

#include "riskmetric/contract.hpp"
#include "riskmetric/distortion.hpp"
#include "riskmetric/loss_model.hpp"
#include "riskmetric/rdeu.hpp"
#include "riskmetric/solver.hpp"

namespace riskmetric {

// Everything a run needs, parsed from one JSON document. `raw` keeps the
// original document so sweeps can patch a field and reparse.
struct RunConfig {
    LossModel loss = LossModel::zero_inflated_exponential(1.0, 1.0);
    BuyerPreferences prefs;
    PremiumPrinciple pp;
    std::optional<Indemnity> contract;
    SolverConfig solver;
    QuadratureConfig quadrature;
    nlohmann::json raw;
};

Distortion distortion_from_json(const nlohmann::json& j);
LossModel loss_from_json(const nlohmann::json& j);
Utility utility_from_json(const nlohmann::json& j);
SolverConfig solver_from_json(const nlohmann::json& j);
QuadratureConfig quadrature_from_json(const nlohmann::json& j);

// ctx supplies the model behind a generic interior contract; the closed-form
// interior families rebuild from their own params and ignore it.
Indemnity contract_from_json(const nlohmann::json& j, const RunConfig* ctx = nullptr);
nlohmann::json contract_to_json(const Indemnity& I);

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

nlohmann::json report_to_json(const SolveReport& rep);

} // namespace riskmetric

#endif
