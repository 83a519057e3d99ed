#pragma once

#include <filesystem>
#include <iosfwd>
#include <json.hpp>

#include "relcox/bootstrap.hpp"
#include "relcox/covariates.hpp"
#include "relcox/diagnostics.hpp"
#include "relcox/simulator.hpp"
#include "relcox/solver.hpp"

namespace relcox {

using Json = nlohmann::json;

Json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const Json& value);

// Covariate spec:
//   {"static": ["1*J", "L*J"],
//    "dyadic": [{"name": "send", "form": "indicator"}, ...],
//    "triadic": [{"name": "2-send", "form": "binned"}, ...],
//    "intervals_seconds": [1800, 7200, ...]}
// "form" may also be "both", which adds the indicator and the binned term.
// {"preset": "enron", "traits": [...], "triadic": true} expands to the full
// trait-interaction model.
CovariateSpec spec_from_json(const Json& j);
Json spec_to_json(const CovariateSpec& spec);

Json fit_to_json(const FitResult& fit);
// Reads beta, se, cov, names and variant back.
FitResult fit_from_json(const Json& j);

// Term,Df,Deviance,Resid. Df,Resid. Dev
void write_deviance_csv(std::ostream& out, const DevianceTable& table);

Json bootstrap_to_json(const BootstrapReport& report, const std::vector<std::string>& names,
                       const BootstrapConfig& config);
// coefficient,mean,sd of the normalized replicate residuals
void write_bootstrap_summary_csv(std::ostream& out, const BootstrapReport& report,
                                 const std::vector<std::string>& names);

Json summary_to_json(const ResidualSummary& summary);

// Simulation config. Relative paths ("spec", "traits_file") resolve against `base`.
SimConfig sim_config_from_json(const Json& j, const std::filesystem::path& base = {});
Json sim_truth_json(const SimConfig& config, const EventStream& stream);

// Coefficients given as an array, or as an object keyed by coefficient name
// (missing names default to 0).
Eigen::VectorXd beta_from_json(const Json& j, const CovariateSpec& spec);

}  // namespace relcox
