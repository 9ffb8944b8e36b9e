#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "roughbsde/bsde_mc.hpp"
#include "roughbsde/flow.hpp"
#include "roughbsde/rough_path.hpp"
#include "roughbsde/rpde.hpp"
#include "roughbsde/transform.hpp"

namespace rbsde {

using Json = nlohmann::json;

/// {"times": [...], "values": [[...], ...]}
Json to_json(const PiecewiseLinearPath& path);
PiecewiseLinearPath path_from_json(const Json& j);

/// {"times": [...], "increments": [[...]], "areas": [[[...]]], "p": p}
Json to_json(const RoughPath2& rp);
RoughPath2 rough_path_from_json(const Json& j);

/// Rows "t,zeta1,...,zetad".
std::string to_csv(const PiecewiseLinearPath& path);

/// Grid axes plus one flat array per tabulated quantity, indexed [t][x][y].
Json to_json(const FlowEnsemble& flow);

Json to_json(const GrowthConstants& g);
Json to_json(const ComparisonConstants& c);
Json to_json(const PdeWindow& w);
Json to_json(const McWindow& w);
Json to_json(const ConvergenceReport& r);
Json to_json(const FeynmanKacReport& r);
Json to_json(const IdentityResiduals& r);

/// Rows "t,x,<representation>".
std::string to_csv(const GridSolution& sol);
/// Rows "label,rough_distance,distance_to_limit,distance_to_previous,
/// all_times_distance_to_previous,value_at_x0".
std::string to_csv(const ConvergenceReport& r);
/// Rows "path,t,X,Ytilde,Y" for the first `max_paths` paths.
std::string to_csv(const BsdePaths& paths, std::size_t max_paths);

/// Non-finite numbers become null.
Json number(double v);

/// Writes through a temporary file in the same directory followed by a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace rbsde
