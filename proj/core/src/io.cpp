#include "roughbsde/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "roughbsde/errors.hpp"

namespace rbsde {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T>
T field(const Json& j, const char* key) {
    if (!j.is_object() || !j.contains(key)) throw ConfigError(key, "missing");
    try {
        return j.at(key).get<T>();
    } catch (const Json::exception& e) {
        throw ConfigError(key, e.what());
    }
}

}  // namespace

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json to_json(const PiecewiseLinearPath& path) {
    Json values = Json::array();
    for (std::size_t i = 0; i < path.knots(); ++i) {
        const auto v = path.value(i);
        values.push_back(std::vector<double>(v.begin(), v.end()));
    }
    return {{"times", std::vector<double>(path.times().begin(), path.times().end())},
            {"values", values}};
}

PiecewiseLinearPath path_from_json(const Json& j) {
    return PiecewiseLinearPath(field<std::vector<double>>(j, "times"),
                               field<std::vector<std::vector<double>>>(j, "values"));
}

Json to_json(const RoughPath2& rp) {
    const std::size_t d = rp.dim();
    Json inc = Json::array();
    Json areas = Json::array();
    for (std::size_t k = 0; k < rp.intervals(); ++k) {
        const auto v = rp.increment(k);
        inc.push_back(std::vector<double>(v.begin(), v.end()));
        const auto a = rp.area(k);
        Json m = Json::array();
        for (std::size_t i = 0; i < d; ++i) {
            m.push_back(std::vector<double>(a.begin() + static_cast<std::ptrdiff_t>(i * d),
                                            a.begin() + static_cast<std::ptrdiff_t>((i + 1) * d)));
        }
        areas.push_back(m);
    }
    return {{"times", std::vector<double>(rp.times().begin(), rp.times().end())},
            {"increments", inc},
            {"areas", areas},
            {"p", rp.p()}};
}

RoughPath2 rough_path_from_json(const Json& j) {
    auto times = field<std::vector<double>>(j, "times");
    const auto inc = field<std::vector<std::vector<double>>>(j, "increments");
    const auto areas = field<std::vector<std::vector<std::vector<double>>>>(j, "areas");
    const double p = field<double>(j, "p");
    if (inc.empty()) throw ConfigError("increments", "empty");
    const std::size_t d = inc.front().size();
    if (inc.size() + 1 != times.size() || areas.size() != inc.size()) {
        throw ConfigError("increments", "need one increment and one area per grid interval");
    }
    std::vector<double> flat_inc, flat_area;
    for (std::size_t k = 0; k < inc.size(); ++k) {
        if (inc[k].size() != d) throw ConfigError("increments", "inconsistent dimension");
        flat_inc.insert(flat_inc.end(), inc[k].begin(), inc[k].end());
        if (areas[k].size() != d) throw ConfigError("areas", "inconsistent dimension");
        for (const auto& row : areas[k]) {
            if (row.size() != d) throw ConfigError("areas", "inconsistent dimension");
            flat_area.insert(flat_area.end(), row.begin(), row.end());
        }
    }
    return RoughPath2(std::move(times), d, std::move(flat_inc), std::move(flat_area), p);
}

std::string to_csv(const PiecewiseLinearPath& path) {
    std::ostringstream os;
    os << "t";
    for (std::size_t k = 0; k < path.dim(); ++k) os << ",zeta" << (k + 1);
    os << "\n";
    for (std::size_t i = 0; i < path.knots(); ++i) {
        os << fmt(path.times()[i]);
        for (double v : path.value(i)) os << "," << fmt(v);
        os << "\n";
    }
    return os.str();
}

Json to_json(const FlowEnsemble& flow) {
    std::vector<double> xs(flow.nx()), ys(flow.ny());
    for (std::size_t i = 0; i < flow.nx(); ++i) xs[i] = flow.x_node(i);
    for (std::size_t i = 0; i < flow.ny(); ++i) ys[i] = flow.y_node(i);
    static const char* names[] = {"phi", "dx_phi", "dy_phi", "dxx_phi", "dxy_phi",
                                  "dyy_phi", "dyyy_phi", "dxyy_phi", "dxxy_phi"};
    std::vector<std::vector<double>> arrays(FlowJet::size);
    for (std::size_t it = 0; it < flow.times().size(); ++it) {
        for (std::size_t ix = 0; ix < flow.nx(); ++ix) {
            for (std::size_t iy = 0; iy < flow.ny(); ++iy) {
                const auto a = flow.node(it, ix, iy).to_array();
                for (std::size_t q = 0; q < FlowJet::size; ++q) arrays[q].push_back(a[q]);
            }
        }
    }
    Json j = {{"layout", "[t][x][y]"},
              {"times", std::vector<double>(flow.times().begin(), flow.times().end())},
              {"x", xs},
              {"y", ys},
              {"identity", flow.is_identity()},
              {"uniform_bound", flow.uniform_bound()},
              {"min_dy_phi", flow.min_py()}};
    for (std::size_t q = 0; q < FlowJet::size; ++q) j[names[q]] = arrays[q];
    return j;
}

Json to_json(const GrowthConstants& g) {
    return {{"C1f_tilde", number(g.c1f_tilde)},
            {"C_unif_tilde", number(g.c_unif_tilde)},
            {"C3f_tilde", number(g.c3f_tilde)}};
}

Json to_json(const ComparisonConstants& c) {
    return {{"route", to_string(c.route)},
            {"xi_sup", number(c.terminal_sup)},
            {"M", number(c.m)},
            {"B", number(c.b)},
            {"lambda", number(c.lambda)},
            {"delta", number(c.delta)},
            {"K0", number(c.k0)},
            {"K", number(c.k)},
            {"A", number(c.a)},
            {"epsilon", number(c.epsilon)},
            {"h", number(c.h)},
            {"growth", to_json(c.growth)},
            {"degenerate", c.degenerate},
            {"degenerate_constant", c.degenerate_constant},
            {"h_below_resolution", c.below_resolution}};
}

Json to_json(const PdeWindow& w) {
    return {{"t_start", w.t_start},
            {"t_end", w.t_end},
            {"M", number(w.m_bound)},
            {"y_range", {w.y_lo, w.y_hi}},
            {"roundtrip_residual", number(w.roundtrip_residual)},
            {"u_bound", number(w.u_bound)},
            {"max_abs_v", number(w.max_abs_v)},
            {"rebuilt", w.rebuilt}};
}

Json to_json(const McWindow& w) {
    return {{"t_start", w.t_start},
            {"t_end", w.t_end},
            {"M", number(w.m_bound)},
            {"x_range", {w.x_lo, w.x_hi}},
            {"degree_used", w.regression.degree_used},
            {"degree_reduced", w.regression.degree_reduced},
            {"max_abs_raw", number(w.regression.max_abs_raw)},
            {"clipped_fraction", number(w.regression.clipped_fraction)},
            {"range_truncated_fraction", number(w.regression.range_truncated_fraction)},
            {"untransform_clipped", number(w.untransform_clipped)},
            {"max_abs_y_tilde", number(w.max_abs_y_tilde)},
            {"rebuilt", w.rebuilt}};
}

Json to_json(const ConvergenceReport& r) {
    Json rows = Json::array();
    for (const auto& row : r.rows) {
        rows.push_back({{"label", row.label},
                        {"rough_distance", number(row.rough_distance)},
                        {"distance_to_limit", number(row.distance_to_limit)},
                        {"distance_to_previous", number(row.distance_to_previous)},
                        {"all_times_distance_to_previous",
                         number(row.all_times_distance_to_previous)},
                        {"value_at_x0", number(row.value_at_x0)}});
    }
    return {{"rows", rows},
            {"limit_value_at_x0", number(r.limit_value_at_x0)},
            {"successive_monotone", r.successive_monotone},
            {"limit_monotone", r.limit_monotone}};
}

Json to_json(const FeynmanKacReport& r) {
    return {{"mc_value", number(r.mc_value)},
            {"mc_standard_error", number(r.mc_standard_error)},
            {"fd_value", number(r.fd_value)},
            {"discrepancy", number(r.discrepancy)},
            {"tolerance", number(r.tolerance)},
            {"pass", r.pass},
            {"h", number(r.h)},
            {"windows", r.windows}};
}

Json to_json(const IdentityResiduals& r) {
    return {{"psi_x", number(r.psi_x)},
            {"psi_y", number(r.psi_y)},
            {"psi_yy", number(r.psi_yy)},
            {"psi_xy", number(r.psi_xy)},
            {"psi_xx", number(r.psi_xx)},
            {"max", number(r.max())}};
}

std::string to_csv(const GridSolution& sol) {
    std::ostringstream os;
    os << "t,x," << sol.representation << "\n";
    for (std::size_t it = 0; it < sol.nt(); ++it) {
        for (std::size_t ix = 0; ix < sol.nx(); ++ix) {
            os << fmt(sol.times[it]) << "," << fmt(sol.xs[ix]) << "," << fmt(sol.at(it, ix)) << "\n";
        }
    }
    return os.str();
}

std::string to_csv(const ConvergenceReport& r) {
    std::ostringstream os;
    os << "label,rough_distance,distance_to_limit,distance_to_previous,"
          "all_times_distance_to_previous,value_at_x0\n";
    for (const auto& row : r.rows) {
        os << row.label << "," << fmt(row.rough_distance) << "," << fmt(row.distance_to_limit)
           << "," << fmt(row.distance_to_previous) << ","
           << fmt(row.all_times_distance_to_previous) << "," << fmt(row.value_at_x0) << "\n";
    }
    return os.str();
}

std::string to_csv(const BsdePaths& paths, std::size_t max_paths) {
    std::ostringstream os;
    os << "path,t,X,Ytilde,Y\n";
    const std::size_t n = paths.n_paths;
    for (std::size_t i = 0; i < std::min(n, max_paths); ++i) {
        for (std::size_t k = 0; k < paths.times.size(); ++k) {
            os << i << "," << fmt(paths.times[k]) << "," << fmt(paths.x[k * n + i]) << ","
               << fmt(paths.y_tilde[k * n + i]) << "," << fmt(paths.y[k * n + i]) << "\n";
        }
    }
    return os.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw Error("failed writing " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace rbsde
