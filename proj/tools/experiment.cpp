#include "experiment.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>

#include <roughbsde/errors.hpp>
#include <roughbsde/flow.hpp>
#include <roughbsde/transform.hpp>

namespace rbsde::cli {

namespace {

std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
}

/// Strict reader over one JSON object: every accessed key is remembered and `finish`
/// rejects the rest.
class Reader {
public:
    Reader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key);
    }

    std::string field(const std::string& key) const { return join(path_, key); }

    const Json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }

    void number(const std::string& key, double& out, bool positive = false, bool nonneg = false) {
        if (!has(key)) return;
        const Json& v = j_.at(key);
        if (!v.is_number()) throw ConfigError(field(key), "expected a number");
        const double x = v.get<double>();
        if (!std::isfinite(x)) throw ConfigError(field(key), "must be finite");
        if (positive && !(x > 0.0)) throw ConfigError(field(key), "must be positive");
        if (nonneg && x < 0.0) throw ConfigError(field(key), "must be non-negative");
        out = x;
    }

    void optional_number(const std::string& key, std::optional<double>& out, bool positive = false) {
        if (!has(key)) return;
        double x = 0.0;
        number(key, x, positive);
        out = x;
    }

    void count(const std::string& key, std::size_t& out, std::size_t min = 1) {
        if (!has(key)) return;
        const Json& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
        const auto x = v.get<long long>();
        if (x < static_cast<long long>(min)) {
            throw ConfigError(field(key), "must be at least " + std::to_string(min));
        }
        out = static_cast<std::size_t>(x);
    }

    void integer(const std::string& key, int& out, int min) {
        if (!has(key)) return;
        const Json& x = j_.at(key);
        if (!x.is_number_integer() || x.get<long long>() < min || x.get<long long>() > 1000000) {
            throw ConfigError(field(key), "expected an integer >= " + std::to_string(min));
        }
        out = x.get<int>();
    }

    void seed(const std::string& key, std::uint64_t& out) {
        if (!has(key)) return;
        const Json& v = j_.at(key);
        if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
            throw ConfigError(field(key), "expected a non-negative integer");
        }
        out = v.get<std::uint64_t>();
    }

    void choice(const std::string& key, std::string& out, std::initializer_list<const char*> allowed) {
        if (!has(key)) return;
        const Json& v = j_.at(key);
        if (!v.is_string()) throw ConfigError(field(key), "expected a string");
        const auto s = v.get<std::string>();
        for (const char* a : allowed) {
            if (s == a) {
                out = s;
                return;
            }
        }
        std::string msg = "must be one of";
        for (const char* a : allowed) msg += std::string(" ") + a;
        throw ConfigError(field(key), msg);
    }

    void numbers(const std::string& key, std::vector<double>& out) {
        if (!has(key)) return;
        const Json& v = j_.at(key);
        if (!v.is_array()) throw ConfigError(field(key), "expected an array of numbers");
        out.clear();
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError(field(key), "expected an array of numbers");
            out.push_back(e.get<double>());
        }
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown key");
        }
    }

private:
    const Json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
void section(Reader& parent, const std::string& key, F&& body) {
    if (!parent.has(key)) return;
    Reader r(parent.raw(key), parent.field(key));
    body(r);
    r.finish();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

struct Drivers {
    std::optional<PiecewiseLinearPath> path;  // the smooth driver
    std::optional<RoughPath2> rough;          // its lift or the rough limit
    struct Sequence {
        std::string scheme;
        std::vector<PiecewiseLinearPath> paths;
        std::vector<std::string> labels;
    };
    std::vector<Sequence> sequences;
};

Drivers build_drivers(const DriverConfig& dc, const ProblemSpec& spec, const PdeGrids& grid) {
    const std::size_t d = spec.dim();
    const double T = spec.horizon;
    Drivers out;
    if (dc.kind == "smooth" || dc.kind == "zero") {
        if (!dc.knot_times.empty()) {
            if (dc.kind == "zero") throw ConfigError("driver.knot_times", "not allowed for a zero driver");
            if (dc.knot_values.size() != dc.knot_times.size()) {
                throw ConfigError("driver.knot_values", "needs one row per knot");
            }
            for (const auto& row : dc.knot_values) {
                if (row.size() != d) {
                    throw ConfigError("driver.knot_values",
                                      "rows must have " + std::to_string(d) + " entries");
                }
            }
            if (std::abs(dc.knot_times.back() - T) > 1e-12) {
                throw ConfigError("driver.knot_times", "must end at the horizon");
            }
            out.path.emplace(dc.knot_times, dc.knot_values);
        } else {
            std::vector<double> slope = dc.slope;
            if (slope.empty()) slope.assign(d, dc.kind == "zero" ? 0.0 : 1.0);
            if (slope.size() != d) {
                throw ConfigError("driver.slope", "needs " + std::to_string(d) + " entries");
            }
            std::vector<double> end(d);
            for (std::size_t c = 0; c < d; ++c) end[c] = dc.kind == "zero" ? 0.0 : slope[c] * T;
            out.path.emplace(std::vector<double>{0.0, T},
                             std::vector<std::vector<double>>{std::vector<double>(d, 0.0), end});
        }
        out.rough.emplace(lift_smooth(*out.path, dc.p));
    } else if (dc.kind == "brownian") {
        out.path.emplace(brownian_path(dc.seed, uniform_grid(T, dc.intervals), d));
        out.rough.emplace(lift_smooth(*out.path, dc.p));
    } else if (dc.kind == "wong_zakai") {
        if (dc.levels.empty()) throw ConfigError("driver.levels", "must not be empty");
        const int top = *std::max_element(dc.levels.begin(), dc.levels.end());
        const bool dyadic = dc.scheme != "triadic";
        const bool triadic = dc.scheme != "dyadic";
        std::vector<double> base;
        if (dyadic) base = uniform_grid(T, std::size_t{1} << top);
        if (triadic) {
            const auto g3 = uniform_grid(T, static_cast<std::size_t>(std::lround(std::pow(3.0, top))));
            base = base.empty() ? g3 : merge_grids(base, g3);
        }
        const PiecewiseLinearPath bm = brownian_path(dc.seed, base, d);
        for (int pass = 0; pass < 2; ++pass) {
            if ((pass == 0 && !dyadic) || (pass == 1 && !triadic)) continue;
            Drivers::Sequence seq;
            seq.scheme = pass == 0 ? "dyadic" : "triadic";
            for (int level : dc.levels) {
                if (pass == 0) {
                    seq.paths.push_back(wong_zakai_sequence(bm, level));
                    seq.labels.push_back("2^" + std::to_string(level));
                } else {
                    seq.paths.push_back(uniform_subsequence(
                        bm, static_cast<std::size_t>(std::lround(std::pow(3.0, level)))));
                    seq.labels.push_back("3^" + std::to_string(level));
                }
            }
            out.sequences.push_back(std::move(seq));
        }
        out.path.emplace(out.sequences.front().paths.back());
        out.rough.emplace(lift_smooth(bm, dc.p));
    } else if (dc.kind == "pure_area") {
        if (d != 2) throw ConfigError("driver.kind", "pure_area needs a two-dimensional driver");
        out.path.emplace(pure_area_sequence(dc.index, dc.scale, T));
        out.rough.emplace(pure_area_limit(grid.time_grid(spec), dc.scale, dc.p));
        Drivers::Sequence seq;
        seq.scheme = "loops";
        for (int n = 1; n <= dc.index; n *= 2) {
            seq.paths.push_back(pure_area_sequence(n, dc.scale, T));
            seq.labels.push_back("n=" + std::to_string(n));
        }
        out.sequences.push_back(std::move(seq));
    }
    if (out.path && out.path->dim() != d) {
        throw ConfigError("driver", "driver dimension " + std::to_string(out.path->dim()) +
                                        " does not match the problem's " + std::to_string(d));
    }
    return out;
}

Json check(const std::string& name, double value, double threshold, bool pass) {
    return Json{{"name", name}, {"value", number(value)}, {"threshold", number(threshold)}, {"pass", pass}};
}

double chen_residual(const RoughPath2& rp) {
    // Triples from at most 33 evenly spread grid points keep the cubic sweep cheap.
    const std::size_t n = rp.intervals();
    std::vector<std::size_t> idx;
    const std::size_t m = std::min<std::size_t>(n, 32);
    for (std::size_t i = 0; i <= m; ++i) idx.push_back(i * n / m);
    double worst = 0.0;
    for (std::size_t a = 0; a < idx.size(); ++a) {
        for (std::size_t b = a; b < idx.size(); ++b) {
            for (std::size_t c = b; c < idx.size(); ++c) {
                const Signature whole = rp.signature(idx[a], idx[c]);
                const Signature split = compose(rp.signature(idx[a], idx[b]), rp.signature(idx[b], idx[c]));
                for (std::size_t k = 0; k < whole.level1.size(); ++k) {
                    worst = std::max(worst, std::abs(whole.level1[k] - split.level1[k]));
                }
                for (std::size_t k = 0; k < whole.level2.size(); ++k) {
                    worst = std::max(worst, std::abs(whole.level2[k] - split.level2[k]));
                }
            }
        }
    }
    return worst;
}

FlowGridSpec flow_grid(const ExperimentConfig& cfg, const ProblemSpec& spec) {
    FlowGridSpec fg;
    fg.times = cfg.grid.time_grid(spec);
    std::tie(fg.x_lo, fg.x_hi) = cfg.grid.x_range(spec);
    fg.nx = cfg.flow.nx;
    fg.ny = cfg.flow.ny;
    fg.y_lo = cfg.flow.y_lo;
    fg.y_hi = cfg.flow.y_hi;
    fg.max_step = cfg.flow.max_step;
    return fg;
}

FlowEnsemble build_flow(const ExperimentConfig& cfg, const ProblemSpec& spec, const Drivers& dr) {
    const FlowGridSpec fg = flow_grid(cfg, spec);
    if (cfg.solver == "smooth") return solve_flow_smooth(spec.field, *dr.path, fg);
    return solve_flow_rough(spec.field, *dr.rough, fg);
}

IdentityResiduals identity_residuals(const ExperimentConfig& cfg, const FlowEnsemble& flow) {
    // Interior samples keep the finite-difference stencils inside the table.
    const std::size_t n = cfg.flow.identity_samples;
    auto at = [n](double lo, double hi, std::size_t i) {
        const double a = lo + 0.2 * (hi - lo);
        const double b = hi - 0.2 * (hi - lo);
        return n == 1 ? 0.5 * (a + b) : a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    std::vector<std::array<double, 3>> samples;
    for (std::size_t it = 0; it < n; ++it) {
        for (std::size_t ix = 0; ix < n; ++ix) {
            for (std::size_t iy = 0; iy < n; ++iy) {
                samples.push_back({at(flow.t0(), flow.te(), it), at(flow.x_lo(), flow.x_hi(), ix),
                                   at(flow.y_lo(), flow.y_hi(), iy)});
            }
        }
    }
    return derivative_identity_residuals(flow, samples);
}

std::string flow_csv(const FlowEnsemble& flow) {
    std::ostringstream os;
    os.precision(17);
    os << "t,x,y,phi,px,py,pxx,pxy,pyy,pyyy,pxyy,pxxy\n";
    for (std::size_t it = 0; it < flow.times().size(); ++it) {
        for (std::size_t ix = 0; ix < flow.nx(); ++ix) {
            for (std::size_t iy = 0; iy < flow.ny(); ++iy) {
                const FlowJet j = flow.node(it, ix, iy);
                os << flow.times()[it] << ',' << flow.x_node(ix) << ',' << flow.y_node(iy);
                for (double v : j.to_array()) os << ',' << v;
                os << '\n';
            }
        }
    }
    return os.str();
}

void write_text(const std::filesystem::path& dir, const std::string& name, const std::string& text) {
    write_file_atomic(dir / name, text);
}

struct Context {
    const ExperimentConfig& cfg;
    const RunOptions& opt;
    const ProblemSpec& spec;
    const Drivers& drivers;
    Json results = Json::object();
    Json checks = Json::array();
    bool pass = true;

    void add(Json c) {
        pass = pass && c.at("pass").get<bool>();
        checks.push_back(std::move(c));
    }
};

void run_lift(Context& c) {
    const RoughPath2& rp = *c.drivers.rough;
    const Signature total = rp.signature(0, rp.intervals());
    Json area = Json::array();
    for (std::size_t i = 0; i < rp.dim(); ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < rp.dim(); ++j) row.push_back(number(total.area(i, j)));
        area.push_back(row);
    }
    Json inc = Json::array();
    for (double v : total.level1) inc.push_back(number(v));
    const double chen = chen_residual(rp);
    c.results = {{"intervals", rp.intervals()},
                 {"p", rp.p()},
                 {"p_variation_norm", number(p_variation_norm(rp))},
                 {"increment", inc},
                 {"area", area},
                 {"chen_residual", number(chen)}};
    if (!c.drivers.sequences.empty()) {
        Json seqs = Json::array();
        for (const auto& s : c.drivers.sequences) {
            Json rows = Json::array();
            for (std::size_t k = 0; k < s.paths.size(); ++k) {
                double dist = std::numeric_limits<double>::quiet_NaN();
                bool on_grid = true;
                for (double t : s.paths[k].times()) {
                    const auto tt = rp.times();
                    const auto it = std::lower_bound(tt.begin(), tt.end(), t - 1e-12);
                    on_grid = on_grid && it != tt.end() && std::abs(*it - t) <= 1e-12;
                }
                if (on_grid) {
                    dist = p_variation_distance(lift_smooth(s.paths[k].resampled(rp.times()), rp.p()), rp);
                }
                rows.push_back({{"label", s.labels[k]}, {"rough_distance", number(dist)}});
            }
            seqs.push_back({{"scheme", s.scheme}, {"rows", rows}});
        }
        c.results["sequences"] = seqs;
    }
    write_text(c.opt.out_dir, "solution.csv", to_csv(*c.drivers.path));
    if (c.opt.check) c.add(check("chen_residual", chen, c.cfg.tolerances.chen, chen < c.cfg.tolerances.chen));
}

void run_flow(Context& c, bool identities_only) {
    const FlowEnsemble flow = build_flow(c.cfg, c.spec, c.drivers);
    const double x0 = std::clamp(c.spec.x0, flow.x_lo(), flow.x_hi());
    const double y0 = std::clamp(0.0, flow.y_lo(), flow.y_hi());
    const FlowJet j = flow.eval(flow.t0(), x0, y0);
    Json jet = Json::object();
    const char* names[] = {"phi", "px", "py", "pxx", "pxy", "pyy", "pyyy", "pxyy", "pxxy"};
    const auto arr = j.to_array();
    for (std::size_t q = 0; q < FlowJet::size; ++q) jet[names[q]] = number(arr[q]);
    c.results = {{"solver", c.cfg.solver},
                 {"identity", flow.is_identity()},
                 {"uniform_bound", number(flow.uniform_bound())},
                 {"min_py", number(flow.min_py())},
                 {"deviation_at_t0", number(flow.deviation_at(0))},
                 {"jet_at_t0_x0_y0", jet}};
    if (identities_only || c.opt.check) {
        const IdentityResiduals r = identity_residuals(c.cfg, flow);
        c.results["identity_residuals"] = to_json(r);
        c.add(check("derivative_identities", r.max(), c.cfg.tolerances.identity,
                    r.max() < c.cfg.tolerances.identity));
    }
    if (!identities_only) write_text(c.opt.out_dir, "solution.csv", flow_csv(flow));
}

std::vector<DriverPiece> pieces_for(const Context& c) {
    const auto times = c.cfg.grid.time_grid(c.spec);
    if (c.cfg.solver == "smooth") return driver_pieces(*c.drivers.path, 0.0, c.spec.horizon, times);
    return driver_pieces(*c.drivers.rough, 0.0, c.spec.horizon, times);
}

void run_constants(Context& c) {
    const auto pieces = pieces_for(c);
    PdeGrids g = c.cfg.grid;
    // With no explicit window a degenerate setup would throw before reporting anything.
    const bool forced = !(g.window > 0.0);
    if (forced) g.window = c.spec.horizon;
    Json routes = Json::object();
    for (ComparisonRoute route : {ComparisonRoute::pde, ComparisonRoute::bsde}) {
        const GlobalSetup s = rpde_setup(c.spec, pieces, g, route, g.x_range(c.spec));
        Json r = to_json(s.constants);
        r["steps_per_window"] = forced ? Json(nullptr) : Json(s.steps_per_window);
        routes[to_string(route)] = r;
        if (c.opt.check) {
            c.add(check(to_string(route) + "_constants_finite", s.constants.delta, 0.0,
                        !s.constants.degenerate && s.constants.delta > 0.0 &&
                            std::isfinite(s.constants.lambda)));
        }
    }
    c.results = {{"routes", routes}};
}

void run_rpde_solve(Context& c) {
    const GridSolution sol = c.cfg.solver == "smooth"
                                 ? solve_pde_smooth(c.spec, *c.drivers.path, c.cfg.grid)
                                 : solve_rpde(c.spec, *c.drivers.rough, c.cfg.grid);
    Json windows = Json::array();
    for (const auto& w : sol.windows) windows.push_back(to_json(w));
    c.results = {{"solver", c.cfg.solver},
                 {"u_t0_x0", number(sol.value_at(c.spec.t0, c.spec.x0))},
                 {"nt", sol.nt() - 1},
                 {"nx", sol.nx()},
                 {"windows", windows},
                 {"m_bound", number(sol.m_bound)}};
    if (sol.constants) c.results["constants"] = to_json(*sol.constants);
    write_text(c.opt.out_dir, "solution.csv", to_csv(sol));
    if (!c.opt.check) return;
    bool finite = true;
    for (double v : sol.values) finite = finite && std::isfinite(v);
    c.add(check("finite_values", finite ? 0.0 : 1.0, 0.0, finite));
    double roundtrip = 0.0;
    double excess = 0.0;
    for (const auto& w : sol.windows) {
        roundtrip = std::max(roundtrip, w.roundtrip_residual);
        const std::size_t it = sol.time_index(w.t_start);
        for (double u : sol.slice(it)) excess = std::max(excess, std::abs(u) - w.u_bound);
    }
    if (!sol.windows.empty()) {
        c.add(check("window_roundtrip", roundtrip, 1e-8, roundtrip < 1e-8));
        c.add(check("uniform_bound_excess", excess, c.cfg.tolerances.bound_slack,
                    excess <= c.cfg.tolerances.bound_slack));
    }
}

void run_converge(Context& c) {
    if (c.drivers.sequences.empty()) {
        throw ConfigError("driver.kind", "convergence needs a wong_zakai or pure_area driver");
    }
    const double radius = c.cfg.tolerances.radius;
    std::vector<double> at_times;
    if (c.cfg.converge.times == "initial") at_times.push_back(c.spec.t0);
    Json studies = Json::array();
    std::string csv;
    for (const auto& seq : c.drivers.sequences) {
        ConvergenceReport rep;
        Json limit_error = nullptr;
        try {
            rep = convergence_study(c.spec, seq.paths, seq.labels, &*c.drivers.rough, c.cfg.grid, radius,
                                    at_times);
        } catch (const DegenerateWindowError& e) {
            limit_error = e.what();
            rep = convergence_study(c.spec, seq.paths, seq.labels, nullptr, c.cfg.grid, radius, at_times);
        }
        Json j = to_json(rep);
        j["scheme"] = seq.scheme;
        j["limit_error"] = limit_error;
        studies.push_back(j);
        std::string part = to_csv(rep);
        if (!csv.empty()) part = part.substr(part.find('\n') + 1);
        csv += part;
        if (c.opt.check && seq.paths.size() > 2) {
            c.add(check(seq.scheme + "_successive_monotone", static_cast<double>(rep.first_non_monotone),
                        0.0, rep.successive_monotone));
        }
    }
    c.results = {{"studies", studies}};
    if (c.drivers.sequences.size() == 2) {
        const GridSolution a = solve_pde_smooth(c.spec, c.drivers.sequences[0].paths.back(), c.cfg.grid);
        const GridSolution b = solve_pde_smooth(c.spec, c.drivers.sequences[1].paths.back(), c.cfg.grid);
        const double diff = at_times.empty() ? sup_distance(a, b, c.spec.x0, radius)
                                             : sup_distance(a, b, c.spec.x0, radius, at_times);
        c.results["finest_level_difference"] = number(diff);
        c.results["finest_level_difference_all_times"] = number(sup_distance(a, b, c.spec.x0, radius));
        if (c.opt.check) {
            c.add(check("sequence_independence", diff, 2.0 * c.cfg.tolerances.fd,
                        diff < 2.0 * c.cfg.tolerances.fd));
        }
    }
    write_text(c.opt.out_dir, "convergence.csv", csv);
}

void run_bsde(Context& c) {
    const BsdeSolution sol = c.cfg.solver == "smooth" ? solve_bsde(c.spec, *c.drivers.path, c.cfg.mc)
                                                      : solve_bsde(c.spec, *c.drivers.rough, c.cfg.mc);
    Json windows = Json::array();
    for (const auto& w : sol.windows) windows.push_back(to_json(w));
    c.results = {{"solver", c.cfg.solver},
                 {"y0", number(sol.y0)},
                 {"y0_standard_error", number(sol.y0_se)},
                 {"z0", number(sol.z0)},
                 {"h", number(sol.h)},
                 {"windows", windows},
                 {"constants", to_json(sol.constants)}};
    write_text(c.opt.out_dir, "solution.csv", to_csv(sol.paths, c.cfg.output.csv_paths));
    if (!c.opt.check) return;
    double excess = -std::numeric_limits<double>::infinity();
    double clipped = 0.0;
    for (const auto& w : sol.windows) {
        excess = std::max(excess, w.max_abs_y_tilde - w.m_bound);
        clipped = std::max(clipped, w.untransform_clipped);
    }
    c.add(check("y_tilde_bound_excess", excess, c.cfg.tolerances.bound_slack,
                excess <= c.cfg.tolerances.bound_slack));
    c.add(check("untransform_clipped_fraction", clipped, 0.0, clipped == 0.0));
}

void run_fk(Context& c) {
    const FeynmanKacReport r =
        c.cfg.solver == "smooth"
            ? feynman_kac_check(c.spec, *c.drivers.path, c.cfg.grid, c.cfg.mc, c.cfg.tolerances.fd)
            : feynman_kac_check(c.spec, *c.drivers.rough, c.cfg.grid, c.cfg.mc, c.cfg.tolerances.fd);
    c.results = to_json(r);
    c.add(check("feynman_kac", r.discrepancy, r.tolerance, r.pass));
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const Json& j) {
    ExperimentConfig cfg;
    Reader root(j, "");
    section(root, "problem", [&](Reader& r) {
        auto& p = cfg.problem;
        if (r.has("preset")) {
            const Json& v = r.raw("preset");
            if (!v.is_string()) throw ConfigError(r.field("preset"), "expected a string");
            p.preset = v.get<std::string>();
            const auto names = preset_names();
            if (std::find(names.begin(), names.end(), p.preset) == names.end()) {
                throw ConfigError(r.field("preset"), "unknown preset '" + p.preset + "'");
            }
        }
        r.optional_number("T", p.horizon, true);
        r.optional_number("x0", p.x0);
        r.optional_number("sigma", p.sigma);
        r.optional_number("drift", p.drift);
    });
    section(root, "driver", [&](Reader& r) {
        auto& d = cfg.driver;
        r.choice("kind", d.kind, {"smooth", "zero", "brownian", "wong_zakai", "pure_area"});
        r.numbers("slope", d.slope);
        section(r, "knots", [&](Reader& k) {
            k.numbers("times", d.knot_times);
            if (k.has("values")) {
                const Json& v = k.raw("values");
                if (!v.is_array()) throw ConfigError(k.field("values"), "expected an array of rows");
                d.knot_values.clear();
                for (const auto& row : v) {
                    if (!row.is_array()) throw ConfigError(k.field("values"), "expected an array of rows");
                    std::vector<double> vals;
                    for (const auto& e : row) {
                        if (!e.is_number()) throw ConfigError(k.field("values"), "expected numbers");
                        vals.push_back(e.get<double>());
                    }
                    d.knot_values.push_back(vals);
                }
            }
            if (d.knot_times.size() < 2) throw ConfigError(k.field("times"), "needs at least two knots");
        });
        r.seed("seed", d.seed);
        r.count("intervals", d.intervals);
        if (r.has("levels")) {
            const Json& v = r.raw("levels");
            if (!v.is_array() || v.empty()) throw ConfigError(r.field("levels"), "expected a non-empty array");
            d.levels.clear();
            for (const auto& e : v) {
                if (!e.is_number_integer() || e.get<int>() < 0 || e.get<int>() > 12) {
                    throw ConfigError(r.field("levels"), "levels must be integers in [0, 12]");
                }
                d.levels.push_back(e.get<int>());
            }
        }
        r.choice("scheme", d.scheme, {"dyadic", "triadic", "both"});
        r.integer("index", d.index, 1);
        r.number("scale", d.scale, false, true);
        r.number("p", d.p, true);
        if (!(d.p >= 2.0 && d.p < 3.0)) throw ConfigError(r.field("p"), "must lie in [2, 3)");
    });
    if (root.has("solver")) {
        const Json& v = root.raw("solver");
        if (!v.is_string() || (v != "rough" && v != "smooth")) {
            throw ConfigError("solver", "must be one of rough smooth");
        }
        cfg.solver = v.get<std::string>();
    }
    section(root, "grid", [&](Reader& r) {
        auto& g = cfg.grid;
        r.count("nx", g.nx, 5);
        r.count("nt", g.nt, 2);
        r.number("half_width", g.half_width, false, true);
        r.count("ny", g.ny, 5);
        r.number("flow_max_step", g.flow_max_step, true);
        r.number("window", g.window, false, true);
        r.count("sample_points", g.sample_points, 2);
        r.number("z_radius", g.z_radius, true);
    });
    section(root, "mc", [&](Reader& r) {
        auto& m = cfg.mc;
        r.count("n_paths", m.n_paths, 2);
        r.count("nt", m.nt, 1);
        r.seed("seed", m.seed);
        r.integer("degree", m.regression.degree, 0);
        r.integer("picard", m.regression.picard, 0);
        r.count("flow_nx", m.flow_nx, 5);
        r.count("flow_ny", m.flow_ny, 5);
        r.number("flow_max_step", m.flow_max_step, true);
        r.number("window", m.window, false, true);
        r.count("sample_points", m.sample_points, 2);
        r.number("z_radius", m.z_radius, true);
    });
    section(root, "flow", [&](Reader& r) {
        auto& f = cfg.flow;
        r.count("nx", f.nx, 5);
        r.count("ny", f.ny, 5);
        r.number("y_lo", f.y_lo);
        r.number("y_hi", f.y_hi);
        r.number("max_step", f.max_step, true);
        r.count("identity_samples", f.identity_samples, 1);
        if (!(f.y_hi > f.y_lo)) throw ConfigError(r.field("y_hi"), "must exceed y_lo");
    });
    section(root, "tolerances", [&](Reader& r) {
        auto& t = cfg.tolerances;
        r.number("fd", t.fd, true);
        r.number("identity", t.identity, true);
        r.number("chen", t.chen, true);
        r.number("bound_slack", t.bound_slack, false, true);
        r.number("radius", t.radius, true);
    });
    section(root, "converge", [&](Reader& r) { r.choice("times", cfg.converge.times, {"initial", "all"}); });
    section(root, "output", [&](Reader& r) { r.count("csv_paths", cfg.output.csv_paths, 0); });
    root.finish();
    cfg.grid.validate();
    cfg.mc.validate();
    return cfg;
}

Json ExperimentConfig::to_json() const {
    Json problem = {{"preset", this->problem.preset}};
    if (this->problem.horizon) problem["T"] = *this->problem.horizon;
    if (this->problem.x0) problem["x0"] = *this->problem.x0;
    if (this->problem.sigma) problem["sigma"] = *this->problem.sigma;
    if (this->problem.drift) problem["drift"] = *this->problem.drift;
    const auto& d = driver;
    Json drv = {{"kind", d.kind}, {"seed", d.seed},     {"intervals", d.intervals}, {"levels", d.levels},
                {"scheme", d.scheme}, {"index", d.index}, {"scale", d.scale},       {"p", d.p}};
    if (!d.slope.empty()) drv["slope"] = d.slope;
    if (!d.knot_times.empty()) drv["knots"] = {{"times", d.knot_times}, {"values", d.knot_values}};
    const auto& g = grid;
    const auto& m = mc;
    return {{"problem", problem},
            {"driver", drv},
            {"solver", solver},
            {"grid",
             {{"nx", g.nx},
              {"nt", g.nt},
              {"half_width", g.half_width},
              {"ny", g.ny},
              {"flow_max_step", g.flow_max_step},
              {"window", g.window},
              {"sample_points", g.sample_points},
              {"z_radius", g.z_radius}}},
            {"mc",
             {{"n_paths", m.n_paths},
              {"nt", m.nt},
              {"seed", m.seed},
              {"degree", m.regression.degree},
              {"picard", m.regression.picard},
              {"flow_nx", m.flow_nx},
              {"flow_ny", m.flow_ny},
              {"flow_max_step", m.flow_max_step},
              {"window", m.window},
              {"sample_points", m.sample_points},
              {"z_radius", m.z_radius}}},
            {"flow",
             {{"nx", flow.nx},
              {"ny", flow.ny},
              {"y_lo", flow.y_lo},
              {"y_hi", flow.y_hi},
              {"max_step", flow.max_step},
              {"identity_samples", flow.identity_samples}}},
            {"tolerances",
             {{"fd", tolerances.fd},
              {"identity", tolerances.identity},
              {"chen", tolerances.chen},
              {"bound_slack", tolerances.bound_slack},
              {"radius", tolerances.radius}}},
            {"converge", {{"times", converge.times}}},
            {"output", {{"csv_paths", output.csv_paths}}}};
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("--config", "cannot open " + file.string());
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError("--config", std::string("invalid JSON: ") + e.what());
    }
    return ExperimentConfig::from_json(j);
}

std::string to_string(Command c) {
    switch (c) {
        case Command::lift: return "lift";
        case Command::flow_solve: return "flow solve";
        case Command::flow_check_identities: return "flow check-identities";
        case Command::transform_constants: return "transform constants";
        case Command::rpde_solve: return "rpde solve";
        case Command::rpde_converge: return "rpde converge";
        case Command::bsde_solve: return "bsde solve";
        case Command::bsde_check_fk: return "bsde check-fk";
        case Command::converge: return "converge";
    }
    return "?";
}

ProblemSpec build_problem(const ProblemConfig& pc) {
    ProblemSpec spec = make_preset(pc.preset).spec;
    if (pc.horizon) spec.horizon = *pc.horizon;
    if (pc.x0) spec.x0 = *pc.x0;
    if (pc.sigma) {
        const double s = *pc.sigma;
        spec.sigma = [s](double, double) { return s; };
        spec.constants.c_sigma = std::max(std::abs(s), 1e-12);
    }
    if (pc.drift) {
        const double b = *pc.drift;
        spec.drift = [b](double, double) { return b; };
        spec.constants.c_b = std::abs(b);
    }
    return spec;
}

RunResult run(ExperimentConfig cfg, const RunOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    if (opt.seed) {
        cfg.driver.seed = *opt.seed;
        cfg.mc.seed = *opt.seed;
    }
    std::filesystem::create_directories(opt.out_dir);
    const ProblemSpec spec = build_problem(cfg.problem);
    const auto [x_lo, x_hi] = cfg.grid.x_range(spec);
    spec.validate(x_lo, x_hi, make_preset(cfg.problem.preset).validation_u_max);
    const Drivers drivers = build_drivers(cfg.driver, spec, cfg.grid);

    Context ctx{cfg, opt, spec, drivers};
    switch (opt.command) {
        case Command::lift: run_lift(ctx); break;
        case Command::flow_solve: run_flow(ctx, false); break;
        case Command::flow_check_identities: run_flow(ctx, true); break;
        case Command::transform_constants: run_constants(ctx); break;
        case Command::rpde_solve: run_rpde_solve(ctx); break;
        case Command::rpde_converge:
        case Command::converge: run_converge(ctx); break;
        case Command::bsde_solve: run_bsde(ctx); break;
        case Command::bsde_check_fk: run_fk(ctx); break;
    }

    RunResult out;
    out.pass = ctx.pass;
    out.report = {{"command", to_string(opt.command)},
                  {"config", cfg.to_json()},
                  {"problem", spec.name},
                  {"results", ctx.results},
                  {"checks", ctx.checks},
                  {"pass", ctx.pass},
                  {"timings", {{"wall_seconds", seconds_since(t0)}}}};
    write_text(opt.out_dir, "report.json", out.report.dump(2) + "\n");
    return out;
}

}  // namespace rbsde::cli
