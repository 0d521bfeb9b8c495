#include "sampler/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "sampler/errors.hpp"

namespace sampler {

namespace {

using json = nlohmann::ordered_json;

// Object reader that records consumed keys so leftovers can be rejected.
class Section {
public:
    Section(const json& node, std::string path) : node_(node), path_(std::move(path))
    {
        if (!node_.is_object()) fail("must be an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    const json& at(const std::string& key)
    {
        used_.insert(key);
        if (!node_.contains(key)) throw ConfigError(where(key) + " is required");
        return node_.at(key);
    }

    const json* find(const std::string& key)
    {
        used_.insert(key);
        const auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    double number(const std::string& key)
    {
        const json& v = at(key);
        if (!v.is_number()) throw ConfigError(where(key) + " must be a number");
        return v.get<double>();
    }

    double number(const std::string& key, double fallback) { return has(key) ? number(key) : (used_.insert(key), fallback); }

    long long integer(const std::string& key)
    {
        const json& v = at(key);
        if (!v.is_number_integer()) throw ConfigError(where(key) + " must be an integer");
        return v.get<long long>();
    }

    long long integer(const std::string& key, long long fallback)
    {
        return has(key) ? integer(key) : (used_.insert(key), fallback);
    }

    std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback)
    {
        used_.insert(key);
        if (!has(key)) return fallback;
        const json& v = node_.at(key);
        if (!v.is_number_unsigned()) throw ConfigError(where(key) + " must be a non-negative integer");
        return v.get<std::uint64_t>();
    }

    bool boolean(const std::string& key, bool fallback)
    {
        used_.insert(key);
        if (!has(key)) return fallback;
        const json& v = node_.at(key);
        if (!v.is_boolean()) throw ConfigError(where(key) + " must be true or false");
        return v.get<bool>();
    }

    std::string string(const std::string& key)
    {
        const json& v = at(key);
        if (!v.is_string()) throw ConfigError(where(key) + " must be a string");
        return v.get<std::string>();
    }

    Section child(const std::string& key) { return Section(at(key), where(key)); }

    std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    void finish() const
    {
        for (const auto& [key, value] : node_.items())
            if (!used_.contains(key)) throw ConfigError("unknown key " + where(key));
    }

private:
    [[noreturn]] void fail(const std::string& msg) const { throw ConfigError((path_.empty() ? "config" : path_) + " " + msg); }

    const json& node_;
    std::string path_;
    std::set<std::string> used_;
};

double as_number(const json& v, const std::string& where)
{
    if (!v.is_number()) throw ConfigError(where + " must be a number");
    return v.get<double>();
}

// Array of P numbers, or an object keyed by parameter name with `fallback`
// for names left out.
Eigen::VectorXd param_values(const json& v, const SignalModel& model, const std::string& where,
                             std::optional<double> fallback)
{
    const int p_dim = model.num_params();
    if (v.is_array()) {
        if (static_cast<int>(v.size()) != p_dim)
            throw DimensionMismatch(where + " has " + std::to_string(v.size()) + " entries, model has " +
                                    std::to_string(p_dim) + " parameters");
        Eigen::VectorXd out(p_dim);
        for (int p = 0; p < p_dim; ++p) out[p] = as_number(v[static_cast<std::size_t>(p)], where);
        return out;
    }
    if (!v.is_object()) throw ConfigError(where + " must be an array or an object keyed by parameter name");
    Eigen::VectorXd out = Eigen::VectorXd::Constant(p_dim, fallback.value_or(std::numeric_limits<double>::quiet_NaN()));
    for (const auto& [key, value] : v.items()) {
        const auto p = model.param_index(key);
        if (!p) throw ConfigError(where + " names unknown parameter " + key);
        out[*p] = as_number(value, where + "." + key);
    }
    if (!fallback)
        for (int p = 0; p < p_dim; ++p)
            if (std::isnan(out[p])) throw ConfigError(where + " is missing parameter " + model.param_name(p));
    return out;
}

json param_object(const Eigen::VectorXd& v, const SignalModel& model)
{
    json out = json::object();
    for (int p = 0; p < model.num_params(); ++p) out[model.param_name(p)] = v[p];
    return out;
}

CandidateGrid parse_grid(Section g, int model_dims)
{
    CandidateGrid grid = CandidateGrid::uniform_1d(1);
    if (g.has("points")) {
        if (g.has("sizes")) throw ConfigError("grid takes either sizes or points, not both");
        const json& pts = g.at("points");
        if (!pts.is_array() || pts.empty()) throw ConfigError("grid.points must be a nonempty array");
        Eigen::MatrixXd m(static_cast<Eigen::Index>(pts.size()), model_dims);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            const json& row = pts[i];
            if (row.is_number() && model_dims == 1) {
                m(static_cast<Eigen::Index>(i), 0) = row.get<double>();
                continue;
            }
            if (!row.is_array() || static_cast<int>(row.size()) != model_dims)
                throw DimensionMismatch("grid.points[" + std::to_string(i) + "] must have " + std::to_string(model_dims) +
                                        " coordinates");
            for (int d = 0; d < model_dims; ++d)
                m(static_cast<Eigen::Index>(i), d) = as_number(row[static_cast<std::size_t>(d)], "grid.points");
        }
        grid = CandidateGrid(std::move(m));
    } else {
        const json& sizes = g.at("sizes");
        if (!sizes.is_array() || sizes.empty() || sizes.size() > 2)
            throw ConfigError("grid.sizes must be an array of one or two sizes");
        std::vector<std::size_t> n;
        for (const auto& v : sizes) {
            if (!v.is_number_unsigned() || v.get<std::size_t>() == 0)
                throw ConfigError("grid.sizes entries must be positive integers");
            n.push_back(v.get<std::size_t>());
        }
        const double origin = g.number("origin", 0.0);
        grid = n.size() == 1 ? CandidateGrid::uniform_1d(n[0], origin) : CandidateGrid::uniform_2d(n[0], n[1], origin);
    }
    if (g.has("dims") && g.integer("dims") != grid.dims())
        throw DimensionMismatch("grid.dims does not match the grid coordinates");
    g.finish();
    if (grid.dims() != model_dims)
        throw DimensionMismatch("grid has dimension " + std::to_string(grid.dims()) + ", model needs " +
                                std::to_string(model_dims));
    return grid;
}

// Uniform grid description {sizes, origin} when the points allow it.
json grid_to_json(const CandidateGrid& grid)
{
    const Eigen::MatrixXd& pts = grid.points();
    const double origin = pts(0, 0);
    json out;
    if (grid.layout()) {
        const auto [n1, n2] = *grid.layout();
        if (grid.size() == n1 * n2 && grid.points() == CandidateGrid::uniform_2d(n1, n2, origin).points()) {
            out["sizes"] = {n1, n2};
            out["origin"] = origin;
            return out;
        }
    }
    if (grid.dims() == 1 && pts.col(0) == CandidateGrid::uniform_1d(grid.size(), origin).points().col(0)) {
        out["sizes"] = {grid.size()};
        out["origin"] = origin;
        return out;
    }
    json rows = json::array();
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index d = 0; d < pts.cols(); ++d) row.push_back(pts(i, d));
        rows.push_back(row);
    }
    out["points"] = rows;
    return out;
}

void parse_design(Section d, Scenario& s)
{
    const SignalModel& model = s.model;
    if (d.has("gamma") == d.has("gamma_sweep")) throw ConfigError("design needs exactly one of gamma and gamma_sweep");
    if (d.has("gamma")) {
        s.budgets = {d.number("gamma")};
    } else {
        const json& sweep = d.at("gamma_sweep");
        if (!sweep.is_array() || sweep.empty()) throw ConfigError("design.gamma_sweep must be a nonempty array");
        for (const auto& v : sweep) s.budgets.push_back(as_number(v, "design.gamma_sweep"));
    }

    if (const json* variants = d.find("variants")) {
        if (d.has("psi")) throw ConfigError("design takes either psi or variants, not both");
        if (!variants->is_array() || variants->empty()) throw ConfigError("design.variants must be a nonempty array");
        for (std::size_t i = 0; i < variants->size(); ++i) {
            const std::string where = "design.variants[" + std::to_string(i) + "]";
            Section v((*variants)[i], where);
            ScenarioVariant var;
            var.label = v.string("label");
            const json* psi = v.find("psi");
            var.psi = psi ? param_values(*psi, model, where + ".psi", 1.0) : Eigen::VectorXd::Ones(model.num_params());
            if (const json* theta = v.find("theta")) var.theta = param_values(*theta, model, where + ".theta", std::nullopt);
            v.finish();
            s.variants.push_back(std::move(var));
        }
    } else {
        const json* psi = d.find("psi");
        s.variants.push_back({"default",
                              psi ? param_values(*psi, model, "design.psi", 1.0) : Eigen::VectorXd::Ones(model.num_params()),
                              std::nullopt});
    }
    std::set<std::string> labels;
    for (const auto& v : s.variants)
        if (!labels.insert(v.label).second) throw ConfigError("duplicate variant label " + v.label);

    if (const json* caps = d.find("caps"))
        s.caps = param_values(*caps, model, "design.caps", std::numeric_limits<double>::infinity());

    if (d.has("group_budgets")) {
        Section g = d.child("group_budgets");
        const double inf = std::numeric_limits<double>::infinity();
        s.group_budgets = std::pair{g.number("columns", inf), g.number("rows", inf)};
        g.finish();
    }
    if (d.has("reweight")) {
        Section r = d.child("reweight");
        s.reweight.enabled = r.boolean("enabled", true);
        s.reweight.options.max_iter = static_cast<int>(r.integer("max_iter", s.reweight.options.max_iter));
        s.reweight.options.epsilon = r.number("epsilon", s.reweight.options.epsilon);
        s.reweight.options.tol = r.number("tol", s.reweight.options.tol);
        r.finish();
        if (s.reweight.options.max_iter < 1) throw ConfigError("design.reweight.max_iter must be at least 1");
        if (!(s.reweight.options.epsilon > 0.0)) throw ConfigError("design.reweight.epsilon must be positive");
    }
    if (d.has("rounding")) {
        Section r = d.child("rounding");
        const std::string rule = r.string("rule");
        if (rule == "top_m") {
            if (r.has("M")) {
                const long long m = r.integer("M");
                if (m < 0) throw ConfigError("design.rounding.M must be non-negative");
                s.rounding = TopM{static_cast<std::size_t>(m)};
            }
        } else if (rule == "cutoff") {
            s.rounding = Cutoff{r.number("xi")};
        } else {
            throw ConfigError("design.rounding.rule must be top_m or cutoff");
        }
        r.finish();
    }
    d.finish();
}

void parse_eval(Section e, Scenario& s)
{
    const long long trials = e.integer("trials", 0);
    if (trials < 0) throw ConfigError("eval.trials must be non-negative");
    s.trials = static_cast<int>(trials);
    s.seed = e.unsigned_integer("seed", s.seed);
    s.baseline_trials = e.unsigned_integer("baseline_trials", 0);
    if (e.has("estimation_grid")) {
        Section g = e.child("estimation_grid");
        EstimationSpec spec;
        spec.width = g.number("width", spec.width);
        spec.points = static_cast<int>(g.integer("points", spec.points));
        spec.polish = g.boolean("polish", spec.polish);
        spec.polish_evaluations = static_cast<int>(g.integer("polish_evaluations", spec.polish_evaluations));
        g.finish();
        if (!(spec.width > 0.0)) throw ConfigError("eval.estimation_grid.width must be positive");
        if (spec.points < 1) throw ConfigError("eval.estimation_grid.points must be at least 1");
        if (spec.polish_evaluations < 0) throw ConfigError("eval.estimation_grid.polish_evaluations must be non-negative");
        s.estimation = spec;
    }
    e.finish();
}

}  // namespace

Config parse_config(const json& doc)
{
    Section root(doc, "");
    Config cfg;
    Scenario& s = cfg.scenario;
    s.name = root.has("name") ? root.string("name") : "config";
    if (root.has("notes")) s.notes = root.string("notes");

    {
        Section m = root.child("model");
        const auto kind = model_kind_from_string(m.string("kind"));
        const long long k = m.integer("K", 1);
        if (k < 1) throw ConfigError("model.K must be at least 1");
        s.model = SignalModel(kind, static_cast<int>(k));
        m.finish();
    }
    s.theta = param_values(root.at("theta"), s.model, "theta", std::nullopt);
    if (root.has("theta_grid")) {
        Section g = root.child("theta_grid");
        ThetaGridSpec spec;
        spec.param = g.string("param");
        spec.lower = g.number("lower");
        spec.delta = g.number("delta");
        spec.count = static_cast<int>(g.integer("count"));
        g.finish();
        s.theta_grid = spec;
    }
    s.grid = parse_grid(root.child("grid"), s.model.dims());
    {
        Section n = root.child("noise");
        s.noise_variance = n.number("variance");
        n.finish();
    }
    parse_design(root.child("design"), s);
    if (root.has("eval")) parse_eval(root.child("eval"), s);
    if (root.has("output")) {
        Section o = root.child("output");
        cfg.output_path = o.string("path");
        o.finish();
    }
    root.finish();
    s.validate();
    return cfg;
}

Config load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    try {
        return parse_config(doc);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

json scenario_to_json(const Scenario& s, const std::optional<std::string>& output_path)
{
    json doc;
    doc["name"] = s.name;
    if (!s.notes.empty()) doc["notes"] = s.notes;
    doc["model"] = {{"kind", to_string(s.model.kind())}, {"K", s.model.components()}};
    doc["theta"] = param_object(s.theta, s.model);
    if (s.theta_grid)
        doc["theta_grid"] = {{"param", s.theta_grid->param},
                             {"lower", s.theta_grid->lower},
                             {"delta", s.theta_grid->delta},
                             {"count", s.theta_grid->count}};
    doc["grid"] = grid_to_json(s.grid);
    doc["noise"] = {{"variance", s.noise_variance}};

    json design;
    if (s.budgets.size() == 1) design["gamma"] = s.budgets.front();
    else design["gamma_sweep"] = s.budgets;
    json variants = json::array();
    for (const auto& v : s.variants) {
        json jv = {{"label", v.label}, {"psi", param_object(v.psi, s.model)}};
        if (v.theta) jv["theta"] = param_object(*v.theta, s.model);
        variants.push_back(jv);
    }
    design["variants"] = variants;
    if (s.caps) {
        json caps = json::object();
        for (int p = 0; p < s.model.num_params(); ++p)
            if (std::isfinite((*s.caps)[p])) caps[s.model.param_name(p)] = (*s.caps)[p];
        design["caps"] = caps;
    }
    if (s.group_budgets) {
        json g = json::object();
        if (std::isfinite(s.group_budgets->first)) g["columns"] = s.group_budgets->first;
        if (std::isfinite(s.group_budgets->second)) g["rows"] = s.group_budgets->second;
        design["group_budgets"] = g;
    }
    if (s.reweight.enabled)
        design["reweight"] = {{"enabled", true},
                              {"max_iter", s.reweight.options.max_iter},
                              {"epsilon", s.reweight.options.epsilon},
                              {"tol", s.reweight.options.tol}};
    if (s.rounding) {
        if (const auto* top = std::get_if<TopM>(&*s.rounding)) design["rounding"] = {{"rule", "top_m"}, {"M", top->m}};
        else design["rounding"] = {{"rule", "cutoff"}, {"xi", std::get<Cutoff>(*s.rounding).xi}};
    }
    doc["design"] = design;

    json eval = {{"trials", s.trials}, {"seed", s.seed}, {"baseline_trials", s.baseline_trials}};
    if (s.estimation)
        eval["estimation_grid"] = {{"width", s.estimation->width},
                                   {"points", s.estimation->points},
                                   {"polish", s.estimation->polish},
                                   {"polish_evaluations", s.estimation->polish_evaluations}};
    doc["eval"] = eval;
    if (output_path) doc["output"] = {{"path", *output_path}};
    return doc;
}

}  // namespace sampler
