#include "cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "sampler/bench.hpp"
#include "sampler/config.hpp"
#include "sampler/errors.hpp"
#include "sampler/parallel.hpp"

namespace sampler::cli {

namespace {

namespace fs = std::filesystem;

struct Options {
    std::string command;
    std::string config;
    std::string scenario;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string out;
    std::string dump_preset;
    std::optional<double> beta;
    std::string weights;
    bool full = false;
};

spdlog::level::level_enum log_level()
{
    const char* env = std::getenv("SAMPLER_LOG");
    if (!env) return spdlog::level::warn;
    const std::string v = env;
    if (v == "error") return spdlog::level::err;
    if (v == "warn") return spdlog::level::warn;
    if (v == "info") return spdlog::level::info;
    if (v == "debug") return spdlog::level::debug;
    if (v == "trace") return spdlog::level::trace;
    return spdlog::level::warn;
}

// Keeps only the variants whose dampings all equal `beta`; sets every damping
// to `beta` when none does.
void apply_beta(Scenario& s, double beta)
{
    const auto& m = s.model;
    auto matches = [&](const Eigen::VectorXd& theta) {
        for (int p = 0; p < m.num_params(); ++p)
            if (m.role(p) == ParamRole::Damping && std::abs(theta[p] - beta) > 1e-12) return false;
        return true;
    };
    std::vector<ScenarioVariant> kept;
    for (const auto& v : s.variants)
        if (matches(v.theta.value_or(s.theta))) kept.push_back(v);
    if (kept.empty()) {
        for (int p = 0; p < m.num_params(); ++p)
            if (m.role(p) == ParamRole::Damping) s.theta[p] = beta;
        kept.push_back(s.variants.front());
        kept.front().theta.reset();
        kept.front().label = "beta=" + format_number(beta);
    }
    s.variants = std::move(kept);
}

struct Loaded {
    Scenario scenario;
    fs::path out;
};

Loaded load(const Options& o)
{
    if (o.config.empty() == o.scenario.empty()) throw ConfigError("give exactly one of --config and --scenario");
    Loaded l;
    std::optional<std::string> path;
    if (!o.config.empty()) {
        Config c = load_config(o.config);
        l.scenario = std::move(c.scenario);
        path = c.output_path;
    } else {
        l.scenario = preset(o.scenario, o.full);
    }
    if (o.seed) l.scenario.seed = *o.seed;
    if (o.beta) apply_beta(l.scenario, *o.beta);
    l.scenario.validate();
    l.out = !o.out.empty() ? fs::path(o.out) : path ? fs::path(*path) : fs::path(".");
    fs::create_directories(l.out);
    return l;
}

std::ofstream open_output(const fs::path& path)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    return f;
}

const ScenarioVariant& find_variant(const Scenario& s, const std::string& label)
{
    for (const auto& v : s.variants)
        if (v.label == label) return v;
    throw ConfigError("weights file names unknown variant " + label);
}

// crlb.csv rows: mu is the worst case over Theta at the relaxed weights,
// crlb_best and crlb_worst are taken over Theta at the selected set.
void write_crlb_rows(std::ostream& f, const Scenario& s, const ScenarioVariant& v, const std::vector<FimBank>& banks,
                     const std::string& budget, const Eigen::VectorXd& w, const std::vector<std::size_t>& selected)
{
    const double scale = s.crlb_scale();
    const int p_dim = s.model.num_params();
    Eigen::VectorXd mu = Eigen::VectorXd::Constant(p_dim, std::numeric_limits<double>::infinity());
    try {
        mu = crlb_table(w, banks).rowwise().maxCoeff() * scale;
    } catch (const SingularFim&) {
    }
    Eigen::VectorXd best = Eigen::VectorXd::Constant(p_dim, std::numeric_limits<double>::infinity());
    Eigen::VectorXd worst = best;
    try {
        const Eigen::MatrixXd t = crlb_table(selected, banks) * scale;
        best = t.rowwise().minCoeff();
        worst = t.rowwise().maxCoeff();
    } catch (const SingularFim&) {
    }
    for (int p = 0; p < p_dim; ++p)
        f << csv_escape(v.label) << ',' << budget << ',' << s.model.param_name(p) << ',' << format_number(v.psi[p]) << ','
          << format_number(mu[p]) << ',' << format_number(best[p]) << ',' << format_number(worst[p]) << "\r\n";
}

constexpr const char* kCrlbHeader = "variant,budget,param,psi,mu,crlb_best,crlb_worst\r\n";

int cmd_design(const Options& o, std::ostream& out)
{
    const Loaded l = load(o);
    const Scenario& s = l.scenario;
    std::ofstream wf = open_output(l.out / "weights.csv");
    std::ofstream cf = open_output(l.out / "crlb.csv");
    wf << "variant,budget,index";
    for (int d = 0; d < s.grid.dims(); ++d) wf << ",t" << d + 1;
    wf << ",w,selected\r\n";
    cf << kCrlbHeader;

    out << "design " << s.name << "\n";
    for (const auto& v : s.variants) {
        const auto banks = s.banks(v);
        for (double budget : s.budgets) {
            const DesignResult r = s.design(s.problem(v, banks, budget));
            std::vector<char> chosen(s.grid.size(), 0);
            for (std::size_t i : r.selected) chosen[i] = 1;
            const std::string b = format_number(budget);
            for (std::size_t n = 0; n < s.grid.size(); ++n) {
                wf << csv_escape(v.label) << ',' << b << ',' << n;
                const Eigen::VectorXd t = s.grid.point(n);
                for (Eigen::Index d = 0; d < t.size(); ++d) wf << ',' << format_number(t[d]);
                wf << ',' << format_number(r.w[static_cast<Eigen::Index>(n)]) << ',' << int(chosen[n]) << "\r\n";
            }
            write_crlb_rows(cf, s, v, banks, b, r.w, r.selected);

            double objective = std::numeric_limits<double>::infinity();
            try {
                objective = subset_objective(r.selected, banks, v.psi) * s.crlb_scale();
            } catch (const SingularFim&) {
            }
            out << "  " << v.label << " budget " << b << ": " << r.selected.size() << " of " << s.grid.size()
                << " selected, objective " << format_number(objective) << " (relaxed "
                << format_number(r.objective * s.crlb_scale()) << "), " << to_string(r.info.status) << ", "
                << r.info.newton_steps << " Newton steps\n    indices";
            for (std::size_t i : r.selected) out << ' ' << i;
            out << "\n";
        }
    }
    out << "wrote " << (l.out / "weights.csv").string() << " and " << (l.out / "crlb.csv").string() << "\n";
    return 0;
}

std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                fields.back() += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.emplace_back();
        } else if (c != '\r') {
            fields.back() += c;
        }
    }
    return fields;
}

double parse_number(const std::string& text, const std::string& what)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("weights file: cannot read " + what + " '" + text + "'");
    }
}

struct WeightGroup {
    std::string variant;  // empty: every variant
    std::string budget;
    std::vector<double> w;
    std::vector<std::size_t> selected;
    bool has_selected = false;
};

// Reads a weights file: a header row with a "w" column and optional
// "variant", "budget" and "selected" columns, one row per candidate.
std::vector<WeightGroup> read_weights(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open weights file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("weights file " + path.string() + " is empty");
    const auto header = split_csv_line(line);
    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    };
    const auto wc = column("w");
    if (!wc) throw ConfigError("weights file " + path.string() + " has no w column");
    const auto vc = column("variant");
    const auto bc = column("budget");
    const auto sc = column("selected");

    std::vector<WeightGroup> groups;
    std::map<std::pair<std::string, std::string>, std::size_t> index;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) throw ConfigError("weights file: row has " + std::to_string(f.size()) + " fields");
        const std::string variant = vc ? f[*vc] : "";
        const std::string budget = bc ? f[*bc] : "";
        auto [it, fresh] = index.try_emplace({variant, budget}, groups.size());
        if (fresh) groups.push_back({variant, budget, {}, {}, sc.has_value()});
        WeightGroup& g = groups[it->second];
        if (sc && parse_number(f[*sc], "selected") != 0.0) g.selected.push_back(g.w.size());
        g.w.push_back(parse_number(f[*wc], "w"));
    }
    if (groups.empty()) throw ConfigError("weights file " + path.string() + " has no rows");
    return groups;
}

int cmd_evaluate(const Options& o, std::ostream& out)
{
    if (o.weights.empty()) throw ConfigError("evaluate needs --weights");
    const Loaded l = load(o);
    const Scenario& s = l.scenario;
    const auto groups = read_weights(o.weights);
    std::ofstream cf = open_output(l.out / "crlb.csv");
    cf << kCrlbHeader;
    out << "evaluate " << s.name << "\n";
    std::map<std::string, std::vector<FimBank>> cache;
    for (const auto& g : groups) {
        if (g.w.size() != s.grid.size())
            throw DimensionMismatch("weights file has " + std::to_string(g.w.size()) + " weights, grid has " +
                                    std::to_string(s.grid.size()) + " candidates");
        const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(g.w.data(), static_cast<Eigen::Index>(g.w.size()));
        std::vector<const ScenarioVariant*> targets;
        if (g.variant.empty())
            for (const auto& v : s.variants) targets.push_back(&v);
        else
            targets.push_back(&find_variant(s, g.variant));
        for (const ScenarioVariant* v : targets) {
            auto [it, fresh] = cache.try_emplace(v->label);
            if (fresh) it->second = s.banks(*v);
            const double budget = g.budget.empty() ? w.sum() : parse_number(g.budget, "budget");
            const auto selected = g.has_selected ? g.selected : threshold(w, s.problem(*v, {}, budget).effective_rounding());
            write_crlb_rows(cf, s, *v, it->second, g.budget, w, selected);
            out << "  " << v->label << " budget " << (g.budget.empty() ? "-" : g.budget) << ": sum w "
                << format_number(w.sum()) << ", relaxed objective "
                << format_number(weights_objective(w, it->second, v->psi) * s.crlb_scale()) << "\n";
        }
    }
    out << "wrote " << (l.out / "crlb.csv").string() << "\n";
    return 0;
}

int write_report(const Report& rep, const fs::path& dir, std::ostream& out)
{
    std::ofstream f = open_output(dir / "report.csv");
    write_report_csv(rep, f);
    write_report_summary(rep, out);
    out << "wrote " << (dir / "report.csv").string() << "\n";
    return 0;
}

int cmd_compare(const Options& o, std::ostream& out)
{
    Loaded l = load(o);
    if (l.scenario.baseline_trials == 0) throw ConfigError("compare needs eval.baseline_trials of at least 1");
    l.scenario.trials = 0;
    return write_report(run_scenario(l.scenario), l.out, out);
}

int cmd_simulate(const Options& o, std::ostream& out)
{
    Loaded l = load(o);
    if (l.scenario.trials == 0) throw ConfigError("simulate needs eval.trials of at least 100");
    if (!l.scenario.estimation) throw ConfigError("simulate needs eval.estimation_grid");
    l.scenario.baseline_trials = 0;
    return write_report(crlb_rmse_curve(l.scenario), l.out, out);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Optimal non-uniform sampling design"};
    app.name("sampler");
    Options o;
    app.add_option("command", o.command, "design, evaluate, compare or simulate")
        ->check(CLI::IsMember({"design", "evaluate", "compare", "simulate"}));
    app.add_option("--config", o.config, "configuration file");
    app.add_option("--scenario", o.scenario, "built-in preset instead of a configuration file");
    app.add_option("--seed", o.seed, "base seed, overrides the configuration");
    app.add_option("--threads", o.threads, "worker cap, 0 for all cores");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--dump-preset", o.dump_preset, "print a preset as a configuration file");
    app.add_option("--beta", o.beta, "damping value; selects or sets the matching variant");
    app.add_option("--weights", o.weights, "weights file for evaluate");
    app.add_flag("--full", o.full, "use the large trial counts of a preset");

    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
    auto previous = spdlog::default_logger();
    auto logger = std::make_shared<spdlog::logger>("sampler", sink);
    logger->set_level(log_level());
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    struct Restore {
        std::shared_ptr<spdlog::logger> p;
        ~Restore() { spdlog::set_default_logger(p); }
    } restore{previous};

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "sampler: " << e.what() << "\n";
        return 1;
    }

    try {
        set_max_threads(o.threads);
        if (!o.dump_preset.empty()) {
            if (!o.command.empty()) throw ConfigError("--dump-preset takes no command");
            out << scenario_to_json(preset(o.dump_preset, o.full)).dump(2) << "\n";
            return 0;
        }
        if (o.command.empty()) throw ConfigError("missing command (design, evaluate, compare or simulate)");
        if (o.command == "design") return cmd_design(o, out);
        if (o.command == "evaluate") return cmd_evaluate(o, out);
        if (o.command == "compare") return cmd_compare(o, out);
        return cmd_simulate(o, out);
    } catch (const Infeasible& e) {
        err << "sampler: infeasible: " << e.what() << "\n"
            << "  certificate: every design within the budget has max_p (mu_p - cap_p) / cap_p >= "
            << format_number(e.violation()) << "\n";
        return e.exit_code();
    } catch (const Error& e) {
        err << "sampler: " << e.what() << "\n";
        return e.exit_code();
    } catch (const fs::filesystem_error& e) {
        err << "sampler: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "sampler: internal error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace sampler::cli
