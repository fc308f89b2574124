// Command-line driver.
//
//   isac_privacy run   [--preset desk] [--out run.csv] [--json run.json]
//   isac_privacy sweep --kind target --values=-200,-75,0,150 --out fig_a.csv
//   isac_privacy show-config --preset paper --set m_ue=16

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "isac/harness.hpp"

namespace {

struct Common {
    std::string preset = "paper";
    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
    std::string json_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int q = 0;
    int jobs = 0;
    bool verbose = false;
};

void add_common(CLI::App* app, Common& c, bool outputs)
{
    app->add_option("--preset", c.preset, "Parameter preset")->check(CLI::IsMember({"paper", "desk"}));
    app->add_option("--config", c.config_path, "key = value file applied on top of the preset")
        ->check(CLI::ExistingFile);
    app->add_option("--set", c.sets, "Single key=value override (repeatable)");
    app->add_option("--seed", c.seed, "Master seed")->each([&c](const std::string&) { c.seed_given = true; });
    app->add_option("-q,--realizations", c.q, "Monte-Carlo realizations per point")->check(CLI::PositiveNumber);
    if (!outputs)
        return;
    app->add_option("--out", c.out, "CSV output path")->required();
    app->add_option("--json", c.json_path, "JSON mirror with per-realization records");
    app->add_option("-j,--jobs", c.jobs, "Worker threads (default: hardware threads)")->check(CLI::NonNegativeNumber);
    app->add_flag("-v,--verbose", c.verbose, "Progress line per realization on stderr");
}

std::pair<std::string, std::string> split_assignment(const std::string& s)
{
    const auto eq = s.find('=');
    if (eq == std::string::npos)
        throw isac::ConfigError("--set expects key=value, got '" + s + "'");
    return {s.substr(0, eq), s.substr(eq + 1)};
}

void resolve(const Common& c, isac::SimulationConfig& cfg, isac::NetworkLayout& lay)
{
    cfg = isac::preset_config(c.preset);
    lay = isac::default_layout(cfg.n_tx);
    if (!c.config_path.empty())
        isac::load_config_file(c.config_path, cfg, lay);
    for (const auto& s : c.sets) {
        const auto [k, v] = split_assignment(s);
        isac::apply_config_entry(cfg, lay, k, v);
    }
    // n_tx changes without explicit positions pick the published subset.
    if (static_cast<int>(lay.tx_ap_pos.size()) != cfg.n_tx && cfg.n_tx <= 8)
        lay.tx_ap_pos = isac::default_layout(cfg.n_tx).tx_ap_pos;
    if (c.seed_given)
        cfg.seed = c.seed;
    if (c.q > 0)
        cfg.q_realizations = c.q;
}

std::vector<double> parse_values(const std::string& s)
{
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty())
            continue;
        std::size_t used = 0;
        double v = 0.0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != item.size())
            throw isac::ConfigError("bad sweep value '" + item + "'");
        out.push_back(v);
    }
    return out;
}

int execute(const Common& c, isac::ExperimentSpec spec)
{
    isac::SimulationConfig cfg;
    isac::NetworkLayout lay;
    resolve(c, cfg, lay);
    spec.output_path = c.out;
    spec.jobs = c.jobs > 0 ? c.jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (c.verbose)
        spec.log = [](const std::string& line) { std::cerr << line << std::endl; };

    const isac::ExperimentResult res = isac::run_experiment(spec, cfg, lay);
    if (!c.json_path.empty()) {
        std::ofstream js(c.json_path, std::ios::binary | std::ios::trunc);
        if (!js)
            throw std::runtime_error("cannot open '" + c.json_path + "' for writing");
        js << isac::to_json(res).dump(1) << '\n';
    }

    int status = 0;
    std::cout << isac::csv_header();
    for (const auto& row : res.rows) {
        std::cout << isac::csv_line(row);
        if (row.q_used == 0) {
            std::cerr << "error: every realization at sweep value " << row.sweep_value
                      << " was flagged; P_D is undefined\n";
            status = 3;
        }
    }
    return status;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Location-privacy simulator for cell-free multi-static ISAC"};
    app.require_subcommand(1);

    Common run_opts;
    auto* run = app.add_subcommand("run", "Monte-Carlo P_D at one operating point");
    add_common(run, run_opts, true);

    Common sweep_opts;
    std::string kind;
    std::string values;
    auto* sweep = app.add_subcommand("sweep", "P_D along a sweep (one CSV row per value)");
    add_common(sweep, sweep_opts, true);
    sweep->add_option("--kind", kind, "target | cellsize | knownaps")->required();
    sweep->add_option("--values", values, "Comma-separated sweep values (use --values=-75,... for negatives)")
        ->required();

    Common show_opts;
    auto* show = app.add_subcommand("show-config", "Print the effective configuration");
    add_common(show, show_opts, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            isac::ExperimentSpec spec;
            spec.kind = isac::ExperimentKind::single;
            return execute(run_opts, spec);
        }
        if (*sweep) {
            isac::ExperimentSpec spec;
            spec.kind = isac::parse_experiment_kind(kind);
            if (spec.kind == isac::ExperimentKind::single)
                throw isac::ConfigError("use the run subcommand for a single point");
            spec.sweep_values = parse_values(values);
            return execute(sweep_opts, spec);
        }
        if (*show) {
            isac::SimulationConfig cfg;
            isac::NetworkLayout lay;
            resolve(show_opts, cfg, lay);
            isac::validate_config(cfg, lay);
            std::cout << isac::format_config(cfg, lay);
            return 0;
        }
    } catch (const isac::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
