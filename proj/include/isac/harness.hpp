#pragma once

// Monte-Carlo driver: one realization is channels + symbols + precoder
// design + attack; experiments sweep the target position, the cell size or
// the number of APs known to the adversary and aggregate P_D per point.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "isac/adversary.hpp"
#include "isac/precoder.hpp"

namespace isac {

struct RealizationRecord {
    int q = 0;
    std::uint64_t seed = 0;
    bool flagged = false;
    std::string flag_cause; // empty, or infeasible_init / subproblem_infeasible / solver_limit / em_cap

    int cccp_iterations = 0;
    std::vector<double> gamma_t_history; // expected sensing SINR per accepted iterate
    double gamma_t = 0.0;                // realized-symbol sensing SINR of the final design
    double min_comm_sinr = 0.0;
    double max_comm_violation = 0.0; // relative SINR shortfall of the final design
    double max_power_ratio = 0.0;    // max_k ||W_k||^2 / P_T

    AttackResult attack;
    // Outcomes of the grid / known-AP variants of an experiment point, in
    // sweep order (one entry for plain runs).
    std::vector<LocalizationResult> variants;
    std::vector<bool> variant_flagged;
};

nlohmann::json to_json(const RealizationRecord& r);

/// Full pipeline for one realization seed. Fully deterministic.
RealizationRecord run_realization(const Scenario& sc, std::uint64_t realization_seed, int q = 0);

enum class ExperimentKind { single, target_sweep, cellsize_sweep, knownaps_sweep };

const char* to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& s);

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::single;
    std::vector<double> sweep_values;
    // key = value config entries applied before the sweep.
    std::vector<std::pair<std::string, std::string>> overrides;
    std::string output_path; // CSV, written row by row; empty disables
    int jobs = 1;
    std::function<void(const std::string&)> log; // progress lines, optional
};

struct ResultRow {
    double sweep_value = 0.0;
    int m_ue = 0;
    int n_tx = 0;
    double p_d = 0.0;
    int q_used = 0;
    int flagged = 0;
    double mean_gamma_t = 0.0;
    double mean_min_comm_sinr = 0.0;
    double wall_time_s = 0.0; // not written to CSV
    std::uint64_t seed = 0;

    friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct ExperimentResult {
    std::vector<ResultRow> rows;
    std::vector<std::vector<RealizationRecord>> records; // per sweep point, sorted by q
};

/// Validates every sweep value up front (ConfigError on a bad one).
ExperimentResult run_experiment(const ExperimentSpec& spec, const SimulationConfig& cfg, const NetworkLayout& layout);

/// Aggregates one sweep point; flagged realizations are left out of P_D.
ResultRow aggregate(const std::vector<RealizationRecord>& recs, std::size_t variant, double sweep_value,
                    const Scenario& sc);

// CSV: header plus one LF-terminated line per row, fixed column order.
std::string csv_header();
std::string csv_line(const ResultRow& r);
void emit_csv(const std::vector<ResultRow>& rows, const std::string& path);
std::vector<ResultRow> read_csv(const std::string& path);

nlohmann::json to_json(const ExperimentResult& res);

/// Runs f(0..n-1) on up to `jobs` threads.
void parallel_for(int n, int jobs, const std::function<void(int)>& f);

} // namespace isac
