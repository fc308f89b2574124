#include "isac/harness.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace isac {

using nlohmann::json;

namespace {

json to_json(const LocalizationResult& loc)
{
    return json{{"line_angles", loc.line_angles},
                {"cells_per_line", loc.cells_per_line},
                {"votes", loc.votes},
                {"chosen_cell", loc.chosen_cell},
                {"tied_cells", loc.tied_cells},
                {"correct", loc.correct}};
}

json to_json(const ApAttack& ap)
{
    return json{{"ap", ap.ap},
                {"local_peak", ap.local_peak},
                {"global_angle", ap.global_angle},
                {"true_local", ap.true_local},
                {"em_iterations", ap.em_iterations},
                {"em_capped", ap.em_capped},
                {"err_em", ap.err_em},
                {"err_zf", ap.err_zf}};
}

json to_json(const ResultRow& r)
{
    return json{{"sweep_value", r.sweep_value}, {"m_ue", r.m_ue},
                {"n_tx", r.n_tx},               {"p_d", r.p_d},
                {"q_used", r.q_used},           {"flagged", r.flagged},
                {"mean_gamma_t", r.mean_gamma_t}, {"mean_min_comm_sinr", r.mean_min_comm_sinr},
                {"seed", r.seed}};
}

} // namespace

json to_json(const RealizationRecord& r)
{
    json aps = json::array();
    for (const auto& ap : r.attack.aps)
        aps.push_back(to_json(ap));
    json variants = json::array();
    for (std::size_t v = 0; v < r.variants.size(); ++v) {
        json j = to_json(r.variants[v]);
        j["flagged"] = static_cast<bool>(r.variant_flagged[v]);
        variants.push_back(std::move(j));
    }
    return json{{"q", r.q},
                {"seed", r.seed},
                {"flagged", r.flagged},
                {"flag_cause", r.flag_cause},
                {"cccp_iterations", r.cccp_iterations},
                {"gamma_t_history", r.gamma_t_history},
                {"gamma_t", r.gamma_t},
                {"min_comm_sinr", r.min_comm_sinr},
                {"max_comm_violation", r.max_comm_violation},
                {"max_power_ratio", r.max_power_ratio},
                {"aps", aps},
                {"localization", to_json(r.attack.loc)},
                {"variants", variants}};
}

RealizationRecord run_realization(const Scenario& sc, std::uint64_t realization_seed, int q)
{
    RealizationRecord rec;
    rec.q = q;
    rec.seed = realization_seed;

    Rng ch_rng = make_stream(realization_seed, Stream::channels);
    const CommChannelSet ch = draw_comm_channels(sc, ch_rng);
    const SensingGeometry geom = make_sensing_geometry(sc);
    Rng sym_rng = make_stream(realization_seed, Stream::symbols);
    const SymbolBlock s = draw_symbols(sc, sym_rng);

    Rng init_rng = make_stream(realization_seed, Stream::init);
    const CccpState st = run_algorithm1(sc, ch, geom, init_rng);
    const SensingKernel kern = make_sensing_kernel(sc, geom);
    rec.cccp_iterations = static_cast<int>(st.trace.size());
    rec.gamma_t_history = st.gamma_t_history;
    rec.gamma_t = sensing_sinr(kern, st.w, s);
    rec.min_comm_sinr = min_comm_sinr(ch, st.w, st.u, sc.sigma_i2);
    rec.max_comm_violation = max_comm_violation(sc, ch, st.w, st.u);
    for (int k = 0; k < st.w.n_tx(); ++k)
        rec.max_power_ratio = std::max(rec.max_power_ratio, st.w.power(k) / sc.p_t);
    if (!st.ok()) {
        rec.flagged = true;
        rec.flag_cause = to_string(st.flag);
    }

    // The attack still runs on flagged designs; the record keeps it for
    // inspection but P_D ignores it.
    rec.attack = run_attack(sc, geom, ch, st.w, s, realization_seed);
    if (rec.attack.em_capped && !rec.flagged) {
        rec.flagged = true;
        rec.flag_cause = "em_cap";
    }
    rec.variants = {rec.attack.loc};
    rec.variant_flagged = {rec.flagged};
    return rec;
}

const char* to_string(ExperimentKind k)
{
    switch (k) {
    case ExperimentKind::single: return "single";
    case ExperimentKind::target_sweep: return "target";
    case ExperimentKind::cellsize_sweep: return "cellsize";
    case ExperimentKind::knownaps_sweep: return "knownaps";
    }
    return "?";
}

ExperimentKind parse_experiment_kind(const std::string& s)
{
    for (auto k : {ExperimentKind::single, ExperimentKind::target_sweep, ExperimentKind::cellsize_sweep,
                   ExperimentKind::knownaps_sweep})
        if (s == to_string(k))
            return k;
    throw ConfigError("unknown sweep kind '" + s + "' (expected target, cellsize, knownaps or single)");
}

void parallel_for(int n, int jobs, const std::function<void(int)>& f)
{
    const int threads = std::max(1, std::min(jobs, n));
    if (threads == 1) {
        for (int i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr first;
    std::mutex mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (int i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!first)
                        first = std::current_exception();
                    next = n;
                }
            }
        });
    for (auto& th : pool)
        th.join();
    if (first)
        std::rethrow_exception(first);
}

ResultRow aggregate(const std::vector<RealizationRecord>& recs, std::size_t variant, double sweep_value,
                    const Scenario& sc)
{
    ResultRow row;
    row.sweep_value = sweep_value;
    row.m_ue = sc.cfg.m_ue;
    row.n_tx = sc.cfg.n_tx;
    row.seed = sc.cfg.seed;
    int correct = 0;
    for (const auto& r : recs) {
        if (r.variant_flagged.at(variant)) {
            ++row.flagged;
            continue;
        }
        ++row.q_used;
        correct += r.variants.at(variant).correct;
        row.mean_gamma_t += r.gamma_t;
        row.mean_min_comm_sinr += r.min_comm_sinr;
    }
    if (row.q_used > 0) {
        row.p_d = static_cast<double>(correct) / row.q_used;
        row.mean_gamma_t /= row.q_used;
        row.mean_min_comm_sinr /= row.q_used;
    }
    return row;
}

namespace {

Scenario scenario_for_target(SimulationConfig cfg, NetworkLayout lay, double x)
{
    lay.target_pos = {x, -x};
    return validate_config(cfg, lay);
}

int known_count(double v, int n_tx)
{
    if (v != std::floor(v) || v < 1 || v > n_tx)
        throw ConfigError("known AP count must be an integer in [1, " + std::to_string(n_tx) + "], got " +
                          std::to_string(v));
    return static_cast<int>(v);
}

std::vector<RealizationRecord> run_batch(const Scenario& sc, const ExperimentSpec& spec, const std::string& tag)
{
    const int q_total = sc.cfg.q_realizations;
    std::vector<RealizationRecord> recs(static_cast<std::size_t>(q_total));
    std::mutex log_mu;
    parallel_for(q_total, spec.jobs, [&](int q) {
        const auto t0 = std::chrono::steady_clock::now();
        recs[static_cast<std::size_t>(q)] = run_realization(sc, derive_seed(sc.cfg.seed, q), q);
        if (spec.log) {
            const auto& r = recs[static_cast<std::size_t>(q)];
            const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::ostringstream os;
            os << tag << " q=" << q << " correct=" << r.attack.loc.correct
               << (r.flagged ? " flagged=" + r.flag_cause : std::string()) << " (" << dt << " s)";
            std::lock_guard<std::mutex> lock(log_mu);
            spec.log(os.str());
        }
    });
    return recs;
}

class RowSink {
public:
    explicit RowSink(const std::string& path)
    {
        if (path.empty())
            return;
        out_.open(path, std::ios::binary | std::ios::trunc);
        if (!out_)
            throw std::runtime_error("cannot open '" + path + "' for writing");
        out_ << csv_header();
        out_.flush();
    }

    void add(const ResultRow& r)
    {
        if (!out_.is_open())
            return;
        out_ << csv_line(r);
        out_.flush();
        if (!out_)
            throw std::runtime_error("write failed");
    }

private:
    std::ofstream out_;
};

} // namespace

ExperimentResult run_experiment(const ExperimentSpec& spec, const SimulationConfig& cfg, const NetworkLayout& layout)
{
    SimulationConfig base = cfg;
    NetworkLayout lay = layout;
    for (const auto& [k, v] : spec.overrides)
        apply_config_entry(base, lay, k, v);
    const Scenario sc = validate_config(base, lay);

    const bool sweep = spec.kind != ExperimentKind::single;
    if (sweep && spec.sweep_values.empty())
        throw ConfigError(std::string("sweep '") + to_string(spec.kind) + "' needs at least one value");
    for (double v : spec.sweep_values)
        if (!std::isfinite(v))
            throw ConfigError("sweep values must be finite");

    // Validate every point before any work.
    std::vector<Scenario> target_scenarios;
    std::vector<SearchGrid> grids;
    std::vector<int> known;
    switch (spec.kind) {
    case ExperimentKind::single: break;
    case ExperimentKind::target_sweep:
        for (double v : spec.sweep_values)
            target_scenarios.push_back(scenario_for_target(base, lay, v));
        break;
    case ExperimentKind::cellsize_sweep:
        for (double v : spec.sweep_values)
            grids.push_back(SearchGrid::make(base.grid_extent, v));
        break;
    case ExperimentKind::knownaps_sweep:
        for (double v : spec.sweep_values)
            known.push_back(known_count(v, base.n_tx));
        break;
    }

    ExperimentResult res;
    RowSink sink(spec.output_path);
    auto finish = [&](ResultRow row, std::vector<RealizationRecord> recs) {
        sink.add(row);
        res.rows.push_back(row);
        res.records.push_back(std::move(recs));
    };
    using clock = std::chrono::steady_clock;

    if (spec.kind == ExperimentKind::single || spec.kind == ExperimentKind::target_sweep) {
        const std::size_t points = spec.kind == ExperimentKind::single ? 1 : target_scenarios.size();
        for (std::size_t p = 0; p < points; ++p) {
            const Scenario& s = spec.kind == ExperimentKind::single ? sc : target_scenarios[p];
            const double value = spec.kind == ExperimentKind::single ? 0.0 : spec.sweep_values[p];
            const auto t0 = clock::now();
            auto recs = run_batch(s, spec, std::string(to_string(spec.kind)) + "=" + std::to_string(value));
            ResultRow row = aggregate(recs, 0, value, s);
            row.wall_time_s = std::chrono::duration<double>(clock::now() - t0).count();
            finish(row, std::move(recs));
        }
        return res;
    }

    // Grid and known-AP variants only change the voting stage: one batch of
    // realizations, relocalized per sweep value with a fresh vote stream.
    Scenario batch_sc = sc;
    if (spec.kind == ExperimentKind::knownaps_sweep)
        batch_sc.cfg.known_aps = 0;
    const auto t0 = clock::now();
    auto recs = run_batch(batch_sc, spec, to_string(spec.kind));
    for (auto& r : recs) {
        r.variants.clear();
        r.variant_flagged.clear();
        const bool design_flagged = r.flagged && r.flag_cause != "em_cap";
        for (std::size_t p = 0; p < spec.sweep_values.size(); ++p) {
            Rng vote_rng = make_stream(r.seed, Stream::votes);
            const int k = spec.kind == ExperimentKind::knownaps_sweep ? known[p] : batch_sc.known_ap_count();
            const SearchGrid& g = spec.kind == ExperimentKind::cellsize_sweep ? grids[p] : batch_sc.grid;
            r.variants.push_back(relocalize(batch_sc, r.attack, k, g, vote_rng));
            bool capped = false;
            for (int a = 0; a < k; ++a)
                capped = capped || r.attack.aps[static_cast<std::size_t>(a)].em_capped;
            r.variant_flagged.push_back(design_flagged || capped);
        }
    }
    const double wall = std::chrono::duration<double>(clock::now() - t0).count();
    for (std::size_t p = 0; p < spec.sweep_values.size(); ++p) {
        Scenario point = batch_sc;
        if (spec.kind == ExperimentKind::knownaps_sweep)
            point.cfg.known_aps = known[p];
        else
            point.grid = grids[p];
        ResultRow row = aggregate(recs, p, spec.sweep_values[p], point);
        row.wall_time_s = wall;
        sink.add(row);
        res.rows.push_back(row);
    }
    res.records.push_back(std::move(recs));
    return res;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string format_double(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// At least four significant digits for probabilities that are short
// decimals (0.5 -> 0.500000), exact round trip otherwise.
std::string format_probability(double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, 6);
    double back = 0.0;
    std::from_chars(buf, r.ptr, back);
    return back == v ? std::string(buf, r.ptr) : format_double(v);
}

double parse_field_double(const std::string& s)
{
    double v = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw std::runtime_error("bad CSV number '" + s + "'");
    return v;
}

template <class Int>
Int parse_field_int(const std::string& s)
{
    Int v = 0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size())
        throw std::runtime_error("bad CSV integer '" + s + "'");
    return v;
}

} // namespace

std::string csv_header()
{
    return "sweep_value,m_ue,n_tx,p_d,q_used,flagged,mean_gamma_t,mean_min_comm_sinr,seed\n";
}

std::string csv_line(const ResultRow& r)
{
    std::string s = format_double(r.sweep_value);
    s += ',' + std::to_string(r.m_ue);
    s += ',' + std::to_string(r.n_tx);
    s += ',' + format_probability(r.p_d);
    s += ',' + std::to_string(r.q_used);
    s += ',' + std::to_string(r.flagged);
    s += ',' + format_double(r.mean_gamma_t);
    s += ',' + format_double(r.mean_min_comm_sinr);
    s += ',' + std::to_string(r.seed);
    s += '\n';
    return s;
}

void emit_csv(const std::vector<ResultRow>& rows, const std::string& path)
{
    if (rows.empty())
        throw std::invalid_argument("emit_csv: no rows");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    out << csv_header();
    for (const auto& r : rows)
        out << csv_line(r);
    out.flush();
    if (!out)
        throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<ResultRow> read_csv(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line) || line + '\n' != csv_header())
        throw std::runtime_error("'" + path + "' does not start with the expected header");
    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string item;
        while (std::getline(ss, item, ','))
            f.push_back(item);
        if (f.size() != 9)
            throw std::runtime_error("bad CSV line '" + line + "'");
        ResultRow r;
        r.sweep_value = parse_field_double(f[0]);
        r.m_ue = parse_field_int<int>(f[1]);
        r.n_tx = parse_field_int<int>(f[2]);
        r.p_d = parse_field_double(f[3]);
        r.q_used = parse_field_int<int>(f[4]);
        r.flagged = parse_field_int<int>(f[5]);
        r.mean_gamma_t = parse_field_double(f[6]);
        r.mean_min_comm_sinr = parse_field_double(f[7]);
        r.seed = parse_field_int<std::uint64_t>(f[8]);
        rows.push_back(r);
    }
    return rows;
}

json to_json(const ExperimentResult& res)
{
    json rows = json::array();
    for (const auto& r : res.rows)
        rows.push_back(to_json(r));
    json recs = json::array();
    for (const auto& point : res.records) {
        json p = json::array();
        for (const auto& r : point)
            p.push_back(to_json(r));
        recs.push_back(std::move(p));
    }
    return json{{"rows", rows}, {"records", recs}};
}

} // namespace isac
