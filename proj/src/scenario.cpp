#include "isac/scenario.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace isac {

double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
double linear_to_db(double lin) { return 10.0 * std::log10(lin); }

SimulationConfig paper_config() { return SimulationConfig{}; }

SimulationConfig desk_config()
{
    SimulationConfig cfg;
    cfg.m_ap = 16;
    cfg.block_len = 64;
    cfg.q_realizations = 50;
    cfg.angle_grid_size = 181;
    return cfg;
}

SimulationConfig preset_config(const std::string& name)
{
    if (name == "paper")
        return paper_config();
    if (name == "desk")
        return desk_config();
    throw ConfigError("unknown preset '" + name + "' (expected paper or desk)");
}

NetworkLayout default_layout(int n_tx)
{
    NetworkLayout layout;
    if (n_tx == 4) {
        layout.tx_ap_pos = {{0, -500}, {0, 500}, {-500, 0}, {500, 0}};
    } else {
        layout.tx_ap_pos = {{-500, -500}, {500, 500}, {-500, 500}, {500, -500},
                            {0, -500},    {0, 500},   {-500, 0},   {500, 0}};
        if (n_tx < 8)
            layout.tx_ap_pos.resize(static_cast<std::size_t>(std::max(n_tx, 0)));
    }
    layout.rx_ap_pos = {{250, 250}, {-250, -250}, {-250, 250}, {250, -250}};
    layout.ue_pos = {{300, 300}, {-300, -300}, {-300, 300}, {300, -300}};
    layout.target_pos = {-75, 75};
    layout.adversary_index = 0;
    return layout;
}

SearchGrid SearchGrid::make(double extent, double cell_size)
{
    if (!(extent > 0.0) || !(cell_size > 0.0))
        throw ConfigError("search grid extent and cell size must be positive");
    const double ratio = extent / cell_size;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio)
        throw ConfigError("cell size " + std::to_string(cell_size) + " does not divide extent " +
                          std::to_string(extent));
    SearchGrid g;
    g.extent = extent;
    g.cell_size = cell_size;
    return g;
}

int SearchGrid::cells_per_side() const { return static_cast<int>(std::lround(extent / cell_size)); }

int SearchGrid::cell_count() const { return cells_per_side() * cells_per_side(); }

bool SearchGrid::contains(Point2 p) const
{
    const double h = half_extent();
    return std::abs(p.x - origin.x) <= h && std::abs(p.y - origin.y) <= h;
}

Point2 SearchGrid::center_of(int cell) const
{
    const int n = cells_per_side();
    const int row = cell / n;
    const int col = cell % n;
    const double h = half_extent();
    return {origin.x - h + (col + 0.5) * cell_size, origin.y + h - (row + 0.5) * cell_size};
}

std::optional<int> cell_of(const SearchGrid& grid, Point2 p)
{
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !grid.contains(p))
        return std::nullopt;
    const int n = grid.cells_per_side();
    const double h = grid.half_extent();
    // ceil(.) - 1 sends exact boundaries to the lower index.
    int col = static_cast<int>(std::ceil((p.x - grid.origin.x + h) / grid.cell_size)) - 1;
    int row = static_cast<int>(std::ceil((grid.origin.y + h - p.y) / grid.cell_size)) - 1;
    col = std::clamp(col, 0, n - 1);
    row = std::clamp(row, 0, n - 1);
    return row * n + col;
}

double wrap_angle(double a)
{
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi)
        a += 2.0 * kPi;
    return a;
}

double azimuth(Point2 from, Point2 to)
{
    const Point2 d = to - from;
    if (d.x == 0.0 && d.y == 0.0)
        throw std::invalid_argument("azimuth: coincident points");
    return wrap_angle(std::atan2(d.y, d.x));
}

int Scenario::known_ap_count() const
{
    if (cfg.known_aps <= 0)
        return cfg.n_tx;
    return std::min(cfg.known_aps, cfg.n_tx);
}

namespace {

void require(bool ok, const std::string& what)
{
    if (!ok)
        throw ConfigError(what);
}

bool finite_point(Point2 p) { return std::isfinite(p.x) && std::isfinite(p.y); }

} // namespace

Scenario validate_config(const SimulationConfig& cfg, const NetworkLayout& layout)
{
    require(cfg.n_tx >= 1 && cfg.n_rx >= 1 && cfg.n_ue >= 1, "AP/UE counts must be >= 1");
    require(cfg.m_ap >= 1 && cfg.m_ue >= 1, "antenna counts must be >= 1");
    require(cfg.block_len >= 2, "block_len must be >= 2");
    require(cfg.block_len >= cfg.m_ap, "block_len must be >= m_ap for LS pilot estimation");
    require(cfg.i_max >= 1 && cfg.q_realizations >= 1 && cfg.em_max_iter >= 1,
            "iteration and realization counts must be >= 1");
    require(cfg.angle_grid_size >= 2, "angle_grid_size must be >= 2");
    require(cfg.rcs_correlation >= 0.0 && cfg.rcs_correlation <= 1.0,
            "rcs_correlation must lie in [0,1]");
    require(cfg.eps_cccp > 0.0, "eps_cccp must be positive");
    require(cfg.em_cov_tol > 0.0, "em_cov_tol must be positive");
    require(cfg.em_dof > 0.0, "em_dof must be positive");
    require(cfg.solver_tol > 0.0 && cfg.solver_max_iter >= 1, "invalid solver controls");
    require(cfg.carrier_freq_hz > 0.0 && cfg.pathloss_exp > 0.0,
            "carrier frequency and path-loss exponent must be positive");
    require(cfg.known_aps >= 0 && cfg.known_aps <= cfg.n_tx, "known_aps must lie in [0, n_tx]");

    require(static_cast<int>(layout.tx_ap_pos.size()) == cfg.n_tx,
            "layout has " + std::to_string(layout.tx_ap_pos.size()) + " tx positions, n_tx = " +
                std::to_string(cfg.n_tx));
    require(static_cast<int>(layout.rx_ap_pos.size()) == cfg.n_rx,
            "layout has " + std::to_string(layout.rx_ap_pos.size()) + " rx positions, n_rx = " +
                std::to_string(cfg.n_rx));
    require(static_cast<int>(layout.ue_pos.size()) == cfg.n_ue,
            "layout has " + std::to_string(layout.ue_pos.size()) + " UE positions, n_ue = " +
                std::to_string(cfg.n_ue));
    require(layout.adversary_index >= 0 && layout.adversary_index < cfg.n_ue,
            "adversary_index out of range");
    require(finite_point(layout.target_pos), "target position must be finite");
    for (const auto* list : {&layout.tx_ap_pos, &layout.rx_ap_pos, &layout.ue_pos})
        for (Point2 p : *list)
            require(finite_point(p), "layout positions must be finite");

    Scenario sc;
    sc.cfg = cfg;
    sc.layout = layout;
    sc.grid = SearchGrid::make(cfg.grid_extent, cfg.grid_cell);
    sc.p_t = db_to_linear(cfg.p_t_dbm);
    sc.gamma = db_to_linear(cfg.gamma_db);
    sc.sigma_i2 = db_to_linear(cfg.sigma_i_dbm);
    sc.sigma_n2 = db_to_linear(cfg.sigma_n_dbm);
    sc.sigma_rcs2 = db_to_linear(cfg.sigma_rcs_dbsm);
    sc.sigma_err2 = db_to_linear(cfg.sigma_err_dbm);
    sc.lambda_c = kSpeedOfLight / cfg.carrier_freq_hz;
    return sc;
}

// ---------------------------------------------------------------------------
// Config files

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v)
{
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (trim(v.substr(used)).empty())
            return d;
    } catch (const std::exception&) {
    }
    throw ConfigError("bad numeric value for '" + key + "': '" + v + "'");
}

int parse_int(const std::string& key, const std::string& v)
{
    const double d = parse_double(key, v);
    if (d != std::floor(d) || std::abs(d) > 1e9)
        throw ConfigError("'" + key + "' must be an integer");
    return static_cast<int>(d);
}

Point2 parse_point(const std::string& key, const std::string& v)
{
    const auto comma = v.find(',');
    if (comma == std::string::npos)
        throw ConfigError("bad point for '" + key + "': '" + v + "' (expected x,y)");
    return {parse_double(key, trim(v.substr(0, comma))), parse_double(key, trim(v.substr(comma + 1)))};
}

std::vector<Point2> parse_points(const std::string& key, const std::string& v)
{
    std::vector<Point2> pts;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ';')) {
        item = trim(item);
        if (!item.empty())
            pts.push_back(parse_point(key, item));
    }
    return pts;
}

// Shortest text that parses back to the same double.
std::string num(double v)
{
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string format_points(const std::vector<Point2>& pts)
{
    std::string out;
    for (std::size_t i = 0; i < pts.size(); ++i)
        out += (i ? "; " : "") + num(pts[i].x) + "," + num(pts[i].y);
    return out;
}

} // namespace

void apply_config_entry(SimulationConfig& cfg, NetworkLayout& layout, const std::string& key,
                        const std::string& value)
{
    const std::string v = trim(value);
    auto d = [&] { return parse_double(key, v); };
    auto i = [&] { return parse_int(key, v); };

    if (key == "n_tx") cfg.n_tx = i();
    else if (key == "n_rx") cfg.n_rx = i();
    else if (key == "n_ue") cfg.n_ue = i();
    else if (key == "m_ap") cfg.m_ap = i();
    else if (key == "m_ue") cfg.m_ue = i();
    else if (key == "block_len") cfg.block_len = i();
    else if (key == "p_t_dbm") cfg.p_t_dbm = d();
    else if (key == "gamma_db") cfg.gamma_db = d();
    else if (key == "sigma_i_dbm") cfg.sigma_i_dbm = d();
    else if (key == "sigma_n_dbm") cfg.sigma_n_dbm = d();
    else if (key == "sigma_rcs_dbsm") cfg.sigma_rcs_dbsm = d();
    else if (key == "rcs_correlation") cfg.rcs_correlation = d();
    else if (key == "carrier_freq_hz") cfg.carrier_freq_hz = d();
    else if (key == "pathloss_exp") cfg.pathloss_exp = d();
    else if (key == "eps_cccp") cfg.eps_cccp = d();
    else if (key == "i_max") cfg.i_max = i();
    else if (key == "sigma_err_dbm") cfg.sigma_err_dbm = d();
    else if (key == "em_cov_tol") cfg.em_cov_tol = d();
    else if (key == "em_dof") cfg.em_dof = d();
    else if (key == "em_max_iter") cfg.em_max_iter = i();
    else if (key == "q_realizations") cfg.q_realizations = i();
    else if (key == "angle_grid_size") cfg.angle_grid_size = i();
    else if (key == "seed") {
        try {
            cfg.seed = std::stoull(v);
        } catch (const std::exception&) {
            throw ConfigError("bad seed '" + v + "'");
        }
    }
    else if (key == "grid_extent") cfg.grid_extent = d();
    else if (key == "grid_cell") cfg.grid_cell = d();
    else if (key == "known_aps") cfg.known_aps = i();
    else if (key == "solver_tol") cfg.solver_tol = d();
    else if (key == "solver_max_iter") cfg.solver_max_iter = i();
    else if (key == "tx_ap_pos") layout.tx_ap_pos = parse_points(key, v);
    else if (key == "rx_ap_pos") layout.rx_ap_pos = parse_points(key, v);
    else if (key == "ue_pos") layout.ue_pos = parse_points(key, v);
    else if (key == "target_pos") layout.target_pos = parse_point(key, v);
    else if (key == "adversary_index") layout.adversary_index = i();
    else throw ConfigError("unknown config key '" + key + "'");
}

void load_config_file(const std::string& path, SimulationConfig& cfg, NetworkLayout& layout)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
        apply_config_entry(cfg, layout, trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

std::string format_config(const SimulationConfig& c, const NetworkLayout& l)
{
    std::ostringstream os;
    os << "n_tx = " << c.n_tx << "\n"
       << "n_rx = " << c.n_rx << "\n"
       << "n_ue = " << c.n_ue << "\n"
       << "m_ap = " << c.m_ap << "\n"
       << "m_ue = " << c.m_ue << "\n"
       << "block_len = " << c.block_len << "\n"
       << "p_t_dbm = " << num(c.p_t_dbm) << "\n"
       << "gamma_db = " << num(c.gamma_db) << "\n"
       << "sigma_i_dbm = " << num(c.sigma_i_dbm) << "\n"
       << "sigma_n_dbm = " << num(c.sigma_n_dbm) << "\n"
       << "sigma_rcs_dbsm = " << num(c.sigma_rcs_dbsm) << "\n"
       << "rcs_correlation = " << num(c.rcs_correlation) << "\n"
       << "carrier_freq_hz = " << num(c.carrier_freq_hz) << "\n"
       << "pathloss_exp = " << num(c.pathloss_exp) << "\n"
       << "eps_cccp = " << num(c.eps_cccp) << "\n"
       << "i_max = " << c.i_max << "\n"
       << "sigma_err_dbm = " << num(c.sigma_err_dbm) << "\n"
       << "em_cov_tol = " << num(c.em_cov_tol) << "\n"
       << "em_dof = " << num(c.em_dof) << "\n"
       << "em_max_iter = " << c.em_max_iter << "\n"
       << "q_realizations = " << c.q_realizations << "\n"
       << "angle_grid_size = " << c.angle_grid_size << "\n"
       << "seed = " << c.seed << "\n"
       << "grid_extent = " << num(c.grid_extent) << "\n"
       << "grid_cell = " << num(c.grid_cell) << "\n"
       << "known_aps = " << c.known_aps << "\n"
       << "solver_tol = " << num(c.solver_tol) << "\n"
       << "solver_max_iter = " << c.solver_max_iter << "\n"
       << "tx_ap_pos = " << format_points(l.tx_ap_pos) << "\n"
       << "rx_ap_pos = " << format_points(l.rx_ap_pos) << "\n"
       << "ue_pos = " << format_points(l.ue_pos) << "\n"
       << "target_pos = " << num(l.target_pos.x) << "," << num(l.target_pos.y) << "\n"
       << "adversary_index = " << l.adversary_index << "\n";
    return os.str();
}

} // namespace isac
