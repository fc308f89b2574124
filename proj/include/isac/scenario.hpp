#pragma once

// Configuration, geometry and the adversary's search grid.
//
// Powers are configured in dBm / dB / dBsm and converted once by
// validate_config(); everything downstream works in linear milliwatts and
// radians.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "isac/types.hpp"

namespace isac {

class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

struct SimulationConfig {
    int n_tx = 8;
    int n_rx = 4;
    int n_ue = 4;
    int m_ap = 64;
    int m_ue = 8;
    int block_len = 256;
    double p_t_dbm = 50.0;
    double gamma_db = 3.0;
    double sigma_i_dbm = -94.0;
    double sigma_n_dbm = -94.0;
    double sigma_rcs_dbsm = 10.0;
    double rcs_correlation = 1.0;
    double carrier_freq_hz = 1.9e9;
    double pathloss_exp = 3.0;
    double eps_cccp = 0.1;
    int i_max = 10;
    double sigma_err_dbm = 10.0;
    double em_cov_tol = 1e-5;
    double em_dof = 3.0;
    int em_max_iter = 200;
    int q_realizations = 100;
    int angle_grid_size = 361;
    std::uint64_t seed = 1;

    // Search grid and adversary knowledge.
    double grid_extent = 1000.0;
    double grid_cell = 50.0;
    int known_aps = 0; // 0 means all transmit APs

    // Cone solver controls for the precoder subproblems.
    double solver_tol = 1e-7;
    int solver_max_iter = 200;
};

struct NetworkLayout {
    std::vector<Point2> tx_ap_pos;
    std::vector<Point2> rx_ap_pos;
    std::vector<Point2> ue_pos;
    Point2 target_pos;
    int adversary_index = 0;
};

struct SearchGrid {
    double extent = 1000.0;
    double cell_size = 50.0;
    Point2 origin{0.0, 0.0};

    /// Throws ConfigError unless the cell size evenly divides the extent.
    static SearchGrid make(double extent, double cell_size);

    int cells_per_side() const;
    int cell_count() const;
    double half_extent() const { return 0.5 * extent; }
    bool contains(Point2 p) const;
    Point2 center_of(int cell) const;
};

/// Validated scenario: configuration plus derived linear quantities.
struct Scenario {
    SimulationConfig cfg;
    NetworkLayout layout;
    SearchGrid grid;

    double p_t = 0.0;        // mW
    double gamma = 0.0;      // linear SINR threshold
    double sigma_i2 = 0.0;   // UE noise, mW
    double sigma_n2 = 0.0;   // receive-AP noise, mW
    double sigma_rcs2 = 0.0; // m^2
    double sigma_err2 = 0.0; // channel-estimation error variance
    double lambda_c = 0.0;   // carrier wavelength, m

    int known_ap_count() const;
};

double db_to_linear(double db);
double linear_to_db(double lin);

/// Presets. "paper" follows the published parameter list; "desk" is the
/// reduced-scale configuration used by CI (M_AP=16, N=64, Q=50, Z=181).
SimulationConfig paper_config();
SimulationConfig desk_config();
SimulationConfig preset_config(const std::string& name);

/// Published AP/UE/target positions. With n_tx == 4 only the edge-midpoint
/// transmitters are kept.
NetworkLayout default_layout(int n_tx = 8);

Scenario validate_config(const SimulationConfig& cfg, const NetworkLayout& layout);

/// Global azimuth of (to - from) in (-pi, pi].
double azimuth(Point2 from, Point2 to);

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Row-major cell index of p (row 0 at the top, +y). Points on a shared
/// cell boundary go to the lower index. Returns nullopt outside the area.
std::optional<int> cell_of(const SearchGrid& grid, Point2 p);

// Flat "key = value" configuration files. Lines starting with '#' are
// comments. Point lists are written as "x,y; x,y; ...".
void apply_config_entry(SimulationConfig& cfg, NetworkLayout& layout, const std::string& key,
                        const std::string& value);
void load_config_file(const std::string& path, SimulationConfig& cfg, NetworkLayout& layout);
std::string format_config(const SimulationConfig& cfg, const NetworkLayout& layout);

} // namespace isac
