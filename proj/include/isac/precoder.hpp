#pragma once

// Joint sensing/communication precoder design by the constrained
// convex-concave procedure.
//
// Each outer iteration linearizes the sensing SINR around the previous
// precoders, solves the self-term subproblem (P1') and the cross-term
// subproblem (P2') as cone programs, adds their solutions, and refreshes the
// UE receive filters with the MMSE rule. The subproblems decouple across
// transmit APs: every constraint and every objective term involves a single
// W_k, so each AP contributes its own cone program.

#include <iosfwd>
#include <string>
#include <vector>

#include "isac/airlink.hpp"
#include "isac/socp.hpp"

namespace isac {

enum class CccpFlag { none, infeasible_init, subproblem_infeasible, solver_limit };

const char* to_string(CccpFlag f);

struct CccpTraceEntry {
    int iteration = 0;
    double gamma_t = 0.0;       // expected sensing SINR of the accepted iterate
    double max_violation = 0.0; // max_{i,k} relative shortfall (Gamma - gamma_ik) / Gamma, >= 0
    std::string solver_status;
    std::string accepted; // "sum", "p1", "p2" or "previous"
    double rel_change_w = 0.0;
    double rel_change_u = 0.0;
};

struct CccpState {
    PrecoderSet w;
    ReceiveBeamformers u;
    int p = 0;
    std::vector<double> gamma_t_history; // expected sensing SINR per accepted iterate
    RMatrix tau;                         // last P1' slacks, N_Ue x N_Tx (linear units)
    RMatrix mu;
    CccpFlag flag = CccpFlag::none;
    std::vector<CccpTraceEntry> trace;

    bool ok() const { return flag == CccpFlag::none; }
};

struct InitResult {
    PrecoderSet w;
    ReceiveBeamformers u;
    bool feasible = false;
    int attempts = 0;
};

/// Random feasible starting point. Precoder columns are drawn at random,
/// projected away from the other UEs' effective channels, and scaled to the
/// per-AP power budget; the UE share of the budget grows on each redraw.
InitResult init_precoders(const Scenario& sc, const CommChannelSet& ch, Rng& rng, int max_attempts = 20);

/// Whether gamma_{i,k} >= Gamma (1 - rel_tol) for every UE and AP.
bool comm_feasible(const Scenario& sc, const CommChannelSet& ch, const PrecoderSet& w,
                   const ReceiveBeamformers& u, double rel_tol = 0.0);

/// Largest relative SINR shortfall max(0, (Gamma - gamma_ik) / Gamma).
double max_comm_violation(const Scenario& sc, const CommChannelSet& ch, const PrecoderSet& w,
                          const ReceiveBeamformers& u);

// ---------------------------------------------------------------------------
// Subproblems. Variable layout for AP k: the columns of W_k / sqrt(P_T) as
// [Re w_0; Im w_0; ...; Re w_t; Im w_t], then tau_0..tau_{N_Ue-1}, then
// mu_0..mu_{N_Ue-1}. Slacks are normalized per UE by `slack_scale`.

struct ApProgram {
    socp::ConeProgram program;
    int ap = 0;
    int m_ap = 0;
    int columns = 0;
    double w_scale = 1.0;    // sqrt(P_T)
    RVector slack_scale;     // per UE: tau_i = slack_scale(i) * tau_hat_i

    RVector pack(const CMatrix& w_k) const;
    CMatrix unpack(const RVector& x) const;
    int tau_index(int i) const { return 2 * m_ap * columns + i; }
    int mu_index(int i) const { return 2 * m_ap * columns + (columns - 1) + i; }
};

ApProgram build_p1(const Scenario& sc, const CommChannelSet& ch, const SensingKernel& kern,
                   const PrecoderSet& w_prev, const ReceiveBeamformers& u, int k);
ApProgram build_p2(const Scenario& sc, const CommChannelSet& ch, const SensingKernel& kern,
                   const PrecoderSet& w_prev, const ReceiveBeamformers& u, int k);

/// Feasible slack completion of a precoder (tau = linearized numerator,
/// mu = interference plus noise) for evaluating a program at a given W_k.
RVector feasible_point(const ApProgram& prog, const Scenario& sc, const CommChannelSet& ch,
                       const PrecoderSet& w_prev, const ReceiveBeamformers& u, const CMatrix& w_k);

/// W1 + W2, each AP then scaled by min(1, sqrt(P_T / power)).
PrecoderSet combine_solutions(const PrecoderSet& w1, const PrecoderSet& w2, double p_t);

/// Per-AP projection onto the power ball.
PrecoderSet project_power(PrecoderSet w, double p_t);

/// MMSE receive filter of UE i (unnormalized).
CVector mmse_update(const CommChannelSet& ch, const PrecoderSet& w, double sigma_i2, int i);

/// Relative change ||a - b|| / ||a||.
double relative_change(const PrecoderSet& now, const PrecoderSet& before);
double relative_change(const CVector& now, const CVector& before);

CccpState run_algorithm1(const Scenario& sc, const CommChannelSet& ch, const SensingGeometry& geom, Rng& rng);

/// Continues from a given feasible start (used by run_algorithm1 and tests).
CccpState run_algorithm1_from(const Scenario& sc, const CommChannelSet& ch, const SensingKernel& kern,
                              PrecoderSet w0, ReceiveBeamformers u0);

/// Line-oriented trace: iteration, gamma_t, max violation, solver status, accepted candidate.
void write_trace(const CccpState& st, std::ostream& os);

} // namespace isac
