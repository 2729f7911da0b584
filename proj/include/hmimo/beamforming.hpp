#pragma once

#include <vector>

#include "hmimo/dma.hpp"
#include "hmimo/estimation.hpp"

namespace hmimo {

// Fixed quantities of the full-duplex node for one array size: geometry,
// microstrip models of both panels and the self-interference channel.
struct NodeModel {
  ArrayLayout layout;
  MicrostripParams tx_params;
  MicrostripParams rx_params;
  CVec p_tx;  // diagonal of P_TX
  CVec p_rx;  // diagonal of P_RX
  CMat h_si;

  static NodeModel build(const ArrayLayout& layout, const MicrostripParams& tx,
                         const MicrostripParams& rx);
  static NodeModel lossless(const ArrayLayout& layout);
};

// 2^bits unit-modulus phases -pi/2 + k pi / 2^bits, k = 0 .. 2^bits - 1.
struct PhaseCodebook {
  int bits = 0;
  std::vector<double> phases;

  static PhaseCodebook uniform(int bits);
  int size() const { return static_cast<int>(phases.size()); }
  cd value(int index) const { return std::polar(1.0, phases.at(index)); }
  // Codebook entry closest on the circle; lowest index on ties.
  int nearest(double phase) const;
};

struct SearchOptions {
  int max_sweeps = 50;
  // Global phase rotations of the matched-filter start that are tried per
  // microstrip; the codebook covers only half the circle.
  int rotations = 32;
  double denominator_floor = 1e-200;
};

struct CodebookSolution {
  Eigen::MatrixXi index;  // n_rf x n_e codebook indices
  CMat weights;           // n_rf x n_e unit-modulus values
  double objective = 0.0;
  // Objective after every element update, one entry per coordinate-ascent run.
  std::vector<std::vector<double>> traces;
  bool one_opt = false;   // no single-element change improves the result
};

/// Maximizes ||H W~||^2 over block-sparse codebook weights; `h` has N columns.
CodebookSolution solve_op1(const CMat& h, const PhaseCodebook& codebook,
                           const ArrayLayout& layout,
                           const SearchOptions& options = {});

/// Maximizes ||W~_RX^H H_R W~_TX||^2 / ||W~_RX^H H_SI W~_TX||^2 over the RX
/// codebook weights for a fixed W~_TX (n_rf x n_e grid).
CodebookSolution solve_op2(const CMat& h_r, const CMat& h_si,
                           const CMat& w_tx_tilde, const PhaseCodebook& codebook,
                           const ArrayLayout& layout,
                           const SearchOptions& options = {});

// Objective values used by the searches, exposed for verification.
double op1_objective(const CMat& h, const CMat& w_grid);
double op2_objective(const CMat& h_r, const CMat& h_si, const CMat& w_tx_grid,
                     const CMat& w_rx_grid, double floor = 1e-200);

/// W_RX^H P_RX^H H_SI P_TX W_TX (N_RF x N_RF).
CMat effective_si(const AnalogBeamformer& w_rx, const CVec& p_rx,
                  const CMat& h_si, const CVec& p_tx,
                  const AnalogBeamformer& w_tx);

struct CancellationMatrix {
  CMat d;   // negated effective SI
  CMat b;   // right-singular vectors of -D, strongest first
  RVec singular_values;
};

CancellationMatrix digital_si_canceller(const AnalogBeamformer& w_rx,
                                        const CVec& p_rx, const CMat& h_si,
                                        const CVec& p_tx,
                                        const AnalogBeamformer& w_tx);
CancellationMatrix canceller_from_effective_si(const CMat& w_si);

// Rescales v so that ||P_TX W_TX v||^2 == p_max (zero stays zero).
CMat normalize_power(const CMat& v, const CVec& p_tx,
                     const AnalogBeamformer& w_tx, double p_max);
double transmit_power(const CMat& v, const CVec& p_tx,
                      const AnalogBeamformer& w_tx);

/// Single-UE digital precoder V = B G, G = sqrt(P_max) E.
CMat single_user_precoder(const CMat& h_dl_hat, const CVec& p_tx,
                          const AnalogBeamformer& w_tx, const CMat& b,
                          double p_max);

struct BdPrecoder {
  CMat v;                       // N_RF x U L
  CMat f;                       // N_RF x alpha
  std::vector<CMat> h_eff;      // per UE, L x alpha
  std::vector<CMat> g;          // per UE, alpha x L
};

/// Block-diagonalization precoder over the alpha weakest SI directions of B.
/// Throws kInfeasible when some UE has no usable null space.
BdPrecoder block_diag_precoder(const std::vector<CMat>& h_dl_hats,
                               const CVec& p_tx, const AnalogBeamformer& w_tx,
                               const CMat& b, double p_max, int alpha);

// max over u != u' of ||H_eff,u G_u'|| / ||H_eff,u G_u||.
double bd_leakage_ratio(const BdPrecoder& bd);

struct SiCheck {
  RVec row_power;           // ||[W~_SI V]_(i,:)||^2 per RX microstrip
  std::vector<bool> pass;
  bool feasible = true;
};

SiCheck check_si_constraint(const CMat& w_si, const CMat& v, double gamma);
SiCheck check_si_constraint(const AnalogBeamformer& w_rx, const CVec& p_rx,
                            const CMat& h_si, const CVec& p_tx,
                            const AnalogBeamformer& w_tx, const CMat& v,
                            double gamma);

struct BeamformerSet {
  AnalogBeamformer w_tx;
  AnalogBeamformer w_rx;
  CMat v;                 // N_RF x U L
  CancellationMatrix cancel;
  CMat w_si;              // effective SI before cancellation
  bool feasible = false;
  int alpha = 0;          // retained columns of B (N_RF for one UE)
  double gamma = 0.0;
  double p_max = 0.0;
  RVec si_row_power;
  double leakage_ratio = 0.0;  // BD inter-user leakage, 0 for one UE
};

/// Radar SNR; the interference term is ||W~_SI V||^2 as printed, or the
/// residual after digital cancellation when `after_cancellation` is set.
double snr_radar(const BeamformerSet& bf, const NodeModel& node,
                 const CMat& h_r_hat, double sigma2,
                 bool after_cancellation = false);

double snr_dl(const BeamformerSet& bf, const NodeModel& node,
              const std::vector<CMat>& h_dl_hats,
              const std::vector<double>& sigma_u2);

struct DesignParams {
  int u = 1;
  int l = 1;
  double ula_spacing = 0.00125;
  double p_max = 1.0;   // mW
  double gamma = 1e-11; // mW
  PhaseCodebook codebook = PhaseCodebook::uniform(10);
  SearchOptions search;
  PhaseProjection projection = PhaseProjection::kNearestEndpoint;
};

/// Full analog/digital design from K target estimates; the first U estimates
/// are the UEs.
BeamformerSet design_isac(const std::vector<SphericalCoord>& estimates,
                          const NodeModel& node, const DesignParams& params);

// Builds a beamformer set around given analog weights and precoder, with the
// exact digital canceller.
BeamformerSet make_beamformer_set(AnalogBeamformer w_tx, AnalogBeamformer w_rx,
                                  CMat v, const NodeModel& node, double p_max,
                                  double gamma);

}  // namespace hmimo
