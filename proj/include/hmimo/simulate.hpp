#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hmimo/beamforming.hpp"

namespace hmimo {

struct ScenarioDistribution {
  double r_min = 1.0;   // m
  double r_max = 25.0;  // m
  double theta_min = 0.0;
  double theta_max = kPi / 2.0;
  bool fixed_azimuth = true;
  double azimuth = kPi / 2.0;  // used when fixed_azimuth
  double phi_min = 0.0;        // used otherwise
  double phi_max = 2.0 * kPi;
};

// Coarse MUSIC grid; the azimuth axis collapses to the fixed azimuth when
// the scenario pins it.
struct GridSpec {
  double r_step = 0.1;
  double theta_step = kPi / 360.0;  // 0.5 deg
  double phi_step = kPi / 90.0;     // 2 deg
  int refine_levels = 2;
};

struct SimConfig {
  ArrayLayout layout;  // n_rf is taken from n_rf_grid per cell
  double waveguide_alpha = 0.0;
  double waveguide_beta = 0.0;  // 0 selects 2 pi / lambda
  ScenarioDistribution scenario;
  GridSpec grid;
  std::vector<double> p_max_dbm_grid{-10.0, 0.0, 10.0, 20.0};
  std::vector<double> p_max_mw;  // resolved from p_max_dbm_grid
  std::vector<int> n_rf_grid{4, 5, 6};
  int t_slots = 200;
  int trials = 20;
  int k = 3;
  int u = 2;
  int l = 2;
  double ula_spacing = 0.00125;
  double bandwidth_hz = 150e3;
  double noise_dbm = 0.0;
  double noise_mw = 0.0;
  double gamma_dbm = -10.0;
  double gamma_mw = 0.0;
  int codebook_bits = 10;
  SearchOptions search;
  PhaseProjection projection = PhaseProjection::kNearestEndpoint;
  double spectrum_ceiling = 1e12;
  std::uint64_t seed = 1;
  int workers = 0;  // 0 selects the hardware concurrency

  // Fills the linear-unit fields from their dBm counterparts.
  void resolve_units();
  void validate() const;
  SearchGrid search_grid() const;
  DesignParams design_params(double p_max_mw_value) const;
  MicrostripParams microstrip(const ArrayLayout& cell_layout) const;
};

double thermal_noise_dbm(double bandwidth_hz);

// Independent generator for (seed, trial, purpose); identical inputs always
// give identical streams.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t trial,
                            std::uint64_t purpose);

/// Circularly-symmetric complex Gaussian matrix with E|x|^2 = variance.
CMat complex_gaussian(int rows, int cols, double variance, std::mt19937_64& rng);

Scenario draw_scenario(const ScenarioDistribution& dist, int k, int u, int l,
                       double ula_spacing, std::mt19937_64& rng);

/// Analog beamformer with codebook phases drawn uniformly, then compensated.
AnalogBeamformer random_analog_bf(const ArrayLayout& layout,
                                  const MicrostripParams& params,
                                  const PhaseCodebook& codebook,
                                  PhaseProjection projection, std::mt19937_64& rng);

/// Random orthonormal-column precoder scaled to the power budget.
CMat random_precoder(int n_rf, int streams, const CVec& p_tx,
                     const AnalogBeamformer& w_tx, double p_max,
                     std::mt19937_64& rng);

/// T receive slots of the radar branch. `include_si` adds the (cancelled)
/// self-interference path (W~_SI + D) V s.
SnapshotBlock synth_rx_snapshots(const Scenario& scenario, const BeamformerSet& bf,
                                 const NodeModel& node, int t_slots, double sigma2,
                                 std::mt19937_64& rng, bool include_si = true);

/// One received vector at UE u (L antennas).
CVec synth_ue_signal(const Scenario& scenario, const BeamformerSet& bf,
                     const NodeModel& node, int u, double sigma_u2,
                     std::mt19937_64& rng);

/// Sum over UEs of log2 det(I + Q_u^-1 H_u V_u V_u^H H_u^H), with H_u the
/// true channel through P_TX W_TX and Q_u noise plus inter-user interference.
double achievable_rate(const BeamformerSet& bf, const NodeModel& node,
                       const std::vector<CMat>& true_dl_channels,
                       const std::vector<double>& sigma_u2);

/// sqrt(mean(e^2)); throws on empty input.
double rmse(const std::vector<double>& errors);

struct TrialResult {
  int trial = 0;
  int n_rf = 0;
  double p_max_dbm = 0.0;
  bool ok = false;  // false when the trial aborted with an error
  std::string error;
  std::vector<SphericalCoord> truth;
  std::vector<TargetEstimate> initial_estimates;
  std::vector<TargetEstimate> estimates;
  bool degenerate = false;
  std::vector<ParameterError> errors;  // matched, one per target
  bool feasible = false;
  int alpha = 0;
  double sum_rate = 0.0;
  double snr_radar = 0.0;
  double snr_radar_cancelled = 0.0;
  double snr_dl = 0.0;
  // Invariant diagnostics of the produced design.
  double cancel_ratio = 0.0;      // ||(W~_SI + D) V|| / ||W~_SI V||
  double leakage_ratio = 0.0;
  double power_error = 0.0;       // relative deviation from P_max
  double lorentzian_error = 0.0;  // max | |w - j/2| - 1/2 |
  double max_si_row_power = 0.0;
};

struct MetricsRecord {
  double p_max_dbm = 0.0;
  int n_rf = 0;
  double rmse_range_m = 0.0;
  double rmse_elev_deg = 0.0;
  double rmse_azim_deg = 0.0;
  double mean_sum_rate = 0.0;  // NaN when no trial was feasible
  int trials_used = 0;
  int infeasible_count = 0;
};

struct ExperimentResult {
  std::vector<MetricsRecord> metrics;  // p_max-major, n_rf-minor
  std::vector<TrialResult> trials;     // same cell order, trial-minor
};

/// One Monte Carlo trial of the two-phase protocol on a given scenario.
TrialResult run_trial(const SimConfig& config, const NodeModel& node,
                      const Scenario& scenario, double p_max_mw, int trial);

MetricsRecord aggregate(const std::vector<TrialResult>& trials, double p_max_dbm,
                        int n_rf);

ExperimentResult run_experiment(const SimConfig& config);

}  // namespace hmimo
