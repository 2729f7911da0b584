#include "hmimo/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

namespace hmimo {

double thermal_noise_dbm(double bandwidth_hz) {
  require(bandwidth_hz > 0.0, "bandwidth_hz must be positive");
  return -174.0 + 10.0 * std::log10(bandwidth_hz);
}

void SimConfig::resolve_units() {
  p_max_mw.clear();
  for (double p : p_max_dbm_grid) p_max_mw.push_back(dbm_to_mw(p));
  noise_mw = dbm_to_mw(noise_dbm);
  gamma_mw = dbm_to_mw(gamma_dbm);
}

void SimConfig::validate() const {
  ArrayLayout probe = layout;
  probe.n_rf = 1;
  probe.validate();
  require(!p_max_dbm_grid.empty(), "p_max_dbm_grid: at least one value is required");
  for (double p : p_max_dbm_grid)
    require(std::isfinite(p), "p_max_dbm_grid: values must be finite");
  require(p_max_mw.size() == p_max_dbm_grid.size(),
          "p_max_dbm_grid: linear values were not resolved");
  require(!n_rf_grid.empty(), "n_rf_grid: at least one value is required");
  require(k >= 1, "k: at least one target is required");
  require(u >= 1 && u <= k, "u: must satisfy 1 <= u <= k");
  require(l >= 1, "l: must be at least 1");
  for (int n : n_rf_grid)
    require(n > k, "n_rf_grid: every entry must exceed k (the noise subspace would be empty)");
  require(t_slots >= 1, "t_slots: must be at least 1");
  require(trials >= 1, "trials: must be at least 1");
  require(ula_spacing > 0.0, "ula_spacing: must be positive");
  require(bandwidth_hz > 0.0, "bandwidth_hz: must be positive");
  require(std::isfinite(noise_dbm), "noise_dbm: must be finite");
  require(!std::isnan(gamma_dbm), "gamma_dbm: must be a number");
  require(codebook_bits >= 1 && codebook_bits <= 16, "codebook_bits: must be in 1..16");
  require(waveguide_alpha >= 0.0, "waveguide_alpha: must be nonnegative");
  require(waveguide_beta >= 0.0, "waveguide_beta: must be nonnegative");
  require(search.max_sweeps >= 1, "max_sweeps: must be at least 1");
  require(search.rotations >= 1, "rotations: must be at least 1");
  require(spectrum_ceiling > 0.0, "spectrum_ceiling: must be positive");
  require(workers >= 0, "workers: must be nonnegative");
  const auto& s = scenario;
  require(s.r_min > 0.0 && s.r_max >= s.r_min, "r_min/r_max: need 0 < r_min <= r_max");
  require(s.theta_min >= 0.0 && s.theta_max <= kPi && s.theta_min <= s.theta_max,
          "theta_min_deg/theta_max_deg: need 0 <= min <= max <= 180");
  if (s.fixed_azimuth)
    require(s.azimuth >= 0.0 && s.azimuth < 2.0 * kPi, "azimuth_deg: must lie in [0, 360)");
  else
    require(s.phi_min >= 0.0 && s.phi_max <= 2.0 * kPi && s.phi_min < s.phi_max,
            "phi_min_deg/phi_max_deg: need 0 <= min < max <= 360");
  require(grid.r_step > 0.0, "grid_r_step: must be positive");
  require(grid.theta_step > 0.0, "grid_theta_step_deg: must be positive");
  require(grid.phi_step > 0.0, "grid_phi_step_deg: must be positive");
  require(grid.refine_levels >= 0, "refine_levels: must be nonnegative");
}

SearchGrid SimConfig::search_grid() const {
  SearchGrid g;
  g.r_axis = SearchGrid::axis(scenario.r_min, scenario.r_max, grid.r_step);
  g.theta_axis = SearchGrid::axis(scenario.theta_min, scenario.theta_max, grid.theta_step);
  if (scenario.fixed_azimuth)
    g.phi_axis = {scenario.azimuth};
  else
    g.phi_axis = SearchGrid::axis(scenario.phi_min,
                                  scenario.phi_max - 0.5 * grid.phi_step, grid.phi_step);
  g.refine_levels = grid.refine_levels;
  return g;
}

DesignParams SimConfig::design_params(double p_max_mw_value) const {
  DesignParams d;
  d.u = u;
  d.l = l;
  d.ula_spacing = ula_spacing;
  d.p_max = p_max_mw_value;
  d.gamma = gamma_mw;
  d.codebook = PhaseCodebook::uniform(codebook_bits);
  d.search = search;
  d.projection = projection;
  return d;
}

MicrostripParams SimConfig::microstrip(const ArrayLayout& cell_layout) const {
  MicrostripParams p = MicrostripParams::lossless(cell_layout);
  p.alpha.assign(cell_layout.n_rf, waveguide_alpha);
  if (waveguide_beta > 0.0) p.beta.assign(cell_layout.n_rf, waveguide_beta);
  return p;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t trial,
                            std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

CMat complex_gaussian(int rows, int cols, double variance, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double s = std::sqrt(variance / 2.0);
  CMat m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) {
      const double re = n(rng);
      const double im = n(rng);
      m(r, c) = cd(s * re, s * im);
    }
  return m;
}

Scenario draw_scenario(const ScenarioDistribution& dist, int k, int u, int l,
                       double ula_spacing, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Scenario sc;
  for (int i = 0; i < k; ++i) {
    SphericalCoord c;
    c.r = dist.r_min + (dist.r_max - dist.r_min) * unit(rng);
    c.theta = dist.theta_min + (dist.theta_max - dist.theta_min) * unit(rng);
    c.phi = dist.fixed_azimuth ? dist.azimuth
                               : dist.phi_min + (dist.phi_max - dist.phi_min) * unit(rng);
    if (c.phi >= 2.0 * kPi) c.phi -= 2.0 * kPi;
    sc.targets.push_back(c);
    sc.reflection.push_back(std::polar(1.0, 2.0 * kPi * unit(rng)));
  }
  for (int i = 0; i < u; ++i) sc.ues.push_back({sc.targets[i], l, ula_spacing});
  return sc;
}

AnalogBeamformer random_analog_bf(const ArrayLayout& layout,
                                  const MicrostripParams& params,
                                  const PhaseCodebook& codebook,
                                  PhaseProjection projection, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> pick(0, codebook.size() - 1);
  CMat grid(layout.n_rf, layout.n_e);
  for (int i = 0; i < layout.n_rf; ++i)
    for (int n = 0; n < layout.n_e; ++n) grid(i, n) = codebook.value(pick(rng));
  return assemble_analog_bf(compensate_weights(grid, params, projection));
}

CMat random_precoder(int n_rf, int streams, const CVec& p_tx,
                     const AnalogBeamformer& w_tx, double p_max,
                     std::mt19937_64& rng) {
  const CMat g = complex_gaussian(n_rf, streams, 1.0, rng);
  CMat v = g;
  if (streams <= n_rf) {
    Eigen::HouseholderQR<CMat> qr(g);
    v = qr.householderQ() * CMat::Identity(n_rf, streams);
  }
  return normalize_power(v, p_tx, w_tx, p_max);
}

SnapshotBlock synth_rx_snapshots(const Scenario& scenario, const BeamformerSet& bf,
                                 const NodeModel& node, int t_slots, double sigma2,
                                 std::mt19937_64& rng, bool include_si) {
  require(t_slots >= 1, "at least one time slot is required");
  require(sigma2 >= 0.0, "noise variance must be nonnegative");
  const ArrayLayout& layout = node.layout;
  const BlockColumns tx = bf.w_tx.matrix.scaled(node.p_tx);
  const BlockColumns rx = bf.w_rx.matrix.scaled(node.p_rx);
  const CMat x = tx.mul(bf.v);  // N x S
  const int streams = static_cast<int>(bf.v.cols());

  // Radar path W_RX^H P_RX^H H_R P_TX W_TX V, kept in low-rank form.
  CMat chain = CMat::Zero(layout.n_rf, streams);
  for (int k = 0; k < scenario.k(); ++k) {
    const CVec a_tx = steering_vector(Side::kTx, scenario.targets[k], layout);
    const CVec a_rx = steering_vector(Side::kRx, scenario.targets[k], layout);
    chain += scenario.reflection[k] * rx.adjoint_mul(a_rx) * (a_tx.adjoint() * x);
  }
  if (include_si) chain += (bf.w_si + bf.cancel.d) * bf.v;

  const CMat s = complex_gaussian(streams, t_slots, 1.0, rng);
  const CMat n = complex_gaussian(layout.elements(), t_slots, sigma2, rng);
  SnapshotBlock block;
  block.y = chain * s + rx.adjoint_mul(n);
  return block;
}

CVec synth_ue_signal(const Scenario& scenario, const BeamformerSet& bf,
                     const NodeModel& node, int u, double sigma_u2,
                     std::mt19937_64& rng) {
  require(u >= 0 && u < scenario.u(), "UE index out of range");
  require(sigma_u2 >= 0.0, "noise variance must be nonnegative");
  const CMat h = dl_channel(scenario.ues[u], node.layout);
  const CMat x = bf.w_tx.matrix.scaled(node.p_tx).mul(bf.v);
  const CMat s = complex_gaussian(static_cast<int>(bf.v.cols()), 1, 1.0, rng);
  const CMat n = complex_gaussian(static_cast<int>(h.rows()), 1, sigma_u2, rng);
  return h * x * s + n;
}

namespace {

double log_det_hpd(const CMat& a) {
  Eigen::LLT<CMat> llt(a);
  require(llt.info() == Eigen::Success, "matrix is not positive definite",
          ErrorCode::kInfeasible);
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i) s += std::log(std::real(llt.matrixLLT()(i, i)));
  return 2.0 * s;
}

}  // namespace

double achievable_rate(const BeamformerSet& bf, const NodeModel& node,
                       const std::vector<CMat>& true_dl_channels,
                       const std::vector<double>& sigma_u2) {
  const int u_count = static_cast<int>(true_dl_channels.size());
  require(u_count >= 1 && static_cast<int>(sigma_u2.size()) == u_count,
          "one noise variance per UE channel is required", ErrorCode::kDimensionMismatch);
  const int l = static_cast<int>(true_dl_channels.front().rows());
  require(bf.v.cols() == u_count * l, "precoder must have U L columns",
          ErrorCode::kDimensionMismatch);
  const CMat x = bf.w_tx.matrix.scaled(node.p_tx).mul(bf.v);
  double rate = 0.0;
  for (int u = 0; u < u_count; ++u) {
    require(sigma_u2[u] > 0.0, "UE noise variance must be positive");
    const CMat hx = true_dl_channels[u] * x;  // L x U L
    CMat q = sigma_u2[u] * CMat::Identity(l, l);
    for (int v = 0; v < u_count; ++v)
      if (v != u) q += hx.middleCols(v * l, l) * hx.middleCols(v * l, l).adjoint();
    const CMat own = hx.middleCols(u * l, l);
    const CMat total = q + own * own.adjoint();
    rate += std::max(0.0, (log_det_hpd(total) - log_det_hpd(q)) / std::log(2.0));
  }
  return rate;
}

double rmse(const std::vector<double>& errors) {
  require(!errors.empty(), "RMSE of an empty error list");
  double s = 0.0;
  for (double e : errors) s += e * e;
  return std::sqrt(s / static_cast<double>(errors.size()));
}

namespace {

std::vector<SphericalCoord> coords_of(const std::vector<TargetEstimate>& est) {
  std::vector<SphericalCoord> c;
  for (const auto& e : est) c.push_back(e.coord);
  return c;
}

double lorentzian_deviation(const AnalogBeamformer& w) {
  const CMat& g = w.matrix.grid();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < g.size(); ++i)
    worst = std::max(worst, std::abs(std::abs(g(i) - cd(0.0, 0.5)) - 0.5));
  return worst;
}

}  // namespace

TrialResult run_trial(const SimConfig& config, const NodeModel& node,
                      const Scenario& scenario, double p_max_mw, int trial) {
  TrialResult res;
  res.trial = trial;
  res.n_rf = node.layout.n_rf;
  res.truth = scenario.targets;
  const ArrayLayout& layout = node.layout;
  const SearchGrid grid = config.search_grid();
  const DesignParams design = config.design_params(p_max_mw);
  const double sigma2 = config.noise_mw;
  auto beams = make_stream(config.seed, trial, 1);
  auto noise1 = make_stream(config.seed, trial, 2);
  auto noise2 = make_stream(config.seed, trial, 3);

  // Phase 1: random codebook beams, enough streams to excite all targets.
  AnalogBeamformer w_tx0 = random_analog_bf(layout, node.tx_params, design.codebook,
                                            config.projection, beams);
  AnalogBeamformer w_rx0 = random_analog_bf(layout, node.rx_params, design.codebook,
                                            config.projection, beams);
  const int streams = std::min(layout.n_rf, std::max(config.u * config.l, config.k));
  CMat v0 = random_precoder(layout.n_rf, streams, node.p_tx, w_tx0, p_max_mw, beams);
  const BeamformerSet probe = make_beamformer_set(std::move(w_tx0), std::move(w_rx0),
                                                  std::move(v0), node, p_max_mw,
                                                  design.gamma);
  const SnapshotBlock y1 = synth_rx_snapshots(scenario, probe, node, config.t_slots,
                                              sigma2, noise1);
  const EstimationResult est1 = estimate_targets(y1, config.k, grid, probe.w_rx,
                                                 node.p_rx, layout,
                                                 config.spectrum_ceiling);
  res.initial_estimates = est1.targets;

  // Estimates are attributed to UEs through the minimum-cost pairing.
  const Matching m1 = match_estimates(coords_of(est1.targets), scenario.targets);
  std::vector<SphericalCoord> ordered;
  for (int t = 0; t < config.k; ++t) ordered.push_back(est1.targets[m1.assignment[t]].coord);

  // Phase 2: optimized beamformers, then re-estimation.
  const BeamformerSet bf = design_isac(ordered, node, design);
  const SnapshotBlock y2 = synth_rx_snapshots(scenario, bf, node, config.t_slots,
                                              sigma2, noise2);
  const EstimationResult est2 = estimate_targets(y2, config.k, grid, bf.w_rx, node.p_rx,
                                                 layout, config.spectrum_ceiling);
  res.estimates = est2.targets;
  res.degenerate = est1.degenerate || est2.degenerate;
  res.errors = match_estimates(coords_of(est2.targets), scenario.targets).errors;

  res.feasible = bf.feasible;
  res.alpha = bf.alpha;
  res.leakage_ratio = bf.leakage_ratio;
  res.max_si_row_power = bf.si_row_power.size() ? bf.si_row_power.maxCoeff() : 0.0;

  std::vector<CMat> true_dl, hat_dl;
  for (int u = 0; u < config.u; ++u) {
    true_dl.push_back(dl_channel(scenario.ues[u], layout));
    hat_dl.push_back(dl_channel({ordered[u], config.l, config.ula_spacing}, layout));
  }
  const std::vector<double> sigma_u2(config.u, sigma2);
  res.sum_rate = bf.feasible ? achievable_rate(bf, node, true_dl, sigma_u2) : 0.0;

  Scenario hat;
  hat.targets = ordered;
  hat.reflection.assign(ordered.size(), cd(1.0));
  const CMat h_r_hat = radar_channel(hat, layout, false);
  res.snr_radar = snr_radar(bf, node, h_r_hat, sigma2, false);
  res.snr_radar_cancelled = snr_radar(bf, node, h_r_hat, sigma2, true);
  res.snr_dl = snr_dl(bf, node, hat_dl, sigma_u2);

  const double si_before = (bf.w_si * bf.v).norm();
  const double si_after = ((bf.w_si + bf.cancel.d) * bf.v).norm();
  res.cancel_ratio = si_before > 0.0 ? si_after / si_before : 0.0;
  res.power_error =
      p_max_mw > 0.0
          ? std::abs(transmit_power(bf.v, node.p_tx, bf.w_tx) - p_max_mw) / p_max_mw
          : 0.0;
  res.lorentzian_error = std::max(lorentzian_deviation(bf.w_tx), lorentzian_deviation(bf.w_rx));
  res.ok = true;
  return res;
}

MetricsRecord aggregate(const std::vector<TrialResult>& trials, double p_max_dbm,
                        int n_rf) {
  MetricsRecord rec;
  rec.p_max_dbm = p_max_dbm;
  rec.n_rf = n_rf;
  std::vector<double> er, et, ep;
  double rate_sum = 0.0;
  int feasible = 0;
  for (const auto& t : trials) {
    if (!t.ok) continue;
    ++rec.trials_used;
    for (const auto& e : t.errors) {
      er.push_back(e.range);
      et.push_back(rad2deg(e.theta));
      ep.push_back(rad2deg(e.phi));
    }
    if (t.feasible) {
      ++feasible;
      rate_sum += t.sum_rate;
    } else {
      ++rec.infeasible_count;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  rec.rmse_range_m = er.empty() ? nan : rmse(er);
  rec.rmse_elev_deg = et.empty() ? nan : rmse(et);
  rec.rmse_azim_deg = ep.empty() ? nan : rmse(ep);
  rec.mean_sum_rate = feasible > 0 ? rate_sum / feasible : nan;
  return rec;
}

ExperimentResult run_experiment(const SimConfig& config) {
  config.validate();
  const int n_p = static_cast<int>(config.p_max_dbm_grid.size());
  const int n_n = static_cast<int>(config.n_rf_grid.size());
  const int trials = config.trials;

  std::vector<NodeModel> nodes;
  for (int n_rf : config.n_rf_grid) {
    ArrayLayout cell = config.layout;
    cell.n_rf = n_rf;
    const MicrostripParams p = config.microstrip(cell);
    nodes.push_back(NodeModel::build(cell, p, p));
  }
  // Common scenarios across cells.
  std::vector<Scenario> scenarios;
  for (int t = 0; t < trials; ++t) {
    auto rng = make_stream(config.seed, t, 0);
    scenarios.push_back(draw_scenario(config.scenario, config.k, config.u, config.l,
                                      config.ula_spacing, rng));
  }

  ExperimentResult out;
  const std::size_t total = static_cast<std::size_t>(n_p) * n_n * trials;
  out.trials.resize(total);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t item = next++; item < total; item = next++) {
      const int t = static_cast<int>(item % trials);
      const int cell = static_cast<int>(item / trials);
      const int ip = cell / n_n, in = cell % n_n;
      TrialResult r;
      try {
        r = run_trial(config, nodes[in], scenarios[t], config.p_max_mw[ip], t);
      } catch (const std::exception& e) {
        r = TrialResult{};
        r.trial = t;
        r.n_rf = config.n_rf_grid[in];
        r.ok = false;
        r.error = e.what();
      }
      r.p_max_dbm = config.p_max_dbm_grid[ip];
      out.trials[item] = std::move(r);
    }
  };
  int workers = config.workers > 0 ? config.workers
                                   : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp<int>(workers, 1, static_cast<int>(std::max<std::size_t>(total, 1)));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (int ip = 0; ip < n_p; ++ip)
    for (int in = 0; in < n_n; ++in) {
      const std::size_t first = static_cast<std::size_t>(ip * n_n + in) * trials;
      const std::vector<TrialResult> cell(out.trials.begin() + first,
                                          out.trials.begin() + first + trials);
      out.metrics.push_back(aggregate(cell, config.p_max_dbm_grid[ip], config.n_rf_grid[in]));
    }
  return out;
}

}  // namespace hmimo
