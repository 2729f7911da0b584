// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hmimo/report.hpp"
#include "hmimo/simulate.hpp"

using namespace hmimo;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double lorentzian_error(const AnalogBeamformer& bf) {
  const CMat d = bf.matrix.dense();
  const int n_e = static_cast<int>(d.rows() / d.cols());
  double worst = 0.0;
  for (Eigen::Index i = 0; i < d.cols(); ++i)
    for (int n = 0; n < n_e; ++n) {
      const cd w = d(i * n_e + n, i);
      worst = std::max(worst, std::abs(std::abs(w - cd(0.0, 0.5)) - 0.5));
    }
  return worst;
}

// Desk-scale experiment configuration shared by criteria 3, 4 and 10.
SimConfig desk_config() {
  SimConfig c;
  c.layout = ArrayLayout::reference(4, 64);
  c.layout.n_rf = 4;
  c.ula_spacing = c.layout.d_rf;
  c.noise_dbm = thermal_noise_dbm(c.bandwidth_hz);
  c.workers = 0;
  return c;
}

// Invariant tallies over every feasible design seen in criteria 2 to 4.
struct Invariants {
  int designs = 0;
  int multi_user = 0;
  double cancel = 0.0;
  double leakage = 0.0;
  double power = 0.0;
  double lorentz = 0.0;
  int ok_trials = 0;

  void add(const TrialResult& t, int u) {
    if (!t.ok) return;
    ++ok_trials;
    lorentz = std::max(lorentz, t.lorentzian_error);
    if (!t.feasible) return;
    ++designs;
    cancel = std::max(cancel, t.cancel_ratio);
    power = std::max(power, t.power_error);
    if (u > 1) {
      ++multi_user;
      leakage = std::max(leakage, t.leakage_ratio);
    }
  }
};

void criterion_1() {
  const auto t0 = Clock::now();
  const NodeModel node = NodeModel::lossless(ArrayLayout::reference(4, 32));
  const PhaseCodebook cb = PhaseCodebook::uniform(10);
  SearchGrid g;
  g.r_axis = SearchGrid::axis(0.2, 1.5, 0.1);
  g.theta_axis = SearchGrid::axis(0.0, kPi / 2.0, deg2rad(0.5));
  g.phi_axis = {kPi / 2.0};
  g.refine_levels = 2;

  int exact = 0;
  const int cases = 10;
  for (int c = 0; c < cases; ++c) {
    auto rng = make_stream(101, c, 0);
    std::uniform_int_distribution<std::size_t> ri(0, g.r_axis.size() - 1);
    std::uniform_int_distribution<std::size_t> ti(1, g.theta_axis.size() - 2);
    Scenario s;
    s.targets = {{g.r_axis[ri(rng)], g.theta_axis[ti(rng)], kPi / 2.0}};
    s.ues = {{s.targets[0], 1, node.layout.d_rf}};
    s.reflection = {cd(1.0)};
    AnalogBeamformer w_tx = random_analog_bf(node.layout, node.tx_params, cb,
                                             PhaseProjection::kNearestEndpoint, rng);
    AnalogBeamformer w_rx = random_analog_bf(node.layout, node.rx_params, cb,
                                             PhaseProjection::kNearestEndpoint, rng);
    CMat v = random_precoder(4, 1, node.p_tx, w_tx, 1.0, rng);
    const BeamformerSet bf =
        make_beamformer_set(std::move(w_tx), std::move(w_rx), std::move(v), node, 1.0, 1.0);
    const SnapshotBlock y = synth_rx_snapshots(s, bf, node, 50, 0.0, rng, false);
    const auto est = estimate_targets(y, 1, g, bf.w_rx, node.p_rx, node.layout);
    const SphericalCoord& e = est.targets.at(0).coord;
    if (e.r == s.targets[0].r && e.theta == s.targets[0].theta && e.phi == s.targets[0].phi)
      ++exact;
  }
  const double secs = seconds_since(t0);
  report(1, exact == cases && secs < 10.0,
         fmt("%d/%d noiseless on-grid targets recovered exactly, %.2f s", exact, cases, secs));
}

void criterion_2(Invariants& inv) {
  const auto t0 = Clock::now();
  SimConfig c = desk_config();
  c.n_rf_grid = {6};
  c.p_max_dbm_grid = {20.0};
  c.scenario.r_min = 0.2;
  c.scenario.r_max = 1.0;
  c.resolve_units();
  c.validate();
  ArrayLayout cell = c.layout;
  cell.n_rf = 6;
  const MicrostripParams mp = c.microstrip(cell);
  const NodeModel node = NodeModel::build(cell, mp, mp);

  const int seeds = 20;
  std::vector<double> er, et;
  int failed = 0;
  for (int t = 0; t < seeds; ++t) {
    auto rng = make_stream(c.seed, t, 0);
    Scenario s = draw_scenario(c.scenario, c.k, c.u, c.l, c.ula_spacing, rng);
    std::uniform_real_distribution<double> jr(-0.05, 0.05), jt(-2.0, 2.0);
    const double base_r[3] = {0.4, 0.4, 0.4};
    const double base_t[3] = {10.0, 30.0, 50.0};
    for (int k = 0; k < 3; ++k)
      s.targets[k] = {base_r[k] + jr(rng), deg2rad(base_t[k] + jt(rng)), kPi / 2.0};
    for (int u = 0; u < c.u; ++u) s.ues[u].coord = s.targets[u];
    const TrialResult r = run_trial(c, node, s, c.p_max_mw[0], t);
    inv.add(r, c.u);
    if (!r.ok) {
      ++failed;
      continue;
    }
    for (const auto& e : r.errors) {
      er.push_back(e.range);
      et.push_back(rad2deg(e.theta));
    }
  }
  const double rr = er.empty() ? NAN : rmse(er), rt = et.empty() ? NAN : rmse(et);
  const double secs = seconds_since(t0);
  report(2, failed == 0 && rr < 0.2 && rt < 1.0 && secs < 300.0,
         fmt("K=3 at 20 dBm over %d seeds: range RMSE %.4f m (< 0.2), elevation RMSE "
             "%.4f deg (< 1), %d aborted, %.1f s",
             seeds, rr, rt, failed, secs));
}

void criteria_3_4(Invariants& inv) {
  const auto t0 = Clock::now();
  const int seeds = 50;
  SimConfig hi = desk_config();
  hi.trials = seeds;
  hi.n_rf_grid = {6};
  hi.p_max_dbm_grid = {-10.0, 0.0, 10.0, 20.0};
  hi.resolve_units();
  const ExperimentResult a = run_experiment(hi);

  SimConfig lo = hi;
  lo.n_rf_grid = {4};
  lo.p_max_dbm_grid = {10.0};
  lo.resolve_units();
  const ExperimentResult b = run_experiment(lo);
  for (const auto& t : a.trials) inv.add(t, hi.u);
  for (const auto& t : b.trials) inv.add(t, lo.u);

  for (const auto& m : a.metrics)
    std::printf("  n_rf=6 p=%+5.1f dBm: range %.4f m, elev %.4f deg, rate %.4f, infeasible %d\n",
                m.p_max_dbm, m.rmse_range_m, m.rmse_elev_deg, m.mean_sum_rate,
                m.infeasible_count);
  const MetricsRecord& m4 = b.metrics.at(0);
  std::printf("  n_rf=4 p=+10.0 dBm: range %.4f m, elev %.4f deg, rate %.4f, infeasible %d\n",
              m4.rmse_range_m, m4.rmse_elev_deg, m4.mean_sum_rate, m4.infeasible_count);

  // Each metric must be nonincreasing in at least 80% of its adjacent pairs.
  const int pairs = static_cast<int>(a.metrics.size()) - 1;
  int good_r = 0, good_t = 0;
  for (int i = 0; i < pairs; ++i) {
    good_r += a.metrics[i + 1].rmse_range_m <= a.metrics[i].rmse_range_m;
    good_t += a.metrics[i + 1].rmse_elev_deg <= a.metrics[i].rmse_elev_deg;
  }
  const bool pass3 = good_r >= 0.8 * pairs && good_t >= 0.8 * pairs;
  report(3, pass3,
         fmt("RMSE nonincreasing in p_max over %d seeds: range %d/%d pairs, elevation %d/%d "
             "pairs (need >= 80%% each)",
             seeds, good_r, pairs, good_t, pairs));

  const MetricsRecord& m6 = a.metrics.at(2);
  const bool pass4 = m6.rmse_range_m < m4.rmse_range_m &&
                     m6.rmse_elev_deg < m4.rmse_elev_deg &&
                     m6.mean_sum_rate > m4.mean_sum_rate;
  report(4, pass4,
         fmt("at 10 dBm, N_RF 6 vs 4: range %.4f vs %.4f m, elevation %.4f vs %.4f deg, "
             "rate %.4f vs %.4f bps/Hz (%.0f s for criteria 3-4)",
             m6.rmse_range_m, m4.rmse_range_m, m6.rmse_elev_deg, m4.rmse_elev_deg,
             m6.mean_sum_rate, m4.mean_sum_rate, seconds_since(t0)));
}

void criterion_8() {
  const PhaseCodebook cb = PhaseCodebook::uniform(4);
  std::mt19937_64 rng(808);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> pick(0, 3);
  const int shapes[4][2] = {{1, 2}, {1, 3}, {2, 2}, {1, 4}};
  int matched = 0;
  const int instances = 120;
  double worst_gap = 0.0;
  for (int inst = 0; inst < instances; ++inst) {
    const int* sh = shapes[pick(rng)];
    const ArrayLayout l = ArrayLayout::reference(sh[0], sh[1]);
    const int rows = 1 + inst % 3;
    CMat h(rows, l.elements());
    for (Eigen::Index i = 0; i < h.size(); ++i) h(i) = cd(g(rng), g(rng));
    const CodebookSolution sol = solve_op1(h, cb, l);

    // Exhaustive enumeration over all 16^(N_RF N_E) assignments.
    const int slots = l.elements();
    std::vector<int> idx(slots, 0);
    double best = -1.0;
    CMat w(l.n_rf, l.n_e);
    while (true) {
      for (int s = 0; s < slots; ++s) w(s / l.n_e, s % l.n_e) = cb.value(idx[s]);
      best = std::max(best, op1_objective(h, w));
      int p = 0;
      while (p < slots && ++idx[p] == cb.size()) idx[p++] = 0;
      if (p == slots) break;
    }
    const double gap = (best - sol.objective) / best;
    worst_gap = std::max(worst_gap, gap);
    if (gap <= 1e-12) ++matched;
  }
  report(8, matched == instances,
         fmt("solve_op1 matched exhaustive 4-bit enumeration on %d/%d instances (N_E <= 4), "
             "worst relative gap %.3g",
             matched, instances, worst_gap));
}

void criterion_10() {
  SimConfig c = desk_config();
  c.trials = 3;
  c.n_rf_grid = {4, 5};
  c.p_max_dbm_grid = {0.0, 20.0};
  c.seed = 77;
  c.resolve_units();
  c.workers = 1;
  const std::string a = metrics_csv(run_experiment(c).metrics);
  c.workers = 2;
  const std::string b = metrics_csv(run_experiment(c).metrics);
  report(10, a == b && !a.empty(),
         fmt("metrics.csv identical across two seeded runs (%zu bytes)", a.size()));
}

}  // namespace

int main() {
  Invariants inv;
  criterion_1();
  criterion_2(inv);
  criteria_3_4(inv);
  report(5, inv.designs > 0 && inv.cancel < 1e-10,
         fmt("max ||(W_SI + D) V|| / ||W_SI V|| = %.3g over %d feasible designs", inv.cancel,
             inv.designs));
  report(6, inv.multi_user > 0 && inv.leakage < 1e-8,
         fmt("max BD leakage ratio = %.3g over %d multi-user designs", inv.leakage,
             inv.multi_user));
  report(7, inv.designs > 0 && inv.power < 1e-9,
         fmt("max relative transmit-power error = %.3g over %d feasible designs", inv.power,
             inv.designs));
  criterion_8();

  // Criterion 9 also covers phase-1 probing beams.
  double probe = 0.0;
  {
    const ArrayLayout l = ArrayLayout::reference(6, 64);
    const MicrostripParams p = MicrostripParams::lossless(l);
    const PhaseCodebook cb = PhaseCodebook::uniform(10);
    for (int t = 0; t < 20; ++t) {
      auto rng = make_stream(5, t, 1);
      for (PhaseProjection mode : {PhaseProjection::kNearestEndpoint, PhaseProjection::kModuloPi})
        probe = std::max(probe, lorentzian_error(random_analog_bf(l, p, cb, mode, rng)));
    }
  }
  const double lz = std::max(inv.lorentz, probe);
  report(9, inv.ok_trials > 0 && lz < 1e-12,
         fmt("max | |w - j/2| - 1/2 | = %.3g over %d trials and probing beams", lz,
             inv.ok_trials));
  criterion_10();
  std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
