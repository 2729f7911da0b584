#include "hmimo/estimation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

namespace hmimo {

CMat sample_covariance(const SnapshotBlock& block) {
  require(block.t_slots() >= 1 && block.y.rows() >= 1, "empty snapshot block");
  CMat r = block.y * block.y.adjoint() / static_cast<double>(block.t_slots());
  // Symmetrize to remove rounding asymmetry.
  return (r + r.adjoint()) / 2.0;
}

SubspaceDecomposition subspace_split(const CMat& covariance, int k) {
  const int m = static_cast<int>(covariance.rows());
  require(covariance.cols() == m, "covariance must be square",
          ErrorCode::kDimensionMismatch);
  require(k >= 1, "target count must be at least 1");
  if (k >= m)
    fail(ErrorCode::kInfeasible,
         "noise subspace is empty: K=" + std::to_string(k) +
             " requires more than " + std::to_string(m) + " RF chains");

  Eigen::SelfAdjointEigenSolver<CMat> es(covariance);
  require(es.info() == Eigen::Success, "eigendecomposition failed",
          ErrorCode::kInfeasible);
  // Eigen returns ascending order.
  SubspaceDecomposition d;
  d.eigenvalues = es.eigenvalues().reverse();
  const CMat u = es.eigenvectors().rowwise().reverse();
  d.signal_basis = u.leftCols(k);
  d.noise_basis = u.rightCols(m - k);
  return d;
}

void SearchGrid::validate() const {
  for (const auto* ax : {&r_axis, &theta_axis, &phi_axis}) {
    require(!ax->empty(), "search grid axis is empty");
    for (std::size_t i = 1; i < ax->size(); ++i)
      require((*ax)[i] > (*ax)[i - 1], "search grid axes must be increasing");
  }
  require(r_axis.front() > 0.0, "search ranges must be positive");
  require(refine_levels >= 0, "refine_levels must be nonnegative");
}

std::vector<double> SearchGrid::axis(double lo, double hi, double step) {
  require(step > 0.0 && hi >= lo, "invalid axis specification");
  const auto count = static_cast<long>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out(count);
  for (long i = 0; i < count; ++i) out[i] = lo + i * step;
  return out;
}

MusicSpectrum::MusicSpectrum(const SubspaceDecomposition& decomp,
                             const BlockColumns& w_rx, const CVec& p_rx,
                             const ArrayLayout& layout, double ceiling)
    : layout_(layout), ceiling_(ceiling) {
  layout.validate();
  require(w_rx.n_rf() == layout.n_rf && w_rx.n_e() == layout.n_e,
          "RX beamformer does not match layout", ErrorCode::kDimensionMismatch);
  require(decomp.noise_basis.rows() == layout.n_rf,
          "subspace dimension does not match RF chains",
          ErrorCode::kDimensionMismatch);
  const CMat combiner = w_rx.scaled(p_rx).grid().conjugate();
  comb_re_.resize(combiner.size());
  comb_im_.resize(combiner.size());
  for (int i = 0; i < layout.n_rf; ++i)
    for (int n = 0; n < layout.n_e; ++n) {
      comb_re_[static_cast<std::size_t>(i) * layout.n_e + n] = combiner(i, n).real();
      comb_im_[static_cast<std::size_t>(i) * layout.n_e + n] = combiner(i, n).imag();
    }
  noise_adj_ = decomp.noise_basis.adjoint();
  elem_x_.resize(layout.n_rf);
  for (int i = 0; i < layout.n_rf; ++i)
    elem_x_[i] = element_position(Side::kRx, i, 0, layout).x;
}

namespace {

constexpr double kInvFactorial[13] = {
    1.0, 1.0, 1.0 / 2, 1.0 / 6, 1.0 / 24, 1.0 / 120, 1.0 / 720, 1.0 / 5040,
    1.0 / 40320, 1.0 / 362880, 1.0 / 3628800, 1.0 / 39916800, 1.0 / 479001600};

// Branch-free sin/cos for the spectrum inner loop: Cody-Waite reduction by
// pi/2 followed by minimax polynomials on [-pi/4, pi/4]. Accurate to a few
// ulp for |x| < 2^28, and simple enough for the compiler to vectorize.
inline void fast_sincos(double x, double& s_out, double& c_out) {
  constexpr double kTwoOverPi = 0.63661977236758134308;
  constexpr double kP1 = 1.5707962512969970703125;
  constexpr double kP2 = 7.5497894158615963533e-08;
  constexpr double kP3 = 5.3903028581581190529e-15;
  constexpr double kRound = 6755399441055744.0;  // 1.5 * 2^52
  const double q = (x * kTwoOverPi + kRound) - kRound;
  const double r = ((x - q * kP1) - q * kP2) - q * kP3;
  const double z = r * r;
  const double ps = ((((1.58962301576546568060e-10 * z - 2.50507477628578072866e-8) * z +
                       2.75573136213857245213e-6) * z - 1.98412698295895385996e-4) * z +
                     8.33333333332211858878e-3) * z - 1.66666666666666307295e-1;
  const double pc = ((((-1.13585365213876817300e-11 * z + 2.08757008419747316778e-9) * z -
                       2.75573141792967388112e-7) * z + 2.48015872888517045348e-5) * z -
                     1.38888888888730564116e-3) * z + 4.16666666666665929218e-2;
  const double sn = r + r * z * ps;
  const double cs = 1.0 - 0.5 * z + z * z * pc;
  // Quadrant selection written arithmetically so the loop stays branch-free.
  const int quadrant = static_cast<int>(q);
  const double swap = static_cast<double>(quadrant & 1);
  const double sign_s = 1.0 - 2.0 * static_cast<double>((quadrant >> 1) & 1);
  const double sign_c = 1.0 - 2.0 * static_cast<double>(((quadrant + 1) >> 1) & 1);
  s_out = (sn + swap * (cs - sn)) * sign_s;
  c_out = (cs + swap * (sn - cs)) * sign_c;
}

// exp(x) for x in [-700, 0], branch-free: x = k ln2 + r, |r| <= ln2 / 2,
// Taylor series for e^r and 2^k assembled from the exponent bits.
inline double fast_exp_nonpositive(double x) {
  constexpr double kInvLn2 = 1.4426950408889634074;
  constexpr double kLn2Hi = 6.93147180369123816490e-01;
  constexpr double kLn2Lo = 1.90821492927058770002e-10;
  constexpr double kRound = 6755399441055744.0;
  x = std::max(x, -700.0);
  const double shifted = x * kInvLn2 + kRound;
  const double k = shifted - kRound;
  const double r = (x - k * kLn2Hi) - k * kLn2Lo;
  const double* f = kInvFactorial;
  double p = 1.0 / 6227020800.0;  // 1/13!
  p = p * r + f[12]; p = p * r + f[11]; p = p * r + f[10]; p = p * r + f[9];
  p = p * r + f[8];  p = p * r + f[7];  p = p * r + f[6];  p = p * r + f[5];
  p = p * r + f[4];  p = p * r + f[3];  p = p * r + f[2];  p = p * r + f[1];
  p = p * r + 1.0;
  // The low mantissa bits of `shifted` hold k in two's complement.
  std::uint64_t kbits, rbits;
  std::memcpy(&kbits, &shifted, sizeof kbits);
  std::memcpy(&rbits, &kRound, sizeof rbits);
  const std::uint64_t bits = (kbits - rbits + 1023) << 52;
  double scale;
  std::memcpy(&scale, &bits, sizeof scale);
  return p * scale;
}

}  // namespace

double spectrum_exp_error(double x) {
  const double ref = std::exp(x);
  return std::abs(fast_exp_nonpositive(x) - ref) / ref;
}

double spectrum_sincos_error(double x) {
  double s = 0.0, c = 0.0;
  fast_sincos(x, s, c);
  return std::max(std::abs(s - std::sin(x)), std::abs(c - std::cos(x)));
}

double MusicSpectrum::denominator(const SphericalCoord& coord) const {
  const Point3 p = to_cartesian(coord);
  const double k0 = 2.0 * kPi / layout_.lambda;
  const double amp0 = std::sqrt(2.0 * (layout_.b_gain + 1.0)) * layout_.lambda / (4.0 * kPi);
  const double quarter_b = layout_.b_gain / 4.0;
  const bool b_is_two = layout_.b_gain == 2.0;
  const double half_kappa = layout_.kappa_abs / 2.0;
  const int ne = layout_.n_e;
  std::vector<double> d2(ne), d(ne), amp(ne), re(ne), im(ne);
  CVec m(layout_.n_rf);
  for (int i = 0; i < layout_.n_rf; ++i) {
    const double dx = elem_x_[i] - p.x;
    const double h2 = dx * dx + p.y * p.y;
    // Amplitude sqrt(F) lambda / (4 pi d) with cos of the element
    // elevation equal to h / d.
    const double h = std::sqrt(h2);
    for (int n = 0; n < ne; ++n) {
      const double dz = n * layout_.d_e - p.z;
      d2[n] = h2 + dz * dz;
      d[n] = std::sqrt(d2[n]);
    }
    if (b_is_two) {
      for (int n = 0; n < ne; ++n) amp[n] = amp0 * h / d2[n];
    } else {
      for (int n = 0; n < ne; ++n) amp[n] = amp0 * std::pow(h2 / d2[n], quarter_b) / d[n];
    }
    if (half_kappa > 0.0)
      for (int n = 0; n < ne; ++n) amp[n] *= fast_exp_nonpositive(-half_kappa * d[n]);
    for (int n = 0; n < ne; ++n) {
      double sn, cs;
      fast_sincos(k0 * d[n], sn, cs);
      re[n] = amp[n] * cs;
      im[n] = amp[n] * sn;
    }
    double acc_re = 0.0, acc_im = 0.0;
    const double* cr = &comb_re_[static_cast<std::size_t>(i) * ne];
    const double* ci = &comb_im_[static_cast<std::size_t>(i) * ne];
    for (int n = 0; n < ne; ++n) {
      acc_re += cr[n] * re[n] - ci[n] * im[n];
      acc_im += cr[n] * im[n] + ci[n] * re[n];
    }
    m(i) = cd(acc_re, acc_im);
  }
  const double norm2 = m.squaredNorm();
  if (!(norm2 > 0.0)) return 1.0;
  return (noise_adj_ * m).squaredNorm() / norm2;
}

double MusicSpectrum::operator()(const SphericalCoord& coord) const {
  const double den = denominator(coord);
  if (den <= 0.0 || 1.0 / den > ceiling_) return ceiling_;
  return 1.0 / den;
}

double music_spectrum(const SphericalCoord& coord,
                      const SubspaceDecomposition& decomp,
                      const AnalogBeamformer& w_rx, const CVec& p_rx,
                      const ArrayLayout& layout, double ceiling) {
  return MusicSpectrum(decomp, w_rx.matrix, p_rx, layout, ceiling)(coord);
}

namespace {

struct GridIndex {
  int r, t, p;
};

double axis_step(const std::vector<double>& ax) {
  return ax.size() > 1 ? (ax.back() - ax.front()) / (ax.size() - 1) : 0.0;
}

constexpr int kCandidatesPerTarget = 4;

constexpr int kMaxRecenters = 8;

// Refines one peak by successive factor-10 shrinkage of a local grid. Within a
// level the window is re-centred while its best point sits on the window edge,
// so the search can follow narrow valleys that run diagonally across cells.
TargetEstimate refine(const MusicSpectrum& spec, const SearchGrid& grid,
                      SphericalCoord best, double best_den) {
  std::array<double, 3> step = {axis_step(grid.r_axis), axis_step(grid.theta_axis),
                                axis_step(grid.phi_axis)};
  const std::array<std::pair<double, double>, 3> bounds = {
      std::pair{grid.r_axis.front(), grid.r_axis.back()},
      std::pair{grid.theta_axis.front(), grid.theta_axis.back()},
      std::pair{grid.phi_axis.front(), grid.phi_axis.back()}};
  for (int level = 0; level < grid.refine_levels; ++level) {
    for (int a = 0; a < 3; ++a) step[a] /= 10.0;
    for (int pass = 0; pass < kMaxRecenters; ++pass) {
      std::array<std::vector<double>, 3> local;
      const std::array<double, 3> center = {best.r, best.theta, best.phi};
      for (int a = 0; a < 3; ++a) {
        if (step[a] == 0.0) {
          local[a] = {center[a]};
          continue;
        }
        for (int j = -10; j <= 10; ++j) {
          const double v = center[a] + j * step[a];
          if (v >= bounds[a].first - 1e-12 && v <= bounds[a].second + 1e-12)
            local[a].push_back(std::clamp(v, bounds[a].first, bounds[a].second));
        }
      }
      SphericalCoord level_best = best;
      double level_den = best_den;
      bool on_edge = false;
      for (std::size_t ir = 0; ir < local[0].size(); ++ir)
        for (std::size_t it = 0; it < local[1].size(); ++it)
          for (std::size_t ip = 0; ip < local[2].size(); ++ip) {
            const SphericalCoord c{local[0][ir], local[1][it], local[2][ip]};
            const double den = spec.denominator(c);
            if (den < level_den) {
              level_den = den;
              level_best = c;
              auto edge = [](std::size_t i, const std::vector<double>& ax) {
                return ax.size() > 1 && (i == 0 || i + 1 == ax.size());
              };
              on_edge = edge(ir, local[0]) || edge(it, local[1]) || edge(ip, local[2]);
            }
          }
      best = level_best;
      best_den = level_den;
      if (!on_edge) break;
    }
  }
  const double value =
      best_den <= 0.0 ? spec.ceiling() : std::min(spec.ceiling(), 1.0 / best_den);
  return {best, value};
}

}  // namespace

EstimationResult search_peaks(const MusicSpectrum& spectrum, int k,
                              const SearchGrid& grid) {
  grid.validate();
  require(k >= 1, "target count must be at least 1");
  const int nr = static_cast<int>(grid.r_axis.size());
  const int nt = static_cast<int>(grid.theta_axis.size());
  const int np = static_cast<int>(grid.phi_axis.size());
  std::vector<double> den(static_cast<std::size_t>(nr) * nt * np);
  auto at = [&](int r, int t, int p) -> double& {
    return den[(static_cast<std::size_t>(r) * nt + t) * np + p];
  };
  for (int r = 0; r < nr; ++r)
    for (int t = 0; t < nt; ++t)
      for (int p = 0; p < np; ++p)
        at(r, t, p) = spectrum.denominator(
            {grid.r_axis[r], grid.theta_axis[t], grid.phi_axis[p]});

  // Local maxima of the spectrum are local minima of the denominator.
  std::vector<GridIndex> peaks;
  for (int r = 0; r < nr; ++r)
    for (int t = 0; t < nt; ++t)
      for (int p = 0; p < np; ++p) {
        const double v = at(r, t, p);
        bool is_peak = true;
        for (int dr = -1; dr <= 1 && is_peak; ++dr)
          for (int dt = -1; dt <= 1 && is_peak; ++dt)
            for (int dp = -1; dp <= 1 && is_peak; ++dp) {
              if (dr == 0 && dt == 0 && dp == 0) continue;
              const int rr = r + dr, tt = t + dt, pp = p + dp;
              if (rr < 0 || rr >= nr || tt < 0 || tt >= nt || pp < 0 || pp >= np)
                continue;
              if (at(rr, tt, pp) < v) is_peak = false;
            }
        if (is_peak) peaks.push_back({r, t, p});
      }
  // Stable sort keeps lexicographic grid order among equal values.
  std::stable_sort(peaks.begin(), peaks.end(), [&](const GridIndex& a, const GridIndex& b) {
    return at(a.r, a.t, a.p) < at(b.r, b.t, b.p);
  });

  // Refining only the K deepest grid minima misses narrow true nulls that sit
  // between grid nodes, so a wider candidate pool is refined and re-ranked.
  std::vector<GridIndex> pool;
  const int pool_size = kCandidatesPerTarget * k;
  for (const auto& pk : peaks) {
    if (static_cast<int>(pool.size()) == pool_size) break;
    const bool too_close = std::any_of(pool.begin(), pool.end(), [&](const GridIndex& c) {
      return std::abs(c.r - pk.r) <= 1 && std::abs(c.t - pk.t) <= 1 &&
             std::abs(c.p - pk.p) <= 1;
    });
    if (!too_close) pool.push_back(pk);
  }
  std::vector<TargetEstimate> refined;
  for (const auto& c : pool)
    refined.push_back(refine(spectrum, grid,
                             {grid.r_axis[c.r], grid.theta_axis[c.t], grid.phi_axis[c.p]},
                             at(c.r, c.t, c.p)));
  std::vector<std::size_t> order(refined.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return refined[a].spectrum_value > refined[b].spectrum_value;
  });
  const std::array<double, 3> cell = {axis_step(grid.r_axis), axis_step(grid.theta_axis),
                                      axis_step(grid.phi_axis)};
  auto separated = [&](const SphericalCoord& a, const SphericalCoord& b) {
    const double da[3] = {a.r - b.r, a.theta - b.theta, a.phi - b.phi};
    for (int ax = 0; ax < 3; ++ax)
      if (cell[ax] > 0.0 && std::abs(da[ax]) >= cell[ax] * (1.0 - 1e-9)) return true;
    return false;
  };

  EstimationResult result;
  for (std::size_t i : order) {
    if (static_cast<int>(result.targets.size()) == k) break;
    const bool ok = std::all_of(result.targets.begin(), result.targets.end(),
                                [&](const TargetEstimate& t) {
                                  return separated(t.coord, refined[i].coord);
                                });
    if (ok) result.targets.push_back(refined[i]);
  }
  if (static_cast<int>(result.targets.size()) < k) {
    result.degenerate = true;
    GridIndex g{0, 0, 0};
    if (!peaks.empty()) {
      g = peaks.front();
    } else {
      const auto it = std::min_element(den.begin(), den.end());
      const auto flat = static_cast<int>(it - den.begin());
      g = {flat / (nt * np), (flat / np) % nt, flat % np};
    }
    const TargetEstimate top =
        result.targets.empty()
            ? refine(spectrum, grid,
                     {grid.r_axis[g.r], grid.theta_axis[g.t], grid.phi_axis[g.p]},
                     at(g.r, g.t, g.p))
            : result.targets.front();
    while (static_cast<int>(result.targets.size()) < k) result.targets.push_back(top);
  }
  return result;
}

EstimationResult estimate_targets(const SnapshotBlock& block, int k,
                                  const SearchGrid& grid,
                                  const AnalogBeamformer& w_rx,
                                  const CVec& p_rx, const ArrayLayout& layout,
                                  double ceiling) {
  const SubspaceDecomposition decomp = subspace_split(sample_covariance(block), k);
  const MusicSpectrum spectrum(decomp, w_rx.matrix, p_rx, layout, ceiling);
  return search_peaks(spectrum, k, grid);
}

double matching_cost(const SphericalCoord& est, const SphericalCoord& truth) {
  double dphi = std::abs(est.phi - truth.phi);
  dphi = std::min(dphi, 2.0 * kPi - dphi);
  return std::abs(est.r - truth.r) / 25.0 + std::abs(est.theta - truth.theta) / (kPi / 2.0) +
         dphi / (2.0 * kPi);
}

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  require(cost.cols() == n, "assignment cost must be square",
          ErrorCode::kDimensionMismatch);
  // Shortest augmenting path formulation with potentials (1-based inside).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

Matching match_estimates(const std::vector<SphericalCoord>& estimates,
                         const std::vector<SphericalCoord>& truth) {
  require(estimates.size() == truth.size(),
          "estimate and truth lists differ in length",
          ErrorCode::kDimensionMismatch);
  const int k = static_cast<int>(truth.size());
  Matching m;
  if (k == 0) return m;
  Eigen::MatrixXd cost(k, k);
  for (int t = 0; t < k; ++t)
    for (int e = 0; e < k; ++e) cost(t, e) = matching_cost(estimates[e], truth[t]);
  m.assignment = solve_assignment(cost);
  for (int t = 0; t < k; ++t) {
    const auto& e = estimates[m.assignment[t]];
    double dphi = std::abs(e.phi - truth[t].phi);
    dphi = std::min(dphi, 2.0 * kPi - dphi);
    m.errors.push_back({std::abs(e.r - truth[t].r), std::abs(e.theta - truth[t].theta), dphi});
    m.cost += cost(t, m.assignment[t]);
  }
  return m;
}

}  // namespace hmimo
