#include "hmimo/beamforming.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hmimo {

NodeModel NodeModel::build(const ArrayLayout& layout, const MicrostripParams& tx,
                           const MicrostripParams& rx) {
  layout.validate();
  NodeModel m;
  m.layout = layout;
  m.tx_params = tx;
  m.rx_params = rx;
  m.p_tx = propagation_matrix(tx, layout);
  m.p_rx = propagation_matrix(rx, layout);
  m.h_si = si_channel(layout);
  return m;
}

NodeModel NodeModel::lossless(const ArrayLayout& layout) {
  const auto p = MicrostripParams::lossless(layout);
  return build(layout, p, p);
}

PhaseCodebook PhaseCodebook::uniform(int bits) {
  require(bits >= 1 && bits <= 16, "codebook resolution must be 1..16 bits");
  PhaseCodebook cb;
  cb.bits = bits;
  const int m = 1 << bits;
  cb.phases.resize(m);
  for (int k = 0; k < m; ++k) cb.phases[k] = -kPi / 2.0 + k * kPi / m;
  return cb;
}

int PhaseCodebook::nearest(double phase) const {
  // Uniform half-circle grid: the closest entry neighbours the phase or is
  // an endpoint.
  const int m = size();
  const double step = kPi / m;
  const double p = std::remainder(phase, 2.0 * kPi);
  const long k0 = static_cast<long>(std::floor((p + kPi / 2.0) / step));
  int cand[4] = {0, m - 1, -1, -1};
  if (k0 >= 0 && k0 < m) cand[2] = static_cast<int>(k0);
  if (k0 + 1 >= 0 && k0 + 1 < m) cand[3] = static_cast<int>(k0 + 1);
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  for (int c : cand) {
    if (c < 0) continue;
    const double d = std::abs(std::remainder(p - phases[c], 2.0 * kPi));
    if (d < best_d - 1e-15 || (std::abs(d - best_d) <= 1e-15 && c < best)) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

namespace {

// Cyclic per-element codebook search of a block-separable quadratic ratio
//   sum_i w_i^H Gn_i w_i / sum_i w_i^H Gd_i w_i
// (plain quadratic when no denominator Grams are given).
class CodebookAscent {
 public:
  CodebookAscent(std::vector<CMat> gn, std::vector<CMat> gd,
                 const PhaseCodebook& cb, double floor)
      : gn_(std::move(gn)), gd_(std::move(gd)), floor_(floor) {
    n_rf_ = static_cast<int>(gn_.size());
    n_e_ = static_cast<int>(gn_.front().rows());
    values_.resize(cb.size());
    for (int c = 0; c < cb.size(); ++c) values_[c] = cb.value(c);
    idx_ = Eigen::MatrixXi::Zero(n_rf_, n_e_);
    w_ = CMat::Constant(n_rf_, n_e_, values_[0]);
    gnw_.resize(n_rf_);
    gdw_.resize(n_rf_);
    num_block_.assign(n_rf_, 0.0);
    den_block_.assign(n_rf_, 0.0);
    for (int i = 0; i < n_rf_; ++i) refresh(i);
  }

  bool has_den() const { return !gd_.empty(); }
  const Eigen::MatrixXi& indices() const { return idx_; }
  const CMat& weights() const { return w_; }
  double objective() const { return value(num_, den_); }

  void set_block(int i, const Eigen::VectorXi& indices) {
    for (int n = 0; n < n_e_; ++n) {
      idx_(i, n) = indices(n);
      w_(i, n) = values_[indices(n)];
    }
    refresh(i);
  }

  // Runs cyclic sweeps over the listed blocks until no element changes or
  // max_sweeps is hit. Returns the objective after every element visit.
  std::vector<double> ascend(const std::vector<int>& blocks, int max_sweeps,
                             bool* converged) {
    std::vector<double> trace;
    *converged = false;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
      bool changed = false;
      for (int i : blocks)
        for (int n = 0; n < n_e_; ++n) {
          changed |= update(i, n);
          trace.push_back(objective());
        }
      for (int i : blocks) refresh(i);
      if (!changed) {
        *converged = true;
        break;
      }
    }
    return trace;
  }

 private:
  double value(double num, double den) const {
    if (!has_den()) return num;
    return num / std::max(den, floor_);
  }

  static double quad(const CVec& w, const CVec& gw) {
    return std::real(w.dot(gw));  // w^H G w
  }

  // Recomputes block i's cached products exactly and the running totals.
  void refresh(int i) {
    const CVec w = w_.row(i).transpose();
    gnw_[i] = gn_[i] * w;
    num_block_[i] = quad(w, gnw_[i]);
    if (has_den()) {
      gdw_[i] = gd_[i] * w;
      den_block_[i] = quad(w, gdw_[i]);
    }
    num_ = den_ = 0.0;
    for (int b = 0; b < n_rf_; ++b) {
      num_ += num_block_[b];
      den_ += den_block_[b];
    }
  }

  struct Candidate {
    int c = -1;
    double obj = -std::numeric_limits<double>::infinity();
    double num = 0.0, den = 0.0;
  };

  Candidate evaluate(int c, double num0, cd gn, double den0, cd gd) const {
    const cd wc = std::conj(values_[c]);
    Candidate k;
    k.c = c;
    k.num = num0 + 2.0 * std::real(wc * gn);
    k.den = has_den() ? den0 + 2.0 * std::real(wc * gd) : 0.0;
    k.obj = value(k.num, k.den);
    return k;
  }

  // Codebook index maximizing Re(conj(w_c) h). The codebook covers a
  // half circle, so the maximizer neighbours arg(h) or is an endpoint.
  int best_alignment(cd h) const {
    const int m = static_cast<int>(values_.size());
    const double step = kPi / m;
    const long k0 = static_cast<long>(std::floor((std::arg(h) + kPi / 2.0) / step));
    int cand[4] = {0, m - 1, -1, -1};
    if (k0 >= 0 && k0 < m) cand[2] = static_cast<int>(k0);
    if (k0 + 1 >= 0 && k0 + 1 < m) cand[3] = static_cast<int>(k0 + 1);
    int best = -1;
    double best_q = -std::numeric_limits<double>::infinity();
    for (int c : cand) {
      if (c < 0) continue;
      const double q = std::real(std::conj(values_[c]) * h);
      if (q > best_q || (q == best_q && c < best)) {
        best_q = q;
        best = c;
      }
    }
    return best;
  }

  Candidate exhaustive(double num0, cd gn, double den0, cd gd) const {
    Candidate best;
    for (int c = 0; c < static_cast<int>(values_.size()); ++c) {
      const Candidate k = evaluate(c, num0, gn, den0, gd);
      if (k.obj > best.obj) best = k;
    }
    return best;
  }

  // Exact maximizer of the one-element objective over the codebook.
  Candidate scan(int current, double num0, cd gn, double den0, cd gd) const {
    if (!has_den()) {
      if (gn == cd(0.0)) return evaluate(0, num0, gn, den0, gd);
      return evaluate(best_alignment(gn), num0, gn, den0, gd);
    }
    // The floor never binds here, so Dinkelbach iterations on the
    // parametric problem max N - lambda D reach the exact ratio optimum.
    if (den0 - 2.0 * std::abs(gd) <= floor_) return exhaustive(num0, gn, den0, gd);
    Candidate best = evaluate(current, num0, gn, den0, gd);
    for (int it = 0; it < 100; ++it) {
      const cd h = gn - best.obj * gd;
      if (h == cd(0.0)) break;
      const Candidate k = evaluate(best_alignment(h), num0, gn, den0, gd);
      if (!(k.obj > best.obj)) break;
      best = k;
    }
    return best;
  }

  bool update(int i, int n) {
    const cd cur = w_(i, n);
    const cd gn = gnw_[i](n) - gn_[i](n, n) * cur;
    const double num0 = num_ - 2.0 * std::real(std::conj(cur) * gn);
    cd gd = 0.0;
    double den0 = 0.0;
    if (has_den()) {
      gd = gdw_[i](n) - gd_[i](n, n) * cur;
      den0 = den_ - 2.0 * std::real(std::conj(cur) * gd);
    }
    const double cur_obj = value(num_, den_);
    const Candidate best = scan(idx_(i, n), num0, gn, den0, gd);
    const double tol = 1e-12 * std::abs(cur_obj);
    if (best.c < 0 || best.c == idx_(i, n) || !(best.obj > cur_obj + tol)) return false;
    const cd delta = values_[best.c] - cur;
    gnw_[i] += gn_[i].col(n) * delta;
    if (has_den()) gdw_[i] += gd_[i].col(n) * delta;
    num_ = best.num;
    den_ = best.den;
    idx_(i, n) = best.c;
    w_(i, n) = values_[best.c];
    return true;
  }

  std::vector<CMat> gn_, gd_;
  double floor_;
  int n_rf_ = 0, n_e_ = 0;
  std::vector<cd> values_;
  Eigen::MatrixXi idx_;
  CMat w_;
  std::vector<CVec> gnw_, gdw_;
  std::vector<double> num_block_, den_block_;
  double num_ = 0.0, den_ = 0.0;
};

// Dominant eigenvector of a Hermitian PSD Gram, rotated so that its
// largest-magnitude entry is real positive. Empty when the Gram is zero.
CVec matched_direction(const CMat& gram) {
  if (gram.cwiseAbs().maxCoeff() == 0.0) return {};
  Eigen::SelfAdjointEigenSolver<CMat> es(gram);
  CVec v = es.eigenvectors().col(gram.rows() - 1);
  Eigen::Index ref = 0;
  v.cwiseAbs().maxCoeff(&ref);
  return v * std::polar(1.0, -std::arg(v(ref)));
}

Eigen::VectorXi rotated_start(const CVec& dir, int n_e, double rotation,
                              const PhaseCodebook& cb) {
  Eigen::VectorXi idx = Eigen::VectorXi::Zero(n_e);
  if (dir.size() == 0) return idx;
  for (int n = 0; n < n_e; ++n) idx(n) = cb.nearest(std::arg(dir(n)) + rotation);
  return idx;
}

// Per-block multi-start followed by a joint polishing pass.
CodebookSolution run_search(CodebookAscent& engine, const std::vector<CMat>& gn,
                            const PhaseCodebook& cb, const SearchOptions& opt) {
  const int n_rf = static_cast<int>(gn.size());
  const int n_e = static_cast<int>(gn.front().rows());
  const int rotations = std::max(1, opt.rotations);
  CodebookSolution sol;
  std::vector<CVec> dirs(n_rf);
  for (int i = 0; i < n_rf; ++i) {
    dirs[i] = matched_direction(gn[i]);
    engine.set_block(i, rotated_start(dirs[i], n_e, 0.0, cb));
  }
  for (int i = 0; i < n_rf; ++i) {
    Eigen::VectorXi best_idx = engine.indices().row(i).transpose();
    double best_obj = engine.objective();
    const int starts = dirs[i].size() == 0 ? 1 : rotations;
    for (int r = 0; r < starts; ++r) {
      engine.set_block(i, rotated_start(dirs[i], n_e, 2.0 * kPi * r / rotations, cb));
      bool conv = false;
      sol.traces.push_back(engine.ascend({i}, opt.max_sweeps, &conv));
      const double obj = engine.objective();
      if (obj > best_obj + 1e-12 * std::abs(best_obj)) {
        best_obj = obj;
        best_idx = engine.indices().row(i).transpose();
      }
    }
    engine.set_block(i, best_idx);
  }
  std::vector<int> all(n_rf);
  for (int i = 0; i < n_rf; ++i) all[i] = i;
  bool conv = false;
  sol.traces.push_back(engine.ascend(all, opt.max_sweeps, &conv));
  sol.one_opt = conv;
  sol.index = engine.indices();
  sol.weights = engine.weights();
  sol.objective = engine.objective();
  return sol;
}

void check_columns(const CMat& h, const ArrayLayout& layout, const char* what) {
  layout.validate();
  require(h.cols() == layout.elements(), std::string(what) + " must have N columns",
          ErrorCode::kDimensionMismatch);
}

}  // namespace

CodebookSolution solve_op1(const CMat& h, const PhaseCodebook& codebook,
                           const ArrayLayout& layout, const SearchOptions& options) {
  check_columns(h, layout, "OP1 channel");
  std::vector<CMat> gn(layout.n_rf);
  for (int i = 0; i < layout.n_rf; ++i) {
    const auto blk = h.middleCols(i * layout.n_e, layout.n_e);
    gn[i] = blk.adjoint() * blk;
  }
  CodebookAscent engine(gn, {}, codebook, options.denominator_floor);
  return run_search(engine, gn, codebook, options);
}

CodebookSolution solve_op2(const CMat& h_r, const CMat& h_si,
                           const CMat& w_tx_tilde, const PhaseCodebook& codebook,
                           const ArrayLayout& layout, const SearchOptions& options) {
  check_columns(h_r, layout, "OP2 radar channel");
  check_columns(h_si, layout, "OP2 SI channel");
  require(h_r.rows() == layout.elements() && h_si.rows() == layout.elements(),
          "OP2 channels must be N x N", ErrorCode::kDimensionMismatch);
  const BlockColumns w_tx(w_tx_tilde);
  const CMat x = w_tx.right_mul(h_r);
  const CMat z = w_tx.right_mul(h_si);
  std::vector<CMat> gn(layout.n_rf), gd(layout.n_rf);
  for (int i = 0; i < layout.n_rf; ++i) {
    const auto xi = x.middleRows(i * layout.n_e, layout.n_e);
    const auto zi = z.middleRows(i * layout.n_e, layout.n_e);
    gn[i] = xi * xi.adjoint();
    gd[i] = zi * zi.adjoint();
  }
  CodebookAscent engine(gn, gd, codebook, options.denominator_floor);
  return run_search(engine, gn, codebook, options);
}

double op1_objective(const CMat& h, const CMat& w_grid) {
  return BlockColumns(w_grid).right_mul(h).squaredNorm();
}

double op2_objective(const CMat& h_r, const CMat& h_si, const CMat& w_tx_grid,
                     const CMat& w_rx_grid, double floor) {
  const BlockColumns tx(w_tx_grid), rx(w_rx_grid);
  const double num = rx.adjoint_mul(tx.right_mul(h_r)).squaredNorm();
  const double den = rx.adjoint_mul(tx.right_mul(h_si)).squaredNorm();
  return num / std::max(den, floor);
}

CMat effective_si(const AnalogBeamformer& w_rx, const CVec& p_rx,
                  const CMat& h_si, const CVec& p_tx,
                  const AnalogBeamformer& w_tx) {
  const BlockColumns tx = w_tx.matrix.scaled(p_tx);
  const BlockColumns rx = w_rx.matrix.scaled(p_rx);
  return rx.adjoint_mul(tx.right_mul(h_si));
}

CancellationMatrix canceller_from_effective_si(const CMat& w_si) {
  CancellationMatrix c;
  c.d = -w_si;
  Eigen::JacobiSVD<CMat> svd(w_si, Eigen::ComputeFullU | Eigen::ComputeFullV);
  c.b = svd.matrixV();
  c.singular_values = svd.singularValues();
  return c;
}

CancellationMatrix digital_si_canceller(const AnalogBeamformer& w_rx,
                                        const CVec& p_rx, const CMat& h_si,
                                        const CVec& p_tx,
                                        const AnalogBeamformer& w_tx) {
  return canceller_from_effective_si(effective_si(w_rx, p_rx, h_si, p_tx, w_tx));
}

double transmit_power(const CMat& v, const CVec& p_tx, const AnalogBeamformer& w_tx) {
  return w_tx.matrix.scaled(p_tx).mul(v).squaredNorm();
}

CMat normalize_power(const CMat& v, const CVec& p_tx, const AnalogBeamformer& w_tx,
                     double p_max) {
  require(p_max >= 0.0, "power budget must be nonnegative");
  const double p = transmit_power(v, p_tx, w_tx);
  if (p == 0.0 || p_max == 0.0) return CMat::Zero(v.rows(), v.cols());
  return v * std::sqrt(p_max / p);
}

namespace {

// First `count` right-singular vectors, zero-padded when fewer exist.
CMat top_right_singular(const CMat& h, int count) {
  Eigen::JacobiSVD<CMat> svd(h, Eigen::ComputeFullV);
  const CMat& v = svd.matrixV();
  CMat out = CMat::Zero(h.cols(), count);
  const int avail = std::min<int>(count, static_cast<int>(v.cols()));
  out.leftCols(avail) = v.leftCols(avail);
  return out;
}

}  // namespace

CMat single_user_precoder(const CMat& h_dl_hat, const CVec& p_tx,
                          const AnalogBeamformer& w_tx, const CMat& b, double p_max) {
  const int l = static_cast<int>(h_dl_hat.rows());
  const BlockColumns tx = w_tx.matrix.scaled(p_tx);
  const CMat h_eff = tx.right_mul(h_dl_hat) * b;
  const CMat g = std::sqrt(p_max) * top_right_singular(h_eff, l);
  return normalize_power(b * g, p_tx, w_tx, p_max);
}

constexpr double kMinNullSpaceGain = 1e-6;

BdPrecoder block_diag_precoder(const std::vector<CMat>& h_dl_hats, const CVec& p_tx,
                               const AnalogBeamformer& w_tx, const CMat& b,
                               double p_max, int alpha) {
  const int u_count = static_cast<int>(h_dl_hats.size());
  require(u_count >= 2, "block diagonalization needs at least two UEs");
  const int l = static_cast<int>(h_dl_hats.front().rows());
  const int n_rf = static_cast<int>(b.cols());
  require(alpha >= 1 && alpha <= n_rf, "alpha must lie in [1, N_RF]");
  if (alpha <= (u_count - 1) * l)
    fail(ErrorCode::kInfeasible, "alpha leaves no null space for block diagonalization");

  BdPrecoder bd;
  bd.f = b.rightCols(alpha);
  const BlockColumns tx = w_tx.matrix.scaled(p_tx);
  for (const auto& h : h_dl_hats) {
    require(h.rows() == l, "all UEs must have the same antenna count",
            ErrorCode::kDimensionMismatch);
    bd.h_eff.push_back(tx.right_mul(h) * bd.f);
  }
  const double scale = std::sqrt(p_max / u_count);
  for (int u = 0; u < u_count; ++u) {
    CMat others((u_count - 1) * l, alpha);
    for (int v = 0, row = 0; v < u_count; ++v) {
      if (v == u) continue;
      others.middleRows(row, l) = bd.h_eff[v];
      row += l;
    }
    Eigen::JacobiSVD<CMat> svd(others, Eigen::ComputeFullV);
    const RVec& s = svd.singularValues();
    const double tol = std::max<double>(others.rows(), alpha) *
                       std::numeric_limits<double>::epsilon() *
                       (s.size() ? s(0) : 0.0);
    int rank = 0;
    while (rank < s.size() && s(rank) > tol) ++rank;
    const int nullity = alpha - rank;
    if (nullity <= 0)
      fail(ErrorCode::kInfeasible, "UE " + std::to_string(u) + " has no null space");
    const CMat e_bar = svd.matrixV().rightCols(nullity);
    const CMat projected = bd.h_eff[u] * e_bar;
    const double own = bd.h_eff[u].norm();
    Eigen::JacobiSVD<CMat> svd_p(projected);
    const double top = svd_p.singularValues().size() ? svd_p.singularValues()(0) : 0.0;
    // Null vectors are accurate to about eps * ||others||, so a weaker usable
    // channel would let rounding leak as much power as the UE receives.
    if (!(top > kMinNullSpaceGain * own))
      fail(ErrorCode::kInfeasible,
           "UE " + std::to_string(u) + " channel vanishes in the other UEs' null space");
    bd.g.push_back(scale * e_bar * top_right_singular(projected, l));
  }
  CMat g(alpha, u_count * l);
  for (int u = 0; u < u_count; ++u) g.middleCols(u * l, l) = bd.g[u];
  bd.v = normalize_power(bd.f * g, p_tx, w_tx, p_max);
  return bd;
}

double bd_leakage_ratio(const BdPrecoder& bd) {
  double worst = 0.0;
  const int u_count = static_cast<int>(bd.h_eff.size());
  for (int u = 0; u < u_count; ++u) {
    const double own = (bd.h_eff[u] * bd.g[u]).norm();
    for (int v = 0; v < u_count; ++v) {
      if (v == u) continue;
      const double leak = (bd.h_eff[u] * bd.g[v]).norm();
      worst = std::max(worst, own > 0.0 ? leak / own : std::numeric_limits<double>::infinity());
    }
  }
  return worst;
}

SiCheck check_si_constraint(const CMat& w_si, const CMat& v, double gamma) {
  SiCheck c;
  c.row_power = (w_si * v).rowwise().squaredNorm();
  c.pass.resize(c.row_power.size());
  for (Eigen::Index i = 0; i < c.row_power.size(); ++i) {
    c.pass[i] = c.row_power(i) <= gamma;
    c.feasible = c.feasible && c.pass[i];
  }
  return c;
}

SiCheck check_si_constraint(const AnalogBeamformer& w_rx, const CVec& p_rx,
                            const CMat& h_si, const CVec& p_tx,
                            const AnalogBeamformer& w_tx, const CMat& v,
                            double gamma) {
  return check_si_constraint(effective_si(w_rx, p_rx, h_si, p_tx, w_tx), v, gamma);
}

double snr_radar(const BeamformerSet& bf, const NodeModel& node, const CMat& h_r_hat,
                 double sigma2, bool after_cancellation) {
  const BlockColumns tx = bf.w_tx.matrix.scaled(node.p_tx);
  const BlockColumns rx = bf.w_rx.matrix.scaled(node.p_rx);
  const double signal = rx.adjoint_mul(h_r_hat * tx.mul(bf.v)).squaredNorm();
  const CMat si = after_cancellation ? CMat(bf.w_si + bf.cancel.d) : bf.w_si;
  const double interference = (si * bf.v).squaredNorm();
  const double noise = rx.grid().squaredNorm() * sigma2;
  const double den = interference + noise;
  if (signal == 0.0) return 0.0;
  return den > 0.0 ? signal / den : std::numeric_limits<double>::infinity();
}

double snr_dl(const BeamformerSet& bf, const NodeModel& node,
              const std::vector<CMat>& h_dl_hats, const std::vector<double>& sigma_u2) {
  require(h_dl_hats.size() == sigma_u2.size(), "one noise variance per UE is required",
          ErrorCode::kDimensionMismatch);
  const CMat x = bf.w_tx.matrix.scaled(node.p_tx).mul(bf.v);
  double total = 0.0;
  for (std::size_t u = 0; u < h_dl_hats.size(); ++u) {
    const double p = (h_dl_hats[u] * x).squaredNorm();
    if (p > 0.0) total += p / sigma_u2[u];
  }
  return total;
}

BeamformerSet make_beamformer_set(AnalogBeamformer w_tx, AnalogBeamformer w_rx, CMat v,
                                  const NodeModel& node, double p_max, double gamma) {
  BeamformerSet bf;
  bf.w_tx = std::move(w_tx);
  bf.w_rx = std::move(w_rx);
  bf.w_si = effective_si(bf.w_rx, node.p_rx, node.h_si, node.p_tx, bf.w_tx);
  bf.cancel = canceller_from_effective_si(bf.w_si);
  bf.v = std::move(v);
  bf.p_max = p_max;
  bf.gamma = gamma;
  bf.alpha = node.layout.n_rf;
  const SiCheck chk = check_si_constraint(bf.w_si, bf.v, gamma);
  bf.si_row_power = chk.row_power;
  bf.feasible = chk.feasible;
  return bf;
}

BeamformerSet design_isac(const std::vector<SphericalCoord>& estimates,
                          const NodeModel& node, const DesignParams& params) {
  const ArrayLayout& layout = node.layout;
  require(params.u >= 1 && params.l >= 1, "U and L must be positive");
  require(static_cast<int>(estimates.size()) >= params.u,
          "design needs at least U target estimates");
  require(params.p_max >= 0.0 && params.gamma >= 0.0,
          "power budget and SI threshold must be nonnegative");

  // Estimated radar and DL channels; reflection coefficients are unknown.
  Scenario hat;
  hat.targets = estimates;
  hat.reflection.assign(estimates.size(), cd(1.0));
  const CMat h_r_hat = radar_channel(hat, layout, false);
  std::vector<CMat> h_dl_hats;
  for (int u = 0; u < params.u; ++u)
    h_dl_hats.push_back(dl_channel({estimates[u], params.l, params.ula_spacing}, layout));

  const CodebookSolution tx_sol = solve_op1(h_r_hat, params.codebook, layout, params.search);
  const CodebookSolution rx_sol = solve_op2(h_r_hat, node.h_si, tx_sol.weights,
                                            params.codebook, layout, params.search);
  AnalogBeamformer w_tx = assemble_analog_bf(
      compensate_weights(tx_sol.weights, node.tx_params, params.projection));
  AnalogBeamformer w_rx = assemble_analog_bf(
      compensate_weights(rx_sol.weights, node.rx_params, params.projection));

  BeamformerSet bf = make_beamformer_set(std::move(w_tx), std::move(w_rx),
                                         CMat::Zero(layout.n_rf, params.u * params.l),
                                         node, params.p_max, params.gamma);
  const CMat& b = bf.cancel.b;

  if (params.u == 1) {
    bf.v = single_user_precoder(h_dl_hats[0], node.p_tx, bf.w_tx, b, params.p_max);
    const SiCheck chk = check_si_constraint(bf.w_si, bf.v, params.gamma);
    bf.si_row_power = chk.row_power;
    bf.feasible = chk.feasible;
    bf.alpha = layout.n_rf;
    return bf;
  }

  // Descending search over the number of retained weak-SI directions.
  bool have_candidate = false;
  double least_violation = std::numeric_limits<double>::infinity();
  for (int alpha = layout.n_rf; alpha > (params.u - 1) * params.l; --alpha) {
    BdPrecoder bd;
    try {
      bd = block_diag_precoder(h_dl_hats, node.p_tx, bf.w_tx, b, params.p_max, alpha);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kInfeasible) throw;
      continue;
    }
    const SiCheck chk = check_si_constraint(bf.w_si, bd.v, params.gamma);
    const double worst = chk.row_power.size() ? chk.row_power.maxCoeff() : 0.0;
    if (chk.feasible || worst < least_violation) {
      have_candidate = true;
      least_violation = worst;
      bf.v = bd.v;
      bf.alpha = alpha;
      bf.si_row_power = chk.row_power;
      bf.leakage_ratio = bd_leakage_ratio(bd);
      bf.feasible = chk.feasible;
    }
    if (chk.feasible) return bf;
  }
  if (!have_candidate) {
    bf.alpha = 0;
    bf.si_row_power = RVec::Zero(layout.n_rf);
  }
  bf.feasible = false;
  return bf;
}

}  // namespace hmimo
