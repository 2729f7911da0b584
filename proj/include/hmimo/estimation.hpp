#pragma once

#include <vector>

#include "hmimo/dma.hpp"

namespace hmimo {

// Receive snapshots, one column per time slot.
struct SnapshotBlock {
  CMat y;
  int t_slots() const { return static_cast<int>(y.cols()); }
};

/// R = Y Y^H / T.
CMat sample_covariance(const SnapshotBlock& block);

struct SubspaceDecomposition {
  RVec eigenvalues;    // descending
  CMat signal_basis;   // N_RF x K
  CMat noise_basis;    // N_RF x (N_RF - K)
};

/// Eigendecomposition of a Hermitian covariance split into the K dominant
/// eigenvectors and the remaining noise subspace. Throws kInfeasible when
/// K >= N_RF.
SubspaceDecomposition subspace_split(const CMat& covariance, int k);

struct SearchGrid {
  std::vector<double> r_axis;
  std::vector<double> theta_axis;
  std::vector<double> phi_axis;
  int refine_levels = 2;

  void validate() const;
  // Inclusive uniform axis from lo to hi (hi included when it lands on a step).
  static std::vector<double> axis(double lo, double hi, double step);
};

struct TargetEstimate {
  SphericalCoord coord;
  double spectrum_value = 0.0;
};

struct EstimationResult {
  std::vector<TargetEstimate> targets;
  bool degenerate = false;  // fewer than K separated maxima were found
};

// Evaluates the MUSIC pseudo-spectrum ||M||^2 / (M^H Un Un^H M) for
// M = W_RX^H P_RX^H a_RX(r, theta, phi), clipped at `ceiling`.
class MusicSpectrum {
 public:
  MusicSpectrum(const SubspaceDecomposition& decomp, const BlockColumns& w_rx,
                const CVec& p_rx, const ArrayLayout& layout,
                double ceiling = 1e12);

  // Normalized noise-subspace energy of the combined steering vector; 0 at a
  // perfect match.
  double denominator(const SphericalCoord& coord) const;
  double operator()(const SphericalCoord& coord) const;
  double ceiling() const { return ceiling_; }

 private:
  ArrayLayout layout_;
  // conj(w) * conj(p) per element, row-major n_rf x n_e, split re/im.
  std::vector<double> comb_re_, comb_im_;
  CMat noise_adj_;  // Un^H
  std::vector<double> elem_x_;
  double ceiling_;
};

// Largest deviation of the spectrum's internal sin/cos from libm at x.
double spectrum_sincos_error(double x);
// Relative deviation of the spectrum's internal exp from libm, x <= 0.
double spectrum_exp_error(double x);

/// Convenience wrapper around MusicSpectrum.
double music_spectrum(const SphericalCoord& coord,
                      const SubspaceDecomposition& decomp,
                      const AnalogBeamformer& w_rx, const CVec& p_rx,
                      const ArrayLayout& layout, double ceiling = 1e12);

/// Grid peak search over the MUSIC spectrum followed by local refinement.
EstimationResult estimate_targets(const SnapshotBlock& block, int k,
                                  const SearchGrid& grid,
                                  const AnalogBeamformer& w_rx,
                                  const CVec& p_rx, const ArrayLayout& layout,
                                  double ceiling = 1e12);

// Lower-level entry when the decomposition is already available.
EstimationResult search_peaks(const MusicSpectrum& spectrum, int k,
                              const SearchGrid& grid);

struct ParameterError {
  double range = 0.0;  // meters
  double theta = 0.0;  // radians
  double phi = 0.0;    // radians, wrapped onto [0, pi]
};

struct Matching {
  std::vector<int> assignment;  // assignment[t] = estimate index for truth t
  std::vector<ParameterError> errors;
  double cost = 0.0;
};

double matching_cost(const SphericalCoord& est, const SphericalCoord& truth);

/// Minimum-cost one-to-one pairing of estimates with true targets.
Matching match_estimates(const std::vector<SphericalCoord>& estimates,
                         const std::vector<SphericalCoord>& truth);

// Solves a square assignment problem (Hungarian method); returns, for each
// row, the assigned column.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace hmimo
