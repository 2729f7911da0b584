#pragma once

#include <vector>

#include "hmimo/geometry.hpp"

namespace hmimo {

// Waveguide model of one DMA panel: attenuation alpha_i and wavenumber
// beta_i per microstrip, and the element locations rho(i, n) along each
// microstrip.
struct MicrostripParams {
  std::vector<double> alpha;
  std::vector<double> beta;
  Eigen::MatrixXd rho;  // n_rf x n_e

  void validate(const ArrayLayout& layout) const;

  // alpha = 0, beta = 2 pi / lambda, rho(i, n) = n * d_E.
  static MicrostripParams lossless(const ArrayLayout& layout);
};

/// Diagonal of the N x N propagation matrix, entry exp(-rho (alpha + j beta)).
CVec propagation_matrix(const MicrostripParams& params,
                        const ArrayLayout& layout);

/// (j + e^{j phi}) / 2 for phi in [-pi/2, pi/2].
cd lorentzian_map(double phi);

struct LorentzianWeight {
  double phi = 0.0;
  cd value() const { return lorentzian_map(phi); }
};

// N x N_RF matrix whose column i is supported only on microstrip i's rows.
// Stored as the n_rf x n_e grid of nonzero entries.
class BlockColumns {
 public:
  BlockColumns() = default;
  explicit BlockColumns(CMat grid) : grid_(std::move(grid)) {}

  int n_rf() const { return static_cast<int>(grid_.rows()); }
  int n_e() const { return static_cast<int>(grid_.cols()); }
  const CMat& grid() const { return grid_; }

  CMat dense() const;
  // this * x, x is N_RF x c.
  CMat mul(const CMat& x) const;
  // this^H * y, y is N x c.
  CMat adjoint_mul(const CMat& y) const;
  // y * this, y is r x N.
  CMat right_mul(const CMat& y) const;
  // diag(d) * this, still block-sparse.
  BlockColumns scaled(const CVec& d) const;

 private:
  CMat grid_;
};

struct AnalogBeamformer {
  std::vector<std::vector<LorentzianWeight>> weights;  // [i][n]
  BlockColumns matrix;
};

/// Builds the block-sparse analog matrix from an n_rf x n_e weight grid.
AnalogBeamformer assemble_analog_bf(
    const std::vector<std::vector<LorentzianWeight>>& weights);

enum class PhaseProjection {
  kNearestEndpoint,  // clamp to the closer end of [-pi/2, pi/2] on the circle
  kModuloPi,         // wrap by multiples of pi
};

/// Maps unit-modulus search weights onto the Lorentzian set while undoing the
/// microstrip phase: w = (j + w~ e^{j rho beta}) / 2.
std::vector<std::vector<LorentzianWeight>> compensate_weights(
    const CMat& unconstrained, const MicrostripParams& params,
    PhaseProjection projection = PhaseProjection::kNearestEndpoint);

// Folds an arbitrary phase into [-pi/2, pi/2] according to `projection`.
double project_phase(double phase, PhaseProjection projection);

}  // namespace hmimo
