#include "hmimo/dma.hpp"

#include <cmath>

namespace hmimo {

void MicrostripParams::validate(const ArrayLayout& layout) const {
  require(static_cast<int>(alpha.size()) == layout.n_rf &&
              static_cast<int>(beta.size()) == layout.n_rf,
          "microstrip parameters need one alpha and beta per microstrip",
          ErrorCode::kDimensionMismatch);
  require(rho.rows() == layout.n_rf && rho.cols() == layout.n_e,
          "rho grid does not match the layout", ErrorCode::kDimensionMismatch);
  for (int i = 0; i < layout.n_rf; ++i) {
    require(alpha[i] >= 0.0, "waveguide attenuation must be nonnegative");
    require(beta[i] > 0.0, "wavenumber must be positive");
    for (int n = 1; n < layout.n_e; ++n)
      require(rho(i, n) >= rho(i, n - 1),
              "element locations must be nondecreasing along a microstrip");
  }
}

MicrostripParams MicrostripParams::lossless(const ArrayLayout& layout) {
  MicrostripParams p;
  p.alpha.assign(layout.n_rf, 0.0);
  p.beta.assign(layout.n_rf, 2.0 * kPi / layout.lambda);
  p.rho.resize(layout.n_rf, layout.n_e);
  for (int i = 0; i < layout.n_rf; ++i)
    for (int n = 0; n < layout.n_e; ++n) p.rho(i, n) = n * layout.d_e;
  return p;
}

CVec propagation_matrix(const MicrostripParams& params,
                        const ArrayLayout& layout) {
  params.validate(layout);
  CVec d(layout.elements());
  for (int i = 0; i < layout.n_rf; ++i)
    for (int n = 0; n < layout.n_e; ++n)
      d(layout.index(i, n)) =
          std::exp(-params.rho(i, n) * cd(params.alpha[i], params.beta[i]));
  return d;
}

cd lorentzian_map(double phi) {
  constexpr double kTol = 1e-12;
  require(phi >= -kPi / 2.0 - kTol && phi <= kPi / 2.0 + kTol,
          "Lorentzian phase outside [-pi/2, pi/2]");
  return (cd(0.0, 1.0) + std::polar(1.0, phi)) / 2.0;
}

CMat BlockColumns::dense() const {
  const int nrf = n_rf(), ne = n_e();
  CMat w = CMat::Zero(nrf * ne, nrf);
  for (int i = 0; i < nrf; ++i) w.block(i * ne, i, ne, 1) = grid_.row(i).transpose();
  return w;
}

CMat BlockColumns::mul(const CMat& x) const {
  const int nrf = n_rf(), ne = n_e();
  require(x.rows() == nrf, "BlockColumns::mul dimension mismatch",
          ErrorCode::kDimensionMismatch);
  CMat out(nrf * ne, x.cols());
  for (int i = 0; i < nrf; ++i)
    out.middleRows(i * ne, ne) = grid_.row(i).transpose() * x.row(i);
  return out;
}

CMat BlockColumns::adjoint_mul(const CMat& y) const {
  const int nrf = n_rf(), ne = n_e();
  require(y.rows() == nrf * ne, "BlockColumns::adjoint_mul dimension mismatch",
          ErrorCode::kDimensionMismatch);
  CMat out(nrf, y.cols());
  for (int i = 0; i < nrf; ++i)
    out.row(i) = grid_.row(i).conjugate() * y.middleRows(i * ne, ne);
  return out;
}

CMat BlockColumns::right_mul(const CMat& y) const {
  const int nrf = n_rf(), ne = n_e();
  require(y.cols() == nrf * ne, "BlockColumns::right_mul dimension mismatch",
          ErrorCode::kDimensionMismatch);
  CMat out(y.rows(), nrf);
  for (int i = 0; i < nrf; ++i)
    out.col(i) = y.middleCols(i * ne, ne) * grid_.row(i).transpose();
  return out;
}

BlockColumns BlockColumns::scaled(const CVec& d) const {
  const int nrf = n_rf(), ne = n_e();
  require(d.size() == nrf * ne, "diagonal scaling dimension mismatch",
          ErrorCode::kDimensionMismatch);
  CMat g = grid_;
  for (int i = 0; i < nrf; ++i)
    for (int n = 0; n < ne; ++n) g(i, n) *= d(i * ne + n);
  return BlockColumns(std::move(g));
}

AnalogBeamformer assemble_analog_bf(
    const std::vector<std::vector<LorentzianWeight>>& weights) {
  require(!weights.empty() && !weights.front().empty(),
          "empty analog weight grid", ErrorCode::kDimensionMismatch);
  const int nrf = static_cast<int>(weights.size());
  const int ne = static_cast<int>(weights.front().size());
  CMat grid(nrf, ne);
  for (int i = 0; i < nrf; ++i) {
    require(static_cast<int>(weights[i].size()) == ne,
            "ragged analog weight grid", ErrorCode::kDimensionMismatch);
    for (int n = 0; n < ne; ++n) grid(i, n) = weights[i][n].value();
  }
  return {weights, BlockColumns(std::move(grid))};
}

double project_phase(double phase, PhaseProjection projection) {
  // Reduce to (-pi, pi] first.
  double p = std::remainder(phase, 2.0 * kPi);
  if (p <= -kPi) p += 2.0 * kPi;
  const double half = kPi / 2.0;
  if (p >= -half && p <= half) return p;
  if (projection == PhaseProjection::kModuloPi) return p > 0.0 ? p - kPi : p + kPi;
  return p > 0.0 ? half : -half;
}

std::vector<std::vector<LorentzianWeight>> compensate_weights(
    const CMat& unconstrained, const MicrostripParams& params,
    PhaseProjection projection) {
  const int nrf = static_cast<int>(unconstrained.rows());
  const int ne = static_cast<int>(unconstrained.cols());
  require(params.rho.rows() == nrf && params.rho.cols() == ne &&
              static_cast<int>(params.beta.size()) == nrf,
          "compensation grid does not match microstrip parameters",
          ErrorCode::kDimensionMismatch);
  std::vector<std::vector<LorentzianWeight>> out(
      nrf, std::vector<LorentzianWeight>(ne));
  for (int i = 0; i < nrf; ++i) {
    for (int n = 0; n < ne; ++n) {
      const cd w = unconstrained(i, n);
      require(std::abs(std::abs(w) - 1.0) < 1e-9,
              "compensation input must have unit modulus");
      out[i][n].phi = project_phase(std::arg(w) + params.rho(i, n) * params.beta[i],
                                    projection);
    }
  }
  return out;
}

}  // namespace hmimo
