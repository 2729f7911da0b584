#include "hmimo/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace hmimo {

void SphericalCoord::validate() const {
  require(std::isfinite(r) && r > 0.0, "range must be positive");
  require(theta >= 0.0 && theta <= kPi, "elevation must lie in [0, pi]");
  require(phi >= 0.0 && phi < 2.0 * kPi, "azimuth must lie in [0, 2pi)");
}

Point3 to_cartesian(const SphericalCoord& c) {
  const double st = std::sin(c.theta);
  return {c.r * st * std::cos(c.phi), c.r * st * std::sin(c.phi),
          c.r * std::cos(c.theta)};
}

double distance(const Point3& a, const Point3& b) {
  const double dx = a.x - b.x, dy = a.y - b.y, dz = a.z - b.z;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

void ArrayLayout::validate() const {
  require(n_rf >= 1, "n_rf must be >= 1");
  require(n_e >= 1, "n_e must be >= 1");
  require(d_e > 0.0 && d_rf > 0.0 && d_p > 0.0, "array spacings must be positive");
  require(lambda > 0.0, "wavelength must be positive");
  require(kappa_abs >= 0.0, "kappa_abs must be nonnegative");
  require(b_gain >= 0.0, "b_gain must be nonnegative");
}

ArrayLayout ArrayLayout::reference(int n_rf, int n_e) {
  ArrayLayout l;
  l.n_rf = n_rf;
  l.n_e = n_e;
  l.lambda = kSpeedOfLight / 120e9;
  l.d_e = l.lambda / 5.0;
  l.d_rf = l.lambda / 2.0;
  l.d_p = 0.02;
  return l;
}

void UeDescriptor::validate() const {
  coord.validate();
  require(l_antennas >= 1, "UE needs at least one antenna");
  require(ula_spacing > 0.0, "UE antenna spacing must be positive");
}

void Scenario::validate() const {
  require(!targets.empty(), "scenario needs at least one target");
  require(ues.size() <= targets.size(), "U must not exceed K");
  require(reflection.size() == targets.size(),
          "one reflection coefficient per target is required");
  for (const auto& t : targets) t.validate();
  for (std::size_t u = 0; u < ues.size(); ++u) {
    ues[u].validate();
    const auto& a = ues[u].coord;
    const auto& b = targets[u];
    require(a.r == b.r && a.theta == b.theta && a.phi == b.phi,
            "UE u must coincide with target u");
  }
  for (const auto& b : reflection)
    require(std::abs(std::abs(b) - 1.0) < 1e-9,
            "reflection coefficients must have unit modulus");
}

Point3 element_position(Side side, int i, int n, const ArrayLayout& layout) {
  require(i >= 0 && i < layout.n_rf, "microstrip index out of range");
  require(n >= 0 && n < layout.n_e, "element index out of range");
  const double x = layout.d_p / 2.0 + i * layout.d_rf;
  return {side == Side::kTx ? x : -x, 0.0, n * layout.d_e};
}

double radiation_profile(double theta, double b) {
  if (theta < -kPi / 2.0 || theta > kPi / 2.0) return 0.0;
  return 2.0 * (b + 1.0) * std::pow(std::max(0.0, std::cos(theta)), b);
}

double attenuation(double r, double theta, const ArrayLayout& layout) {
  require(r > 0.0, "attenuation needs a positive distance");
  return std::sqrt(radiation_profile(theta, layout.b_gain)) * layout.lambda /
         (4.0 * kPi * r) * std::exp(-layout.kappa_abs * r / 2.0);
}

double element_elevation(const Point3& element, const Point3& point) {
  const double d = distance(element, point);
  require(d > 0.0, "point coincides with an array element");
  return std::asin(std::clamp(std::abs(element.z - point.z) / d, -1.0, 1.0));
}

namespace {

cd element_response(const Point3& element, const Point3& point,
                    const ArrayLayout& layout) {
  const double d = distance(element, point);
  require(d > 0.0, "point coincides with an array element");
  const double theta = element_elevation(element, point);
  const double amp = attenuation(d, theta, layout);
  return std::polar(amp, 2.0 * kPi * d / layout.lambda);
}

}  // namespace

CVec steering_vector(Side side, const SphericalCoord& coord,
                     const ArrayLayout& layout) {
  layout.validate();
  const Point3 p = to_cartesian(coord);
  CVec a(layout.elements());
  for (int i = 0; i < layout.n_rf; ++i)
    for (int n = 0; n < layout.n_e; ++n)
      a(layout.index(i, n)) =
          element_response(element_position(side, i, n, layout), p, layout);
  return a;
}

std::vector<SphericalCoord> ue_antenna_coords(const UeDescriptor& ue) {
  ue.validate();
  const double horiz = ue.coord.r * std::sin(ue.coord.theta);
  const double height = ue.coord.r * std::cos(ue.coord.theta);
  std::vector<SphericalCoord> out;
  out.reserve(ue.l_antennas);
  for (int l = 0; l < ue.l_antennas; ++l) {
    const double h = horiz + l * ue.ula_spacing;
    out.push_back({std::hypot(h, height), std::atan2(h, height), ue.coord.phi});
  }
  return out;
}

CMat dl_channel(const UeDescriptor& ue, const ArrayLayout& layout) {
  const auto coords = ue_antenna_coords(ue);
  CMat h(ue.l_antennas, layout.elements());
  for (int l = 0; l < ue.l_antennas; ++l)
    h.row(l) = steering_vector(Side::kTx, coords[l], layout).transpose();
  return h;
}

CMat radar_channel(const Scenario& scenario, const ArrayLayout& layout,
                   bool include_reflection) {
  require(scenario.k() >= 1, "radar channel needs at least one target");
  const int n = layout.elements();
  CMat h = CMat::Zero(n, n);
  for (int k = 0; k < scenario.k(); ++k) {
    const cd beta = include_reflection ? scenario.reflection.at(k) : cd(1.0);
    const CVec a_rx = steering_vector(Side::kRx, scenario.targets[k], layout);
    const CVec a_tx = steering_vector(Side::kTx, scenario.targets[k], layout);
    h.noalias() += beta * a_rx * a_tx.adjoint();
  }
  return h;
}

CMat si_channel(const ArrayLayout& layout) {
  layout.validate();
  const int n = layout.elements();
  CMat h(n, n);
  for (int i = 0; i < layout.n_rf; ++i) {
    for (int ip = 0; ip < layout.n_rf; ++ip) {
      const double dx = layout.d_p + (i + ip) * layout.d_rf;
      for (int e = 0; e < layout.n_e; ++e) {
        for (int ep = 0; ep < layout.n_e; ++ep) {
          const double dz = (ep - e) * layout.d_e;
          const double r = std::sqrt(dx * dx + dz * dz);
          require(r > 0.0, "self-interference path of zero length");
          const double theta =
              std::asin(std::clamp(std::abs(dz) / r, -1.0, 1.0));
          h(layout.index(i, e), layout.index(ip, ep)) =
              std::polar(attenuation(r, theta, layout),
                         2.0 * kPi * r / layout.lambda);
        }
      }
    }
  }
  return h;
}

double fraunhofer_distance(const ArrayLayout& layout) {
  const double lz = (layout.n_e - 1) * layout.d_e;
  const double lx = (layout.n_rf - 1) * layout.d_rf;
  const double d = std::hypot(lz, lx);
  return 2.0 * d * d / layout.lambda;
}

}  // namespace hmimo
