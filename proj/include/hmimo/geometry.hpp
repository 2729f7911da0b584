#pragma once

#include <vector>

#include "hmimo/types.hpp"

namespace hmimo {

enum class Side { kTx, kRx };

// Spherical position with respect to the array origin. theta is measured
// from the +z axis (the microstrip direction), phi in the xy-plane from +x.
struct SphericalCoord {
  double r = 1.0;
  double theta = 0.0;
  double phi = 0.0;

  void validate() const;
};

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

Point3 to_cartesian(const SphericalCoord& c);
double distance(const Point3& a, const Point3& b);

// Geometry of the two DMA panels. Both panels share the layout; the TX panel
// extends towards +x and the RX panel towards -x, elements stacked along z.
struct ArrayLayout {
  int n_rf = 4;            // microstrips per panel
  int n_e = 64;            // metamaterials per microstrip
  double d_e = 0.0005;     // intra-microstrip spacing [m]
  double d_rf = 0.00125;   // inter-microstrip spacing [m]
  double d_p = 0.02;       // panel offset symbol; nearest elements sit d_p/2 off the z-axis
  double lambda = 0.0025;  // wavelength [m]
  double kappa_abs = 0.0033;  // molecular absorption [1/m]
  double b_gain = 2.0;        // radiation-profile exponent

  int elements() const { return n_rf * n_e; }
  int index(int i, int n) const { return i * n_e + n; }
  void validate() const;

  // 120 GHz carrier, d_E = lambda/5, d_RF = lambda/2, d_P = 0.02 m.
  static ArrayLayout reference(int n_rf, int n_e);
};

struct UeDescriptor {
  SphericalCoord coord;
  int l_antennas = 1;
  double ula_spacing = 0.00125;

  void validate() const;
};

struct Scenario {
  std::vector<SphericalCoord> targets;
  std::vector<UeDescriptor> ues;  // ues[u].coord == targets[u]
  std::vector<cd> reflection;     // unit-modulus, one per target

  int k() const { return static_cast<int>(targets.size()); }
  int u() const { return static_cast<int>(ues.size()); }
  void validate() const;
};

/// Element location for microstrip `i` and element `n` (both 0-based).
Point3 element_position(Side side, int i, int n, const ArrayLayout& layout);

/// Metamaterial radiation profile 2(b+1)cos^b(theta), zero outside [-pi/2, pi/2].
double radiation_profile(double theta, double b);

/// Amplitude factor sqrt(F(theta)) * lambda / (4 pi r) * exp(-kappa r / 2).
double attenuation(double r, double theta, const ArrayLayout& layout);

// Elevation of a point as seen from an element: asin(|dz| / d), clamped.
double element_elevation(const Point3& element, const Point3& point);

/// Near-field array response of one panel towards `coord` (length N).
CVec steering_vector(Side side, const SphericalCoord& coord,
                     const ArrayLayout& layout);

/// Spherical coordinates of each UE antenna; the ULA offsets are applied
/// horizontally at constant height, antenna 0 sits at the UE reference point.
std::vector<SphericalCoord> ue_antenna_coords(const UeDescriptor& ue);

/// L x N downlink channel from the TX panel to one UE.
CMat dl_channel(const UeDescriptor& ue, const ArrayLayout& layout);

/// N x N round-trip channel sum_k beta_k a_RX(k) a_TX(k)^H. With
/// include_reflection off every beta_k is replaced by 1.
CMat radar_channel(const Scenario& scenario, const ArrayLayout& layout,
                   bool include_reflection);

/// N x N self-interference channel; rows index RX elements, columns TX.
CMat si_channel(const ArrayLayout& layout);

double fraunhofer_distance(const ArrayLayout& layout);

}  // namespace hmimo
