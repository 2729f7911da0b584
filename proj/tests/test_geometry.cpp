#include <cmath>

#include "doctest.h"
#include "hmimo/geometry.hpp"

using namespace hmimo;

namespace {

ArrayLayout toy(int n_rf, int n_e, double d_p = 0.04) {
  ArrayLayout l;
  l.n_rf = n_rf;
  l.n_e = n_e;
  l.lambda = 0.0025;
  l.d_e = l.lambda / 5.0;
  l.d_rf = l.lambda / 2.0;
  l.d_p = d_p;
  return l;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("element positions") {
  const ArrayLayout l = toy(3, 4);
  const Point3 tx0 = element_position(Side::kTx, 0, 0, l);
  CHECK(tx0.x == doctest::Approx(0.02));
  CHECK(tx0.y == 0.0);
  CHECK(tx0.z == 0.0);
  const Point3 rx0 = element_position(Side::kRx, 0, 0, l);
  CHECK(rx0.x == doctest::Approx(-0.02));
  // Second microstrip, third element.
  const Point3 p = element_position(Side::kTx, 1, 2, l);
  CHECK(p.x == doctest::Approx(0.02 + 0.00125).epsilon(1e-14));
  CHECK(p.z == doctest::Approx(0.001).epsilon(1e-14));
  CHECK_THROWS_AS(element_position(Side::kTx, 3, 0, l), Error);
  CHECK_THROWS_AS(element_position(Side::kTx, 0, -1, l), Error);
}

TEST_CASE("radiation profile") {
  CHECK(radiation_profile(0.0, 2.0) == doctest::Approx(6.0));
  CHECK(radiation_profile(kPi / 2.0, 2.0) == doctest::Approx(0.0).epsilon(1e-30));
  CHECK(radiation_profile(kPi / 4.0, 2.0) == doctest::Approx(3.0));
  CHECK(radiation_profile(kPi / 2.0 + 0.1, 2.0) == 0.0);
  CHECK(radiation_profile(0.3, 0.0) == doctest::Approx(2.0));
}

TEST_CASE("attenuation") {
  ArrayLayout l = toy(1, 1);
  l.kappa_abs = 0.0;
  l.b_gain = 0.0;
  CHECK(attenuation(1.0, 0.0, l) == doctest::Approx(2.813e-4).epsilon(1e-3));
  CHECK(attenuation(1.0, 0.0, l) ==
        doctest::Approx(std::sqrt(2.0) * 0.0025 / (4.0 * kPi)).epsilon(1e-14));
  l.b_gain = 2.0;
  // cos(pi/2) is 6e-17 in floating point.
  CHECK(attenuation(3.0, kPi / 2.0, l) < 1e-15 * attenuation(3.0, 0.0, l));
  // Absorption enters as exp(-kappa r / 2).
  ArrayLayout la = l;
  la.kappa_abs = 0.4;
  CHECK(attenuation(2.0, 0.2, la) / attenuation(2.0, 0.2, l) ==
        doctest::Approx(std::exp(-0.4)).epsilon(1e-14));
  CHECK_THROWS_AS(attenuation(0.0, 0.0, l), Error);
}

TEST_CASE("steering vector of a single element") {
  ArrayLayout l = toy(1, 1, 1e-12);
  const SphericalCoord c{2.3, 0.7, 0.4};
  const CVec a = steering_vector(Side::kTx, c, l);
  REQUIRE(a.size() == 1);
  const Point3 e = element_position(Side::kTx, 0, 0, l);
  const Point3 p = to_cartesian(c);
  const double d = distance(e, p);
  CHECK(d == doctest::Approx(2.3).epsilon(1e-9));
  CHECK(std::abs(a(0)) == doctest::Approx(attenuation(d, element_elevation(e, p), l)));
  CHECK(std::remainder(std::arg(a(0)) - 2.0 * kPi * d / l.lambda, 2.0 * kPi) ==
        doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("steering vector on the z axis") {
  // d_p is tiny so the element column sits on the z axis.
  ArrayLayout l = toy(1, 8, 1e-12);
  l.kappa_abs = 0.0;
  l.b_gain = 0.0;  // keeps the endfire elements nonzero
  const double r = 1.7;
  const CVec a = steering_vector(Side::kRx, {r, 0.0, 0.0}, l);
  for (int n = 0; n < l.n_e; ++n) {
    const double d = std::abs(r - n * l.d_e);
    const double phase = 2.0 * kPi * d / l.lambda;
    CHECK(std::remainder(std::arg(a(n)) - phase, 2.0 * kPi) ==
          doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("steering vector matches per-element distances") {
  const ArrayLayout l = toy(2, 2, 0.02);
  const SphericalCoord c{0.9, 1.1, 2.0};
  const Point3 p = to_cartesian(c);
  for (Side side : {Side::kTx, Side::kRx}) {
    const CVec a = steering_vector(side, c, l);
    for (int i = 0; i < 2; ++i)
      for (int n = 0; n < 2; ++n) {
        const Point3 e = element_position(side, i, n, l);
        const double dx = e.x - p.x, dy = e.y - p.y, dz = e.z - p.z;
        const double d = std::sqrt(dx * dx + dy * dy + dz * dz);
        const double elev = std::asin(std::abs(dz) / d);
        const cd expect = std::polar(attenuation(d, elev, l), 2.0 * kPi * d / l.lambda);
        CHECK(std::abs(a(l.index(i, n)) - expect) <= 1e-12 * std::abs(expect));
      }
  }
}

TEST_CASE("UE antenna coordinates and downlink channel") {
  const ArrayLayout l = toy(2, 3, 0.02);
  UeDescriptor ue{{3.0, 0.6, kPi / 2.0}, 2, l.d_rf};
  const auto coords = ue_antenna_coords(ue);
  REQUIRE(coords.size() == 2);
  CHECK(coords[0].r == doctest::Approx(3.0));
  CHECK(coords[0].theta == doctest::Approx(0.6));
  // Antenna 2 is shifted horizontally by the ULA spacing at the same height.
  const double h = 3.0 * std::sin(0.6) + l.d_rf;
  const double z = 3.0 * std::cos(0.6);
  CHECK(coords[1].r == doctest::Approx(std::sqrt(h * h + z * z)).epsilon(1e-14));
  CHECK(coords[1].theta == doctest::Approx(std::atan2(h, z)).epsilon(1e-14));

  const CMat hdl = dl_channel(ue, l);
  REQUIRE(hdl.rows() == 2);
  REQUIRE(hdl.cols() == l.elements());
  const CVec a0 = steering_vector(Side::kTx, coords[0], l);
  const CVec a1 = steering_vector(Side::kTx, coords[1], l);
  CHECK((hdl.row(0).transpose() - a0).norm() == doctest::Approx(0.0));
  CHECK((hdl.row(1).transpose() - a1).norm() == doctest::Approx(0.0));

  // Every entry is bounded by the attenuation at the closest element.
  double r_min = 1e9;
  for (const auto& c : coords)
    for (int i = 0; i < l.n_rf; ++i)
      for (int n = 0; n < l.n_e; ++n)
        r_min = std::min(r_min, distance(element_position(Side::kTx, i, n, l),
                                         to_cartesian(c)));
  const double bound = std::sqrt(2.0 * (l.b_gain + 1.0)) * l.lambda / (4.0 * kPi * r_min);
  CHECK(hdl.cwiseAbs().maxCoeff() < bound);
}

TEST_CASE("single-antenna UE on the z axis equals the steering vector") {
  ArrayLayout l = toy(1, 4, 1e-12);
  l.b_gain = 0.0;
  UeDescriptor ue{{2.0, 0.0, 0.0}, 1, 0.001};
  const CMat h = dl_channel(ue, l);
  const CVec a = steering_vector(Side::kTx, ue.coord, l);
  CHECK((h.row(0).transpose() - a).norm() == doctest::Approx(0.0));
}

TEST_CASE("radar channel rank") {
  const ArrayLayout l = toy(2, 4, 0.02);
  Scenario one;
  one.targets = {{1.0, 0.4, kPi / 2.0}};
  one.reflection = {cd(1.0)};
  const CMat h1 = radar_channel(one, l, true);
  const CVec arx = steering_vector(Side::kRx, one.targets[0], l);
  const CVec atx = steering_vector(Side::kTx, one.targets[0], l);
  CHECK((h1 - arx * atx.adjoint()).norm() <= 1e-14 * h1.norm());

  Scenario twin = one;
  twin.targets.push_back(one.targets[0]);
  twin.reflection.push_back(std::polar(1.0, 0.3));
  Eigen::JacobiSVD<CMat> s2(radar_channel(twin, l, true));
  CHECK(s2.singularValues()(1) < 1e-12 * s2.singularValues()(0));

  Scenario three;
  three.targets = {{0.4, 0.3, kPi / 2.0}, {0.8, 0.9, kPi / 2.0}, {1.5, 1.3, 1.0}};
  three.reflection = {cd(1.0), std::polar(1.0, 1.0), std::polar(1.0, -2.0)};
  Eigen::JacobiSVD<CMat> s3(radar_channel(three, l, true));
  const RVec sv = s3.singularValues();
  CHECK(sv(2) > 1e-6 * sv(0));
  CHECK(sv(3) < 1e-12 * sv(0));
}

TEST_CASE("self-interference channel") {
  ArrayLayout l = toy(2, 3, 0.02);
  const CMat h = si_channel(l);
  // Same microstrip index and element: distance d_p, elevation 0.
  const double d0 = 0.02;
  CHECK(std::abs(h(0, 0)) == doctest::Approx(attenuation(d0, 0.0, l)));
  // Element 0 to element 2 on the first microstrips.
  const double d1 = std::sqrt(0.02 * 0.02 + 0.001 * 0.001);
  CHECK(std::abs(h(l.index(0, 0), l.index(0, 2))) ==
        doctest::Approx(attenuation(d1, std::asin(0.001 / d1), l)));
  // Swapping microstrip indices keeps the distance.
  CHECK(std::abs(h(l.index(0, 1), l.index(1, 2)) - h(l.index(1, 1), l.index(0, 2))) ==
        doctest::Approx(0.0));
  // Brute force against element positions.
  for (int i = 0; i < 2; ++i)
    for (int n = 0; n < 3; ++n)
      for (int ip = 0; ip < 2; ++ip)
        for (int np = 0; np < 3; ++np) {
          const Point3 rx = element_position(Side::kRx, i, n, l);
          const Point3 tx = element_position(Side::kTx, ip, np, l);
          const double d = distance(rx, tx);
          const cd expect = std::polar(attenuation(d, element_elevation(rx, tx), l),
                                       2.0 * kPi * d / l.lambda);
          CHECK(std::abs(h(l.index(i, n), l.index(ip, np)) - expect) <=
                1e-12 * std::abs(expect));
        }
}

TEST_CASE("coordinate validation") {
  CHECK_THROWS_AS(SphericalCoord({-1.0, 0.0, 0.0}).validate(), Error);
  CHECK_THROWS_AS(SphericalCoord({1.0, 4.0, 0.0}).validate(), Error);
  CHECK_THROWS_AS(SphericalCoord({1.0, 0.0, 7.0}).validate(), Error);
  CHECK_NOTHROW(SphericalCoord({1.0, 0.5, 1.0}).validate());
  ArrayLayout bad = toy(0, 4);
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("reference layout") {
  const ArrayLayout l = ArrayLayout::reference(4, 64);
  CHECK(l.lambda == doctest::Approx(kSpeedOfLight / 120e9));
  CHECK(l.d_e == doctest::Approx(l.lambda / 5.0));
  CHECK(l.d_rf == doctest::Approx(l.lambda / 2.0));
  CHECK(l.elements() == 256);
  CHECK(fraunhofer_distance(l) > 0.0);
}

}
