#include "hmimo/config.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace hmimo {

namespace {

using nlohmann::json;

const std::vector<std::string> kKeys = {
    "azimuth_deg",     "b_gain",          "bandwidth_hz",      "codebook_bits",
    "d_e_m",           "d_p_m",           "d_rf_m",            "fixed_azimuth",
    "frequency_hz",    "gamma_dbm",       "grid_phi_step_deg", "grid_r_step_m",
    "grid_theta_step_deg", "k",           "kappa_abs",         "l",
    "max_sweeps",      "n_e",             "n_rf_grid",         "noise_dbm",
    "p_max_dbm_grid",  "phase_projection", "phi_max_deg",      "phi_min_deg",
    "r_max_m",         "r_min_m",         "refine_levels",     "rotations",
    "seed",            "spectrum_ceiling", "t_slots",          "theta_max_deg",
    "theta_min_deg",   "trials",          "u",                 "ula_spacing_m",
    "waveguide_alpha", "waveguide_beta",  "workers"};

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
  fail(ErrorCode::kParse, key + ": " + what);
}

class Reader {
 public:
  explicit Reader(const json& j) : j_(j) {}

  bool has(const std::string& key) const { return j_.contains(key); }

  double number(const std::string& key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) bad_key(key, "expected a number");
    return v.get<double>();
  }

  long long integer(const std::string& key, long long fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) bad_key(key, "expected an integer");
    return v.get<long long>();
  }

  bool boolean(const std::string& key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) bad_key(key, "expected true or false");
    return v.get<bool>();
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) bad_key(key, "expected a string");
    return v.get<std::string>();
  }

  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_array()) bad_key(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) bad_key(key, "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<int> integers(const std::string& key, std::vector<int> fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_array()) bad_key(key, "expected an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) bad_key(key, "expected an array of integers");
      const auto x = e.get<long long>();
      if (x < 1 || x > 4096) bad_key(key, "entries must lie in 1..4096");
      out.push_back(static_cast<int>(x));
    }
    return out;
  }

 private:
  const json& j_;
};

int small_int(const Reader& r, const std::string& key, int fallback, int lo, int hi) {
  const long long v = r.integer(key, fallback);
  if (v < lo || v > hi)
    bad_key(key, "must lie in " + std::to_string(lo) + ".." + std::to_string(hi));
  return static_cast<int>(v);
}

PhaseProjection parse_projection(const std::string& s) {
  if (s == "nearest_endpoint") return PhaseProjection::kNearestEndpoint;
  if (s == "modulo_pi") return PhaseProjection::kModuloPi;
  bad_key("phase_projection", "expected \"nearest_endpoint\" or \"modulo_pi\"");
}

const char* projection_name(PhaseProjection p) {
  return p == PhaseProjection::kModuloPi ? "modulo_pi" : "nearest_endpoint";
}

}  // namespace

const std::vector<std::string>& config_keys() { return kKeys; }

SimConfig parse_config(const std::string& json_text, bool full_scale) {
  json j;
  try {
    j = json::parse(json_text.empty() ? std::string("{}") : json_text);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kParse, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorCode::kParse, "config must be a JSON object");
  for (const auto& item : j.items())
    if (!std::binary_search(kKeys.begin(), kKeys.end(), item.key()))
      fail(ErrorCode::kParse, "unknown configuration key '" + item.key() + "'");

  const Reader r(j);
  SimConfig c;
  const double freq = r.number("frequency_hz", 120e9);
  if (!(freq > 0.0)) bad_key("frequency_hz", "must be positive");
  ArrayLayout& a = c.layout;
  a.lambda = kSpeedOfLight / freq;
  a.n_rf = 1;
  a.n_e = small_int(r, "n_e", full_scale ? 512 : 64, 1, 1 << 16);
  a.d_e = r.number("d_e_m", a.lambda / 5.0);
  a.d_rf = r.number("d_rf_m", a.lambda / 2.0);
  a.d_p = r.number("d_p_m", 0.02);
  a.kappa_abs = r.number("kappa_abs", 0.0033);
  a.b_gain = r.number("b_gain", 2.0);
  for (const auto& [key, v] : {std::pair{"d_e_m", a.d_e}, std::pair{"d_rf_m", a.d_rf},
                               std::pair{"d_p_m", a.d_p}})
    if (!(v > 0.0)) bad_key(key, "must be positive");
  if (!(a.kappa_abs >= 0.0)) bad_key("kappa_abs", "must be nonnegative");
  if (!(a.b_gain >= 0.0)) bad_key("b_gain", "must be nonnegative");

  c.waveguide_alpha = r.number("waveguide_alpha", 0.0);
  c.waveguide_beta = r.number("waveguide_beta", 0.0);

  auto& s = c.scenario;
  s.r_min = r.number("r_min_m", 1.0);
  s.r_max = r.number("r_max_m", 25.0);
  s.theta_min = deg2rad(r.number("theta_min_deg", 0.0));
  s.theta_max = deg2rad(r.number("theta_max_deg", 90.0));
  s.fixed_azimuth = r.boolean("fixed_azimuth", true);
  s.azimuth = deg2rad(r.number("azimuth_deg", 90.0));
  s.phi_min = deg2rad(r.number("phi_min_deg", 0.0));
  s.phi_max = deg2rad(r.number("phi_max_deg", 360.0));

  c.grid.r_step = r.number("grid_r_step_m", 0.1);
  c.grid.theta_step = deg2rad(r.number("grid_theta_step_deg", 0.5));
  c.grid.phi_step = deg2rad(r.number("grid_phi_step_deg", 2.0));
  c.grid.refine_levels = small_int(r, "refine_levels", 2, 0, 8);

  c.p_max_dbm_grid = r.numbers("p_max_dbm_grid", {-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0});
  c.n_rf_grid = r.integers("n_rf_grid", {4, 5, 6});
  c.t_slots = small_int(r, "t_slots", 200, 1, 1 << 24);
  c.trials = small_int(r, "trials", 20, 1, 1 << 24);
  c.k = small_int(r, "k", 3, 1, 4096);
  c.u = small_int(r, "u", 2, 1, 4096);
  c.l = small_int(r, "l", 2, 1, 4096);
  c.ula_spacing = r.number("ula_spacing_m", a.d_rf);
  c.bandwidth_hz = r.number("bandwidth_hz", 150e3);
  if (!(c.bandwidth_hz > 0.0)) bad_key("bandwidth_hz", "must be positive");
  c.noise_dbm = r.number("noise_dbm", thermal_noise_dbm(c.bandwidth_hz));
  c.gamma_dbm = r.number("gamma_dbm", -10.0);
  c.codebook_bits = small_int(r, "codebook_bits", 10, 1, 16);
  c.search.rotations = small_int(r, "rotations", 32, 1, 4096);
  c.search.max_sweeps = small_int(r, "max_sweeps", 50, 1, 1 << 20);
  c.projection = parse_projection(r.text("phase_projection", "nearest_endpoint"));
  c.spectrum_ceiling = r.number("spectrum_ceiling", 1e12);
  const long long seed = r.integer("seed", 1);
  if (seed < 0) bad_key("seed", "must be nonnegative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.workers = small_int(r, "workers", 0, 0, 1024);

  c.resolve_units();
  c.validate();
  return c;
}

SimConfig load_config(const std::string& path, bool full_scale) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), full_scale);
}

std::string config_to_json(const SimConfig& c) {
  const auto& a = c.layout;
  const auto& s = c.scenario;
  json j;
  j["frequency_hz"] = kSpeedOfLight / a.lambda;
  j["n_e"] = a.n_e;
  j["d_e_m"] = a.d_e;
  j["d_rf_m"] = a.d_rf;
  j["d_p_m"] = a.d_p;
  j["kappa_abs"] = a.kappa_abs;
  j["b_gain"] = a.b_gain;
  j["waveguide_alpha"] = c.waveguide_alpha;
  j["waveguide_beta"] = c.waveguide_beta;
  j["r_min_m"] = s.r_min;
  j["r_max_m"] = s.r_max;
  j["theta_min_deg"] = rad2deg(s.theta_min);
  j["theta_max_deg"] = rad2deg(s.theta_max);
  j["fixed_azimuth"] = s.fixed_azimuth;
  j["azimuth_deg"] = rad2deg(s.azimuth);
  j["phi_min_deg"] = rad2deg(s.phi_min);
  j["phi_max_deg"] = rad2deg(s.phi_max);
  j["grid_r_step_m"] = c.grid.r_step;
  j["grid_theta_step_deg"] = rad2deg(c.grid.theta_step);
  j["grid_phi_step_deg"] = rad2deg(c.grid.phi_step);
  j["refine_levels"] = c.grid.refine_levels;
  j["p_max_dbm_grid"] = c.p_max_dbm_grid;
  j["n_rf_grid"] = c.n_rf_grid;
  j["t_slots"] = c.t_slots;
  j["trials"] = c.trials;
  j["k"] = c.k;
  j["u"] = c.u;
  j["l"] = c.l;
  j["ula_spacing_m"] = c.ula_spacing;
  j["bandwidth_hz"] = c.bandwidth_hz;
  j["noise_dbm"] = c.noise_dbm;
  j["gamma_dbm"] = c.gamma_dbm;
  j["codebook_bits"] = c.codebook_bits;
  j["rotations"] = c.search.rotations;
  j["max_sweeps"] = c.search.max_sweeps;
  j["phase_projection"] = projection_name(c.projection);
  j["spectrum_ceiling"] = c.spectrum_ceiling;
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  return j.dump(2);
}

}  // namespace hmimo
