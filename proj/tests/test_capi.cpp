#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "hmimo/hmimo.h"

namespace fs = std::filesystem;

namespace {

const char* kTiny = R"({"n_e": 16, "n_rf_grid": [4], "k": 1, "u": 1, "l": 1,
  "t_slots": 50, "trials": 2, "r_min_m": 0.3, "r_max_m": 1.5,
  "grid_theta_step_deg": 2, "refine_levels": 1, "p_max_dbm_grid": [0, 10],
  "gamma_dbm": 100, "codebook_bits": 6, "rotations": 4, "workers": 1})";

fs::path out_root() {
  const char* env = std::getenv("HMIMO_TEST_DIR");
  return env ? fs::path(env) : fs::temp_directory_path() / "hmimo-capi-out";
}

}  // namespace

TEST_CASE("version and error state") {
  CHECK(std::strlen(hmimo_version()) > 0);
  hmimo_config* c = nullptr;
  CHECK(hmimo_config_load_string("{\"bogus\": 1}", 0, &c) == HMIMO_ERR_PARSE);
  CHECK(c == nullptr);
  CHECK(std::string(hmimo_last_error()).find("bogus") != std::string::npos);
  CHECK(hmimo_config_load_string("{\"n_rf_grid\": [3]}", 0, &c) ==
        HMIMO_ERR_INVALID_ARGUMENT);
  CHECK(hmimo_config_load_string("{}", 0, &c) == HMIMO_OK);
  CHECK(std::string(hmimo_last_error()).empty());
  hmimo_config_free(c);
  CHECK(hmimo_config_load_file("/nonexistent/x.json", 0, &c) == HMIMO_ERR_IO);
}

TEST_CASE("null arguments are rejected") {
  hmimo_config* c = nullptr;
  CHECK(hmimo_config_load_string(nullptr, 0, &c) == HMIMO_ERR_INVALID_ARGUMENT);
  CHECK(hmimo_config_load_string("{}", 0, nullptr) == HMIMO_ERR_INVALID_ARGUMENT);
  CHECK(hmimo_config_set_seed(nullptr, 1) == HMIMO_ERR_INVALID_ARGUMENT);
  CHECK(hmimo_config_to_json(nullptr, nullptr, 0, nullptr) == HMIMO_ERR_INVALID_ARGUMENT);
  hmimo_result* r = nullptr;
  CHECK(hmimo_run(nullptr, &r) == HMIMO_ERR_INVALID_ARGUMENT);
  CHECK(hmimo_result_count(nullptr) == 0);
  hmimo_metrics m;
  CHECK(hmimo_result_get(nullptr, 0, &m) == HMIMO_ERR_INVALID_ARGUMENT);
  hmimo_config_free(nullptr);
  hmimo_result_free(nullptr);
}

TEST_CASE("setters validate") {
  hmimo_config* c = nullptr;
  REQUIRE(hmimo_config_load_string("{}", 1, &c) == HMIMO_OK);
  CHECK(hmimo_config_set_trials(c, 0) == HMIMO_ERR_INVALID_ARGUMENT);
  CHECK(hmimo_config_set_workers(c, -1) == HMIMO_ERR_INVALID_ARGUMENT);
  CHECK(hmimo_config_set_trials(c, 7) == HMIMO_OK);
  CHECK(hmimo_config_set_seed(c, 99) == HMIMO_OK);

  size_t needed = 0;
  CHECK(hmimo_config_to_json(c, nullptr, 0, &needed) == HMIMO_OK);
  REQUIRE(needed > 1);
  std::vector<char> small(needed - 1, 'x');
  CHECK(hmimo_config_to_json(c, small.data(), small.size(), &needed) ==
        HMIMO_ERR_INVALID_ARGUMENT);
  std::vector<char> buf(needed);
  CHECK(hmimo_config_to_json(c, buf.data(), buf.size(), &needed) == HMIMO_OK);
  const std::string json(buf.data());
  CHECK(json.size() + 1 == needed);
  CHECK(json.find("\"trials\": 7") != std::string::npos);
  CHECK(json.find("\"seed\": 99") != std::string::npos);
  CHECK(json.find("\"n_e\": 512") != std::string::npos);
  hmimo_config_free(c);
}

TEST_CASE("tiny run end to end") {
  hmimo_config* c = nullptr;
  REQUIRE(hmimo_config_load_string(kTiny, 0, &c) == HMIMO_OK);
  hmimo_result* r = nullptr;
  REQUIRE(hmimo_run(c, &r) == HMIMO_OK);
  hmimo_config_free(c);

  REQUIRE(hmimo_result_count(r) == 2);
  hmimo_metrics m;
  CHECK(hmimo_result_get(r, 2, &m) == HMIMO_ERR_INVALID_ARGUMENT);
  for (size_t i = 0; i < 2; ++i) {
    REQUIRE(hmimo_result_get(r, i, &m) == HMIMO_OK);
    CHECK(m.p_max_dbm == (i == 0 ? 0.0 : 10.0));
    CHECK(m.n_rf == 4);
    CHECK(m.trials_used == 2);
    CHECK(m.infeasible_count == 0);
    CHECK(std::isfinite(m.rmse_range_m));
    CHECK(m.mean_sum_rate_bpshz > 0.0);
  }
  CHECK(hmimo_result_failed_trials(r) == 0);

  const fs::path dir = out_root() / "run";
  fs::remove_all(dir);
  CHECK(hmimo_result_write(r, dir.string().c_str(), 1) == HMIMO_OK);
  CHECK(fs::exists(dir / "metrics.csv"));
  CHECK(fs::exists(dir / "manifest.json"));
  CHECK(fs::exists(dir / "trials.csv"));
  std::ifstream in(dir / "metrics.csv");
  int lines = 0;
  for (std::string line; std::getline(in, line);) ++lines;
  CHECK(lines == 3);

  std::ofstream(out_root() / "blocker") << "x";
  CHECK(hmimo_result_write(r, (out_root() / "blocker" / "sub").string().c_str(), 0) ==
        HMIMO_ERR_IO);
  CHECK(std::strlen(hmimo_last_error()) > 0);
  hmimo_result_free(r);
}
