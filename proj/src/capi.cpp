#include "hmimo/hmimo.h"

#include <chrono>
#include <string>

#include "hmimo/config.hpp"
#include "hmimo/report.hpp"

struct hmimo_config {
  hmimo::SimConfig config;
  std::string path;
};

struct hmimo_result {
  hmimo::SimConfig config;
  std::string config_path;
  hmimo::ExperimentResult result;
  double wall_seconds = 0.0;
};

namespace {

constexpr const char* kVersion = "0.1.0";

thread_local std::string last_error;

hmimo_status to_status(hmimo::ErrorCode code) {
  switch (code) {
    case hmimo::ErrorCode::kInvalidArgument: return HMIMO_ERR_INVALID_ARGUMENT;
    case hmimo::ErrorCode::kDimensionMismatch: return HMIMO_ERR_DIMENSION;
    case hmimo::ErrorCode::kInfeasible: return HMIMO_ERR_INFEASIBLE;
    case hmimo::ErrorCode::kParse: return HMIMO_ERR_PARSE;
    case hmimo::ErrorCode::kIo: return HMIMO_ERR_IO;
  }
  return HMIMO_ERR_INTERNAL;
}

// Runs f, translating exceptions into status codes and the thread's error text.
template <typename F>
hmimo_status guarded(F&& f) {
  try {
    last_error.clear();
    f();
    return HMIMO_OK;
  } catch (const hmimo::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::exception& e) {
    last_error = e.what();
    return HMIMO_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return HMIMO_ERR_INTERNAL;
  }
}

hmimo_status null_argument(const char* what) {
  last_error = std::string(what) + " must not be null";
  return HMIMO_ERR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* hmimo_version(void) { return kVersion; }

const char* hmimo_last_error(void) { return last_error.c_str(); }

hmimo_status hmimo_config_load_file(const char* path, int full_scale, hmimo_config** out) {
  if (!path) return null_argument("path");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto* c = new hmimo_config{hmimo::load_config(path, full_scale != 0), path};
    *out = c;
  });
}

hmimo_status hmimo_config_load_string(const char* json, int full_scale, hmimo_config** out) {
  if (!json) return null_argument("json");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    auto* c = new hmimo_config{hmimo::parse_config(json, full_scale != 0), ""};
    *out = c;
  });
}

hmimo_status hmimo_config_set_seed(hmimo_config* config, uint64_t seed) {
  if (!config) return null_argument("config");
  config->config.seed = seed;
  return HMIMO_OK;
}

hmimo_status hmimo_config_set_trials(hmimo_config* config, int trials) {
  if (!config) return null_argument("config");
  if (trials < 1) {
    last_error = "trials: must be at least 1";
    return HMIMO_ERR_INVALID_ARGUMENT;
  }
  config->config.trials = trials;
  return HMIMO_OK;
}

hmimo_status hmimo_config_set_workers(hmimo_config* config, int workers) {
  if (!config) return null_argument("config");
  if (workers < 0) {
    last_error = "workers: must be nonnegative";
    return HMIMO_ERR_INVALID_ARGUMENT;
  }
  config->config.workers = workers;
  return HMIMO_OK;
}

hmimo_status hmimo_config_to_json(const hmimo_config* config, char* buf, size_t cap,
                                  size_t* needed) {
  if (!config) return null_argument("config");
  return guarded([&] {
    const std::string text = hmimo::config_to_json(config->config);
    if (needed) *needed = text.size() + 1;
    if (buf && cap >= text.size() + 1) {
      text.copy(buf, text.size());
      buf[text.size()] = '\0';
    } else if (buf) {
      hmimo::fail(hmimo::ErrorCode::kInvalidArgument, "buffer too small for config JSON");
    }
  });
}

void hmimo_config_free(hmimo_config* config) { delete config; }

hmimo_status hmimo_run(const hmimo_config* config, hmimo_result** out) {
  if (!config) return null_argument("config");
  if (!out) return null_argument("out");
  *out = nullptr;
  return guarded([&] {
    const auto start = std::chrono::steady_clock::now();
    auto* r = new hmimo_result;
    r->config = config->config;
    r->config_path = config->path;
    try {
      r->result = hmimo::run_experiment(r->config);
    } catch (...) {
      delete r;
      throw;
    }
    r->wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    *out = r;
  });
}

size_t hmimo_result_count(const hmimo_result* result) {
  return result ? result->result.metrics.size() : 0;
}

hmimo_status hmimo_result_get(const hmimo_result* result, size_t index, hmimo_metrics* out) {
  if (!result) return null_argument("result");
  if (!out) return null_argument("out");
  if (index >= result->result.metrics.size()) {
    last_error = "metrics index out of range";
    return HMIMO_ERR_INVALID_ARGUMENT;
  }
  const auto& m = result->result.metrics[index];
  *out = hmimo_metrics{m.p_max_dbm,     m.n_rf,          m.rmse_range_m,
                       m.rmse_elev_deg, m.rmse_azim_deg, m.mean_sum_rate,
                       m.trials_used,   m.infeasible_count};
  return HMIMO_OK;
}

size_t hmimo_result_failed_trials(const hmimo_result* result) {
  if (!result) return 0;
  size_t failed = 0;
  for (const auto& t : result->result.trials) failed += t.ok ? 0 : 1;
  return failed;
}

hmimo_status hmimo_result_write(const hmimo_result* result, const char* dir, int verbose) {
  if (!result) return null_argument("result");
  if (!dir) return null_argument("dir");
  return guarded([&] {
    hmimo::RunManifest m;
    m.config_path = result->config_path;
    m.resolved_config = hmimo::config_to_json(result->config);
    m.output_dir = dir;
    m.tool_version = kVersion;
    m.wall_seconds = result->wall_seconds;
    m.verbose = verbose != 0;
    hmimo::write_outputs(dir, result->result, m, result->config);
  });
}

void hmimo_result_free(hmimo_result* result) { delete result; }

}  // extern "C"
