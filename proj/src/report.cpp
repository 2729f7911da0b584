#include "hmimo/report.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <system_error>

#include "json.hpp"

namespace hmimo {

namespace fs = std::filesystem;

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv(const std::vector<MetricsRecord>& metrics) {
  std::string out =
      "p_max_dbm,n_rf,rmse_range_m,rmse_elev_deg,rmse_azim_deg,mean_sum_rate_bpshz,"
      "trials_used,infeasible_count\n";
  for (const auto& m : metrics) {
    out += format_number(m.p_max_dbm) + ',' + std::to_string(m.n_rf) + ',' +
           format_number(m.rmse_range_m) + ',' + format_number(m.rmse_elev_deg) + ',' +
           format_number(m.rmse_azim_deg) + ',' + format_number(m.mean_sum_rate) + ',' +
           std::to_string(m.trials_used) + ',' + std::to_string(m.infeasible_count) + '\n';
  }
  return out;
}

std::string trials_csv(const std::vector<TrialResult>& trials) {
  std::string out =
      "p_max_dbm,n_rf,trial,ok,feasible,degenerate,alpha,target,true_r_m,true_theta_deg,"
      "true_phi_deg,err_r_m,err_theta_deg,err_phi_deg,sum_rate_bpshz,snr_radar,"
      "snr_radar_cancelled,snr_dl,max_si_row_power_mw,error\n";
  for (const auto& t : trials) {
    const std::string head = format_number(t.p_max_dbm) + ',' + std::to_string(t.n_rf) + ',' +
                             std::to_string(t.trial) + ',' + (t.ok ? "1" : "0") + ',' +
                             (t.feasible ? "1" : "0") + ',' + (t.degenerate ? "1" : "0") +
                             ',' + std::to_string(t.alpha) + ',';
    const std::string tail = format_number(t.sum_rate) + ',' + format_number(t.snr_radar) +
                             ',' + format_number(t.snr_radar_cancelled) + ',' +
                             format_number(t.snr_dl) + ',' +
                             format_number(t.max_si_row_power) + ',';
    std::string err = t.error;
    for (char& c : err)
      if (c == ',' || c == '\n' || c == '"') c = ' ';
    if (!t.ok || t.errors.empty()) {
      out += head + "-1,nan,nan,nan,nan,nan,nan," + tail + err + '\n';
      continue;
    }
    for (std::size_t k = 0; k < t.errors.size(); ++k) {
      const auto& c = t.truth[k];
      const auto& e = t.errors[k];
      out += head + std::to_string(k) + ',' + format_number(c.r) + ',' +
             format_number(rad2deg(c.theta)) + ',' + format_number(rad2deg(c.phi)) + ',' +
             format_number(e.range) + ',' + format_number(rad2deg(e.theta)) + ',' +
             format_number(rad2deg(e.phi)) + ',' + tail + err + '\n';
    }
  }
  return out;
}

std::string manifest_json(const RunManifest& m, const SimConfig& config) {
  nlohmann::json j;
  j["tool_version"] = m.tool_version;
  j["config_path"] = m.config_path;
  j["output_dir"] = m.output_dir;
  j["verbose"] = m.verbose;
  j["wall_seconds"] = m.wall_seconds;
  j["resolved_config"] = nlohmann::json::parse(m.resolved_config);
  nlohmann::json d;
  d["lambda_m"] = config.layout.lambda;
  d["noise_mw"] = config.noise_mw;
  d["gamma_mw"] = config.gamma_mw;
  d["p_max_mw"] = config.p_max_mw;
  d["rate_average"] = "feasible trials only; infeasible trials counted in infeasible_count";
  d["rmse_average"] = "all completed trials, final (optimized-beam) estimates";
  j["derived"] = d;
  return j.dump(2) + "\n";
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write '" + tmp + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      fail(ErrorCode::kIo, "failed while writing '" + tmp + "'");
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::kIo, "cannot move output into '" + path + "'");
  }
}

void write_outputs(const std::string& dir, const ExperimentResult& result,
                   const RunManifest& manifest, const SimConfig& config) {
  const std::string metrics = metrics_csv(result.metrics);
  const std::string trials = manifest.verbose ? trials_csv(result.trials) : std::string();
  const std::string echo = manifest_json(manifest, config);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    fail(ErrorCode::kIo, "cannot create output directory '" + dir + "'");
  const fs::path base(dir);
  write_file_atomic((base / "metrics.csv").string(), metrics);
  if (manifest.verbose) write_file_atomic((base / "trials.csv").string(), trials);
  write_file_atomic((base / "manifest.json").string(), echo);
}

}  // namespace hmimo
