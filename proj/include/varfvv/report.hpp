#pragma once

// Report files for one experiment:
//   precision.csv      predictor,precision,cdf
//   qoe_<scheme>.csv   qoe,cdf
//   delay.csv          user_id,event_pts,switch_delay_ms
//   bandwidth.csv      user_id,chunk,varfvv_bits,has10_bits,conventional_bits
//   popularity.csv     chunk,view,x,x_hat,p,p_hat,precision
//   allocation.csv     chunk,lambda,view,R,R_hat,flags
//   summary.json       config echo, seed, per-chunk series and aggregates

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "varfvv/config.hpp"
#include "varfvv/error.hpp"
#include "varfvv/experiment.hpp"

namespace varfvv {

/// Sorted values with their empirical CDF k / n.
inline std::vector<std::pair<double, double>> empirical_cdf(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, double>> out;
  const double n = static_cast<double>(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) out.emplace_back(values[k], static_cast<double>(k + 1) / n);
  return out;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

/// The machine-readable part of a report (what summary.json holds).
struct ReportSummary {
  std::map<std::string, std::string> config;
  std::uint64_t seed = 0;
  std::int64_t chunks = 0;
  std::vector<std::string> schemes;
  std::map<std::string, std::vector<double>> qoe;
  std::map<std::string, std::vector<double>> precision;
  std::int64_t switches = 0;
  double delay_mean_ms = 0, delay_max_ms = 0, startup_mean_ms = 0;
  std::int64_t sessions = 0, decodable_sessions = 0;
  std::uint64_t frames_reassembled = 0, frames_reencoded = 0;
  std::int64_t bits_varfvv = 0, bits_has10 = 0, bits_conventional = 0;

  friend bool operator==(const ReportSummary&, const ReportSummary&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ReportSummary, config, seed, chunks, schemes, qoe, precision, switches,
                                   delay_mean_ms, delay_max_ms, startup_mean_ms, sessions, decodable_sessions,
                                   frames_reassembled, frames_reencoded, bits_varfvv, bits_has10, bits_conventional)

inline ReportSummary summarize(const ExperimentReport& r) {
  ReportSummary s;
  for (auto& [k, v] : config_entries(r.config)) s.config[k] = v;
  s.seed = r.config.seed;
  s.chunks = r.chunks;
  s.schemes = r.schemes;
  s.qoe = r.qoe;
  s.precision = r.precision;
  s.switches = static_cast<std::int64_t>(r.delays.size());
  std::vector<double> d;
  for (const auto& x : r.delays) d.push_back(x.ms);
  s.delay_mean_ms = mean(d);
  s.delay_max_ms = d.empty() ? 0.0 : *std::max_element(d.begin(), d.end());
  s.startup_mean_ms = mean(r.startup_ms);
  s.sessions = r.sessions;
  s.decodable_sessions = r.decodable_sessions;
  s.frames_reassembled = r.frames_reassembled;
  s.frames_reencoded = r.frames_reencoded;
  for (const auto& b : r.bandwidth) {
    s.bits_varfvv += b.varfvv;
    s.bits_has10 += b.has10;
    s.bits_conventional += b.conventional;
  }
  return s;
}

namespace report_detail {

inline std::ofstream open(const std::filesystem::path& p) {
  std::ofstream os(p);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot write " + p.string());
  os.precision(10);
  return os;
}

}  // namespace report_detail

inline void emit_report(const ExperimentReport& r, const std::string& out_dir) {
  namespace fs = std::filesystem;
  using report_detail::open;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec && fs::is_directory(out_dir), ErrorCode::Io, "cannot create output directory " + out_dir);
  const fs::path dir(out_dir);

  {
    auto os = open(dir / "precision.csv");
    os << "predictor,precision,cdf\n";
    for (const auto& [name, series] : r.precision)
      for (auto [v, c] : empirical_cdf(series)) os << name << ',' << v << ',' << c << '\n';
  }
  for (const auto& name : r.schemes) {
    auto os = open(dir / ("qoe_" + name + ".csv"));
    os << "qoe,cdf\n";
    for (auto [v, c] : empirical_cdf(r.qoe.at(name))) os << v << ',' << c << '\n';
  }
  {
    auto os = open(dir / "delay.csv");
    os << "user_id,event_pts,switch_delay_ms\n";
    for (const auto& d : r.delays) os << d.user_id << ',' << d.request_pts << ',' << d.ms << '\n';
  }
  {
    auto os = open(dir / "bandwidth.csv");
    os << "user_id,chunk,varfvv_bits,has10_bits,conventional_bits\n";
    for (const auto& b : r.bandwidth)
      os << b.user_id << ',' << b.chunk << ',' << b.varfvv << ',' << b.has10 << ',' << b.conventional << '\n';
  }
  {
    auto os = open(dir / "popularity.csv");
    write_popularity_header(os);
    const auto& prec = r.precision.at(r.predictor);
    for (std::size_t j = 0; j < r.actual.size(); ++j) write_popularity_rows(os, r.actual[j], r.predicted[j], prec[j]);
  }
  {
    auto os = open(dir / "allocation.csv");
    write_allocation_header(os);
    for (const auto& a : r.allocations) write_allocation_rows(os, a);
  }
  {
    auto os = open(dir / "summary.json");
    os << nlohmann::json(summarize(r)).dump(2) << '\n';
  }
}

inline ReportSummary load_summary(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path);
  try {
    return nlohmann::json::parse(in).get<ReportSummary>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::Parse, path + ": " + e.what());
  }
}

}  // namespace varfvv
