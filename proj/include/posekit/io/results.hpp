#pragma once

// BOP results CSV (predictions) and metric report serialization.

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include "posekit/io/bop.hpp"
#include "posekit/io/text.hpp"
#include "posekit/metrics.hpp"

namespace posekit::io {

inline constexpr const char* kResultsHeader = "scene_id,im_id,obj_id,score,R,t,time";

// Parses BOP results rows: R as 9 space-separated row-major values, t as 3
// space-separated millimeter values. Writing then parsing returns the same
// meters bit for bit.
inline std::vector<PosePrediction> parse_predictions(std::string_view text, const std::string& source = "<memory>") {
  std::vector<PosePrediction> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    const std::size_t line_start = pos;
    pos = end == text.size() ? end : end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    if (!header_seen) {
      if (line != kResultsHeader)
        throw ParseError(source, line_start, "bad header, expected '" + std::string(kResultsHeader) + "'");
      header_seen = true;
      continue;
    }
    const std::string row = "row " + std::to_string(line_no);
    const auto fields = split(line, ',');
    if (fields.size() != 7)
      throw ParseError(source, line_start, row + ": expected 7 fields, got " + std::to_string(fields.size()));
    auto integer = [&](std::string_view f, const char* name) {
      const auto v = parse_long(f);
      if (!v) throw ParseError(source, line_start, row + ": bad " + name);
      return static_cast<int>(*v);
    };
    auto real = [&](std::string_view f, const char* name) {
      const auto v = parse_double(f);
      if (!v) throw ParseError(source, line_start, row + ": bad " + name);
      return *v;
    };
    auto reals = [&](std::string_view f, std::size_t n, const char* name) {
      const auto toks = tokens(f);
      if (toks.size() != n)
        throw ParseError(source, line_start, row + ": " + name + " needs " + std::to_string(n) + " values");
      std::vector<double> v;
      for (auto t : toks) v.push_back(real(t, name));
      return v;
    };
    PosePrediction p;
    p.scene_id = integer(fields[0], "scene_id");
    p.image_id = integer(fields[1], "im_id");
    p.class_id = integer(fields[2], "obj_id");
    p.score = real(fields[3], "score");
    if (!(p.score >= 0.0 && p.score <= 1.0)) throw DataError(source + " " + row + ": score outside [0, 1]");
    p.pose.R = rotation_from_row_major(reals(fields[4], 9, "R"), source + " " + row);
    const auto t_text = tokens(fields[5]);
    if (t_text.size() != 3) throw ParseError(source, line_start, row + ": t needs 3 values");
    for (int i = 0; i < 3; ++i) {
      const auto v = parse_scaled(t_text[static_cast<std::size_t>(i)], kMillimeterExp);
      if (!v) throw ParseError(source, line_start, row + ": bad t");
      p.pose.t[i] = *v;
    }
    if (!p.pose.t.allFinite()) throw DataError(source + " " + row + ": non-finite translation");
    p.time = real(fields[6], "time");
    out.push_back(p);
  }
  if (!header_seen) throw ParseError(source, 0, "missing header");
  return out;
}

inline std::vector<PosePrediction> load_predictions(const std::filesystem::path& path) {
  return parse_predictions(read_file(path), path.string());
}

inline std::string format_predictions(const std::vector<PosePrediction>& preds) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const PosePrediction& p : preds) {
    out += std::to_string(p.scene_id) + "," + std::to_string(p.image_id) + "," + std::to_string(p.class_id) + "," +
           format_double(p.score) + ",";
    for (int i = 0; i < 9; ++i) out += (i ? " " : "") + format_double(p.pose.R(i / 3, i % 3));
    out += ",";
    for (int i = 0; i < 3; ++i) out += (i ? " " : "") + format_scaled(p.pose.t[i], -kMillimeterExp);
    out += "," + format_double(p.time) + "\n";
  }
  return out;
}

enum class ReportFormat { Csv, Json };

inline constexpr const char* kReportHeader =
    "class,instances,matched,unmatched,recall_add_s_pct,auc_adds_pct,auc_add_s_pct,trans_error_cm,rot_error_deg";

inline std::string format_report_csv(const MetricReport& r) {
  std::string out = std::string(kReportHeader) + "\n";
  auto row = [&](const ReportRow& x) {
    out += x.label + "," + std::to_string(x.instances) + "," + std::to_string(x.matched) + "," +
           std::to_string(x.unmatched) + "," + format_double(x.recall_add_s) + "," + format_double(x.auc_adds) + "," +
           format_double(x.auc_add_s) + "," + format_double(x.trans_error_cm) + "," + format_double(x.rot_error_deg) +
           "\n";
  };
  for (const ReportRow& c : r.classes) row(c);
  row(r.mean);
  return out;
}

inline nlohmann::json row_to_json(const ReportRow& x) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"class", x.label},
          {"instances", x.instances},
          {"matched", x.matched},
          {"unmatched", x.unmatched},
          {"recall_add_s_pct", num(x.recall_add_s)},
          {"auc_adds_pct", num(x.auc_adds)},
          {"auc_add_s_pct", num(x.auc_add_s)},
          {"trans_error_cm", num(x.trans_error_cm)},
          {"rot_error_deg", num(x.rot_error_deg)}};
}

inline std::string format_report_json(const MetricReport& r) {
  nlohmann::json j;
  j["classes"] = nlohmann::json::array();
  for (const ReportRow& c : r.classes) j["classes"].push_back(row_to_json(c));
  j["mean"] = row_to_json(r.mean);
  j["warnings"] = r.warnings;
  return j.dump(2) + "\n";
}

inline MetricReport parse_report_csv(std::string_view text, const std::string& source = "<memory>") {
  MetricReport r;
  const auto lines = split(text, '\n');
  if (lines.empty() || lines[0] != kReportHeader) throw ParseError(source, 0, "bad report header");
  std::vector<ReportRow> rows;
  std::size_t offset = lines[0].size() + 1;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    const std::size_t line_start = offset;
    offset += line.size() + 1;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 9) throw ParseError(source, line_start, "row " + std::to_string(i + 1) + ": expected 9 fields");
    ReportRow x;
    x.label = std::string(f[0]);
    auto count = [&](std::string_view s) {
      const auto v = parse_long(s);
      if (!v || *v < 0) throw ParseError(source, line_start, "bad count");
      return static_cast<std::size_t>(*v);
    };
    auto real = [&](std::string_view s) {
      const auto v = parse_double(s);
      if (!v) throw ParseError(source, line_start, "bad number");
      return *v;
    };
    x.instances = count(f[1]);
    x.matched = count(f[2]);
    x.unmatched = count(f[3]);
    x.recall_add_s = real(f[4]);
    x.auc_adds = real(f[5]);
    x.auc_add_s = real(f[6]);
    x.trans_error_cm = real(f[7]);
    x.rot_error_deg = real(f[8]);
    rows.push_back(x);
  }
  if (rows.empty() || rows.back().label != "mean") throw ParseError(source, offset, "missing mean row");
  r.mean = rows.back();
  rows.pop_back();
  r.classes = std::move(rows);
  return r;
}

inline MetricReport parse_report_json(std::string_view text, const std::string& source = "<memory>") {
  const nlohmann::json j = parse_json(std::string(text), source);
  auto row = [&](const nlohmann::json& o) {
    try {
      ReportRow x;
      x.label = o.at("class").get<std::string>();
      x.instances = o.at("instances").get<std::size_t>();
      x.matched = o.at("matched").get<std::size_t>();
      x.unmatched = o.at("unmatched").get<std::size_t>();
      auto num = [&](const char* k) { return o.at(k).is_null() ? std::nan("") : o.at(k).get<double>(); };
      x.recall_add_s = num("recall_add_s_pct");
      x.auc_adds = num("auc_adds_pct");
      x.auc_add_s = num("auc_add_s_pct");
      x.trans_error_cm = num("trans_error_cm");
      x.rot_error_deg = num("rot_error_deg");
      return x;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(source + ": malformed report row: " + e.what());
    }
  };
  MetricReport r;
  if (!j.is_object() || !j.contains("classes") || !j.contains("mean")) throw DataError(source + ": not a report");
  for (const auto& c : j.at("classes")) r.classes.push_back(row(c));
  r.mean = row(j.at("mean"));
  if (j.contains("warnings") && j.at("warnings").is_array())
    for (const auto& w : j.at("warnings"))
      if (w.is_string()) r.warnings.push_back(w.get<std::string>());
  return r;
}

inline void save_report(const MetricReport& r, const std::filesystem::path& path, ReportFormat format) {
  write_file(path, format == ReportFormat::Csv ? format_report_csv(r) : format_report_json(r));
}

inline MetricReport load_report(const std::filesystem::path& path, ReportFormat format) {
  const std::string text = read_file(path);
  return format == ReportFormat::Csv ? parse_report_csv(text, path.string()) : parse_report_json(text, path.string());
}

}  // namespace posekit::io
