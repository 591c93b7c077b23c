#pragma once

// CSV trace files. Agent ids are written 1-based, cluster indices 0-based
// (per round, ordered by smallest member). Reals use 17 significant digits,
// which round-trips every double through strtod.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "opengt/errors.hpp"
#include "opengt/world.hpp"

namespace opengt {

inline constexpr const char* kTraceHeader = "round,agent,active,cluster,x,y,z,w,h";
inline constexpr const char* kMetricsHeader = "round,cluster,size,minimizer,error,lemma1_residual";

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_trace_csv(const Trace& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const auto& rec : trace.rounds) {
    for (const auto& a : rec.agents) {
      out << rec.round << ',' << a.id + 1 << ",1," << rec.partition.cluster_of.at(a.id) << ',' << format_real(a.x)
          << ',' << format_real(a.y) << ',' << format_real(a.z) << ',' << format_real(a.w) << ',' << (a.h ? 1 : 0)
          << '\n';
    }
  }
}

inline void write_metrics_csv(const Trace& trace, std::ostream& out) {
  out << kMetricsHeader << '\n';
  for (const auto& rec : trace.rounds) {
    for (const auto& c : rec.clusters) {
      out << rec.round << ',' << c.index << ',' << c.members.size() << ',' << format_real(c.minimizer) << ','
          << format_real(c.error) << ',' << format_real(c.lemma1_residual) << '\n';
    }
  }
}

namespace detail {

inline void write_file(const std::string& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  body(out);
  out.flush();
  if (!out) throw IoError("write failed: " + path);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  return fields;
}

inline double parse_real(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw IoError(context + ": not a number: '" + s + "'");
  return v;
}

inline std::size_t parse_index(const std::string& s, const std::string& context) {
  char* end = nullptr;
  const auto v = std::strtoull(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0') throw IoError(context + ": not an integer: '" + s + "'");
  return static_cast<std::size_t>(v);
}

// Reads a CSV with the given header; calls `row` for every data line.
inline void read_csv(const std::string& path, const char* header, std::size_t columns,
                     const std::function<void(const std::vector<std::string>&, const std::string&)>& row) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line != header) throw IoError(path + ": expected header '" + header + "'");
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string ctx = path + ":" + std::to_string(line_no);
    if (fields.size() != columns) throw IoError(ctx + ": expected " + std::to_string(columns) + " fields");
    row(fields, ctx);
  }
}

}  // namespace detail

// Throws IoError if the trace is empty or the file cannot be written.
inline void emit_trace(const Trace& trace, const std::string& path) {
  if (trace.rounds.empty()) throw IoError("refusing to write an empty trace to " + path);
  detail::write_file(path, [&](std::ostream& out) { write_trace_csv(trace, out); });
}

inline void emit_metrics(const Trace& trace, const std::string& path) {
  if (trace.rounds.empty()) throw IoError("refusing to write empty metrics to " + path);
  detail::write_file(path, [&](std::ostream& out) { write_metrics_csv(trace, out); });
}

// Run metadata: seed, step size, Λ, and sizes.
inline void emit_meta(const Trace& trace, const std::string& path) {
  nlohmann::json meta{{"seed", trace.seed},
                      {"gamma", trace.gamma},
                      {"lambda", trace.lambda},
                      {"nodes", trace.node_count},
                      {"rounds", trace.rounds.empty() ? 0 : trace.rounds.back().round}};
  detail::write_file(path, [&](std::ostream& out) { out << meta.dump(2) << '\n'; });
}

struct TraceRow {
  std::size_t round;
  NodeId agent;  // 0-based
  bool active;
  std::size_t cluster;
  double x, y, z, w;
  bool h;
};

struct MetricsRow {
  std::size_t round;
  std::size_t cluster;
  std::size_t size;
  double minimizer, error, lemma1_residual;
};

inline std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::vector<TraceRow> rows;
  detail::read_csv(path, kTraceHeader, 9, [&](const auto& f, const std::string& ctx) {
    const auto agent = detail::parse_index(f[1], ctx);
    if (agent == 0) throw IoError(ctx + ": agent ids are 1-based");
    rows.push_back({detail::parse_index(f[0], ctx), agent - 1, detail::parse_index(f[2], ctx) != 0,
                    detail::parse_index(f[3], ctx), detail::parse_real(f[4], ctx), detail::parse_real(f[5], ctx),
                    detail::parse_real(f[6], ctx), detail::parse_real(f[7], ctx), detail::parse_index(f[8], ctx) != 0});
  });
  return rows;
}

inline std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
  std::vector<MetricsRow> rows;
  detail::read_csv(path, kMetricsHeader, 6, [&](const auto& f, const std::string& ctx) {
    rows.push_back({detail::parse_index(f[0], ctx), detail::parse_index(f[1], ctx), detail::parse_index(f[2], ctx),
                    detail::parse_real(f[3], ctx), detail::parse_real(f[4], ctx), detail::parse_real(f[5], ctx)});
  });
  return rows;
}

}  // namespace opengt
