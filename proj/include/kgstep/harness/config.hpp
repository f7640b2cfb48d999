#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kgstep/error.hpp"
#include "kgstep/linear_solver.hpp"
#include "kgstep/newmark.hpp"
#include "kgstep/potential.hpp"
#include "kgstep/trend.hpp"
#include "kgstep/wave_packet.hpp"

namespace kgstep::harness {

using json = nlohmann::ordered_json;

/// Invalid configuration; line is 1-based when the offending text could be located.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::optional<int> line = std::nullopt)
      : Error(line ? "line " + std::to_string(*line) + ": " + what : what), line_(line) {}
  std::optional<int> line() const noexcept { return line_; }

 private:
  std::optional<int> line_;
};

struct PotentialConfig {
  std::string kind = "step";  // step | barrier | constant | piecewise
  double a1 = 0.0;
  double a2 = 150.0;
  double x_start = 0.0;
  double x_end = 1.0;
  double height = 0.0;
  std::vector<double> breakpoints;
  std::vector<double> values;

  PotentialProfile build() const {
    if (kind == "step") return PotentialProfile::step(a1, a2);
    if (kind == "constant") return PotentialProfile::constant(a1);
    if (kind == "barrier") return PotentialProfile::barrier(a1, x_start, x_end, height);
    if (kind == "piecewise") return PotentialProfile(breakpoints, values);
    throw ConfigError("unknown potential kind '" + kind + "' (expected step, barrier, constant or piecewise)");
  }
};

struct WindowConfig {
  std::string policy = "auto";  // auto | fixed
  double t_lo = 0.0;
  double t_hi = 0.0;
};

struct RunConfig {
  double c = 1.0;
  PotentialConfig potential;
  double L = 60.0;
  int n_cells = 2400;
  double dt = 0.01;
  double T = 15.0;
  double beta = 0.25;
  double gamma = 0.5;
  CgOptions cg;
  std::string solver = "cg";                 // cg | direct
  std::string initial_data = "interpolation";  // interpolation | l2
  WavePacketSpec packet;
  long stride = 10;
  std::vector<double> snapshot_times;
  SmoothingSpec smoothing;
  WindowConfig window;
  std::string output_dir = "out";
  std::string seed_label;
  bool plot_script = false;

  double h() const { return 2.0 * L / n_cells; }

  long n_steps() const { return std::lround(T / dt); }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
    };
    positive(c, "c");
    positive(L, "L");
    positive(dt, "dt");
    positive(T, "T");
    if (n_cells < 2 || n_cells % 2 != 0) throw ConfigError("n_cells must be an even integer >= 2");
    const double n = std::round(T / dt);
    if (std::abs(n * dt - T) > 4.0 * std::numeric_limits<double>::epsilon() * T)
      throw ConfigError("T must be an integer multiple of dt (T/dt = " + std::to_string(T / dt) + ")");
    if (stride < 1) throw ConfigError("stride must be at least 1");
    if (solver != "cg" && solver != "direct") throw ConfigError("solver must be 'cg' or 'direct'");
    if (initial_data != "interpolation" && initial_data != "l2")
      throw ConfigError("initial_data must be 'interpolation' or 'l2'");
    if (window.policy != "auto" && window.policy != "fixed")
      throw ConfigError("window.policy must be 'auto' or 'fixed'");
    if (window.policy == "fixed" && !(window.t_lo < window.t_hi))
      throw ConfigError("fixed window needs t_lo < t_hi");
    if (smoothing.bandwidth < 0.0) throw ConfigError("smoothing.bandwidth must be nonnegative");
    for (double ts : snapshot_times)
      if (ts < 0.0 || ts > T) throw ConfigError("snapshot time " + std::to_string(ts) + " outside [0, T]");
    try {
      cg.validate();
      packet.validate();
      potential.build();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
  }

  NewmarkParams newmark_params() const { return {beta, gamma, dt, n_steps()}; }

  WavePacketSpec packet_spec() const {
    WavePacketSpec p = packet;
    p.c = c;
    return p;
  }
};

inline std::string to_string(PacketShape s) {
  return s == PacketShape::squared_gaussian ? "squared_gaussian" : "gaussian";
}

// ---------------------------------------------------------------------------
// JSON mapping

inline json to_json(const RunConfig& c) {
  json j;
  j["c"] = c.c;
  json pot;
  pot["kind"] = c.potential.kind;
  pot["a1"] = c.potential.a1;
  pot["a2"] = c.potential.a2;
  pot["x_start"] = c.potential.x_start;
  pot["x_end"] = c.potential.x_end;
  pot["height"] = c.potential.height;
  pot["breakpoints"] = c.potential.breakpoints;
  pot["values"] = c.potential.values;
  j["potential"] = pot;
  j["L"] = c.L;
  j["n_cells"] = c.n_cells;
  j["dt"] = c.dt;
  j["T"] = c.T;
  j["beta"] = c.beta;
  j["gamma"] = c.gamma;
  j["cg"] = {{"rel_tolerance", c.cg.rel_tolerance}, {"max_iterations", c.cg.max_iterations}, {"jacobi", c.cg.jacobi}};
  j["solver"] = c.solver;
  j["initial_data"] = c.initial_data;
  j["packet"] = {{"amplitude", c.packet.amplitude},
                 {"center", c.packet.center},
                 {"width", c.packet.width},
                 {"shape", to_string(c.packet.shape)}};
  j["stride"] = c.stride;
  j["snapshot_times"] = c.snapshot_times;
  j["smoothing"] = {{"kernel", to_string(c.smoothing.kernel)}, {"bandwidth", c.smoothing.bandwidth}};
  j["window"] = {{"policy", c.window.policy}, {"t_lo", c.window.t_lo}, {"t_hi", c.window.t_hi}};
  j["output_dir"] = c.output_dir;
  j["seed_label"] = c.seed_label;
  j["plot_script"] = c.plot_script;
  return j;
}

namespace detail {

inline int line_of_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

inline std::optional<int> line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find("\"" + key + "\"");
  if (pos == std::string::npos) return std::nullopt;
  return line_of_offset(text, pos);
}

/// Reads members of one JSON object, rejecting keys that were never consumed.
class ObjectReader {
 public:
  ObjectReader(const json& obj, std::string path, const std::string& text)
      : obj_(obj), path_(std::move(path)), text_(text) {
    if (!obj_.is_object()) throw ConfigError("'" + path_ + "' must be an object", line_of_key(text_, leaf(path_)));
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!obj_.contains(key)) return;
    try {
      out = obj_.at(key).template get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("'" + qualified(key) + "' has the wrong type", line_of_key(text_, key));
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return obj_.contains(key) ? &obj_.at(key) : nullptr;
  }

  std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : obj_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + qualified(k) + "'", line_of_key(text_, k));
  }

  const std::string& text() const { return text_; }

 private:
  static std::string leaf(const std::string& p) {
    const auto dot = p.rfind('.');
    return dot == std::string::npos ? p : p.substr(dot + 1);
  }
  const json& obj_;
  std::string path_;
  const std::string& text_;
  std::set<std::string> seen_;
};

template <class T>
std::optional<int> locate(const std::string& text, const char* key) {
  return line_of_key(text, key);
}

}  // namespace detail

/// Fills cfg from a JSON object; keys that are absent keep their current values.
/// `text` is the source document, used to attach line numbers to errors.
inline void apply_json(RunConfig& cfg, const json& j, const std::string& text = {}) {
  detail::ObjectReader r(j, "", text);
  r.get("c", cfg.c);
  if (const json* p = r.child("potential")) {
    detail::ObjectReader pr(*p, "potential", text);
    pr.get("kind", cfg.potential.kind);
    pr.get("a1", cfg.potential.a1);
    pr.get("a2", cfg.potential.a2);
    pr.get("x_start", cfg.potential.x_start);
    pr.get("x_end", cfg.potential.x_end);
    pr.get("height", cfg.potential.height);
    pr.get("breakpoints", cfg.potential.breakpoints);
    pr.get("values", cfg.potential.values);
    pr.finish();
  }
  r.get("L", cfg.L);
  r.get("n_cells", cfg.n_cells);
  r.get("dt", cfg.dt);
  r.get("T", cfg.T);
  r.get("beta", cfg.beta);
  r.get("gamma", cfg.gamma);
  if (const json* p = r.child("cg")) {
    detail::ObjectReader cr(*p, "cg", text);
    cr.get("rel_tolerance", cfg.cg.rel_tolerance);
    cr.get("max_iterations", cfg.cg.max_iterations);
    cr.get("jacobi", cfg.cg.jacobi);
    cr.finish();
  }
  r.get("solver", cfg.solver);
  r.get("initial_data", cfg.initial_data);
  if (const json* p = r.child("packet")) {
    detail::ObjectReader pr(*p, "packet", text);
    pr.get("amplitude", cfg.packet.amplitude);
    pr.get("center", cfg.packet.center);
    pr.get("width", cfg.packet.width);
    std::string shape = to_string(cfg.packet.shape);
    pr.get("shape", shape);
    if (shape == "squared_gaussian")
      cfg.packet.shape = PacketShape::squared_gaussian;
    else if (shape == "gaussian")
      cfg.packet.shape = PacketShape::gaussian;
    else
      throw ConfigError("packet.shape must be 'squared_gaussian' or 'gaussian'", detail::line_of_key(text, "shape"));
    pr.finish();
  }
  r.get("stride", cfg.stride);
  r.get("snapshot_times", cfg.snapshot_times);
  if (const json* p = r.child("smoothing")) {
    detail::ObjectReader sr(*p, "smoothing", text);
    std::string kernel = to_string(cfg.smoothing.kernel);
    sr.get("kernel", kernel);
    try {
      cfg.smoothing.kernel = kernel_from_string(kernel);
    } catch (const Error& e) {
      throw ConfigError(e.what(), detail::line_of_key(text, "kernel"));
    }
    sr.get("bandwidth", cfg.smoothing.bandwidth);
    sr.finish();
  }
  if (const json* p = r.child("window")) {
    detail::ObjectReader wr(*p, "window", text);
    wr.get("policy", cfg.window.policy);
    wr.get("t_lo", cfg.window.t_lo);
    wr.get("t_hi", cfg.window.t_hi);
    wr.finish();
  }
  r.get("output_dir", cfg.output_dir);
  r.get("seed_label", cfg.seed_label);
  r.get("plot_script", cfg.plot_script);
  r.finish();
}

/// Parses a config document. A run manifest is accepted too: its "config" member is used.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  json j;
  try {
    j = json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(), detail::line_of_offset(text, e.byte));
  }
  if (j.is_object() && j.contains("config") && j.contains("files")) j = j.at("config");
  apply_json(base, j, text);
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace kgstep::harness
