#pragma once

// File formats: YAML sample specs, CSV traces, JSON reports.

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

#include "json.hpp"
#include "qoct/error.hpp"
#include "qoct/interferogram.hpp"
#include "qoct/morphology_ga.hpp"
#include "qoct/stack_model.hpp"
#include "qoct/units.hpp"

namespace qoct {

inline constexpr int kSchemaVersion = 1;

/// Shortest decimal form that reads back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& where) {
  double x = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto res = std::from_chars(first, last, x);
  if (res.ec != std::errc() || res.ptr != last) {
    throw ValidationError(where + ": '" + std::string(text) + "' is not a number");
  }
  return x;
}

// ---------------------------------------------------------------------------
// Sample specs

struct InterfaceSpec {
  double R = 0.0;  ///< intensity reflectivity
  int sign = 1;
  double film_kappa = 0.0;
  std::string label;

  friend bool operator==(const InterfaceSpec&, const InterfaceSpec&) = default;
};

struct SegmentSpec {
  double optical_path_um = 0.0;  ///< c * tau'
  double bulk_kappa = 0.0;
  std::string label;

  friend bool operator==(const SegmentSpec&, const SegmentSpec&) = default;
};

struct SampleSpecFile {
  int schema_version = kSchemaVersion;
  std::string name;
  std::vector<InterfaceSpec> interfaces;
  std::vector<SegmentSpec> segments;

  Sample to_sample() const {
    std::vector<Interface> ifaces;
    for (const auto& i : interfaces) {
      if (!(i.R >= 0.0 && i.R < 1.0)) {
        throw InvalidInterface("reflectivity R must lie in [0, 1), got " + format_double(i.R));
      }
      ifaces.push_back({i.sign * std::sqrt(i.R), i.film_kappa});
    }
    std::vector<Segment> segs;
    for (const auto& s : segments) segs.push_back({path_um_to_seconds(s.optical_path_um), s.bulk_kappa});
    return Sample(std::move(ifaces), std::move(segs));
  }

  static SampleSpecFile from_sample(const Sample& sample, std::string name = {}) {
    SampleSpecFile f;
    f.name = std::move(name);
    for (const auto& i : sample.interfaces()) {
      f.interfaces.push_back({i.r_fwd * i.r_fwd, i.r_fwd < 0.0 ? -1 : 1, i.film_kappa, {}});
    }
    for (const auto& s : sample.segments()) {
      f.segments.push_back({seconds_to_path_um(s.optical_delay), s.bulk_kappa, {}});
    }
    return f;
  }

  friend bool operator==(const SampleSpecFile&, const SampleSpecFile&) = default;
};

namespace detail {

inline std::string at_line(const YAML::Node& node) {
  const auto mark = node.Mark();
  return mark.line >= 0 ? "line " + std::to_string(mark.line + 1) : "sample spec";
}

inline void check_keys(const YAML::Node& map, std::initializer_list<const char*> allowed) {
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ValidationError(at_line(kv.first) + ": unknown key '" + key + "'");
  }
}

inline double yaml_number(const YAML::Node& node) {
  if (!node.IsScalar()) throw ValidationError(at_line(node) + ": expected a number");
  return parse_double(node.Scalar(), at_line(node));
}

inline std::string yaml_string(const YAML::Node& node) {
  if (!node.IsScalar()) throw ValidationError(at_line(node) + ": expected a string");
  return node.Scalar();
}

}  // namespace detail

inline SampleSpecFile parse_sample_spec(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ValidationError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ValidationError("sample spec must be a mapping");
  detail::check_keys(root, {"schema_version", "name", "interfaces", "segments"});

  SampleSpecFile f;
  if (!root["schema_version"]) throw ValidationError("sample spec lacks schema_version");
  const double version = detail::yaml_number(root["schema_version"]);
  if (version != kSchemaVersion) {
    throw ValidationError(detail::at_line(root["schema_version"]) + ": unsupported schema_version " +
                          root["schema_version"].Scalar() + " (expected " +
                          std::to_string(kSchemaVersion) + ")");
  }
  if (root["name"]) f.name = detail::yaml_string(root["name"]);

  const YAML::Node ifaces = root["interfaces"];
  if (!ifaces || !ifaces.IsSequence() || ifaces.size() == 0) {
    throw ValidationError("sample spec needs a non-empty 'interfaces' list");
  }
  for (const auto& node : ifaces) {
    if (!node.IsMap()) throw ValidationError(detail::at_line(node) + ": interface must be a mapping");
    detail::check_keys(node, {"R", "sign", "film_kappa", "label"});
    if (!node["R"]) throw ValidationError(detail::at_line(node) + ": interface lacks R");
    InterfaceSpec i;
    i.R = detail::yaml_number(node["R"]);
    if (!(i.R >= 0.0 && i.R < 1.0)) {
      throw InvalidInterface(detail::at_line(node["R"]) + ": R must lie in [0, 1)");
    }
    if (node["sign"]) {
      const double s = detail::yaml_number(node["sign"]);
      if (s != 1.0 && s != -1.0) throw ValidationError(detail::at_line(node["sign"]) + ": sign must be 1 or -1");
      i.sign = static_cast<int>(s);
    }
    if (node["film_kappa"]) {
      i.film_kappa = detail::yaml_number(node["film_kappa"]);
      if (!(i.film_kappa >= 0.0)) {
        throw GainNotSupported(detail::at_line(node["film_kappa"]) + ": film_kappa must be >= 0");
      }
    }
    if (node["label"]) i.label = detail::yaml_string(node["label"]);
    f.interfaces.push_back(i);
  }

  const YAML::Node segs = root["segments"];
  if (segs) {
    if (!segs.IsSequence()) throw ValidationError(detail::at_line(segs) + ": 'segments' must be a list");
    for (const auto& node : segs) {
      if (!node.IsMap()) throw ValidationError(detail::at_line(node) + ": segment must be a mapping");
      detail::check_keys(node, {"optical_path_um", "bulk_kappa", "label"});
      if (!node["optical_path_um"]) {
        throw ValidationError(detail::at_line(node) + ": segment lacks optical_path_um");
      }
      SegmentSpec s;
      s.optical_path_um = detail::yaml_number(node["optical_path_um"]);
      if (!(s.optical_path_um > 0.0)) {
        throw ValidationError(detail::at_line(node["optical_path_um"]) + ": optical_path_um must be > 0");
      }
      if (node["bulk_kappa"]) {
        s.bulk_kappa = detail::yaml_number(node["bulk_kappa"]);
        if (!(s.bulk_kappa >= 0.0)) {
          throw GainNotSupported(detail::at_line(node["bulk_kappa"]) + ": bulk_kappa must be >= 0");
        }
      }
      if (node["label"]) s.label = detail::yaml_string(node["label"]);
      f.segments.push_back(s);
    }
  }
  if (f.segments.size() + 1 != f.interfaces.size()) {
    throw ValidationError("sample spec with " + std::to_string(f.interfaces.size()) +
                          " interfaces needs " + std::to_string(f.interfaces.size() - 1) +
                          " segments, got " + std::to_string(f.segments.size()));
  }
  f.to_sample();  // full validation
  return f;
}

/// Canonical text: fixed key order, shortest round-trip numbers, no comments.
inline std::string emit_sample_spec(const SampleSpecFile& f) {
  auto quoted = [](const std::string& s) {
    YAML::Emitter e;
    e << YAML::DoubleQuoted << s;
    return std::string(e.c_str());
  };
  std::ostringstream out;
  out << "schema_version: " << f.schema_version << "\n";
  if (!f.name.empty()) out << "name: " << quoted(f.name) << "\n";
  out << "interfaces:\n";
  for (const auto& i : f.interfaces) {
    out << "  - R: " << format_double(i.R) << "\n";
    out << "    sign: " << i.sign << "\n";
    out << "    film_kappa: " << format_double(i.film_kappa) << "\n";
    if (!i.label.empty()) out << "    label: " << quoted(i.label) << "\n";
  }
  if (f.segments.empty()) {
    out << "segments: []\n";
  } else {
    out << "segments:\n";
    for (const auto& s : f.segments) {
      out << "  - optical_path_um: " << format_double(s.optical_path_um) << "\n";
      out << "    bulk_kappa: " << format_double(s.bulk_kappa) << "\n";
      if (!s.label.empty()) out << "    label: " << quoted(s.label) << "\n";
    }
  }
  return out.str();
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

inline SampleSpecFile load_sample_spec(const std::string& path) {
  try {
    return parse_sample_spec(read_text_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline Sample load_sample(const std::string& path) { return load_sample_spec(path).to_sample(); }

inline void save_sample(const Sample& sample, const std::string& path, const std::string& name = {}) {
  write_text_file(path, emit_sample_spec(SampleSpecFile::from_sample(sample, name)));
}

// ---------------------------------------------------------------------------
// Trace CSV

inline constexpr const char* kTraceMarker = "# qoct-trace v1";
inline constexpr const char* kTraceHeader = "tau_um,coincidence_norm";

struct TraceFile {
  std::map<std::string, std::string> meta;
  std::vector<double> tau_um;  ///< optical path c * tau
  std::vector<double> counts;  ///< C / Gamma0

  Interferogram to_interferogram() const {
    Interferogram ig;
    ig.delays.reserve(tau_um.size());
    for (double t : tau_um) ig.delays.push_back(path_um_to_seconds(t));
    ig.counts = counts;
    ig.meta = meta;
    if (auto it = meta.find("gamma0"); it != meta.end()) ig.gamma0 = parse_double(it->second, "gamma0");
    return ig;
  }

  /// tau_um is passed separately so that a grid built in um is written as-is.
  static TraceFile from_interferogram(const Interferogram& ig, std::vector<double> tau_um) {
    if (tau_um.size() != ig.counts.size()) throw ValidationError("grid and trace differ in length");
    TraceFile f;
    f.meta = ig.meta;
    f.meta["gamma0"] = format_double(ig.gamma0);
    f.meta["normalization"] = "C/Gamma0";
    f.tau_um = std::move(tau_um);
    f.counts = ig.counts;
    return f;
  }

  friend bool operator==(const TraceFile&, const TraceFile&) = default;
};

inline std::string emit_trace(const TraceFile& f) {
  std::string out = std::string(kTraceMarker) + "\n";
  for (const auto& [k, v] : f.meta) {
    if (k.find_first_of(":\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ValidationError("metadata key or value contains a reserved character: " + k);
    }
    out += "# " + k + ": " + v + "\n";
  }
  out += std::string(kTraceHeader) + "\n";
  for (std::size_t i = 0; i < f.tau_um.size(); ++i) {
    out += format_double(f.tau_um[i]) + "," + format_double(f.counts[i]) + "\n";
  }
  return out;
}

inline TraceFile parse_trace(const std::string& text) {
  TraceFile f;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  bool header = false;
  auto where = [&] { return "line " + std::to_string(n); };
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n == 1) {
      if (line != kTraceMarker) throw ValidationError("line 1: not a qoct trace file");
      continue;
    }
    if (!header) {
      if (line.rfind("# ", 0) == 0) {
        const auto colon = line.find(": ", 2);
        if (colon == std::string::npos) throw ValidationError(where() + ": malformed metadata line");
        f.meta[line.substr(2, colon - 2)] = line.substr(colon + 2);
        continue;
      }
      if (line != kTraceHeader) throw ValidationError(where() + ": expected header '" + kTraceHeader + "'");
      header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError(where() + ": expected two columns");
    f.tau_um.push_back(parse_double(std::string_view(line).substr(0, comma), where()));
    f.counts.push_back(parse_double(std::string_view(line).substr(comma + 1), where()));
  }
  if (!header) throw ValidationError("trace file has no data header");
  if (f.tau_um.empty()) throw ValidationError("trace file has no rows");
  return f;
}

inline TraceFile load_trace(const std::string& path) {
  try {
    return parse_trace(read_text_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

inline void save_trace(const TraceFile& f, const std::string& path) { write_text_file(path, emit_trace(f)); }

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const TraceLabels& labels) {
  nlohmann::json j;
  j["gamma0"] = labels.visibilities.gamma0;
  auto& feats = j["features"] = nlohmann::json::array();
  for (std::size_t k = 0; k < labels.features.size(); ++k) {
    const auto& f = labels.features[k];
    feats.push_back({{"label", labels.labels[k]},
                     {"tau_um", seconds_to_path_um(f.delay)},
                     {"amplitude", f.amplitude},
                     {"kind", f.kind == FeatureKind::interface ? "interface" : "echo"},
                     {"order", f.order},
                     {"visibility", labels.visibilities.dips.empty() ? 0.0 : labels.visibilities.dips[k]}});
  }
  auto& groups = j["positions"] = nlohmann::json::array();
  for (const auto& g : labels.groups) {
    nlohmann::json c = nlohmann::json::array();
    for (const auto& x : g.contributions) {
      c.push_back({{"label", x.label}, {"visibility", x.visibility}, {"artifact", x.artifact}});
    }
    groups.push_back({{"tau_um", seconds_to_path_um(g.position)},
                      {"net_visibility", g.net_visibility},
                      {"cancelling", g.cancelling},
                      {"contributions", std::move(c)}});
  }
  return j;
}

inline nlohmann::json to_json(const RetrievalResult& r) {
  nlohmann::json j;
  j["n_interfaces"] = r.n_interfaces_selected;
  j["best_fitness"] = r.best_fitness;
  j["no_features_detected"] = r.no_features;
  j["evaluations"] = r.evaluations;
  j["signs"] = r.signs;
  auto& params = j["parameters"] = nlohmann::json::array();
  for (const auto& p : r.best_parameters) {
    params.push_back({{"name", p.name}, {"unit", p.unit}, {"value", p.value}, {"fixed", p.fixed}});
  }
  j["fitness_history"] = r.fitness_history;
  auto& curve = j["fitness_vs_n"] = nlohmann::json::array();
  for (const auto& [n, f] : r.fitness_vs_n) curve.push_back({{"n_interfaces", n}, {"fitness", f}});
  return j;
}

}  // namespace qoct
