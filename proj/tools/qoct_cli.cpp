// qoct: simulate, label and fit QOCT interferograms of layered samples.
//
// Exit codes: 0 success, 2 invalid input, 3 numerical failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "qoct/qoct.hpp"

namespace fs = std::filesystem;
using namespace qoct;

namespace {

struct SpectralFlags {
  double pump_nm = 404.5;
  double center_nm = 800.0;
  double filter_nm = 40.0;
  std::string filter_shape = "gaussian";
  double linewidth_hz = 200e3;

  void add(CLI::App& app) {
    app.add_option("--pump-nm", pump_nm, "pump wavelength [nm]")->capture_default_str();
    app.add_option("--center-nm", center_nm, "band-pass centre [nm]")->capture_default_str();
    app.add_option("--filter-nm", filter_nm, "band-pass FWHM [nm]")->capture_default_str();
    app.add_option("--filter-shape", filter_shape, "gaussian or rectangular")
        ->check(CLI::IsMember({"gaussian", "rectangular"}))
        ->capture_default_str();
    app.add_option("--pump-linewidth-hz", linewidth_hz, "pump linewidth FWHM [Hz]")
        ->capture_default_str();
  }

  /// Fills unset flags from trace metadata.
  void inherit(const CLI::App& app, const std::map<std::string, std::string>& meta) {
    auto take = [&](const char* flag, const char* key, double& v) {
      auto it = meta.find(key);
      if (app.count(flag) == 0 && it != meta.end()) v = parse_double(it->second, key);
    };
    take("--pump-nm", "pump_nm", pump_nm);
    take("--center-nm", "center_nm", center_nm);
    take("--filter-nm", "filter_nm", filter_nm);
    take("--pump-linewidth-hz", "pump_linewidth_hz", linewidth_hz);
    if (auto it = meta.find("filter_shape"); app.count("--filter-shape") == 0 && it != meta.end()) {
      filter_shape = it->second;
    }
  }

  SpectralModel model() const {
    return from_wavelengths(pump_nm, center_nm, filter_nm, linewidth_hz, parse_profile(filter_shape));
  }

  void record(std::map<std::string, std::string>& meta) const {
    meta["pump_nm"] = format_double(pump_nm);
    meta["center_nm"] = format_double(center_nm);
    meta["filter_nm"] = format_double(filter_nm);
    meta["filter_shape"] = filter_shape;
    meta["pump_linewidth_hz"] = format_double(linewidth_hz);
  }
};

/// A path, or the name of a bundled spec.
std::string resolve_sample(const std::string& ref) {
  if (fs::exists(ref)) return ref;
  for (const char* ext : {".yaml", ""}) {
    const fs::path p = fs::path(QOCT_DATA_DIR) / (ref + ext);
    if (fs::exists(p)) return p.string();
  }
  throw ValidationError("no sample spec file or bundled sample named '" + ref + "'");
}

std::pair<double, double> parse_range(const std::string& text, const std::string& what) {
  const auto colon = text.find(':', 1);
  if (colon == std::string::npos) throw ValidationError(what + " must look like lo:hi, got '" + text + "'");
  const double lo = parse_double(text.substr(0, colon), what);
  const double hi = parse_double(text.substr(colon + 1), what);
  if (!(lo < hi)) throw ValidationError(what + " needs lo < hi");
  return {lo, hi};
}

/// "k" or "lo:hi" with whole counts >= 1.
std::pair<int, int> parse_count_range(const std::string& text) {
  const auto colon = text.find(':');
  const double lo = parse_double(text.substr(0, colon), "--n-range");
  const double hi = colon == std::string::npos ? lo : parse_double(text.substr(colon + 1), "--n-range");
  if (lo != std::floor(lo) || hi != std::floor(hi) || lo < 1 || hi < lo || hi > 64) {
    throw ValidationError("--n-range needs whole interface counts 1 <= lo <= hi");
  }
  return {static_cast<int>(lo), static_cast<int>(hi)};
}

std::vector<double> grid_um(double lo, double hi, double step) {
  if (!(step > 0.0)) throw ValidationError("--tau-step-um must be > 0");
  const auto count = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + static_cast<double>(i) * step;
  return out;
}

void emit(const std::string& out, const std::string& text) {
  if (out.empty() || out == "-") {
    std::cout << text;
  } else {
    write_text_file(out, text);
  }
}

std::string command_line(int argc, char** argv) {
  std::string s;
  for (int i = 1; i < argc; ++i) s += (i > 1 ? " " : "") + std::string(argv[i]);
  return s;
}

std::size_t find_label(const std::vector<std::string>& labels, const std::string& name) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == name) return i;
  }
  try {
    const double idx = parse_double(name, "--pair");
    if (idx >= 0 && idx < static_cast<double>(labels.size()) && idx == std::floor(idx)) {
      return static_cast<std::size_t>(idx);
    }
  } catch (const ValidationError&) {
  }
  throw ValidationError("no feature '" + name + "' in this sample");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QOCT interferogram simulator and morphology retrieval"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "compute the interferogram of a sample");
  SpectralFlags sim_spec;
  std::string sim_sample, sim_out, sim_span, sim_engine = "numeric";
  double sim_step = 1.0, sim_noise = 0.0;
  std::uint64_t sim_seed = 1;
  sim->add_option("--sample", sim_sample, "sample spec file or bundled name")->required();
  sim_spec.add(*sim);
  sim->add_option("--tau-step-um", sim_step, "delay step [um]")->capture_default_str();
  sim->add_option("--tau-span-um", sim_span, "delay range lo:hi [um]; default covers the sample");
  sim->add_option("--engine", sim_engine, "numeric, closed-form or pulsed")
      ->check(CLI::IsMember({"numeric", "closed-form", "pulsed"}))
      ->capture_default_str();
  sim->add_option("--noise-counts", sim_noise, "mean background counts per point (0: noiseless)");
  sim->add_option("--seed", sim_seed, "noise seed")->capture_default_str();
  sim->add_option("--out", sim_out, "trace CSV (labels go to <out>.labels.json)");

  // fit
  auto* fit = app.add_subcommand("fit", "retrieve sample parameters from a trace");
  SpectralFlags fit_spec;
  std::string fit_trace, fit_out, fit_nrange = "2:4", fit_recon, fit_signs;
  std::vector<std::string> fit_fix, fit_bounds;
  std::size_t fit_pop = 300, fit_gens = 50;
  std::uint64_t fit_seed = 1;
  unsigned fit_threads = 1;
  bool fit_kappa = false;
  double fit_threshold = 0.0;
  double fit_mutation = -1.0;
  std::size_t fit_tournament = 3;
  fit->add_option("--trace", fit_trace, "target trace CSV")->required();
  fit_spec.add(*fit);
  fit->add_option("--n-range", fit_nrange, "interface counts lo:hi")->capture_default_str();
  fit->add_option("--fix", fit_fix, "pin a parameter, name=value (repeatable)");
  fit->add_option("--bounds", fit_bounds, "search range, name=lo:hi (repeatable)");
  fit->add_option("--signs", fit_signs,
                  "reflection signs by interface, e.g. 1,-1 (missing entries: +1)");
  fit->add_flag("--fit-kappa", fit_kappa, "search segment losses too (default: pinned to 0)");
  fit->add_option("--pop", fit_pop, "population size")->capture_default_str();
  fit->add_option("--gens", fit_gens, "maximum generations")->capture_default_str();
  fit->add_option("--mutation-rate", fit_mutation, "per-bit mutation rate (default 1/length)");
  fit->add_option("--tournament", fit_tournament, "tournament size")->capture_default_str();
  fit->add_option("--threshold", fit_threshold, "stop once fitness <= threshold");
  fit->add_option("--seed", fit_seed, "GA seed")->capture_default_str();
  fit->add_option("--threads", fit_threads, "fitness workers")->capture_default_str();
  fit->add_option("--out", fit_out, "JSON report");
  fit->add_option("--reconstruction", fit_recon, "reconstructed trace CSV");

  // label
  auto* lab = app.add_subcommand("label", "list the features and artifacts of a sample");
  SpectralFlags lab_spec;
  std::string lab_sample, lab_out;
  lab->add_option("--sample", lab_sample, "sample spec file or bundled name")->required();
  lab_spec.add(*lab);
  lab->add_option("--out", lab_out, "JSON output");

  // artifact-map
  auto* amap = app.add_subcommand("artifact-map", "pump-wavelength tuning of one artifact");
  std::string am_sample, am_pair, am_out;
  double am_lo = 404.0, am_hi = 404.5, am_step = 0.001;
  amap->add_option("--sample", am_sample, "sample spec file or bundled name")->required();
  amap->add_option("--pair", am_pair, "two features, labels or indices (default: front,back)");
  amap->add_option("--pump-lo-nm", am_lo, "first pump wavelength")->capture_default_str();
  amap->add_option("--pump-hi-nm", am_hi, "last pump wavelength")->capture_default_str();
  amap->add_option("--pump-step-nm", am_step, "pump step")->capture_default_str();
  amap->add_option("--out", am_out, "CSV output");

  // count-params
  auto* cnt = app.add_subcommand("count-params", "effective parameters of an N-interface stack");
  int cnt_n = 0;
  cnt->add_option("n", cnt_n, "number of interfaces")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*sim) {
      const std::string path = resolve_sample(sim_sample);
      const SampleSpecFile spec = load_sample_spec(path);
      const Sample sample = spec.to_sample();
      const SpectralModel model = sim_spec.model();
      const double depth = seconds_to_path_um(sample.total_round_trip());
      auto [lo, hi] = sim_span.empty() ? std::pair{-50.0, depth + 100.0}
                                       : parse_range(sim_span, "--tau-span-um");
      const std::vector<double> tau_um = grid_um(lo, hi, sim_step);
      std::vector<double> delays;
      for (double t : tau_um) delays.push_back(path_um_to_seconds(t));

      Interferogram trace;
      if (sim_engine == "numeric") {
        trace = coincidence_trace_numeric(sample, model, delays);
      } else if (sim_engine == "closed-form") {
        if (sample.size() > 2) {
          throw UnsupportedProfile("the closed form covers one or two interfaces; use --engine numeric");
        }
        if (sample.size() == 1) {
          trace = closed_form_trace(enumerate_paths(sample, 0, 0.0), model, delays);
        } else {
          const auto r = single_layer_coefficients(sample, single_layer_terms(sample));
          trace = closed_form_single_layer(r, sample.total_round_trip(), model, delays, r.size());
        }
      } else {
        trace = pulsed_limit_trace(enumerate_paths(sample), model, delays);
      }
      if (sim_noise > 0.0) trace = add_shot_noise(trace, sim_noise, sim_seed);

      sim_spec.record(trace.meta);
      trace.meta["command"] = command_line(argc, argv);
      trace.meta["sample"] = spec.name.empty() ? path : spec.name;
      trace.meta["sample_file"] = path;
      trace.meta["tau_step_um"] = format_double(sim_step);
      trace.meta["tau_span_um"] = format_double(lo) + ":" + format_double(hi);
      trace.meta["seed"] = std::to_string(sim_seed);
      trace.meta["noise_counts"] = format_double(sim_noise);
      emit(sim_out, emit_trace(TraceFile::from_interferogram(trace, tau_um)));
      if (!sim_out.empty() && sim_out != "-") {
        write_text_file(sim_out + ".labels.json", to_json(label_trace(sample, model)).dump(2) + "\n");
      }
      return 0;
    }

    if (*fit) {
      const TraceFile file = load_trace(fit_trace);
      const Interferogram target = file.to_interferogram();
      fit_spec.inherit(*fit, file.meta);
      const SpectralModel model = fit_spec.model();
      const auto [nlo, nhi] = parse_count_range(fit_nrange);
      std::vector<int> ns;
      for (int n = nlo; n <= nhi; ++n) ns.push_back(n);

      SpaceOptions opt;
      opt.fit_kappa = fit_kappa;
      if (!fit_signs.empty()) {
        std::istringstream list(fit_signs);
        std::string item;
        while (std::getline(list, item, ',')) {
          const double v = parse_double(item, "--signs");
          if (v != 1.0 && v != -1.0) throw ValidationError("--signs entries must be 1 or -1");
          opt.signs.push_back(static_cast<int>(v));
        }
        if (opt.signs.size() > static_cast<std::size_t>(nhi)) {
          throw ValidationError("--signs lists more interfaces than --n-range allows");
        }
      }
      const auto known = parameter_names(nhi);
      auto check_name = [&](const std::string& name) {
        if (std::find(known.begin(), known.end(), name) == known.end()) {
          throw ValidationError("unknown parameter '" + name + "' (expected d<j>, kappa<j> or R<j>)");
        }
      };
      for (const auto& f : fit_fix) {
        const auto eq = f.find('=');
        if (eq == std::string::npos) throw ValidationError("--fix expects name=value, got '" + f + "'");
        check_name(f.substr(0, eq));
        opt.fixed[f.substr(0, eq)] = parse_double(f.substr(eq + 1), "--fix " + f);
      }
      for (const auto& b : fit_bounds) {
        const auto eq = b.find('=');
        if (eq == std::string::npos) throw ValidationError("--bounds expects name=lo:hi, got '" + b + "'");
        check_name(b.substr(0, eq));
        opt.bounds[b.substr(0, eq)] = parse_range(b.substr(eq + 1), "--bounds " + b);
      }

      GAConfig cfg;
      cfg.population_size = fit_pop;
      cfg.max_generations = fit_gens;
      cfg.rng_seed = fit_seed;
      cfg.threads = fit_threads;
      cfg.fitness_threshold = fit_threshold;
      cfg.mutation_rate = fit_mutation;
      cfg.tournament_size = fit_tournament;
      const RetrievalResult result = model_select(
          target, ns, [&](int n) { return make_search_space(n, opt); }, cfg, model);

      nlohmann::json report = to_json(result);
      std::map<std::string, std::string> settings;
      fit_spec.record(settings);
      report["settings"] = settings;
      report["settings"]["command"] = command_line(argc, argv);
      report["settings"]["seed"] = fit_seed;
      report["settings"]["population"] = fit_pop;
      report["settings"]["generations"] = fit_gens;
      report["target"] = fit_trace;
      if (fit_recon.empty() && !fit_out.empty() && fit_out != "-") fit_recon = fit_out + ".reconstruction.csv";
      if (!fit_recon.empty() && !result.reconstruction.counts.empty()) {
        Interferogram recon = result.reconstruction;
        fit_spec.record(recon.meta);
        recon.meta["command"] = command_line(argc, argv);
        save_trace(TraceFile::from_interferogram(recon, file.tau_um), fit_recon);
        report["reconstruction"] = fit_recon;
      }
      emit(fit_out, report.dump(2) + "\n");
      if (result.no_features) std::cerr << "qoct: no features detected in the target trace\n";
      return 0;
    }

    if (*lab) {
      const Sample sample = load_sample(resolve_sample(lab_sample));
      emit(lab_out, to_json(label_trace(sample, lab_spec.model())).dump(2) + "\n");
      return 0;
    }

    if (*amap) {
      const Sample sample = load_sample(resolve_sample(am_sample));
      const FeatureList features = enumerate_paths(sample);
      const auto labels = feature_labels(features);
      std::string first = "I0", second = "I" + std::to_string(sample.size() - 1);
      if (!am_pair.empty()) {
        const auto comma = am_pair.find(',');
        if (comma == std::string::npos) throw ValidationError("--pair expects two features, a,b");
        first = am_pair.substr(0, comma);
        second = am_pair.substr(comma + 1);
      }
      const std::size_t a = find_label(labels, first);
      const std::size_t b = find_label(labels, second);
      if (a == b) throw DegeneratePair("--pair names the same feature twice");
      if (!(am_step > 0.0) || !(am_hi > am_lo)) throw ValidationError("pump range needs lo < hi and step > 0");
      const double delta = features[b].delay - features[a].delay;
      std::vector<double> pumps = grid_um(am_lo, am_hi, am_step);
      const auto curve = artifact_tuning_curve(delta, pumps);
      const auto marks = tuning_landmarks(delta, am_lo, am_hi);

      std::ostringstream out;
      out << "# qoct-artifact-map v1\n";
      out << "# pair: " << labels[a] << "," << labels[b] << "\n";
      out << "# delta_um: " << format_double(seconds_to_path_um(std::abs(delta))) << "\n";
      out << "# period_nm: " << format_double(tuning_period_nm(delta, 0.5 * (am_lo + am_hi))) << "\n";
      auto list = [&](const char* key, const std::vector<double>& v) {
        out << "# " << key << ":";
        for (std::size_t i = 0; i < v.size(); ++i) out << (i ? "," : " ") << format_double(v[i]);
        out << "\n";
      };
      list("zeros_nm", marks.zeros);
      list("minima_nm", marks.minima);
      list("maxima_nm", marks.maxima);
      out << "pump_nm,cos\n";
      for (const auto& [nm, c] : curve) out << format_double(nm) << "," << format_double(c) << "\n";
      emit(am_out, out.str());
      return 0;
    }

    if (*cnt) {
      std::cout << count_effective_parameters(cnt_n) << "\n";
      return 0;
    }
  } catch (const ValidationError& e) {
    std::cerr << "qoct: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "qoct: numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "qoct: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
