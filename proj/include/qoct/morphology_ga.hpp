#pragma once

// Genetic-algorithm retrieval of sample morphology from an interferogram.
//
// Parameters, in chromosome order, for an N-interface stack:
//   d1..d{N-1}       optical path c*tau' of each segment [um]
//   kappa1..k{N-1}   bulk loss exponent of each segment
//   R1..RN           intensity reflectivity of each interface
// Only free parameters are encoded; each takes `bits` Gray-coded bits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <bit>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "qoct/error.hpp"
#include "qoct/interferogram.hpp"
#include "qoct/spectral.hpp"
#include "qoct/stack_model.hpp"

namespace qoct {

struct ParameterSpec {
  std::string name;
  std::string unit;
  double lower = 0.0;
  double upper = 1.0;
  bool fixed = false;
  double value = 0.0;  ///< used when fixed

  friend bool operator==(const ParameterSpec&, const ParameterSpec&) = default;
};

/// Default ranges used by make_search_space.
struct SpaceOptions {
  double distance_lower = 1.0;  // um
  double distance_upper = 400.0;
  double kappa_upper = 0.5;
  bool fit_kappa = false;  ///< false: every kappa pinned to 0
  double reflectivity_upper = 0.99;
  int bits = 16;
  std::vector<int> signs;  ///< per interface, +1 when empty
  std::map<std::string, std::pair<double, double>> bounds;
  std::map<std::string, double> fixed;
};

class SearchSpace {
 public:
  SearchSpace(int n_interfaces, std::vector<ParameterSpec> params, std::vector<int> signs,
              int bits = 16)
      : n_(n_interfaces), params_(std::move(params)), signs_(std::move(signs)), bits_(bits) {
    if (n_ < 1) throw DomainError("search space needs at least one interface");
    if (params_.size() != static_cast<std::size_t>(3 * n_ - 2)) {
      throw ValidationError("search space for " + std::to_string(n_) + " interfaces needs " +
                            std::to_string(3 * n_ - 2) + " parameters");
    }
    if (signs_.empty()) signs_.assign(static_cast<std::size_t>(n_), 1);
    if (signs_.size() != static_cast<std::size_t>(n_)) {
      throw ValidationError("one sign per interface required");
    }
    for (int s : signs_) {
      if (s != 1 && s != -1) throw ValidationError("interface signs must be +1 or -1");
    }
    if (bits_ < 1 || bits_ > 32) throw ValidationError("bits per parameter must be in [1, 32]");
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const auto& p = params_[i];
      if (p.fixed) {
        if (!(p.value >= p.lower && p.value <= p.upper)) {
          throw ValidationError("fixed value of " + p.name + " lies outside its bounds");
        }
      } else {
        if (!(p.lower < p.upper)) throw ValidationError("bounds of " + p.name + " need lower < upper");
        free_.push_back(i);
      }
    }
    if (static_cast<int>(free_.size()) > count_effective_parameters(n_)) {
      throw ValidationError("more free parameters than the stack has effective parameters");
    }
  }

  int n_interfaces() const { return n_; }
  int bits() const { return bits_; }
  const std::vector<ParameterSpec>& parameters() const { return params_; }
  const std::vector<std::size_t>& free_indices() const { return free_; }
  std::size_t free_count() const { return free_.size(); }
  std::size_t chromosome_length() const { return free_.size() * static_cast<std::size_t>(bits_); }
  const std::vector<int>& signs() const { return signs_; }

  /// Full parameter vector from the free values.
  std::vector<double> complete(std::span<const double> free_values) const {
    if (free_values.size() != free_.size()) throw ValidationError("wrong number of free values");
    std::vector<double> out(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) out[i] = params_[i].value;
    for (std::size_t k = 0; k < free_.size(); ++k) out[free_[k]] = free_values[k];
    return out;
  }

  /// Throws ValidationError when the values do not describe a valid stack.
  Sample build_sample(std::span<const double> full) const {
    const auto n = static_cast<std::size_t>(n_);
    std::vector<Interface> ifaces;
    std::vector<Segment> segs;
    for (std::size_t j = 0; j + 1 < n; ++j) {
      segs.push_back({path_um_to_seconds(full[j]), full[n - 1 + j]});
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double R = full[2 * (n - 1) + i];
      if (!(R >= 0.0)) throw InvalidInterface("reflectivity must be >= 0");
      ifaces.push_back({signs_[i] * std::sqrt(R), 0.0});
    }
    return Sample(std::move(ifaces), std::move(segs));
  }

  friend bool operator==(const SearchSpace&, const SearchSpace&) = default;

 private:
  int n_;
  std::vector<ParameterSpec> params_;
  std::vector<int> signs_;
  int bits_;
  std::vector<std::size_t> free_;
};

inline std::vector<std::string> parameter_names(int n_interfaces) {
  std::vector<std::string> out;
  for (int j = 1; j < n_interfaces; ++j) out.push_back("d" + std::to_string(j));
  for (int j = 1; j < n_interfaces; ++j) out.push_back("kappa" + std::to_string(j));
  for (int j = 1; j <= n_interfaces; ++j) out.push_back("R" + std::to_string(j));
  return out;
}

/// Builds the search space for n interfaces. Names in options.bounds or
/// options.fixed that do not exist for this n are ignored, so one option set
/// can serve a whole model-selection range.
inline SearchSpace make_search_space(int n_interfaces, const SpaceOptions& opt = {}) {
  if (n_interfaces < 1) throw DomainError("search space needs at least one interface");
  std::vector<ParameterSpec> params;
  for (const auto& name : parameter_names(n_interfaces)) {
    ParameterSpec p{name, "", 0.0, 1.0, false, 0.0};
    if (name[0] == 'd') {
      p.unit = "um";
      p.lower = opt.distance_lower;
      p.upper = opt.distance_upper;
    } else if (name[0] == 'k') {
      p.upper = opt.kappa_upper;
      p.fixed = !opt.fit_kappa;
    } else {
      p.upper = opt.reflectivity_upper;
    }
    if (auto it = opt.bounds.find(name); it != opt.bounds.end()) {
      p.lower = it->second.first;
      p.upper = it->second.second;
    }
    if (auto it = opt.fixed.find(name); it != opt.fixed.end()) {
      p.fixed = true;
      p.value = it->second;
      p.lower = std::min(p.lower, p.value);
      p.upper = std::max(p.upper, p.value);
    }
    params.push_back(p);
  }
  std::vector<int> signs = opt.signs;
  signs.resize(static_cast<std::size_t>(n_interfaces), 1);
  return SearchSpace(n_interfaces, std::move(params), std::move(signs), opt.bits);
}

// ---------------------------------------------------------------------------
// Chromosome encoding

struct Chromosome {
  std::vector<std::uint8_t> bits;  ///< one 0/1 entry per bit, MSB of each field first

  std::string key() const { return std::string(bits.begin(), bits.end()); }
  friend bool operator==(const Chromosome&, const Chromosome&) = default;
};

inline std::uint32_t gray_encode(std::uint32_t q) { return q ^ (q >> 1); }
inline std::uint32_t gray_decode(std::uint32_t g) {
  for (std::uint32_t shift = 1; shift < 32; shift <<= 1) g ^= g >> shift;
  return g;
}

/// Encodes the free parameter values.
inline Chromosome encode(std::span<const double> free_values, const SearchSpace& space) {
  if (free_values.size() != space.free_count()) throw ValidationError("wrong number of free values");
  const int b = space.bits();
  const double levels = std::ldexp(1.0, b) - 1.0;
  Chromosome c;
  c.bits.reserve(space.chromosome_length());
  for (std::size_t k = 0; k < free_values.size(); ++k) {
    const auto& p = space.parameters()[space.free_indices()[k]];
    const double x = free_values[k];
    if (!(x >= p.lower && x <= p.upper)) {
      throw DomainError(p.name + " = " + std::to_string(x) + " lies outside its bounds");
    }
    const auto q = static_cast<std::uint32_t>(std::lround((x - p.lower) / (p.upper - p.lower) * levels));
    const std::uint32_t g = gray_encode(q);
    for (int i = b - 1; i >= 0; --i) c.bits.push_back(static_cast<std::uint8_t>((g >> i) & 1U));
  }
  return c;
}

/// Free parameter values of a chromosome.
inline std::vector<double> decode(const Chromosome& c, const SearchSpace& space) {
  if (c.bits.size() != space.chromosome_length()) throw ValidationError("chromosome length mismatch");
  const int b = space.bits();
  const double levels = std::ldexp(1.0, b) - 1.0;
  std::vector<double> out(space.free_count());
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::uint32_t g = 0;
    for (int i = 0; i < b; ++i) g = (g << 1) | c.bits[k * static_cast<std::size_t>(b) + static_cast<std::size_t>(i)];
    const auto& p = space.parameters()[space.free_indices()[k]];
    out[k] = p.lower + static_cast<double>(gray_decode(g)) / levels * (p.upper - p.lower);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Fitness

inline constexpr double kWorstFitness = std::numeric_limits<double>::max();

inline double mean_absolute_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw ValidationError("traces differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

/// True when the trace has no feature deeper than `threshold`.
inline bool no_features_detected(const Interferogram& trace, double threshold = 1e-3) {
  for (double c : trace.counts) {
    if (std::abs(c - 1.0) > threshold) return false;
  }
  return true;
}

/// Evaluates candidates against one target. The frequency lattice is tied to
/// the target's so that the generating sample reproduces it exactly; a
/// candidate thicker than that lattice can hold gets a larger one.
class FitnessEvaluator {
 public:
  FitnessEvaluator(const Interferogram& target, SearchSpace space, SpectralModel model)
      : target_(target), space_(std::move(space)), model_(model) {
    grid_ = check_uniform_grid(target_.delays);
    const double last = grid_.start + grid_.step * static_cast<double>(grid_.count - 1);
    base_size_ = std::bit_ceil(static_cast<std::size_t>(
        std::ceil(required_period(model_, grid_, last) / grid_.step)));
    if (auto it = target_.meta.find("fft_size"); it != target_.meta.end()) {
      base_size_ = std::max(base_size_, static_cast<std::size_t>(std::stoull(it->second)));
    }
  }

  const SearchSpace& space() const { return space_; }
  const SpectralModel& model() const { return model_; }
  const Interferogram& target() const { return target_; }

  QuadratureSettings quadrature_for(const Sample& sample) const {
    QuadratureSettings q;
    const double needed = std::ceil(
        required_period(model_, grid_, sample.total_round_trip()) / grid_.step);
    if (!(needed < static_cast<double>(q.max_fft_size))) {
      throw QuadratureResolution("candidate too thick for the frequency lattice");
    }
    q.fft_size = std::max(base_size_, std::bit_ceil(static_cast<std::size_t>(needed)));
    return q;
  }

  /// Reconstruction for a full parameter vector; throws on invalid samples.
  Interferogram reconstruct(std::span<const double> full) const {
    const Sample sample = space_.build_sample(full);
    return coincidence_trace_numeric(sample, model_, target_.delays, quadrature_for(sample));
  }

  double operator()(const Chromosome& c) const {
    try {
      const auto full = space_.complete(decode(c, space_));
      return mean_absolute_error(target_.counts, reconstruct(full).counts);
    } catch (const Error&) {
      return kWorstFitness;
    }
  }

 private:
  Interferogram target_;
  SearchSpace space_;
  SpectralModel model_;
  DelayGrid grid_;
  std::size_t base_size_ = 0;
};

inline double fitness(const Chromosome& candidate, const Interferogram& target,
                      const SearchSpace& space, const SpectralModel& model) {
  return FitnessEvaluator(target, space, model)(candidate);
}

// ---------------------------------------------------------------------------
// Evolution

struct GAConfig {
  std::size_t population_size = 300;
  std::size_t max_generations = 50;
  double crossover_rate = 0.9;
  double mutation_rate = -1.0;  ///< per bit; negative: 1 / chromosome length
  std::size_t elitism = 2;
  std::size_t tournament_size = 3;
  double fitness_threshold = 0.0;  ///< stop once best fitness <= threshold
  std::uint64_t rng_seed = 1;
  unsigned threads = 1;  ///< fitness workers; never affects results

  void validate() const {
    if (population_size < 2) throw ValidationError("population size must be >= 2");
    if (crossover_rate < 0.0 || crossover_rate > 1.0) throw ValidationError("crossover rate must be in [0, 1]");
    if (mutation_rate > 1.0) throw ValidationError("mutation rate must be in [0, 1]");
    if (elitism >= population_size) throw ValidationError("elitism must be below the population size");
    if (tournament_size < 1) throw ValidationError("tournament size must be >= 1");
    if (threads < 1) throw ValidationError("need at least one worker thread");
  }
};

struct NamedValue {
  std::string name;
  std::string unit;
  double value = 0.0;
  bool fixed = false;

  friend bool operator==(const NamedValue&, const NamedValue&) = default;
};

struct RetrievalResult {
  std::vector<NamedValue> best_parameters;  ///< every parameter, fixed ones included
  Chromosome best_chromosome;
  double best_fitness = kWorstFitness;
  std::vector<double> fitness_history;  ///< best after each generation, initial population first
  int n_interfaces_selected = 0;
  std::vector<std::pair<int, double>> fitness_vs_n;
  Interferogram reconstruction;
  std::vector<int> signs;
  std::size_t evaluations = 0;
  bool no_features = false;

  double value(const std::string& name) const {
    for (const auto& p : best_parameters) {
      if (p.name == name) return p.value;
    }
    throw ValidationError("no parameter named " + name);
  }

  friend bool operator==(const RetrievalResult&, const RetrievalResult&) = default;
};

namespace detail {

class Population {
 public:
  Population(const FitnessEvaluator& eval, unsigned threads) : eval_(eval), threads_(threads) {}

  std::vector<double> evaluate(const std::vector<Chromosome>& pop) {
    std::vector<std::string> keys(pop.size());
    std::vector<std::size_t> todo;
    std::unordered_map<std::string, std::size_t> pending;
    for (std::size_t i = 0; i < pop.size(); ++i) {
      keys[i] = pop[i].key();
      if (memo_.count(keys[i]) == 0 && pending.emplace(keys[i], i).second) todo.push_back(i);
    }
    std::vector<double> fresh(todo.size());
    auto work = [&](std::size_t begin, std::size_t step) {
      for (std::size_t k = begin; k < todo.size(); k += step) fresh[k] = eval_(pop[todo[k]]);
    };
    if (threads_ <= 1 || todo.size() < 2) {
      work(0, 1);
    } else {
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < threads_; ++t) pool.emplace_back(work, t, threads_);
      for (auto& th : pool) th.join();
    }
    for (std::size_t k = 0; k < todo.size(); ++k) memo_.emplace(keys[todo[k]], fresh[k]);
    evaluations_ += todo.size();
    std::vector<double> out(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) out[i] = memo_.at(keys[i]);
    return out;
  }

  std::size_t evaluations() const { return evaluations_; }

 private:
  const FitnessEvaluator& eval_;
  unsigned threads_;
  std::unordered_map<std::string, double> memo_;
  std::size_t evaluations_ = 0;
};

inline std::size_t best_index(const std::vector<double>& fit) {
  return static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
}

}  // namespace detail

/// Fills in parameters, reconstruction and flags for a finished run.
inline RetrievalResult finish_result(const FitnessEvaluator& eval, Chromosome best, double best_fitness,
                                     std::vector<double> history, std::size_t evaluations) {
  const SearchSpace& space = eval.space();
  RetrievalResult r;
  r.best_chromosome = std::move(best);
  r.best_fitness = best_fitness;
  r.fitness_history = std::move(history);
  r.n_interfaces_selected = space.n_interfaces();
  r.signs = space.signs();
  r.evaluations = evaluations;
  const auto full = space.complete(decode(r.best_chromosome, space));
  for (std::size_t i = 0; i < full.size(); ++i) {
    const auto& p = space.parameters()[i];
    r.best_parameters.push_back({p.name, p.unit, full[i], p.fixed});
  }
  if (best_fitness < kWorstFitness) {
    r.reconstruction = eval.reconstruct(full);
    r.reconstruction.meta["engine"] = "numeric";
  }
  r.fitness_vs_n = {{space.n_interfaces(), best_fitness}};
  r.no_features = no_features_detected(eval.target());
  return r;
}

inline RetrievalResult evolve(const Interferogram& target, const SearchSpace& space,
                              const GAConfig& config, const SpectralModel& model) {
  config.validate();
  const FitnessEvaluator eval(target, space, model);
  const std::size_t length = space.chromosome_length();
  const std::size_t pop_size = config.population_size;
  if (length == 0) {
    // Nothing to search: a single candidate made of the fixed values.
    Chromosome only;
    const double f = eval(only);
    return finish_result(eval, only, f, {f}, 1);
  }
  const double mutation = config.mutation_rate < 0.0 ? 1.0 / static_cast<double>(length)
                                                     : config.mutation_rate;

  std::mt19937_64 rng(config.rng_seed);
  std::bernoulli_distribution coin(0.5);
  std::bernoulli_distribution flip(mutation);
  std::bernoulli_distribution cross(config.crossover_rate);
  std::uniform_int_distribution<std::size_t> pick(0, pop_size - 1);
  std::uniform_int_distribution<std::size_t> cut(1, std::max<std::size_t>(1, length - 1));

  std::vector<Chromosome> pop(pop_size);
  for (auto& c : pop) {
    c.bits.resize(length);
    for (auto& b : c.bits) b = coin(rng) ? 1 : 0;
  }
  // A normalised flat trace is only matched by a stack that reflects nothing,
  // a single point the random start would never hit: seed it.
  if (no_features_detected(target)) {
    for (std::size_t k = 0; k < space.free_count(); ++k) {
      if (space.parameters()[space.free_indices()[k]].name[0] != 'R') continue;
      const auto bits = static_cast<std::size_t>(space.bits());
      std::fill_n(pop[0].bits.begin() + static_cast<std::ptrdiff_t>(k * bits), bits, 0);
    }
  }
  detail::Population evaluator(eval, config.threads);
  std::vector<double> fit = evaluator.evaluate(pop);
  std::vector<double> history{fit[detail::best_index(fit)]};

  auto tournament = [&]() {
    std::size_t winner = pick(rng);
    for (std::size_t k = 1; k < config.tournament_size; ++k) {
      const std::size_t other = pick(rng);
      if (fit[other] < fit[winner] || (fit[other] == fit[winner] && other < winner)) winner = other;
    }
    return winner;
  };

  for (std::size_t gen = 1; gen <= config.max_generations; ++gen) {
    if (history.back() <= config.fitness_threshold) break;
    std::vector<std::size_t> order(pop_size);
    for (std::size_t i = 0; i < pop_size; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fit[a] < fit[b]; });

    std::vector<Chromosome> next;
    next.reserve(pop_size);
    for (std::size_t e = 0; e < config.elitism; ++e) next.push_back(pop[order[e]]);
    while (next.size() < pop_size) {
      Chromosome a = pop[tournament()];
      Chromosome b = pop[tournament()];
      if (length > 1 && cross(rng)) {
        const std::size_t point = cut(rng);
        for (std::size_t i = point; i < length; ++i) std::swap(a.bits[i], b.bits[i]);
      }
      for (auto* child : {&a, &b}) {
        for (auto& bit : child->bits) {
          if (flip(rng)) bit ^= 1;
        }
      }
      next.push_back(std::move(a));
      if (next.size() < pop_size) next.push_back(std::move(b));
    }
    pop = std::move(next);
    fit = evaluator.evaluate(pop);
    history.push_back(fit[detail::best_index(fit)]);
  }

  const std::size_t best = detail::best_index(fit);
  return finish_result(eval, pop[best], fit[best], std::move(history), evaluator.evaluations());
}

/// Runs evolve for each interface count (same seed for each) and keeps the
/// smallest count whose fitness is within `tolerance` (relative) of the best.
inline RetrievalResult model_select(const Interferogram& target, const std::vector<int>& n_values,
                                    const std::function<SearchSpace(int)>& space_builder,
                                    const GAConfig& config, const SpectralModel& model,
                                    double tolerance = 0.05) {
  if (n_values.empty()) throw ValidationError("interface-count range is empty");
  std::vector<RetrievalResult> runs;
  double best = kWorstFitness;
  for (int n : n_values) {
    runs.push_back(evolve(target, space_builder(n), config, model));
    best = std::min(best, runs.back().best_fitness);
  }
  std::vector<std::pair<int, double>> curve;
  for (std::size_t i = 0; i < runs.size(); ++i) curve.emplace_back(n_values[i], runs[i].best_fitness);
  std::size_t chosen = 0;
  bool found = false;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (runs[i].best_fitness > best * (1.0 + tolerance)) continue;
    if (!found || n_values[i] < n_values[chosen]) {
      chosen = i;
      found = true;
    }
  }
  RetrievalResult out = std::move(runs[chosen]);
  out.fitness_vs_n = std::move(curve);
  return out;
}

}  // namespace qoct
