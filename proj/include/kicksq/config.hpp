#pragma once

// Run configuration: a flat INI-style document.
//
//   [mechanical]  omega_m, gamma_m, n_bar                       (required)
//   [kick]        theta                 } exactly one kick source
//   [pulse] [cavity] [membrane]         }
//   [bath]        cutoff, temperature                           (optional)
//   [schedule]    tau (required), n_kicks, stride, intra_samples
//   [ensemble]    enabled, mean_theta, variance, trajectories, base_seed
//   [output]      path
//
// Blank lines and lines starting with '#' or ';' are ignored. A '#' or ';'
// preceded by whitespace starts a trailing comment.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <variant>
#include <vector>

#include "kicksq/errors.hpp"
#include "kicksq/moments.hpp"
#include "kicksq/pulse.hpp"

namespace kicksq {

struct DirectKick {
  double theta = 0.0;
  bool operator==(const DirectKick&) const = default;
};

struct PhysicalKick {
  PulseSpec pulse;  // pulse.period mirrors schedule.tau
  CavityParams cavity;
  MembraneParams membrane;
  bool operator==(const PhysicalKick&) const = default;
};

struct Schedule {
  double tau = 0.0;
  std::uint64_t n_kicks = 1000000;
  std::uint64_t stride = 100;
  std::uint64_t intra_samples = 0;  // 0 disables the intra-period trace
  bool operator==(const Schedule&) const = default;
};

struct EnsembleConfig {
  bool enabled = false;
  std::optional<double> mean_theta;  // defaults to the kick's theta
  double variance = 0.0;
  std::uint64_t trajectories = 100;
  std::uint64_t base_seed = 1;
  bool operator==(const EnsembleConfig&) const = default;
};

struct BathConfig {
  std::optional<double> cutoff;       // rad/s
  std::optional<double> temperature;  // K; derived from n_bar when absent
  bool operator==(const BathConfig&) const = default;
};

struct RunConfig {
  MechanicalParams mechanical;
  std::variant<DirectKick, PhysicalKick> kick;
  Schedule schedule;
  EnsembleConfig ensemble;
  BathConfig bath;
  std::string output;

  bool operator==(const RunConfig&) const = default;
};

/// Shortest decimal string that parses back to exactly the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::string_view strip_comment(std::string_view s) {
  for (std::size_t i = 1; i < s.size(); ++i) {
    if ((s[i] == '#' || s[i] == ';') && (s[i - 1] == ' ' || s[i - 1] == '\t')) {
      return s.substr(0, i);
    }
  }
  return s;
}

struct Entry {
  std::string value;
  int line = 0;
};

using Sections = std::map<std::string, std::map<std::string, Entry>>;

inline const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"mechanical", {"omega_m", "gamma_m", "n_bar"}},
      {"kick", {"theta"}},
      {"pulse", {"shape", "duration", "peak_power"}},
      {"cavity", {"length", "kappa", "kappa_0", "kappa_loss", "wavelength"}},
      {"membrane", {"mass", "reflectivity"}},
      {"bath", {"cutoff", "temperature"}},
      {"schedule", {"tau", "n_kicks", "stride", "intra_samples"}},
      {"ensemble", {"enabled", "mean_theta", "variance", "trajectories", "base_seed"}},
      {"output", {"path"}},
  };
  return s;
}

// Pulls typed values out of the parsed sections, recording every problem.
class Reader {
 public:
  Reader(const Sections& sections, std::vector<Diagnostic>& errors)
      : sections_(sections), errors_(errors) {}

  bool has_section(const std::string& s) const { return sections_.count(s) > 0; }

  const Entry* find(const std::string& section, const std::string& key) const {
    const auto s = sections_.find(section);
    if (s == sections_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  int line_of(const std::string& section, const std::string& key) const {
    const Entry* e = find(section, key);
    return e ? e->line : 0;
  }

  std::optional<double> real(const std::string& section, const std::string& key,
                             bool required) {
    const Entry* e = find(section, key);
    if (!e) {
      if (required) missing(section, key);
      return std::nullopt;
    }
    double x = 0.0;
    const char* first = e->value.data();
    const char* last = first + e->value.size();
    const auto res = std::from_chars(first, last, x);
    if (res.ec != std::errc() || res.ptr != last || !std::isfinite(x)) {
      error(e->line, section + "." + key, "expected a finite number, got '" + e->value + "'");
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::uint64_t> count(const std::string& section, const std::string& key,
                                     bool required) {
    const Entry* e = find(section, key);
    if (!e) {
      if (required) missing(section, key);
      return std::nullopt;
    }
    std::uint64_t x = 0;
    const char* first = e->value.data();
    const char* last = first + e->value.size();
    const auto res = std::from_chars(first, last, x);
    if (res.ec != std::errc() || res.ptr != last) {
      error(e->line, section + "." + key,
            "expected a non-negative integer, got '" + e->value + "'");
      return std::nullopt;
    }
    return x;
  }

  std::optional<bool> boolean(const std::string& section, const std::string& key) {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    if (e->value == "true") return true;
    if (e->value == "false") return false;
    error(e->line, section + "." + key, "expected true or false, got '" + e->value + "'");
    return std::nullopt;
  }

  std::optional<std::string> text(const std::string& section, const std::string& key) {
    const Entry* e = find(section, key);
    if (!e) return std::nullopt;
    return e->value;
  }

  void missing(const std::string& section, const std::string& key) {
    error(0, section + "." + key, "required key is missing");
  }

  void error(int line, std::string field, std::string message) {
    errors_.push_back({line, std::move(field), std::move(message)});
  }

  // Checks a parsed value against a predicate, reporting by field.
  template <typename T, typename Pred>
  void check(const std::optional<T>& v, const std::string& section, const std::string& key,
             Pred ok, const char* requirement) {
    if (v && !ok(*v)) error(line_of(section, key), section + "." + key, requirement);
  }

 private:
  const Sections& sections_;
  std::vector<Diagnostic>& errors_;
};

}  // namespace detail

/// Parses and validates a configuration document. Throws ConfigError listing
/// every problem found.
inline RunConfig parse_config(std::string_view text) {
  std::vector<Diagnostic> errors;
  detail::Sections sections;
  const auto& schema = detail::schema();

  std::string current;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
    ++line_no;

    const std::string_view line = detail::trim(detail::strip_comment(raw));
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back({line_no, "", "malformed section header"});
        current.clear();
        continue;
      }
      current = std::string(detail::trim(line.substr(1, line.size() - 2)));
      if (!schema.count(current)) {
        errors.push_back({line_no, current, "unknown section"});
        current.clear();
        continue;
      }
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      errors.push_back({line_no, "", "expected 'key = value'"});
      continue;
    }
    const std::string key(detail::trim(line.substr(0, eq)));
    const std::string value(detail::trim(line.substr(eq + 1)));
    if (current.empty()) {
      errors.push_back({line_no, key, "key outside of a known section"});
      continue;
    }
    if (!schema.at(current).count(key)) {
      errors.push_back({line_no, current + "." + key, "unknown key"});
      continue;
    }
    auto& section = sections[current];
    if (section.count(key)) {
      errors.push_back({line_no, current + "." + key,
                        "duplicate key (first set on line " +
                            std::to_string(section[key].line) + ")"});
      continue;
    }
    section[key] = {value, line_no};
  }

  detail::Reader r(sections, errors);
  RunConfig cfg;
  auto positive = [](double x) { return x > 0.0; };
  auto non_negative = [](double x) { return x >= 0.0; };

  // mechanical
  const auto omega_m = r.real("mechanical", "omega_m", true);
  const auto gamma_m = r.real("mechanical", "gamma_m", true);
  const auto n_bar = r.real("mechanical", "n_bar", true);
  r.check(omega_m, "mechanical", "omega_m", positive, "must be > 0");
  r.check(gamma_m, "mechanical", "gamma_m", non_negative, "must be >= 0");
  r.check(n_bar, "mechanical", "n_bar", non_negative, "must be >= 0");
  cfg.mechanical = {omega_m.value_or(0), gamma_m.value_or(0), n_bar.value_or(0)};

  // schedule
  const auto tau = r.real("schedule", "tau", true);
  r.check(tau, "schedule", "tau", positive, "must be > 0");
  cfg.schedule.tau = tau.value_or(0);
  if (auto v = r.count("schedule", "n_kicks", false)) cfg.schedule.n_kicks = *v;
  const auto stride = r.count("schedule", "stride", false);
  r.check(stride, "schedule", "stride", [](std::uint64_t s) { return s >= 1; }, "must be >= 1");
  if (stride) cfg.schedule.stride = *stride;
  const auto intra = r.count("schedule", "intra_samples", false);
  r.check(intra, "schedule", "intra_samples", [](std::uint64_t s) { return s != 1; },
          "must be 0 (disabled) or >= 2");
  if (intra) cfg.schedule.intra_samples = *intra;

  // kick source
  const bool direct = r.has_section("kick");
  const bool physical =
      r.has_section("pulse") || r.has_section("cavity") || r.has_section("membrane");
  if (direct == physical) {
    r.error(0, "kick",
            direct ? "exactly one kick source: both [kick] theta and a pulse/cavity/membrane "
                     "spec are present"
                   : "exactly one kick source: give [kick] theta or [pulse]+[cavity]+[membrane]");
  }
  if (direct) {
    cfg.kick = DirectKick{r.real("kick", "theta", true).value_or(0)};
  } else if (physical) {
    PhysicalKick pk;
    if (auto shape = r.text("pulse", "shape")) {
      if (*shape == "rectangular") {
        pk.pulse.shape = PulseShape::rectangular;
      } else if (*shape == "gaussian") {
        pk.pulse.shape = PulseShape::gaussian;
      } else {
        r.error(r.line_of("pulse", "shape"), "pulse.shape",
                "expected rectangular or gaussian, got '" + *shape + "'");
      }
    }
    const auto duration = r.real("pulse", "duration", true);
    const auto power = r.real("pulse", "peak_power", true);
    r.check(duration, "pulse", "duration", positive, "must be > 0");
    if (duration && tau && *duration > 0.0 && !(*duration < *tau)) {
      r.error(r.line_of("pulse", "duration"), "pulse.duration", "must be < schedule.tau");
    }
    r.check(power, "pulse", "peak_power", non_negative, "must be >= 0");
    pk.pulse.duration = duration.value_or(0);
    pk.pulse.peak_power = power.value_or(0);
    pk.pulse.period = tau.value_or(0);

    const auto length = r.real("cavity", "length", true);
    const auto wavelength = r.real("cavity", "wavelength", true);
    r.check(length, "cavity", "length", positive, "must be > 0");
    r.check(wavelength, "cavity", "wavelength", positive, "must be > 0");
    const auto loss = r.real("cavity", "kappa_loss", false);
    r.check(loss, "cavity", "kappa_loss", non_negative, "must be >= 0");
    const auto kappa = r.real("cavity", "kappa", false);
    const auto kappa_0 = r.real("cavity", "kappa_0", false);
    const bool has_kappa = r.find("cavity", "kappa") != nullptr;
    const bool has_kappa_0 = r.find("cavity", "kappa_0") != nullptr;
    if (has_kappa == has_kappa_0) {
      r.error(has_kappa ? r.line_of("cavity", "kappa_0") : 0, "cavity.kappa",
              "give exactly one of kappa (total) or kappa_0 (input mirror)");
    }
    pk.cavity.length = length.value_or(0);
    pk.cavity.wavelength = wavelength.value_or(0);
    pk.cavity.kappa_loss = loss.value_or(0);
    if (kappa_0) {
      r.check(kappa_0, "cavity", "kappa_0", positive, "must be > 0");
      pk.cavity.kappa_0 = *kappa_0;
    } else if (kappa) {
      pk.cavity.kappa_0 = *kappa - pk.cavity.kappa_loss;
      if (!(pk.cavity.kappa_0 > 0.0)) {
        r.error(r.line_of("cavity", "kappa"), "cavity.kappa", "must exceed kappa_loss");
      }
    }

    const auto mass = r.real("membrane", "mass", true);
    const auto refl = r.real("membrane", "reflectivity", true);
    r.check(mass, "membrane", "mass", positive, "must be > 0");
    r.check(refl, "membrane", "reflectivity", [](double x) { return x >= 0.0 && x < 1.0; },
            "must be in [0, 1)");
    pk.membrane = {mass.value_or(0), refl.value_or(0)};
    cfg.kick = pk;
  }

  // bath
  cfg.bath.cutoff = r.real("bath", "cutoff", false);
  cfg.bath.temperature = r.real("bath", "temperature", false);
  r.check(cfg.bath.cutoff, "bath", "cutoff", positive, "must be > 0");
  r.check(cfg.bath.temperature, "bath", "temperature", non_negative, "must be >= 0");

  // ensemble
  if (auto v = r.boolean("ensemble", "enabled")) cfg.ensemble.enabled = *v;
  cfg.ensemble.mean_theta = r.real("ensemble", "mean_theta", false);
  if (auto v = r.real("ensemble", "variance", false)) {
    r.check(std::optional<double>(*v), "ensemble", "variance", non_negative, "must be >= 0");
    cfg.ensemble.variance = *v;
  }
  const auto traj = r.count("ensemble", "trajectories", false);
  r.check(traj, "ensemble", "trajectories", [](std::uint64_t n) { return n >= 1; },
          "must be >= 1");
  if (traj) cfg.ensemble.trajectories = *traj;
  if (auto v = r.count("ensemble", "base_seed", false)) cfg.ensemble.base_seed = *v;

  if (auto v = r.text("output", "path")) cfg.output = *v;

  if (!errors.empty()) throw ConfigError(std::move(errors));
  return cfg;
}

/// Writes a configuration that parse_config reads back to an equal RunConfig.
inline std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  auto num = [&](const char* key, double x) { out << key << " = " << format_double(x) << '\n'; };
  out << "[mechanical]\n";
  num("omega_m", cfg.mechanical.omega_m);
  num("gamma_m", cfg.mechanical.gamma_m);
  num("n_bar", cfg.mechanical.n_bar);

  if (const auto* d = std::get_if<DirectKick>(&cfg.kick)) {
    out << "\n[kick]\n";
    num("theta", d->theta);
  } else {
    const auto& pk = std::get<PhysicalKick>(cfg.kick);
    out << "\n[pulse]\nshape = " << to_string(pk.pulse.shape) << '\n';
    num("duration", pk.pulse.duration);
    num("peak_power", pk.pulse.peak_power);
    out << "\n[cavity]\n";
    num("length", pk.cavity.length);
    num("kappa_0", pk.cavity.kappa_0);
    num("kappa_loss", pk.cavity.kappa_loss);
    num("wavelength", pk.cavity.wavelength);
    out << "\n[membrane]\n";
    num("mass", pk.membrane.mass);
    num("reflectivity", pk.membrane.reflectivity);
  }

  if (cfg.bath.cutoff || cfg.bath.temperature) {
    out << "\n[bath]\n";
    if (cfg.bath.cutoff) num("cutoff", *cfg.bath.cutoff);
    if (cfg.bath.temperature) num("temperature", *cfg.bath.temperature);
  }

  out << "\n[schedule]\n";
  num("tau", cfg.schedule.tau);
  out << "n_kicks = " << cfg.schedule.n_kicks << '\n'
      << "stride = " << cfg.schedule.stride << '\n'
      << "intra_samples = " << cfg.schedule.intra_samples << '\n';

  out << "\n[ensemble]\nenabled = " << (cfg.ensemble.enabled ? "true" : "false") << '\n';
  if (cfg.ensemble.mean_theta) num("mean_theta", *cfg.ensemble.mean_theta);
  num("variance", cfg.ensemble.variance);
  out << "trajectories = " << cfg.ensemble.trajectories << '\n'
      << "base_seed = " << cfg.ensemble.base_seed << '\n';

  if (!cfg.output.empty()) out << "\n[output]\npath = " << cfg.output << '\n';
  return out.str();
}

}  // namespace kicksq
