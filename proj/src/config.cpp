#include "aet/config.hpp"

#include "aet/io.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace aet {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
}

std::string unquote(const std::string& v) {
  if (v.size() >= 2 && ((v.front() == '"' && v.back() == '"') || (v.front() == '\'' && v.back() == '\''))) {
    return v.substr(1, v.size() - 2);
  }
  return v;
}

// Drops a trailing `# comment` that is not inside quotes.
std::string strip_comment(const std::string& line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return d;
}

long to_long(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long n = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || end != v.c_str() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return n;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, std::string v) {
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw ConfigError(key + ": unterminated list");
    v = v.substr(1, v.size() - 2);
  }
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(static_cast<int>(to_long(key, item)));
  }
  return out;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::istream& in, const std::string& source) {
  KeyValueConfig cfg;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(strip_comment(line));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ConfigError(source + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(body.substr(0, eq));
    if (key.empty()) throw ConfigError(source + ":" + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    cfg.values_[key] = unquote(trim(body.substr(eq + 1)));
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse(in, path.string());
}

void KeyValueConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || trim(assignment.substr(0, eq)).empty()) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  values_[trim(assignment.substr(0, eq))] = unquote(trim(assignment.substr(eq + 1)));
}

ExperimentConfig ExperimentConfig::from(const KeyValueConfig& kv) {
  ExperimentConfig c;
  ReconConfig& r = c.recon;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters{
      {"mesh.fine_h", [&](auto& k, auto& v) { c.fine_h = to_double(k, v); }},
      {"mesh.recon_h", [&](auto& k, auto& v) { c.recon_h = to_double(k, v); }},
      {"mesh.fine_path", [&](auto&, auto& v) { c.fine_path = v; }},
      {"mesh.recon_path", [&](auto&, auto& v) { c.recon_path = v; }},
      {"phantom.name", [&](auto&, auto& v) { c.phantom = v; }},
      {"data.fluxes", [&](auto& k, auto& v) { c.fluxes = to_int_list(k, v); }},
      {"data.dir", [&](auto&, auto& v) { c.data_dir = v; }},
      {"noise.delta_e", [&](auto& k, auto& v) { c.noise.delta_e = to_double(k, v); }},
      {"noise.seed", [&](auto& k, auto& v) { c.noise.seed = static_cast<std::uint64_t>(to_long(k, v)); }},
      {"noise.stage",
       [&](auto& k, auto& v) {
         if (v == "fine") {
           c.noise_stage = NoiseStage::Fine;
         } else if (v == "coarse") {
           c.noise_stage = NoiseStage::Coarse;
         } else {
           throw ConfigError(k + ": expected 'fine' or 'coarse'");
         }
       }},
      {"mask.kind", [&](auto&, auto& v) { c.mask.kind = v; }},
      {"mask.radius", [&](auto& k, auto& v) { c.mask.radius = to_double(k, v); }},
      {"recon.beta", [&](auto& k, auto& v) { r.beta = to_double(k, v); }},
      {"recon.eps", [&](auto& k, auto& v) { r.eps = to_double(k, v); }},
      {"recon.box_low", [&](auto& k, auto& v) { r.box_low = to_double(k, v); }},
      {"recon.box_high", [&](auto& k, auto& v) { r.box_high = to_double(k, v); }},
      {"recon.outer_iters", [&](auto& k, auto& v) { r.outer_iters = static_cast<int>(to_long(k, v)); }},
      {"recon.inner_iters", [&](auto& k, auto& v) { r.inner_iters = static_cast<int>(to_long(k, v)); }},
      {"recon.cg_iters", [&](auto& k, auto& v) { r.cg_iters = static_cast<int>(to_long(k, v)); }},
      {"recon.delta",
       [&](auto& k, auto& v) {
         if (v == "auto") {
           r.delta.reset();
         } else {
           r.delta = to_double(k, v);
         }
       }},
      {"recon.warm_start_factor", [&](auto& k, auto& v) { r.warm_start_factor = to_double(k, v); }},
      {"recon.stop_tol_outer", [&](auto& k, auto& v) { r.stop_tol_outer = to_double(k, v); }},
      {"recon.stop_tol_inner", [&](auto& k, auto& v) { r.stop_tol_inner = to_double(k, v); }},
      {"recon.solver_tol", [&](auto& k, auto& v) { r.solver_tol = to_double(k, v); }},
      {"recon.solver_maxit", [&](auto& k, auto& v) { r.solver_maxit = static_cast<int>(to_long(k, v)); }},
      {"recon.jacobi", [&](auto& k, auto& v) { r.jacobi = to_bool(k, v); }},
      {"recon.seed", [&](auto& k, auto& v) { r.seed = static_cast<std::uint64_t>(to_long(k, v)); }},
      {"recon.threads", [&](auto& k, auto& v) { r.threads = static_cast<int>(to_long(k, v)); }},
      {"recon.record_time", [&](auto& k, auto& v) { r.record_time = to_bool(k, v); }},
      {"recon.sigma0", [&](auto& k, auto& v) { c.sigma0 = to_double(k, v); }},
      {"output.dir", [&](auto&, auto& v) { c.output_dir = v; }},
  };
  for (const auto& [key, value] : kv.values()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(key, value);
  }

  if (c.fine_path.empty() && !(c.fine_h > 0.0 && c.fine_h < 1.0)) throw ConfigError("mesh.fine_h must lie in (0, 1)");
  if (c.recon_path.empty() && !(c.recon_h > 0.0 && c.recon_h < 1.0)) {
    throw ConfigError("mesh.recon_h must lie in (0, 1)");
  }
  for (const auto* p : {&c.fine_path, &c.recon_path}) {
    if (!p->empty() && !std::filesystem::exists(*p)) throw ConfigError("mesh file not found: " + *p);
  }
  const auto& names = phantom_names();
  if (std::find(names.begin(), names.end(), c.phantom) == names.end()) {
    throw ConfigError("phantom.name: unknown phantom '" + c.phantom + "'");
  }
  if (c.fluxes.empty()) throw ConfigError("data.fluxes: at least one flux required");
  std::set<int> seen;
  for (int f : c.fluxes) {
    if (f < 1 || f > 4) throw ConfigError("data.fluxes: indices must lie in 1..4");
    if (!seen.insert(f).second) throw ConfigError("data.fluxes: duplicate index " + std::to_string(f));
  }
  if (!(c.noise.delta_e >= 0.0)) throw ConfigError("noise.delta_e must be nonnegative");
  if (c.mask.kind != "full" && c.mask.kind != "inner_disk" && c.mask.kind != "half_disk") {
    throw ConfigError("mask.kind: expected full, inner_disk or half_disk");
  }
  if (!(c.mask.radius > 0.0)) throw ConfigError("mask.radius must be positive");
  try {
    r.validate();
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  if (!(c.sigma0 >= r.box_low && c.sigma0 <= r.box_high)) throw ConfigError("recon.sigma0 must lie inside the box");
  if (c.output_dir.empty()) throw ConfigError("output.dir must not be empty");
  return c;
}

std::string ExperimentConfig::echo() const {
  std::ostringstream out;
  auto line = [&](const std::string& k, const std::string& v) { out << k << " = " << v << "\n"; };
  line("mesh.fine_h", format_double(fine_h));
  line("mesh.recon_h", format_double(recon_h));
  line("mesh.fine_path", fine_path);
  line("mesh.recon_path", recon_path);
  line("phantom.name", phantom);
  std::string fl = "[";
  for (std::size_t i = 0; i < fluxes.size(); ++i) fl += (i ? ", " : "") + std::to_string(fluxes[i]);
  line("data.fluxes", fl + "]");
  line("data.dir", data_dir);
  line("noise.delta_e", format_double(noise.delta_e));
  line("noise.seed", std::to_string(noise.seed));
  line("noise.stage", noise_stage == NoiseStage::Fine ? "fine" : "coarse");
  line("mask.kind", mask.kind);
  line("mask.radius", format_double(mask.radius));
  line("recon.beta", format_double(recon.beta));
  line("recon.eps", format_double(recon.eps));
  line("recon.box_low", format_double(recon.box_low));
  line("recon.box_high", format_double(recon.box_high));
  line("recon.outer_iters", std::to_string(recon.outer_iters));
  line("recon.inner_iters", std::to_string(recon.inner_iters));
  line("recon.cg_iters", std::to_string(recon.cg_iters));
  line("recon.delta", recon.delta ? format_double(*recon.delta) : "auto");
  line("recon.warm_start_factor", format_double(recon.warm_start_factor));
  line("recon.stop_tol_outer", format_double(recon.stop_tol_outer));
  line("recon.stop_tol_inner", format_double(recon.stop_tol_inner));
  line("recon.solver_tol", format_double(recon.solver_tol));
  line("recon.solver_maxit", std::to_string(recon.solver_maxit));
  line("recon.jacobi", recon.jacobi ? "true" : "false");
  line("recon.seed", std::to_string(recon.seed));
  line("recon.threads", std::to_string(recon.threads));
  line("recon.record_time", recon.record_time ? "true" : "false");
  line("recon.sigma0", format_double(sigma0));
  line("output.dir", output_dir);
  return out.str();
}

}  // namespace aet
