#include "config.hpp"

#include <yaml-cpp/yaml.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace vlab::cli {

using nlohmann::json;

namespace {

const char* kDefaults = R"({
  "command": "simulate",
  "seed": 1,
  "threads": 0,
  "verbose": false,
  "output": {"dir": "", "tag": "run"},
  "grid": {"horizon": 1.0, "n_steps": 1024},
  "process": {
    "type": "fbm",
    "dim": 1,
    "hurst": 0.5,
    "sampler": "auto",
    "x0": 0.0,
    "kernel": {"family": "rl", "H": 0.5},
    "drift_kernel": {"family": "constant", "c": 1.0, "role": "drift"},
    "drift": {"constant": 0.0, "linear": 0.0},
    "diffusion": {"constant": 1.0, "power": 0.0},
    "certify": false,
    "certify_tolerance": 0.05
  },
  "weights": {"delta": 0.0, "rho": "one"},
  "spectral": {"xi_max": 32.0, "n_half": 64, "xi": []},
  "ensemble": {"M": 1000, "p": 2.0},
  "occupation": {"pairs": [[0.0, 1.0]], "x_min": -3.0, "x_max": 3.0, "n_x": 121},
  "regularity": {"fit_xi_min": 8.0, "fit_xi_max": 64.0, "zeta": "inf", "chi": 1.0, "etas": [],
                 "tolerance": 0.2},
  "density": {"time": 1.0, "xi_min": 1.0, "xi_max": 16.0},
  "sewing": {"xi": 8.0, "s": 0.0, "t": 1.0, "level_min": 5, "level_max": 10, "anchor": 0.0,
             "paths": 40},
  "young2d": {"field": "smooth", "path": "smooth", "level": 10, "holder_beta": 1.0,
              "corner": [0.1, 0.5], "side": 0.2, "n_sizes": 5, "oracle_level": 12},
  "selfinteract": {"drift": "skew_delta0", "strength": 1.0, "alpha": 0.5, "bump_width": 0.5,
                   "mollify": 0.0, "xi_max": 256.0, "range": 0.0, "gamma": 0.6, "u0": [0.0],
                   "step_tau": 0.0, "picard_tol": 1e-9, "max_iters": 200},
  "stability": {"levels": [4.0, 8.0, 16.0], "reference_level": 32.0, "u0_shift": 0.0},
  "sweep": {"command": "regularity", "grid": {}}
})";

// Subtrees whose content is checked by the consumer rather than by the schema.
const std::set<std::string> kFreeForm = {"process.kernel", "process.drift_kernel", "sweep.grid"};

const std::map<std::string, std::set<std::string>> kEnums = {
    {"command",
     {"simulate", "occupation", "regularity", "density", "sewing", "young2d", "selfinteract",
      "stability", "sweep"}},
    {"sweep.command",
     {"simulate", "occupation", "regularity", "density", "sewing", "young2d", "selfinteract",
      "stability"}},
    {"process.type", {"brownian", "fbm", "volterra"}},
    {"process.sampler", {"auto", "cholesky", "circulant"}},
    {"weights.rho", {"one", "diffusion"}},
    {"young2d.field", {"smooth", "abs"}},
    {"young2d.path", {"smooth", "process"}},
    {"selfinteract.drift",
     {"skew_delta0", "edwards", "edwards_fractional", "durrett_rogers", "gaussian_bump"}},
};

std::string join(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

json scalar(const YAML::Node& n) {
  const std::string s = n.Scalar();
  if (n.Tag() == "!") return s;  // quoted
  if (s == "~" || s == "null" || s == "Null" || s == "NULL" || s.empty()) return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  if (s == ".inf" || s == "+.inf" || s == ".Inf") return "inf";
  {
    std::size_t pos = 0;
    try {
      const long long v = std::stoll(s, &pos);
      if (pos == s.size()) return v;
    } catch (const std::exception&) {
    }
  }
  {
    std::size_t pos = 0;
    try {
      const double v = std::stod(s, &pos);
      if (pos == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
  }
  return s;
}

json to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return scalar(n);
    case YAML::NodeType::Sequence: {
      json a = json::array();
      for (const auto& e : n) a.push_back(to_json(e));
      return a;
    }
    case YAML::NodeType::Map: {
      json o = json::object();
      for (const auto& kv : n) o[kv.first.as<std::string>()] = to_json(kv.second);
      return o;
    }
  }
  return nullptr;
}

const char* type_name(const json& j) {
  if (j.is_object()) return "a table";
  if (j.is_array()) return "a list";
  if (j.is_boolean()) return "a boolean";
  if (j.is_number_integer()) return "an integer";
  if (j.is_number()) return "a number";
  if (j.is_string()) return "a string";
  return "null";
}

void merge(json& base, const json& user, const std::string& path) {
  if (!user.is_object()) throw ValidationError(path, "expected a table");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string p = join(path, it.key());
    if (!base.contains(it.key())) throw ValidationError(p, "unknown key");
    json& b = base[it.key()];
    const json& u = it.value();
    if (kFreeForm.contains(p)) {
      if (!u.is_object()) throw ValidationError(p, "expected a table");
      b = u;
    } else if (b.is_object()) {
      merge(b, u, p);
    } else if (p == "regularity.zeta") {
      if (!(u.is_number() || (u.is_string() && u.get<std::string>() == "inf"))) {
        throw ValidationError(p, "expected a number or \"inf\"");
      }
      b = u;
    } else if (b.is_number_integer()) {
      if (u.is_number_float() && std::floor(u.get<double>()) == u.get<double>()) {
        b = static_cast<long long>(u.get<double>());
      } else if (!u.is_number_integer()) {
        throw ValidationError(p, std::string("expected an integer, got ") + type_name(u));
      } else {
        b = u;
      }
    } else if (b.is_number()) {
      if (!u.is_number()) throw ValidationError(p, std::string("expected a number, got ") + type_name(u));
      b = u.get<double>();
    } else if (b.is_array()) {
      if (!u.is_array()) throw ValidationError(p, std::string("expected a list, got ") + type_name(u));
      b = u;
    } else if (b.is_boolean()) {
      if (!u.is_boolean()) throw ValidationError(p, std::string("expected a boolean, got ") + type_name(u));
      b = u;
    } else if (b.is_string()) {
      if (!u.is_string()) throw ValidationError(p, std::string("expected a string, got ") + type_name(u));
      b = u;
    }
  }
}

void check_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ValidationError(path, "expected a list");
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw ValidationError(path + "[" + std::to_string(i) + "]", "expected a number");
  }
}

void require(bool ok, const std::string& path, const std::string& what) {
  if (!ok) throw ValidationError(path, what);
}

void validate(json& c) {
  for (const auto& [path, values] : kEnums) {
    const std::string v = at_path(c, path).get<std::string>();
    if (!values.contains(v)) {
      std::string list;
      for (const auto& s : values) list += (list.empty() ? "" : ", ") + s;
      throw ValidationError(path, "'" + v + "' is not one of {" + list + "}");
    }
  }
  require(c["seed"].get<long long>() >= 0, "seed", "must be >= 0");
  require(c["threads"].get<long long>() >= 0, "threads", "must be >= 0");
  require(c["grid"]["horizon"].get<double>() > 0.0, "grid.horizon", "must be positive");
  require(c["grid"]["n_steps"].get<long long>() >= 1, "grid.n_steps", "must be >= 1");
  require(c["process"]["dim"].get<long long>() >= 1, "process.dim", "must be >= 1");
  const double H = c["process"]["hurst"];
  require(H > 0.0 && H < 1.0, "process.hurst", "must lie in (0, 1)");
  require(c["ensemble"]["M"].get<long long>() >= 1, "ensemble.M", "must be >= 1");
  require(c["ensemble"]["p"].get<double>() >= 1.0, "ensemble.p", "must be >= 1");
  require(c["spectral"]["xi_max"].get<double>() > 0.0, "spectral.xi_max", "must be positive");
  require(c["spectral"]["n_half"].get<long long>() >= 1, "spectral.n_half", "must be >= 1");
  require(c["weights"]["delta"].get<double>() >= 0.0, "weights.delta", "must be >= 0");
  check_numbers(c["spectral"]["xi"], "spectral.xi");
  check_numbers(c["regularity"]["etas"], "regularity.etas");
  check_numbers(c["young2d"]["corner"], "young2d.corner");
  require(c["young2d"]["corner"].size() == 2, "young2d.corner", "needs two entries");
  check_numbers(c["selfinteract"]["u0"], "selfinteract.u0");
  check_numbers(c["stability"]["levels"], "stability.levels");
  require(!c["stability"]["levels"].empty(), "stability.levels", "must not be empty");
  for (const auto& l : c["stability"]["levels"]) require(l.get<double>() > 0.0, "stability.levels", "levels must be positive");
  const json& pairs = c["occupation"]["pairs"];
  require(pairs.is_array() && !pairs.empty(), "occupation.pairs", "needs at least one [s, t] pair");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string p = "occupation.pairs[" + std::to_string(i) + "]";
    check_numbers(pairs[i], p);
    require(pairs[i].size() == 2 && pairs[i][0].get<double>() <= pairs[i][1].get<double>(), p,
            "expected [s, t] with s <= t");
  }
  require(c["occupation"]["n_x"].get<long long>() >= 2, "occupation.n_x", "must be >= 2");
  require(c["sewing"]["paths"].get<long long>() >= 1, "sewing.paths", "must be >= 1");
  require(c["sewing"]["level_min"].get<long long>() >= 0, "sewing.level_min", "must be >= 0");
  require(c["young2d"]["level"].get<long long>() >= 3, "young2d.level", "must be >= 3");
  require(c["young2d"]["n_sizes"].get<long long>() >= 5, "young2d.n_sizes", "must be >= 5");
  require(c["selfinteract"]["picard_tol"].get<double>() > 0.0, "selfinteract.picard_tol", "must be positive");
  require(c["selfinteract"]["max_iters"].get<long long>() >= 1, "selfinteract.max_iters", "must be >= 1");
  const json& grid = c["sweep"]["grid"];
  for (auto it = grid.begin(); it != grid.end(); ++it) {
    const std::string p = "sweep.grid." + it.key();
    require(it.value().is_array() && !it.value().empty(), p, "expected a non-empty list of values");
    json probe = default_config();
    try {
      at_path(probe, it.key());
    } catch (const ValidationError&) {
      throw ValidationError(p, "'" + it.key() + "' is not a config field");
    }
    require(!at_path(probe, it.key()).is_object(), p, "sweeps run over scalar fields");
  }
}

}  // namespace

const json& default_config() {
  static const json d = json::parse(kDefaults);
  return d;
}

json parse_config_text(const std::string& text) {
  try {
    return to_json(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ValidationError("", std::string("config does not parse: ") + e.what());
  }
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("", "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

json resolve_config(const json& user) {
  json c = default_config();
  if (!user.is_null()) merge(c, user, "");
  validate(c);
  return c;
}

json& at_path(json& j, const std::string& path) {
  json* cur = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!cur->is_object() || !cur->contains(key)) throw ValidationError(path, "no such field");
    cur = &(*cur)[key];
    if (dot == std::string::npos) return *cur;
    start = dot + 1;
  }
}

std::string config_hash(const json& resolved) {
  json c = resolved;
  c.erase("output");
  c.erase("threads");
  c.erase("verbose");
  const std::string s = c.dump();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

double number_or_inf(const json& j) {
  if (j.is_string()) return std::numeric_limits<double>::infinity();
  return j.get<double>();
}

}  // namespace vlab::cli
