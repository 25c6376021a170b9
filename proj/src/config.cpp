#include "liouvlab/config.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <functional>
#include <sstream>
#include <variant>

#include <json.hpp>

#include "liouvlab/io.hpp"

namespace liouvlab {

const std::vector<std::string> kExperiments = {"sample",         "evolve",         "verify-liouville",
                                               "verify-invariance", "integrability", "counterexample",
                                               "project",        "mollify",        "global-fraction"};

namespace {

using Member = std::variant<int ExperimentConfig::*, double ExperimentConfig::*, std::uint64_t ExperimentConfig::*,
                            std::string ExperimentConfig::*, std::vector<double> ExperimentConfig::*>;

struct Key {
  const char* name;  // "section.key" or top-level "key"
  Member member;
};

const std::vector<Key>& keys() {
  using C = ExperimentConfig;
  static const std::vector<Key> table = {
      {"experiment", &C::experiment},
      {"model.d", &C::d},
      {"model.N", &C::N},
      {"model.s", &C::s},
      {"model.kind", &C::kind},
      {"nonlinearity.kind", &C::nonlinearity},
      {"nonlinearity.r", &C::r},
      {"nonlinearity.potential", &C::potential},
      {"nonlinearity.decay", &C::potential_decay},
      {"measure.kind", &C::measure},
      {"measure.count", &C::count},
      {"measure.seed", &C::seed},
      {"measure.displacement", &C::displacement},
      {"flow.kind", &C::flow},
      {"flow.delta", &C::delta},
      {"flow.t_end", &C::t_end},
      {"flow.dt", &C::dt},
      {"flow.dt_fd", &C::dt_fd},
      {"flow.times", &C::times},
      {"flow.horizon", &C::horizon},
      {"flow.refine_count", &C::refine_count},
      {"control.kind", &C::control},
      {"control.drift", &C::control_drift},
      {"projection.n", &C::n},
      {"projection.bandwidths", &C::bandwidths},
      {"mollify.eps", &C::eps},
      {"mollify.spacing", &C::spacing},
      {"mollify.field", &C::vfield},
      {"integrability.windows", &C::windows},
      {"integrability.clips", &C::clips},
      {"counterexample.q0", &C::q0},
      {"counterexample.p0", &C::p0},
      {"ode.d", &C::ode_d},
      {"ode.phi", &C::phi},
      {"ode.alpha", &C::alpha},
      {"ode.beta", &C::beta},
      {"tolerances.z_max", &C::z_max},
      {"tolerances.z_control", &C::z_control},
      {"tolerances.halving_min", &C::halving_min},
      {"tolerances.mass", &C::mass_tol},
      {"tolerances.enstrophy", &C::enstrophy_tol},
      {"tolerances.cauchy", &C::cauchy_tol},
      {"tolerances.slack", &C::slack_tol},
      {"tolerances.bracket_width", &C::bracket_width},
      {"tolerances.ess_warn", &C::ess_warn},
      {"tolerances.excluded_warn", &C::excluded_warn},
      {"output.dir", &C::out},
      {"output.threads", &C::threads},
  };
  return table;
}

const Key* find_key(const std::string& name) {
  for (const auto& k : keys()) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

// Parsed scalar or numeric array before binding.
struct Value {
  enum Type { integer, real, boolean, string, array } type;
  long long i = 0;
  unsigned long long u = 0;  // set with `wide` when the literal exceeds long long
  bool wide = false;
  double x = 0.0;
  bool b = false;
  std::string s;
  std::vector<double> xs;
};

std::string type_name(Value::Type t) {
  switch (t) {
    case Value::integer: return "integer";
    case Value::real: return "float";
    case Value::boolean: return "boolean";
    case Value::string: return "string";
    case Value::array: return "array";
  }
  return "?";
}

void assign_key(ExperimentConfig& cfg, const std::string& name, const Value& v, int line) {
  const Key* key = find_key(name);
  if (!key) throw ConfigError("unknown key '" + name + "'", line, name);
  auto mismatch = [&](const char* want) {
    return ConfigError("key '" + name + "' expects " + want + ", got " + type_name(v.type), line, name);
  };
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, int>) {
          if (v.type != Value::integer) throw mismatch("an integer");
          if (v.wide || v.i < INT32_MIN || v.i > INT32_MAX) throw ConfigError("key '" + name + "' out of range", line, name);
          cfg.*member = static_cast<int>(v.i);
        } else if constexpr (std::is_same_v<T, std::uint64_t>) {
          if (v.type != Value::integer) throw mismatch("an integer");
          if (!v.wide && v.i < 0) throw ConfigError("key '" + name + "' must be >= 0", line, name);
          cfg.*member = v.wide ? v.u : static_cast<std::uint64_t>(v.i);
        } else if constexpr (std::is_same_v<T, double>) {
          if (v.type == Value::integer) {
            cfg.*member = v.wide ? static_cast<double>(v.u) : static_cast<double>(v.i);
          } else if (v.type == Value::real) {
            cfg.*member = v.x;
          } else {
            throw mismatch("a number");
          }
        } else if constexpr (std::is_same_v<T, std::string>) {
          if (v.type != Value::string) throw mismatch("a string");
          cfg.*member = v.s;
        } else {
          if (v.type != Value::array) throw mismatch("an array of numbers");
          cfg.*member = v.xs;
        }
      },
      key->member);
  cfg.lines[name] = line;
}

// ------------------------------------------------------------- TOML subset

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Strips a trailing comment that is not inside a string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

bool parse_number(const std::string& text, Value& v) {
  std::string t;
  for (char c : text) {
    if (c != '_') t += c;
  }
  if (t.empty()) return false;
  if (t == "inf" || t == "+inf" || t == "-inf" || t == "nan" || t == "+nan" || t == "-nan") {
    v.type = Value::real;
    v.x = t.find("nan") != std::string::npos ? NAN : (t[0] == '-' ? -INFINITY : INFINITY);
    return true;
  }
  const bool looks_real = t.find_first_of(".eE") != std::string::npos;
  try {
    std::size_t pos = 0;
    if (looks_real) {
      v.x = std::stod(t, &pos);
      v.type = Value::real;
    } else if (t[0] == '-') {
      v.i = std::stoll(t, &pos, 10);
      v.type = Value::integer;
    } else {
      v.u = std::stoull(t, &pos, 10);
      v.wide = v.u > static_cast<unsigned long long>(LLONG_MAX);
      v.i = v.wide ? 0 : static_cast<long long>(v.u);
      v.type = Value::integer;
    }
    return pos == t.size();
  } catch (const std::exception&) {
    return false;
  }
}

Value parse_value(const std::string& raw, int line, const std::string& name) {
  const std::string text = trim(raw);
  Value v{};
  if (text.empty()) throw ConfigError("missing value for '" + name + "'", line, name);
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') throw ConfigError("unterminated string", line, name);
    v.type = Value::string;
    for (std::size_t i = 1; i + 1 < text.size(); ++i) {
      char c = text[i];
      if (c == '\\') {
        if (i + 2 >= text.size()) throw ConfigError("bad escape in string", line, name);
        const char e = text[++i];
        switch (e) {
          case 'n': c = '\n'; break;
          case 't': c = '\t'; break;
          case '"': c = '"'; break;
          case '\\': c = '\\'; break;
          default: throw ConfigError(std::string("unsupported escape \\") + e, line, name);
        }
      }
      v.s += c;
    }
    return v;
  }
  if (text == "true" || text == "false") {
    v.type = Value::boolean;
    v.b = text == "true";
    return v;
  }
  if (text.front() == '[') {
    if (text.back() != ']') throw ConfigError("unterminated array (arrays must fit on one line)", line, name);
    v.type = Value::array;
    std::stringstream ss(text.substr(1, text.size() - 2));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) {
        if (ss.eof()) break;  // trailing comma
        throw ConfigError("empty array element", line, name);
      }
      Value e{};
      if (!parse_number(item, e)) throw ConfigError("array elements must be numbers, got '" + item + "'", line, name);
      v.xs.push_back(e.type == Value::integer ? static_cast<double>(e.i) : e.x);
    }
    return v;
  }
  if (!parse_number(text, v)) throw ConfigError("cannot parse value '" + text + "'", line, name);
  return v;
}

std::string toml_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::string s = io::format_double(x);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

std::string toml_string(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out + "\"";
}

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  return std::any_of(options.begin(), options.end(), [&](const char* o) { return v == o; });
}

}  // namespace

ExperimentConfig parse_toml(const std::string& text, ExperimentConfig cfg) {
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  std::map<std::string, int> seen;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']' || s.size() < 3) throw ConfigError("malformed table header", line);
      section = trim(s.substr(1, s.size() - 2));
      if (section.find_first_of("[]. \"") != std::string::npos) {
        throw ConfigError("unsupported table name '" + section + "'", line);
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line);
    const std::string key = trim(s.substr(0, eq));
    if (key.empty() || key.find_first_of(" \"") != std::string::npos) {
      throw ConfigError("malformed key '" + key + "'", line);
    }
    const std::string name = section.empty() ? key : section + "." + key;
    if (seen.count(name)) {
      throw ConfigError("duplicate key '" + name + "' (first set on line " + std::to_string(seen[name]) + ")", line,
                        name);
    }
    seen[name] = line;
    assign_key(cfg, name, parse_value(s.substr(eq + 1), line, name), line);
  }
  return cfg;
}

ExperimentConfig parse_json(const std::string& text, ExperimentConfig cfg) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    // byte offset -> line
    const std::size_t upto = std::min<std::size_t>(e.byte, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n'));
    throw ConfigError(std::string("JSON parse error: ") + e.what(), line);
  }
  if (!doc.is_object()) throw ConfigError("JSON config must be an object", 1);
  std::function<void(const nlohmann::json&, const std::string&)> walk = [&](const nlohmann::json& node,
                                                                           const std::string& prefix) {
    for (const auto& [k, val] : node.items()) {
      const std::string name = prefix.empty() ? k : prefix + "." + k;
      if (val.is_object()) {
        walk(val, name);
        continue;
      }
      Value v{};
      if (val.is_string()) {
        v.type = Value::string;
        v.s = val.get<std::string>();
      } else if (val.is_boolean()) {
        v.type = Value::boolean;
        v.b = val.get<bool>();
      } else if (val.is_number_unsigned()) {
        v.type = Value::integer;
        v.u = val.get<unsigned long long>();
        v.wide = v.u > static_cast<unsigned long long>(LLONG_MAX);
        v.i = v.wide ? 0 : static_cast<long long>(v.u);
      } else if (val.is_number_integer()) {
        v.type = Value::integer;
        v.i = val.get<long long>();
      } else if (val.is_number()) {
        v.type = Value::real;
        v.x = val.get<double>();
      } else if (val.is_array()) {
        v.type = Value::array;
        for (const auto& e : val) {
          if (!e.is_number()) throw ConfigError("array '" + name + "' must hold numbers", 0, name);
          v.xs.push_back(e.get<double>());
        }
      } else {
        throw ConfigError("unsupported value for '" + name + "'", 0, name);
      }
      assign_key(cfg, name, v, 0);
    }
  };
  walk(doc, "");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  const auto first = text.find_first_not_of(" \t\r\n");
  if (path.extension() == ".json" || (first != std::string::npos && text[first] == '{')) {
    return parse_json(text, std::move(base));
  }
  return parse_toml(text, std::move(base));
}

std::string ExperimentConfig::to_toml() const {
  std::string out;
  std::string section;
  for (const auto& k : keys()) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    const std::string sec = dot == std::string::npos ? "" : name.substr(0, dot);
    const std::string key = dot == std::string::npos ? name : name.substr(dot + 1);
    if (sec != section) {
      out += "\n[" + sec + "]\n";
      section = sec;
    }
    out += key + " = ";
    std::visit(
        [&](auto member) {
          using T = std::remove_cvref_t<decltype(this->*member)>;
          const auto& v = this->*member;
          if constexpr (std::is_same_v<T, std::string>) {
            out += toml_string(v);
          } else if constexpr (std::is_same_v<T, double>) {
            out += toml_double(v);
          } else if constexpr (std::is_same_v<T, std::vector<double>>) {
            out += "[";
            for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + toml_double(v[i]);
            out += "]";
          } else {
            out += std::to_string(v);
          }
        },
        k.member);
    out += "\n";
  }
  return out;
}

std::string ExperimentConfig::to_json() const {
  nlohmann::ordered_json doc = nlohmann::ordered_json::object();
  for (const auto& k : keys()) {
    const std::string name = k.name;
    const auto dot = name.find('.');
    auto& slot = dot == std::string::npos ? doc[name] : doc[name.substr(0, dot)][name.substr(dot + 1)];
    std::visit([&](auto member) { slot = this->*member; }, k.member);
  }
  return doc.dump(2);
}

bool ExperimentConfig::operator==(const ExperimentConfig& other) const {
  for (const auto& k : keys()) {
    const bool same = std::visit(
        [&](auto member) {
          const auto& a = this->*member;
          const auto& b = other.*member;
          using T = std::remove_cvref_t<decltype(a)>;
          if constexpr (std::is_same_v<T, double>) {
            return a == b || (std::isnan(a) && std::isnan(b));
          } else {
            return a == b;
          }
        },
        k.member);
    if (!same) return false;
  }
  return true;
}

std::string ExperimentConfig::resolved_flow() const {
  if (flow != "auto") return flow;
  if (experiment == "counterexample") return "counterexample";
  if (measure == "enstrophy") return "msqg";
  return nonlinearity == "none" ? "linear" : "interaction";
}

void ExperimentConfig::validate() const {
  auto fail = [&](const std::string& name, const std::string& msg) {
    const auto it = lines.find(name);
    throw ConfigError(name + ": " + msg, it == lines.end() ? 0 : it->second, name);
  };
  auto positive = [&](const std::string& name, double v) {
    if (!(v > 0.0) || !std::isfinite(v)) fail(name, "must be a finite number > 0");
  };
  if (std::find(kExperiments.begin(), kExperiments.end(), experiment) == kExperiments.end()) {
    fail("experiment", "unknown experiment '" + experiment + "'");
  }
  if (d != 1 && d != 2) fail("model.d", "dimension must be 1 or 2");
  if (N < 1) fail("model.N", "cutoff must be >= 1");
  if (!(s >= 0.0) || !std::isfinite(s)) fail("model.s", "sobolev exponent must be finite and >= 0");
  if (!one_of(kind, {"laplacian_plus_one", "laplacian_mean_zero"})) fail("model.kind", "unknown operator '" + kind + "'");
  if (kind == "laplacian_plus_one" && !(s > d / 2.0 - 1.0)) {
    fail("model.s", "Gaussian measure undefined: need s > d/2 - 1");
  }
  if (!one_of(nonlinearity, {"none", "hartree", "hartree_wick", "nls_power", "nls_wick"})) {
    fail("nonlinearity.kind", "unknown nonlinearity '" + nonlinearity + "'");
  }
  if (r < 1) fail("nonlinearity.r", "power must be >= 1");
  if (!one_of(potential, {"default", "gaussian", "bracket_power"})) {
    fail("nonlinearity.potential", "unknown potential '" + potential + "'");
  }
  positive("nonlinearity.decay", potential_decay);
  if (!one_of(measure, {"gaussian", "gibbs", "enstrophy", "standard_normal"})) {
    fail("measure.kind", "unknown measure '" + measure + "'");
  }
  if (measure == "gibbs" && nonlinearity == "none") fail("measure.kind", "gibbs measure needs a nonlinearity");
  if (measure == "enstrophy" && kind != "laplacian_mean_zero") {
    fail("measure.kind", "enstrophy measure needs model.kind = \"laplacian_mean_zero\"");
  }
  if (count < 1) fail("measure.count", "must be >= 1");
  if (!std::isfinite(displacement)) fail("measure.displacement", "must be finite");
  if (!one_of(flow, {"auto", "linear", "interaction", "msqg", "counterexample", "ode"})) {
    fail("flow.kind", "unknown flow '" + flow + "'");
  }
  if (!(delta > 0.0 && delta <= 1.0)) fail("flow.delta", "must lie in (0, 1]");
  positive("flow.t_end", t_end);
  positive("flow.dt", dt);
  positive("flow.horizon", horizon);
  if (dt_fd.empty()) fail("flow.dt_fd", "needs at least one step");
  for (double h : dt_fd) positive("flow.dt_fd", h);
  if (times.empty()) fail("flow.times", "needs at least one time");
  for (double t : times) {
    if (!std::isfinite(t)) fail("flow.times", "times must be finite");
  }
  if (experiment == "verify-invariance") {
    if (times.front() != 0.0 || !std::is_sorted(times.begin(), times.end()) ||
        std::adjacent_find(times.begin(), times.end()) != times.end()) {
      fail("flow.times", "invariance times must increase strictly from 0");
    }
  }
  if (!one_of(control, {"none", "flip", "mismatch", "drift"})) fail("control.kind", "unknown control '" + control + "'");
  if (!std::isfinite(control_drift)) fail("control.drift", "must be finite");
  if (n < 1) fail("projection.n", "must be >= 1");
  if (bandwidths.empty()) fail("projection.bandwidths", "needs at least one bandwidth");
  for (double h : bandwidths) positive("projection.bandwidths", h);
  positive("mollify.eps", eps);
  positive("mollify.spacing", spacing);
  if (spacing > eps / 4.0 * (1.0 + 1e-12)) fail("mollify.spacing", "grid too coarse: spacing must be <= eps/4");
  if (!one_of(vfield, {"rotation", "constant", "sign"})) fail("mollify.field", "unknown field '" + vfield + "'");
  if (windows.empty()) fail("integrability.windows", "needs at least one window");
  for (double w : windows) positive("integrability.windows", w);
  if (!std::is_sorted(windows.begin(), windows.end())) fail("integrability.windows", "must increase");
  if (clips.empty()) fail("integrability.clips", "needs at least one clip level");
  for (double c : clips) positive("integrability.clips", c);
  if (!std::is_sorted(clips.begin(), clips.end())) fail("integrability.clips", "must increase");
  if (!std::isfinite(q0)) fail("counterexample.q0", "must be finite");
  if (!std::isfinite(p0)) fail("counterexample.p0", "must be finite");
  if (ode_d < 1) fail("ode.d", "must be >= 1");
  if (!one_of(phi, {"quadratic", "quartic"})) fail("ode.phi", "unknown profile '" + phi + "'");
  positive("ode.alpha", alpha);
  positive("ode.beta", beta);
  if (!(alpha < ode_d / 2.0 - 2.0)) fail("ode.alpha", "the singular example needs alpha < d/2 - 2");
  for (const char* name : {"tolerances.z_max", "tolerances.z_control", "tolerances.halving_min", "tolerances.mass",
                           "tolerances.enstrophy", "tolerances.cauchy", "tolerances.slack",
                           "tolerances.bracket_width", "tolerances.ess_warn", "tolerances.excluded_warn"}) {
    const Key* key = find_key(name);
    positive(name, this->*std::get<double ExperimentConfig::*>(key->member));
  }
  if (out.empty()) fail("output.dir", "must not be empty");

  const std::string f = resolved_flow();
  if (f == "msqg" && (d != 2 || kind != "laplacian_mean_zero")) {
    fail("flow.kind", "the mSQG flow needs model.d = 2 and model.kind = \"laplacian_mean_zero\"");
  }
  if (f == "interaction" && nonlinearity == "none") fail("flow.kind", "the interaction flow needs a nonlinearity");
  if (control != "none") {
    if (experiment != "verify-liouville" && experiment != "project") {
      fail("control.kind", "negative controls apply to verify-liouville and project only");
    }
    if (f != "linear" && f != "interaction") {
      fail("control.kind", "negative controls need a transport flow (linear or interaction)");
    }
  }
  const bool field_measure = measure != "standard_normal";
  const bool needs_field = experiment == "sample" || experiment == "verify-liouville" ||
                           experiment == "verify-invariance" || experiment == "project" ||
                           (experiment == "evolve" && (f == "linear" || f == "interaction" || f == "msqg")) ||
                           (experiment == "global-fraction" && (f == "linear" || f == "interaction"));
  if (needs_field && !field_measure) fail("measure.kind", "this experiment needs a field measure");
  if (experiment == "mollify" && measure != "standard_normal") {
    fail("measure.kind", "mollify works on the standard normal cloud in R^2");
  }
}

ExperimentConfig default_config(const std::string& experiment) {
  if (std::find(kExperiments.begin(), kExperiments.end(), experiment) == kExperiments.end()) {
    throw ConfigError("unknown experiment '" + experiment + "'", 0, "experiment");
  }
  ExperimentConfig c;
  c.experiment = experiment;
  if (experiment == "sample") {
    c.count = 10000;
  } else if (experiment == "evolve") {
    c.nonlinearity = "nls_power";
    c.measure = "gibbs";
    c.flow = "interaction";
    c.count = 1;
  } else if (experiment == "verify-liouville") {
    c.count = 100000;
  } else if (experiment == "verify-invariance") {
    c.nonlinearity = "nls_power";
    c.measure = "gibbs";
    c.flow = "interaction";
    c.count = 4000;
    c.times = {0.0, 0.25, 0.5, 0.75, 1.0};
  } else if (experiment == "integrability") {
    c.nonlinearity = "hartree";
    c.measure = "gibbs";
    c.count = 2000;
  } else if (experiment == "counterexample") {
    c.flow = "counterexample";
    c.measure = "standard_normal";
    c.count = 100000;
  } else if (experiment == "project") {
    c.nonlinearity = "hartree";
    c.measure = "gibbs";
    c.count = 10000;
    c.times = {0.0};
    c.dt_fd = {1e-2};
  } else if (experiment == "mollify") {
    c.measure = "standard_normal";
    c.count = 2000;
  } else if (experiment == "global-fraction") {
    c.nonlinearity = "nls_power";
    c.measure = "gibbs";
    c.flow = "interaction";
    c.count = 200;
    c.dt = 1e-2;
  }
  return c;
}

}  // namespace liouvlab
