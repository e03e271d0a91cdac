#include "dp3/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "dp3/rng.hpp"

namespace dp3 {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = s.find(sep, start);
    parts.push_back(trim(s.substr(start, pos - start)));
    if (pos == std::string::npos) return parts;
    start = pos + 1;
  }
}

std::string format_real(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string format_vec3(const Vec3& v) {
  return format_real(v[0]) + ", " + format_real(v[1]) + ", " + format_real(v[2]);
}

std::string format_value(const ConfigValue& v) {
  struct Fmt {
    std::string operator()(bool b) const { return b ? "true" : "false"; }
    std::string operator()(long long i) const { return std::to_string(i); }
    std::string operator()(double d) const { return format_real(d); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(const Vec3& t) const { return format_vec3(t); }
    std::string operator()(const std::vector<long long>& l) const {
      std::string out;
      for (std::size_t i = 0; i < l.size(); ++i) out += (i ? ", " : "") + std::to_string(l[i]);
      return out;
    }
    std::string operator()(const std::vector<Vec3>& ts) const {
      std::string out;
      for (std::size_t i = 0; i < ts.size(); ++i) {
        if (i) out += "; ";
        out += format_real(ts[i][0]) + "," + format_real(ts[i][1]) + "," + format_real(ts[i][2]);
      }
      return out;
    }
  };
  return std::visit(Fmt{}, v);
}

[[noreturn]] void bad_value(const std::string& at, const std::string& msg) {
  throw std::runtime_error(at + ": " + msg);
}

long long parse_ll(const std::string& text, const std::string& at) {
  long long v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec == std::errc::result_out_of_range) bad_value(at, "integer out of range: '" + text + "'");
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    bad_value(at, "expected an integer, got '" + text + "'");
  return v;
}

double parse_real(const std::string& text, const std::string& at) {
  double v = 0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc{} || res.ptr != text.data() + text.size())
    bad_value(at, "expected a number, got '" + text + "'");
  return v;
}

std::string format_bound(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) return std::to_string(static_cast<long long>(v));
  return format_real(v);
}

void check_range(double v, const SchemaEntry& e, const std::string& at) {
  if (!(v >= e.min && v <= e.max))
    bad_value(at, "value " + format_real(v) + " out of range [" + format_bound(e.min) + ", " +
                      format_bound(e.max) + "]");
}

Vec3 parse_triple(const std::string& text, const std::string& at) {
  auto parts = split(text, ',');
  if (parts.size() != 3)
    bad_value(at, "expected three comma-separated numbers, got '" + text + "'");
  return {parse_real(parts[0], at), parse_real(parts[1], at), parse_real(parts[2], at)};
}

ConfigValue parse_value(const SchemaEntry& e, const std::string& text, const std::string& at) {
  switch (e.type) {
    case ConfigType::boolean:
      if (text == "true") return true;
      if (text == "false") return false;
      bad_value(at, "expected true or false, got '" + text + "'");
    case ConfigType::integer: {
      long long v = parse_ll(text, at);
      check_range(static_cast<double>(v), e, at);
      return v;
    }
    case ConfigType::real: {
      double v = parse_real(text, at);
      check_range(v, e, at);
      return v;
    }
    case ConfigType::enumeration: {
      for (const auto& c : e.choices)
        if (text == c) return text;
      std::string opts;
      for (std::size_t i = 0; i < e.choices.size(); ++i) opts += (i ? ", " : "") + e.choices[i];
      bad_value(at, "invalid value '" + text + "' (expected one of: " + opts + ")");
    }
    case ConfigType::vec3:
      return parse_triple(text, at);
    case ConfigType::int_list: {
      auto parts = split(text, ',');
      std::vector<long long> out;
      for (const auto& p : parts) {
        if (p.empty()) bad_value(at, "empty element in integer list '" + text + "'");
        long long v = parse_ll(p, at);
        check_range(static_cast<double>(v), e, at);
        out.push_back(v);
      }
      if (out.empty()) bad_value(at, "integer list is empty");
      return out;
    }
    case ConfigType::target_list: {
      std::vector<Vec3> out;
      for (const auto& p : split(text, ';'))
        if (!p.empty()) out.push_back(parse_triple(p, at));
      return out;
    }
  }
  bad_value(at, "unhandled value type");
}

std::string targets_default() {
  std::string out;
  const auto ts = default_demo_targets();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (i) out += "; ";
    out += format_real(ts[i][0]) + "," + format_real(ts[i][1]) + "," + format_real(ts[i][2]);
  }
  return out;
}

constexpr double kIntMax = static_cast<double>(std::numeric_limits<long long>::max());

const char* type_name(ConfigType t) {
  switch (t) {
    case ConfigType::boolean: return "bool";
    case ConfigType::integer: return "int";
    case ConfigType::real: return "real";
    case ConfigType::enumeration: return "enum";
    case ConfigType::vec3: return "triple";
    case ConfigType::int_list: return "int list";
    case ConfigType::target_list: return "triple list";
  }
  return "?";
}

}  // namespace

const std::vector<SchemaEntry>& ExperimentConfig::schema() {
  static const std::vector<SchemaEntry> entries = {
      {"seed", ConfigType::integer, "0", 0, kIntMax, {},
       "master seed; every stream (env, init, training, eval) derives from it"},

      {"env.horizon_steps", ConfigType::integer, "50", 1, 100000, {}, "episode length cap"},
      {"env.clutter", ConfigType::integer, "0", 0, 64, {}, "distractor cubes outside the workspace"},
      {"env.observation_mode", ConfigType::enumeration, "cloud", 0, 0, {"cloud", "depth"},
       "point-cloud policy or the depth-image baseline"},
      {"env.crop_enabled", ConfigType::boolean, "true", 0, 0, {}, "crop clouds to the workspace box"},
      {"env.crop_min", ConfigType::vec3, "0, 0, 0.01", 0, 0, {}, "crop box lower corner"},
      {"env.crop_max", ConfigType::vec3, "1, 1, 1", 0, 0, {}, "crop box upper corner"},
      {"env.fps_count", ConfigType::integer, "512", 1, 100000, {},
       "points kept by farthest point sampling (all, when the cloud is smaller)"},
      {"env.gripper_points", ConfigType::integer, "64", 1, 10000, {}, "gripper marker samples"},
      {"env.target_points", ConfigType::integer, "64", 1, 10000, {}, "target marker samples"},
      {"env.ground_points", ConfigType::integer, "256", 0, 100000, {}, "ground plane samples"},
      {"env.distractor_points", ConfigType::integer, "32", 1, 10000, {},
       "samples per distractor cube"},

      {"demos.count", ConfigType::integer, "5", 1, 100000, {}, "expert episodes to record"},
      {"demos.sampler", ConfigType::enumeration, "fixed", 0, 0, {"fixed", "uniform"},
       "fixed cycles demos.targets; uniform draws fresh targets from the seed"},
      {"demos.targets", ConfigType::target_list, targets_default(), 0, 0, {},
       "goal list for the fixed sampler"},

      {"encoder.use_color", ConfigType::boolean, "false", 0, 0, {},
       "append RGB channels to encoder input"},
      {"encoder.use_projection", ConfigType::boolean, "true", 0, 0, {},
       "project pooled cloud features 256 -> 64"},
      {"encoder.use_layernorm", ConfigType::boolean, "true", 0, 0, {},
       "LayerNorm after every encoder linear"},

      {"diffusion.train_steps", ConfigType::integer, "100", 1, 100000, {},
       "forward diffusion steps K"},
      {"diffusion.inference_steps", ConfigType::integer, "10", 1, 100000, {},
       "reverse steps at decision time (<= train_steps)"},
      {"diffusion.schedule", ConfigType::enumeration, "squared_cosine", 0, 0,
       {"squared_cosine", "linear"}, "noise schedule shape"},
      {"diffusion.prediction_mode", ConfigType::enumeration, "sample", 0, 0,
       {"sample", "epsilon"}, "denoiser target: the clean chunk or the added noise"},
      {"diffusion.embed_dim", ConfigType::integer, "32", 4, 4096, {},
       "sinusoidal timestep embedding width (even)"},
      {"diffusion.hidden", ConfigType::int_list, "256, 256", 1, 100000, {},
       "denoiser hidden layer widths"},
      {"diffusion.eta", ConfigType::real, "0", 0, 10, {},
       "sampler stochasticity; 0 is deterministic"},

      {"horizon.prediction", ConfigType::integer, "4", 1, 64, {}, "predicted chunk length H"},
      {"horizon.observation", ConfigType::integer, "2", 1, 64, {}, "observation steps conditioned on"},
      {"horizon.execution", ConfigType::integer, "3", 1, 64, {},
       "actions executed before replanning (<= prediction)"},

      {"training.epochs", ConfigType::integer, "3000", 1, 1000000, {}, "training epochs"},
      {"training.batch", ConfigType::integer, "128", 1, 100000, {}, "chunks per optimizer step"},
      {"training.lr", ConfigType::real, "0.0001", 0, 1, {}, "Adam learning rate"},
      {"training.beta1", ConfigType::real, "0.95", 0, 1, {}, "Adam first-moment decay"},
      {"training.beta2", ConfigType::real, "0.999", 0, 1, {}, "Adam second-moment decay"},
      {"training.checkpoint_every", ConfigType::integer, "0", 0, 1000000, {},
       "epochs between periodic checkpoint saves; 0 saves only at the end"},
      {"training.max_steps", ConfigType::integer, "0", 0, 1000000000, {},
       "hard cap on optimizer steps; 0 means no cap"},
      {"training.plateau_window", ConfigType::integer, "50", 0, 100000, {},
       "epochs averaged per plateau check"},
      {"training.plateau_patience", ConfigType::integer, "3", 0, 1000, {},
       "non-improving windows tolerated; 0 disables early stopping"},
      {"training.plateau_tol", ConfigType::real, "0.001", 0, 1, {},
       "relative improvement required per window"},

      {"eval.sampler", ConfigType::enumeration, "grid", 0, 0, {"grid", "uniform", "fixed"},
       "goal source: the grid_n^3 cell-center grid, fresh draws, or eval.targets"},
      {"eval.grid_n", ConfigType::integer, "10", 1, 100, {}, "grid resolution per axis"},
      {"eval.episodes", ConfigType::integer, "100", 1, 100000, {},
       "episode count for the uniform sampler"},
      {"eval.targets", ConfigType::target_list, "", 0, 0, {}, "goal list for the fixed sampler"},
  };
  return entries;
}

const SchemaEntry& ExperimentConfig::schema_entry(const std::string& key) {
  for (const auto& e : schema())
    if (e.key == key) return e;
  throw std::logic_error("no schema entry for key '" + key + "'");
}

std::string ExperimentConfig::help_text() {
  std::ostringstream os;
  os << "Configuration keys (key = value; group by section or use dotted keys):\n";
  for (const auto& e : schema()) {
    std::string head = "  " + e.key;
    head.resize(std::max<std::size_t>(head.size() + 2, 30), ' ');
    std::string type = type_name(e.type);
    if (e.type == ConfigType::integer || e.type == ConfigType::real) {
      if (e.max < kIntMax) type += " in [" + format_bound(e.min) + ", " + format_bound(e.max) + "]";
    } else if (e.type == ConfigType::enumeration) {
      type += " {";
      for (std::size_t i = 0; i < e.choices.size(); ++i) type += (i ? "|" : "") + e.choices[i];
      type += "}";
    }
    head += type;
    head.resize(std::max<std::size_t>(head.size() + 2, 62), ' ');
    os << head << "default: " << (e.default_text.empty() ? "(empty)" : e.default_text) << "\n";
    os << "      " << e.doc << "\n";
  }
  return os.str();
}

ExperimentConfig ExperimentConfig::defaults() {
  ExperimentConfig cfg;
  for (const auto& e : schema())
    cfg.values_[e.key] = parse_value(e, e.default_text, "default for '" + e.key + "'");
  return cfg;
}

ExperimentConfig ExperimentConfig::parse_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_text(buf.str(), path);
}

namespace {

std::vector<std::string> section_names() {
  std::vector<std::string> out;
  for (const auto& e : ExperimentConfig::schema()) {
    auto dot = e.key.find('.');
    if (dot == std::string::npos) continue;
    std::string s = e.key.substr(0, dot);
    if (out.empty() || out.back() != s) out.push_back(s);
  }
  return out;
}

std::string unknown_key_message(const std::string& key) {
  std::string msg = "unknown key '" + key + "'";
  auto dot = key.find('.');
  const auto sections = section_names();
  if (dot != std::string::npos) {
    std::string sec = key.substr(0, dot);
    for (const auto& s : sections) {
      if (s != sec) continue;
      msg += "; keys in '" + sec + "':";
      for (const auto& e : ExperimentConfig::schema())
        if (e.key.rfind(sec + ".", 0) == 0) msg += " " + e.key.substr(dot + 1);
      return msg;
    }
  }
  msg += "; top-level keys: seed; sections:";
  for (const auto& s : sections) msg += " " + s;
  return msg;
}

}  // namespace

ExperimentConfig ExperimentConfig::parse_text(const std::string& text, const std::string& source) {
  ExperimentConfig cfg = defaults();
  std::istringstream is(text);
  std::string line, section;
  std::size_t lineno = 0;
  std::set<std::string> seen;
  auto fail = [&](const std::string& msg) -> void {
    throw std::runtime_error(source + ":" + std::to_string(lineno) + ": " + msg);
  };
  auto handle = [&](const std::string& seg) {
    if (seg == "}") {
      if (section.empty()) fail("'}' with no open section");
      section.clear();
      return;
    }
    if (seg.back() == '{') {
      if (!section.empty())
        fail("sections do not nest (about to open '" + seg + "' inside '" + section + "')");
      std::string name = trim(seg.substr(0, seg.size() - 1));
      if (name.empty() || name.find_first_of(" \t.={}") != std::string::npos)
        fail("malformed section header '" + seg + "'");
      bool known = false;
      for (const auto& s : section_names()) known = known || s == name;
      if (!known) fail(unknown_key_message(name + "."));
      section = name;
      return;
    }
    auto eq = seg.find('=');
    if (eq == std::string::npos) fail("expected 'key = value', a section header, or '}'");
    std::string key = trim(seg.substr(0, eq));
    std::string val = trim(seg.substr(eq + 1));
    if (key.empty()) fail("missing key before '='");
    if (!section.empty()) {
      if (key.find('.') != std::string::npos)
        fail("dotted key '" + key + "' inside section '" + section + "'; use one or the other");
      key = section + "." + key;
    }
    if (!seen.insert(key).second) fail("duplicate key '" + key + "'");
    cfg.set(key, val, source + ":" + std::to_string(lineno));
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (auto pos = line.find('#'); pos != std::string::npos) line.erase(pos);
    // split at brace boundaries so `env { fps_count = 4 }` works on one line
    std::vector<std::string> segments;
    std::string cur;
    for (char c : line) {
      if (c == '{') {
        cur += c;
        segments.push_back(trim(cur));
        cur.clear();
      } else if (c == '}') {
        if (!trim(cur).empty()) segments.push_back(trim(cur));
        segments.push_back("}");
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!trim(cur).empty()) segments.push_back(trim(cur));
    for (const std::string& seg : segments) handle(seg);
  }
  if (!section.empty())
    throw std::runtime_error(source + ": section '" + section + "' is never closed");
  return cfg;
}

void ExperimentConfig::set(const std::string& key, const std::string& value_text,
                           const std::string& where) {
  const std::string at = where.empty() ? "key '" + key + "'" : where + ": '" + key + "'";
  const SchemaEntry* entry = nullptr;
  for (const auto& e : schema())
    if (e.key == key) entry = &e;
  if (!entry) bad_value(at, unknown_key_message(key));
  values_[key] = parse_value(*entry, value_text, at);
  explicit_.insert(key);
}

void ExperimentConfig::apply_override(const std::string& spec) {
  auto eq = spec.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("override '" + spec + "' is not of the form key=value");
  set(trim(spec.substr(0, eq)), trim(spec.substr(eq + 1)), "override");
}

const ConfigValue& ExperimentConfig::value(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::logic_error("config value '" + key + "' missing");
  return it->second;
}

bool ExperimentConfig::get_bool(const std::string& key) const {
  if (const bool* v = std::get_if<bool>(&value(key))) return *v;
  throw std::logic_error("config key '" + key + "' is not a bool");
}

long long ExperimentConfig::get_int(const std::string& key) const {
  if (const long long* v = std::get_if<long long>(&value(key))) return *v;
  throw std::logic_error("config key '" + key + "' is not an integer");
}

double ExperimentConfig::get_real(const std::string& key) const {
  if (const double* v = std::get_if<double>(&value(key))) return *v;
  throw std::logic_error("config key '" + key + "' is not a real");
}

const std::string& ExperimentConfig::get_enum(const std::string& key) const {
  if (const std::string* v = std::get_if<std::string>(&value(key))) return *v;
  throw std::logic_error("config key '" + key + "' is not an enumeration");
}

const Vec3& ExperimentConfig::get_vec3(const std::string& key) const {
  if (const Vec3* v = std::get_if<Vec3>(&value(key))) return *v;
  throw std::logic_error("config key '" + key + "' is not a triple");
}

const std::vector<long long>& ExperimentConfig::get_int_list(const std::string& key) const {
  if (const auto* v = std::get_if<std::vector<long long>>(&value(key))) return *v;
  throw std::logic_error("config key '" + key + "' is not an integer list");
}

const std::vector<Vec3>& ExperimentConfig::get_targets(const std::string& key) const {
  if (const auto* v = std::get_if<std::vector<Vec3>>(&value(key))) return *v;
  throw std::logic_error("config key '" + key + "' is not a target list");
}

std::string ExperimentConfig::serialize() const {
  std::ostringstream os;
  std::string section;
  bool first = true;
  for (const auto& e : schema()) {
    auto dot = e.key.find('.');
    std::string sec = dot == std::string::npos ? "" : e.key.substr(0, dot);
    std::string leaf = dot == std::string::npos ? e.key : e.key.substr(dot + 1);
    if (sec != section || first) {
      if (!section.empty()) os << "}\n";
      if (!first) os << "\n";
      if (!sec.empty()) os << sec << " {\n";
      section = sec;
    }
    first = false;
    os << (sec.empty() ? "" : "  ") << leaf << " = " << format_value(value(e.key)) << "\n";
  }
  if (!section.empty()) os << "}\n";
  return os.str();
}

std::uint64_t ExperimentConfig::seed() const {
  return static_cast<std::uint64_t>(get_int("seed"));
}

Reach3dConfig ExperimentConfig::env_config() const {
  Reach3dConfig e;
  e.horizon = static_cast<std::size_t>(get_int("env.horizon_steps"));
  e.clutter = static_cast<std::size_t>(get_int("env.clutter"));
  e.gripper_points = static_cast<std::size_t>(get_int("env.gripper_points"));
  e.target_points = static_cast<std::size_t>(get_int("env.target_points"));
  e.ground_points = static_cast<std::size_t>(get_int("env.ground_points"));
  e.distractor_points = static_cast<std::size_t>(get_int("env.distractor_points"));
  return e;
}

PolicyConfig ExperimentConfig::policy_config() const {
  PolicyConfig p;
  p.mode = parse_observation_mode(get_enum("env.observation_mode"));
  p.crop_enabled = get_bool("env.crop_enabled");
  p.crop_box = {get_vec3("env.crop_min"), get_vec3("env.crop_max")};
  p.fps_count = static_cast<std::size_t>(get_int("env.fps_count"));
  p.use_color = get_bool("encoder.use_color");
  p.use_projection = get_bool("encoder.use_projection");
  p.use_layernorm = get_bool("encoder.use_layernorm");
  p.horizon.prediction = static_cast<std::size_t>(get_int("horizon.prediction"));
  p.horizon.observation = static_cast<std::size_t>(get_int("horizon.observation"));
  p.horizon.execution = static_cast<std::size_t>(get_int("horizon.execution"));
  p.train_steps = static_cast<std::size_t>(get_int("diffusion.train_steps"));
  p.inference_steps = static_cast<std::size_t>(get_int("diffusion.inference_steps"));
  p.schedule = parse_schedule_kind(get_enum("diffusion.schedule"));
  p.prediction = parse_prediction_mode(get_enum("diffusion.prediction_mode"));
  p.eta = get_real("diffusion.eta");
  p.embed_dim = static_cast<std::size_t>(get_int("diffusion.embed_dim"));
  p.hidden.clear();
  for (long long h : get_int_list("diffusion.hidden")) p.hidden.push_back(static_cast<std::size_t>(h));
  p.validate();
  return p;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig t;
  t.epochs = static_cast<std::size_t>(get_int("training.epochs"));
  t.batch = static_cast<std::size_t>(get_int("training.batch"));
  t.adam.lr = get_real("training.lr");
  t.adam.beta1 = get_real("training.beta1");
  t.adam.beta2 = get_real("training.beta2");
  t.max_steps = static_cast<std::size_t>(get_int("training.max_steps"));
  t.plateau_window = static_cast<std::size_t>(get_int("training.plateau_window"));
  t.plateau_patience = static_cast<std::size_t>(get_int("training.plateau_patience"));
  t.plateau_tol = get_real("training.plateau_tol");
  return t;
}

std::vector<Vec3> ExperimentConfig::demo_targets() const {
  const auto count = static_cast<std::size_t>(get_int("demos.count"));
  if (get_enum("demos.sampler") == "uniform")
    return uniform_targets(count, derive_seed(seed(), "demo-targets"));
  const auto& fixed = get_targets("demos.targets");
  if (fixed.empty())
    throw std::runtime_error("demos.sampler = fixed needs a nonempty demos.targets list");
  std::vector<Vec3> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(fixed[i % fixed.size()]);
  return out;
}

std::vector<Vec3> ExperimentConfig::eval_targets() const {
  const std::string& sampler = get_enum("eval.sampler");
  if (sampler == "grid") return grid_targets(static_cast<std::size_t>(get_int("eval.grid_n")));
  if (sampler == "uniform")
    return uniform_targets(static_cast<std::size_t>(get_int("eval.episodes")),
                           derive_seed(seed(), "eval-targets"));
  const auto& fixed = get_targets("eval.targets");
  if (fixed.empty())
    throw std::runtime_error("eval.sampler = fixed needs a nonempty eval.targets list");
  return fixed;
}

void apply_env_seed(ExperimentConfig& cfg) {
  if (cfg.explicitly_set("seed")) return;
  const char* v = std::getenv("DP3_SEED");
  if (!v || !*v) return;
  cfg.set("seed", v, "DP3_SEED");
}

}  // namespace dp3
