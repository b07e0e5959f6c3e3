#include "ensemblecast/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <utility>

#include "ensemblecast/errors.hpp"
#include "ensemblecast/presets.hpp"

namespace ecast {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void parse_fail(const std::string& origin, int line, const std::string& what) {
  throw Error(Errc::parse_error,
              origin + ":" + std::to_string(line) + ": " + what);
}

struct Cursor {
  const std::string& origin;
  int line;
};

double to_double(const std::string& v, const Cursor& at) {
  double out = 0.0;
  const char* b = v.data();
  const char* e = b + v.size();
  const auto res = std::from_chars(b, e, out);
  if (res.ec != std::errc{} || res.ptr != e)
    parse_fail(at.origin, at.line, "expected a number, got '" + v + "'");
  return out;
}

long long to_int(const std::string& v, const Cursor& at) {
  long long out = 0;
  const char* b = v.data();
  const char* e = b + v.size();
  const auto res = std::from_chars(b, e, out);
  if (res.ec != std::errc{} || res.ptr != e)
    parse_fail(at.origin, at.line, "expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& v, const Cursor& at) {
  std::uint64_t out = 0;
  const char* b = v.data();
  const char* e = b + v.size();
  const auto res = std::from_chars(b, e, out);
  if (res.ec != std::errc{} || res.ptr != e)
    parse_fail(at.origin, at.line, "expected a nonnegative integer, got '" + v + "'");
  return out;
}

bool to_bool(const std::string& v, const Cursor& at) {
  if (v == "T" || v == "true") return true;
  if (v == "F" || v == "false") return false;
  parse_fail(at.origin, at.line, "expected T/F, got '" + v + "'");
}

std::vector<std::string> split(const std::string& v, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = v.find(sep, pos);
    out.push_back(trim(v.substr(pos, next - pos)));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

DayRange to_range(const std::string& v, const Cursor& at) {
  const auto parts = split(v, ':');
  if (parts.size() != 2)
    parse_fail(at.origin, at.line, "expected begin:end, got '" + v + "'");
  return {static_cast<int>(to_int(parts[0], at)), static_cast<int>(to_int(parts[1], at))};
}

struct NoiseKv {
  std::string key;
  std::string value;
  int line;
};

[[noreturn]] void unknown_key_fail(const std::string& origin, int line,
                                   const std::string& section, const std::string& key) {
  throw Error(Errc::unknown_key, origin + ":" + std::to_string(line) + ": unknown key '" +
                                     key + "' in [" + section + "]");
}

NoiseConfig build_noise(const std::vector<NoiseKv>& kv, const std::string& origin,
                        int section_line) {
  std::string kind;
  for (const NoiseKv& e : kv)
    if (e.key == "preset") {
      if (kv.size() != 1)
        parse_fail(origin, e.line, "preset excludes other noise keys");
      return noise_preset(e.value);
    }
  for (const NoiseKv& e : kv)
    if (e.key == "kind") kind = e.value;
  if (kind.empty()) parse_fail(origin, section_line, "[noise] requires kind or preset");

  auto ints_of = [&](const NoiseKv& e) {
    std::vector<int> out;
    for (const std::string& p : split(e.value, ','))
      out.push_back(static_cast<int>(to_int(p, {origin, e.line})));
    return out;
  };
  auto bools_of = [&](const NoiseKv& e) {
    std::vector<bool> out;
    for (const std::string& p : split(e.value, ','))
      out.push_back(to_bool(p, {origin, e.line}));
    return out;
  };

  if (kind == "gaussian") {
    GaussianCfg g;
    for (const NoiseKv& e : kv) {
      const Cursor at{origin, e.line};
      if (e.key == "kind") continue;
      else if (e.key == "mu") g.mu = to_double(e.value, at);
      else if (e.key == "sigma") g.sigma = to_double(e.value, at);
      else unknown_key_fail(origin, e.line, "noise", e.key);
    }
    if (g.sigma < 0.0)
      throw Error(Errc::negative_sigma, origin + ": sigma must be >= 0");
    return g;
  }
  if (kind == "perlin") {
    PerlinCfg p;
    for (const NoiseKv& e : kv) {
      if (e.key == "kind") continue;
      else if (e.key == "res") {
        const auto r = ints_of(e);
        if (r.size() != 3) parse_fail(origin, e.line, "perlin res needs 3 components");
        p.res = {r[0], r[1], r[2]};
      } else if (e.key == "tileable") {
        const auto t = bools_of(e);
        if (t.size() != 3) parse_fail(origin, e.line, "perlin tileable needs 3 components");
        p.tileable = {t[0], t[1], t[2]};
      } else {
        unknown_key_fail(origin, e.line, "noise", e.key);
      }
    }
    return p;
  }
  if (kind == "fractal_perlin") {
    FractalPerlinCfg f;
    for (const NoiseKv& e : kv) {
      const Cursor at{origin, e.line};
      if (e.key == "kind") continue;
      else if (e.key == "res") {
        const auto r = ints_of(e);
        if (r.size() != 2) parse_fail(origin, e.line, "fractal res needs 2 components");
        f.res = {r[0], r[1]};
      } else if (e.key == "tileable") {
        const auto t = bools_of(e);
        if (t.size() != 2) parse_fail(origin, e.line, "fractal tileable needs 2 components");
        f.tileable = {t[0], t[1]};
      } else if (e.key == "octaves") {
        f.octaves = static_cast<int>(to_int(e.value, at));
      } else if (e.key == "persistence") {
        f.persistence = to_double(e.value, at);
      } else if (e.key == "lacunarity") {
        f.lacunarity = static_cast<int>(to_int(e.value, at));
      } else if (e.key == "alpha") {
        f.alpha = to_double(e.value, at);
      } else {
        unknown_key_fail(origin, e.line, "noise", e.key);
      }
    }
    if (f.octaves < 1)
      throw Error(Errc::bad_octaves, origin + ": octaves must be >= 1");
    return f;
  }
  parse_fail(origin, section_line, "unknown noise kind '" + kind + "'");
}

}  // namespace

void ExperimentConfig::require(const std::string& section) const {
  if (!has(section))
    throw Error(Errc::missing_section, "config is missing the [" + section + "] section");
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
  ExperimentConfig cfg;
  std::vector<NoiseKv> noise_kv;
  int noise_line = 0;

  static const std::set<std::string> known_sections = {
      "data", "split", "stepper", "train", "ensemble", "noise", "output"};

  std::istringstream is(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;

    if (s.front() == '[') {
      if (s.back() != ']') parse_fail(origin, line, "unterminated section header");
      const std::string name = trim(s.substr(1, s.size() - 2));
      if (!known_sections.count(name))
        throw Error(Errc::unknown_key, origin + ":" + std::to_string(line) +
                                           ": unknown section [" + name + "]");
      if (cfg.present.count(name))
        parse_fail(origin, line, "duplicate section [" + name + "]");
      cfg.present.insert(name);
      section = name;
      if (name == "noise") noise_line = line;
      continue;
    }

    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) parse_fail(origin, line, "expected key = value");
    if (section.empty()) parse_fail(origin, line, "key before any [section]");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) parse_fail(origin, line, "empty key");
    const Cursor at{origin, line};

    if (section == "data") {
      if (key == "path") cfg.data.path = value;
      else if (key == "days") cfg.data.days = static_cast<int>(to_int(value, at));
      else if (key == "grid") {
        const auto parts = split(value, 'x');
        if (parts.size() != 2) parse_fail(origin, line, "expected LATxLON, got '" + value + "'");
        cfg.data.grid_lat = static_cast<int>(to_int(parts[0], at));
        cfg.data.grid_lon = static_cast<int>(to_int(parts[1], at));
      } else if (key == "seed") cfg.data.seed = to_u64(value, at);
      else unknown_key_fail(origin, line, section, key);
    } else if (section == "split") {
      if (key == "train") cfg.split.train = to_range(value, at);
      else if (key == "val") cfg.split.val = to_range(value, at);
      else if (key == "test") cfg.split.test = to_range(value, at);
      else unknown_key_fail(origin, line, section, key);
    } else if (section == "stepper") {
      if (key == "kind") {
        if (value != "persistence" && value != "linear" && value != "graph")
          parse_fail(origin, line, "unknown stepper kind '" + value + "'");
        cfg.stepper.kind = value;
      } else if (key == "width") cfg.stepper.width = static_cast<int>(to_int(value, at));
      else if (key == "proc_layers")
        cfg.stepper.proc_layers = static_cast<int>(to_int(value, at));
      else if (key == "levels") {
        cfg.stepper.levels.clear();
        for (const std::string& p : split(value, ','))
          cfg.stepper.levels.push_back(static_cast<int>(to_int(p, at)));
      } else if (key == "seed") cfg.stepper.seed = to_u64(value, at);
      else unknown_key_fail(origin, line, section, key);
    } else if (section == "train") {
      if (key == "lr") cfg.train.lr = to_double(value, at);
      else if (key == "epochs") cfg.train.epochs = static_cast<int>(to_int(value, at));
      else if (key == "warmup_epochs")
        cfg.train.warmup_epochs = static_cast<int>(to_int(value, at));
      else if (key == "batch_size")
        cfg.train.batch_size = static_cast<int>(to_int(value, at));
      else if (key == "rollout_steps")
        cfg.train.rollout_steps = static_cast<int>(to_int(value, at));
      else if (key == "beta1") cfg.train.beta1 = to_double(value, at);
      else if (key == "beta2") cfg.train.beta2 = to_double(value, at);
      else if (key == "weight_decay") cfg.train.weight_decay = to_double(value, at);
      else if (key == "adam_eps") cfg.train.adam_eps = to_double(value, at);
      else unknown_key_fail(origin, line, section, key);
    } else if (section == "ensemble") {
      if (key == "members") cfg.ensemble.members = static_cast<int>(to_int(value, at));
      else if (key == "horizon") cfg.ensemble.horizon = static_cast<int>(to_int(value, at));
      else if (key == "base_seed") cfg.ensemble.base_seed = to_u64(value, at);
      else unknown_key_fail(origin, line, section, key);
    } else if (section == "noise") {
      noise_kv.push_back({key, value, line});
    } else if (section == "output") {
      if (key == "directory") cfg.output.directory = value;
      else unknown_key_fail(origin, line, section, key);
    }
  }

  if (cfg.present.empty())
    throw Error(Errc::missing_section, origin + ": config has no sections");
  if (cfg.has("noise")) cfg.noise = build_noise(noise_kv, origin, noise_line);
  return cfg;
}

ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw Error(Errc::truncated_file, "cannot open config " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str(), path.filename().string());
}

namespace {

std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string noise_section_text(const NoiseConfig& noise) {
  std::ostringstream os;
  os << "[noise]\n";
  if (const auto* g = std::get_if<GaussianCfg>(&noise)) {
    os << "kind = gaussian\n";
    os << "mu = " << fmt_double(g->mu) << "\n";
    os << "sigma = " << fmt_double(g->sigma) << "\n";
  } else if (const auto* p = std::get_if<PerlinCfg>(&noise)) {
    os << "kind = perlin\n";
    os << "res = " << p->res[0] << "," << p->res[1] << "," << p->res[2] << "\n";
    os << "tileable = " << (p->tileable[0] ? "T" : "F") << ","
       << (p->tileable[1] ? "T" : "F") << "," << (p->tileable[2] ? "T" : "F") << "\n";
  } else {
    const auto& f = std::get<FractalPerlinCfg>(noise);
    os << "kind = fractal_perlin\n";
    os << "res = " << f.res[0] << "," << f.res[1] << "\n";
    os << "tileable = " << (f.tileable[0] ? "T" : "F") << ","
       << (f.tileable[1] ? "T" : "F") << "\n";
    os << "octaves = " << f.octaves << "\n";
    os << "persistence = " << fmt_double(f.persistence) << "\n";
    os << "lacunarity = " << f.lacunarity << "\n";
    os << "alpha = " << fmt_double(f.alpha) << "\n";
  }
  return os.str();
}

std::string config_text(const ExperimentConfig& cfg) {
  std::ostringstream os;
  os << "[data]\n";
  if (!cfg.data.path.empty()) {
    os << "path = " << cfg.data.path << "\n";
  } else {
    os << "days = " << cfg.data.days << "\n";
    os << "grid = " << cfg.data.grid_lat << "x" << cfg.data.grid_lon << "\n";
    os << "seed = " << cfg.data.seed << "\n";
  }
  os << "\n[split]\n";
  os << "train = " << cfg.split.train.begin << ":" << cfg.split.train.end << "\n";
  os << "val = " << cfg.split.val.begin << ":" << cfg.split.val.end << "\n";
  os << "test = " << cfg.split.test.begin << ":" << cfg.split.test.end << "\n";
  os << "\n[stepper]\n";
  os << "kind = " << cfg.stepper.kind << "\n";
  if (cfg.stepper.kind == "graph") {
    os << "width = " << cfg.stepper.width << "\n";
    os << "proc_layers = " << cfg.stepper.proc_layers << "\n";
    os << "levels = ";
    for (std::size_t i = 0; i < cfg.stepper.levels.size(); ++i)
      os << (i ? "," : "") << cfg.stepper.levels[i];
    os << "\n";
    os << "seed = " << cfg.stepper.seed << "\n";
  }
  os << "\n[train]\n";
  os << "lr = " << fmt_double(cfg.train.lr) << "\n";
  os << "epochs = " << cfg.train.epochs << "\n";
  os << "warmup_epochs = " << cfg.train.warmup_epochs << "\n";
  os << "batch_size = " << cfg.train.batch_size << "\n";
  os << "rollout_steps = " << cfg.train.rollout_steps << "\n";
  os << "beta1 = " << fmt_double(cfg.train.beta1) << "\n";
  os << "beta2 = " << fmt_double(cfg.train.beta2) << "\n";
  os << "weight_decay = " << fmt_double(cfg.train.weight_decay) << "\n";
  os << "adam_eps = " << fmt_double(cfg.train.adam_eps) << "\n";
  os << "\n[ensemble]\n";
  os << "members = " << cfg.ensemble.members << "\n";
  os << "horizon = " << cfg.ensemble.horizon << "\n";
  os << "base_seed = " << cfg.ensemble.base_seed << "\n";
  os << "\n" << noise_section_text(cfg.noise);
  os << "\n[output]\n";
  os << "directory = " << cfg.output.directory << "\n";
  return os.str();
}

}  // namespace ecast
