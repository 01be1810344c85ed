#include "disprobe/threat.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "disprobe/errors.hpp"
#include "disprobe/hash.hpp"

namespace disprobe {

std::string ThreatSpec::describe() const {
  switch (variant) {
    case ThreatVariant::None: return "none";
    case ThreatVariant::Attack: return to_string(attack.threat_model);
    case ThreatVariant::CommonCorruption2D: return "2DCommonCorruption";
  }
  throw ConfigError("invalid threat variant");
}

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_number(const std::string& key, const std::string& value) {
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    throw ConfigError("threat config: bad numeric value for '" + key + "'");
  }
  if (pos != value.size())
    throw ConfigError("threat config: bad numeric value for '" + key + "'");
  return v;
}

long parse_integer(const std::string& key, const std::string& value) {
  const double v = parse_number(key, value);
  if (v != std::floor(v))
    throw ConfigError("threat config: '" + key + "' must be an integer");
  return static_cast<long>(v);
}

class KeyMap {
 public:
  explicit KeyMap(std::map<std::string, std::string> kv) : kv_(std::move(kv)) {}

  const std::string& require(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end())
      throw ConfigError("threat config: missing required key '" + key + "'");
    used_.insert(it->first);
    return it->second;
  }
  const std::string* optional(const std::string& key) {
    auto it = kv_.find(key);
    if (it == kv_.end()) return nullptr;
    used_.insert(it->first);
    return &it->second;
  }
  void reject_unused() const {
    for (const auto& [k, v] : kv_)
      if (!used_.count(k))
        throw ConfigError("threat config: unknown key '" + k + "'");
  }

 private:
  std::map<std::string, std::string> kv_;
  std::set<std::string> used_;
};

}  // namespace

ThreatSpec parse_threat_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos)
      throw ConfigError("threat config: expected 'key: value', got '" + line +
                        "'");
    const std::string key = trim(line.substr(0, colon));
    const std::string value = trim(line.substr(colon + 1));
    if (key.empty() || value.empty())
      throw ConfigError("threat config: empty key or value in '" + line + "'");
    if (!kv.emplace(key, value).second)
      throw ConfigError("threat config: duplicate key '" + key + "'");
  }

  KeyMap keys(std::move(kv));
  ThreatSpec spec;
  spec.source_hash = sha256_hex(text);

  const std::string model = keys.require("threat_model");
  if (model == "2DCommonCorruption") {
    spec.variant = ThreatVariant::CommonCorruption2D;
    const long sev = parse_integer("severity", keys.require("severity"));
    if (sev < 1 || sev > 5)
      throw ConfigError("threat config: severity must be in 1..5, got " +
                        std::to_string(sev));
    spec.severity = static_cast<int>(sev);
    keys.reject_unused();
    return spec;
  }

  spec.variant = ThreatVariant::Attack;
  AttackConfig& a = spec.attack;
  a.threat_model = parse_threat_model(model);
  const long iters = parse_integer("iterations", keys.require("iterations"));
  if (iters < 1) throw ConfigError("threat config: iterations must be >= 1");
  a.iterations = static_cast<int>(iters);
  a.alpha = parse_number("alpha", keys.require("alpha"));
  a.lp_norm = parse_lp_norm(keys.require("lp_norm"));
  const double eps = parse_number("epsilon", keys.require("epsilon"));
  // the literature writes Linf budgets in code values ("epsilon=8" means
  // 8/255); fractional epsilons are taken as already normalized
  a.epsilon = (a.lp_norm == LpNorm::Linf && eps == std::floor(eps) &&
               eps >= 1.0)
                  ? eps / 255.0
                  : eps;
  if (const std::string* t = keys.optional("target")) {
    if (*t == "none" || *t == "false") a.target = TargetMode::None;
    else if (*t == "zero" || *t == "true") a.target = TargetMode::Zero;
    else throw ConfigError("threat config: target must be none/false or zero/true");
  }
  if (const std::string* e = keys.optional("eyes")) {
    if (*e == "both") a.eyes = AttackEyes::Both;
    else if (*e == "left") a.eyes = AttackEyes::LeftOnly;
    else if (*e == "right") a.eyes = AttackEyes::RightOnly;
    else throw ConfigError("threat config: eyes must be both, left, or right");
  }
  if (const std::string* s = keys.optional("seed"))
    a.seed = static_cast<uint64_t>(parse_integer("seed", *s));
  keys.reject_unused();
  a.validate();
  return spec;
}

ThreatSpec parse_threat_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open threat config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_threat_text(buf.str());
}

}  // namespace disprobe
