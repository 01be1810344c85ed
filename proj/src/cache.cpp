#include "disprobe/cache.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "disprobe/errors.hpp"
#include "disprobe/hash.hpp"

namespace disprobe {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string target_mode_name(TargetMode mode) {
  switch (mode) {
    case TargetMode::None: return "none";
    case TargetMode::Zero: return "zero";
    case TargetMode::Explicit: return "explicit";
  }
  throw ConfigError("invalid target mode");
}

TargetMode target_mode_from(const std::string& name) {
  if (name == "none") return TargetMode::None;
  if (name == "zero") return TargetMode::Zero;
  if (name == "explicit") return TargetMode::Explicit;
  throw CacheError("bad target mode '" + name + "'");
}

std::string eyes_name(AttackEyes eyes) {
  switch (eyes) {
    case AttackEyes::Both: return "both";
    case AttackEyes::LeftOnly: return "left";
    case AttackEyes::RightOnly: return "right";
  }
  throw ConfigError("invalid eyes flag");
}

AttackEyes eyes_from(const std::string& name) {
  if (name == "both") return AttackEyes::Both;
  if (name == "left") return AttackEyes::LeftOnly;
  if (name == "right") return AttackEyes::RightOnly;
  throw CacheError("bad eyes flag '" + name + "'");
}

json attack_to_json(const AttackConfig& a) {
  json j;
  j["threat_model"] = to_string(a.threat_model);
  j["iterations"] = a.iterations;
  j["alpha"] = a.alpha;
  j["epsilon"] = a.epsilon;
  j["lp_norm"] = to_string(a.lp_norm);
  j["target"] = target_mode_name(a.target);
  if (a.target == TargetMode::Explicit) {
    // explicit targets only arrive through the API; hash their content so
    // they participate in the fingerprint
    std::string blob;
    blob.reserve(a.explicit_target.values.size() * sizeof(double));
    blob.append(reinterpret_cast<const char*>(a.explicit_target.values.data()),
                a.explicit_target.values.size() * sizeof(double));
    blob.append(reinterpret_cast<const char*>(a.explicit_target.valid.data()),
                a.explicit_target.valid.size());
    j["target_hash"] = sha256_hex(blob);
  }
  j["eyes"] = eyes_name(a.eyes);
  j["seed"] = a.seed;
  return j;
}

AttackConfig attack_from_json(const json& j) {
  AttackConfig a;
  a.threat_model = parse_threat_model(j.at("threat_model").get<std::string>());
  a.iterations = j.at("iterations").get<int>();
  a.alpha = j.at("alpha").get<double>();
  a.epsilon = j.at("epsilon").get<double>();
  a.lp_norm = parse_lp_norm(j.at("lp_norm").get<std::string>());
  a.target = target_mode_from(j.at("target").get<std::string>());
  a.eyes = eyes_from(j.at("eyes").get<std::string>());
  a.seed = j.at("seed").get<uint64_t>();
  return a;
}

json threat_to_json(const ThreatSpec& t, bool with_source_hash) {
  json j;
  switch (t.variant) {
    case ThreatVariant::None:
      j["variant"] = "none";
      break;
    case ThreatVariant::Attack:
      j["variant"] = "attack";
      j["attack"] = attack_to_json(t.attack);
      break;
    case ThreatVariant::CommonCorruption2D:
      j["variant"] = "2DCommonCorruption";
      j["severity"] = t.severity;
      break;
  }
  if (with_source_hash) j["source_hash"] = t.source_hash;
  return j;
}

ThreatSpec threat_from_json(const json& j) {
  ThreatSpec t;
  const std::string variant = j.at("variant").get<std::string>();
  if (variant == "none") {
    t.variant = ThreatVariant::None;
  } else if (variant == "attack") {
    t.variant = ThreatVariant::Attack;
    t.attack = attack_from_json(j.at("attack"));
  } else if (variant == "2DCommonCorruption") {
    t.variant = ThreatVariant::CommonCorruption2D;
    t.severity = j.at("severity").get<int>();
  } else {
    throw CacheError("bad threat variant '" + variant + "'");
  }
  t.source_hash = j.value("source_hash", "");
  return t;
}

json summary_to_json(const MetricSummary& s) {
  json j;
  j["mean_epe"] = s.mean_epe;
  j["n_pixels"] = s.n_pixels;
  j["n_samples"] = s.n_samples;
  json per = json::array();
  for (const SampleEpe& e : s.per_sample)
    per.push_back({{"id", e.id}, {"epe", e.epe}, {"n_pixels", e.n_pixels}});
  j["per_sample"] = per;
  return j;
}

MetricSummary summary_from_json(const json& j) {
  MetricSummary s;
  s.mean_epe = j.at("mean_epe").get<double>();
  s.n_pixels = j.at("n_pixels").get<long>();
  s.n_samples = j.at("n_samples").get<int>();
  for (const json& e : j.at("per_sample"))
    s.per_sample.push_back({e.at("id").get<std::string>(),
                            e.at("epe").get<double>(),
                            e.at("n_pixels").get<long>()});
  return s;
}

}  // namespace

std::string request_fingerprint(const EvalRequest& request,
                                const std::string& params_hash) {
  json j;
  j["model_name"] = request.model_name;
  j["dataset"] = request.dataset;
  j["threat"] = threat_to_json(request.threat, /*with_source_hash=*/false);
  j["seed"] = request.seed;
  j["params_hash"] = params_hash;
  j["version"] = kToolkitVersion;
  return sha256_hex(j.dump());
}

std::string record_to_json(const EvalRecord& r) {
  json j;
  j["fingerprint"] = r.fingerprint;
  j["model_name"] = r.model_name;
  j["dataset"] = r.dataset;
  j["dataset_name"] = r.dataset_name;
  j["version"] = r.version;
  j["params_hash"] = r.params_hash;
  j["seed"] = r.seed;
  j["threat"] = threat_to_json(r.threat, /*with_source_hash=*/true);
  json sums;
  for (const auto& [key, summary] : r.summaries)
    sums[key] = summary_to_json(summary);
  j["summaries"] = sums;
  json stats = json::array();
  for (const AttackSampleStat& s : r.attack_samples)
    stats.push_back({{"id", s.id},
                     {"clean_epe", s.clean_epe},
                     {"adv_epe", s.adv_epe},
                     {"delta_linf", s.delta_linf},
                     {"delta_l2", s.delta_l2},
                     {"final_loss", s.final_loss}});
  j["attack_samples"] = stats;
  j["mc_epe"] = r.mc_epe;
  j["created_at"] = r.created_at;
  j["runtime_seconds"] = r.runtime_seconds;
  return j.dump(2);
}

EvalRecord record_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw CacheError(std::string("corrupt record: ") + e.what());
  }
  try {
    EvalRecord r;
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.model_name = j.at("model_name").get<std::string>();
    r.dataset = j.at("dataset").get<std::string>();
    r.dataset_name = j.at("dataset_name").get<std::string>();
    r.version = j.at("version").get<std::string>();
    r.params_hash = j.at("params_hash").get<std::string>();
    r.seed = j.at("seed").get<uint64_t>();
    r.threat = threat_from_json(j.at("threat"));
    for (const auto& [key, value] : j.at("summaries").items())
      r.summaries[key] = summary_from_json(value);
    for (const json& s : j.at("attack_samples"))
      r.attack_samples.push_back({s.at("id").get<std::string>(),
                                  s.at("clean_epe").get<double>(),
                                  s.at("adv_epe").get<double>(),
                                  s.at("delta_linf").get<double>(),
                                  s.at("delta_l2").get<double>(),
                                  s.at("final_loss").get<double>()});
    r.mc_epe = j.at("mc_epe").get<double>();
    r.created_at = j.at("created_at").get<std::string>();
    r.runtime_seconds = j.at("runtime_seconds").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw CacheError(std::string("corrupt record: ") + e.what());
  }
}

ResultCache::ResultCache(std::string dir) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create cache directory '" + dir_ + "'");
}

std::string ResultCache::path_for(const std::string& fingerprint) const {
  return (fs::path(dir_) / (fingerprint + ".json")).string();
}

std::optional<EvalRecord> ResultCache::lookup(
    const std::string& fingerprint) const {
  const std::string path = path_for(fingerprint);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return record_from_json(buf.str());
  } catch (const CacheError& e) {
    throw CacheError(std::string(e.what()) + " at '" + path + "'");
  }
}

void ResultCache::store(const EvalRecord& record) const {
  const std::string path = path_for(record.fingerprint);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write cache file '" + tmp + "'");
    out << record_to_json(record) << '\n';
    if (!out) throw IoError("failed writing cache file '" + tmp + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename cache file into place: " + path);
}

std::string ResultCache::resolve_dir(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("DISPROBE_CACHE_DIR"); env && *env)
    return env;
  return ".disprobe-cache";
}

}  // namespace disprobe
