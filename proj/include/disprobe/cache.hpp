#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "disprobe/metrics.hpp"
#include "disprobe/threat.hpp"

namespace disprobe {

inline constexpr const char* kToolkitVersion = "0.1.0";

struct EvalRequest {
  std::string model_name;  // preset key
  std::string dataset;     // manifest path
  ThreatSpec threat;
  bool retrieve_existing = true;
  uint64_t seed = 0;
};

// Per-sample attack bookkeeping carried in attack records.
struct AttackSampleStat {
  std::string id;
  double clean_epe = 0.0;
  double adv_epe = 0.0;
  double delta_linf = 0.0;
  double delta_l2 = 0.0;
  double final_loss = 0.0;
};

struct EvalRecord {
  std::string fingerprint;
  std::string model_name;
  std::string dataset;
  std::string dataset_name;
  std::string version;
  std::string params_hash;  // corruption parameter table hash
  uint64_t seed = 0;
  ThreatSpec threat;

  // keys: "clean" (None variant), "adversarial" + "clean" (Attack), or the
  // 15 corruption-kind names (CommonCorruption2D)
  std::map<std::string, MetricSummary> summaries;
  std::vector<AttackSampleStat> attack_samples;  // Attack variant only
  double mc_epe = 0.0;  // CommonCorruption2D variant only
  std::string created_at;
  double runtime_seconds = 0.0;
};

// canonical hash of every input that can change results
std::string request_fingerprint(const EvalRequest& request,
                                const std::string& params_hash);

std::string record_to_json(const EvalRecord& record);
EvalRecord record_from_json(const std::string& text);  // CacheError on corrupt

// One immutable file per record, named by fingerprint; writes go through a
// temp file + rename so readers never see partial records.
class ResultCache {
 public:
  explicit ResultCache(std::string dir);

  const std::string& dir() const { return dir_; }
  std::string path_for(const std::string& fingerprint) const;
  std::optional<EvalRecord> lookup(const std::string& fingerprint) const;
  void store(const EvalRecord& record) const;

  // cache directory resolution: explicit arg, else DISPROBE_CACHE_DIR, else
  // ".disprobe-cache"
  static std::string resolve_dir(const std::string& explicit_dir);

 private:
  std::string dir_;
};

}  // namespace disprobe
