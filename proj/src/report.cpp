#include "disprobe/report.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

#include "disprobe/errors.hpp"
#include "disprobe/metrics.hpp"

namespace disprobe {

using nlohmann::json;

namespace {

struct Row {
  std::string model, dataset, threat, corruption_kind;
  int severity = 0;
  double mean_epe = 0.0;
  int n_samples = 0;
  uint64_t seed = 0;
  std::string version;
};

std::string format_double(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

void append_rows(std::vector<Row>& rows, const EvalRecord& r) {
  const std::string threat = r.threat.describe();
  auto push = [&](const std::string& kind, int severity, double mean,
                  int n_samples) {
    rows.push_back({r.model_name, r.dataset_name, threat, kind, severity, mean,
                    n_samples, r.seed, r.version});
  };
  switch (r.threat.variant) {
    case ThreatVariant::None: {
      const MetricSummary& s = r.summaries.at("clean");
      push("clean", 0, s.mean_epe, s.n_samples);
      break;
    }
    case ThreatVariant::Attack: {
      const MetricSummary& clean = r.summaries.at("clean");
      push("clean", 0, clean.mean_epe, clean.n_samples);
      const MetricSummary& adv = r.summaries.at("adversarial");
      push("adversarial", 0, adv.mean_epe, adv.n_samples);
      break;
    }
    case ThreatVariant::CommonCorruption2D: {
      int n_samples = 0;
      for (const auto& [kind, s] : r.summaries) {
        push(kind, r.threat.severity, s.mean_epe, s.n_samples);
        n_samples = s.n_samples;
      }
      push("mc_epe", r.threat.severity, r.mc_epe, n_samples);
      break;
    }
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write report '" + path + "'");
  out << text;
  if (!out) throw IoError("failed writing report '" + path + "'");
}

// headline per-sample EPEs of a record: the clean run for None, the
// adversarial run for Attack, and the per-sample mean across the 15 kinds
// for CommonCorruption2D
std::map<std::string, double> headline_per_sample(const EvalRecord& r) {
  std::map<std::string, double> out;
  if (r.threat.variant == ThreatVariant::CommonCorruption2D) {
    std::map<std::string, int> counts;
    for (const auto& [kind, s] : r.summaries)
      for (const SampleEpe& e : s.per_sample) {
        out[e.id] += e.epe;
        ++counts[e.id];
      }
    for (auto& [id, sum] : out) sum /= counts.at(id);
    return out;
  }
  const std::string key =
      r.threat.variant == ThreatVariant::Attack ? "adversarial" : "clean";
  for (const SampleEpe& e : r.summaries.at(key).per_sample) out[e.id] = e.epe;
  return out;
}

}  // namespace

std::string csv_report(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw MetricError("csv_report: no records");
  std::vector<Row> rows;
  for (const EvalRecord& r : records) append_rows(rows, r);
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.model != b.model) return a.model < b.model;
    if (a.corruption_kind != b.corruption_kind)
      return a.corruption_kind < b.corruption_kind;
    return a.severity < b.severity;
  });

  std::ostringstream out;
  out << "model,dataset,threat,corruption_kind,severity,mean_epe,n_samples,"
         "seed,version\n";
  for (const Row& r : rows)
    out << r.model << ',' << r.dataset << ',' << r.threat << ','
        << r.corruption_kind << ',' << r.severity << ','
        << format_double(r.mean_epe) << ',' << r.n_samples << ',' << r.seed
        << ',' << r.version << '\n';
  return out.str();
}

void emit_csv_report(const std::vector<EvalRecord>& records,
                     const std::string& path) {
  write_file(path, csv_report(records));
}

std::string json_report(const std::vector<EvalRecord>& records) {
  if (records.empty()) throw MetricError("json_report: no records");
  json arr = json::array();
  for (const EvalRecord& r : records) arr.push_back(json::parse(record_to_json(r)));
  return arr.dump(2);
}

void emit_json_report(const std::vector<EvalRecord>& records,
                      const std::string& path) {
  write_file(path, json_report(records));
}

std::vector<EvalRecord> parse_json_report(const std::string& text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("bad JSON report: ") + e.what());
  }
  if (!arr.is_array()) throw FormatError("JSON report must be an array");
  std::vector<EvalRecord> records;
  for (const json& j : arr) records.push_back(record_from_json(j.dump()));
  return records;
}

CorrelationResult correlate_records(const EvalRecord& a, const EvalRecord& b) {
  const auto xs = headline_per_sample(a);
  const auto ys = headline_per_sample(b);
  CorrelationResult result;
  std::vector<double> x, y;
  for (const auto& [id, ex] : xs) {
    auto it = ys.find(id);
    if (it == ys.end()) continue;
    result.points.push_back({id, ex, it->second});
    x.push_back(ex);
    y.push_back(it->second);
  }
  if (result.points.size() < 2)
    throw MetricError("correlate_records: fewer than 2 shared samples");
  result.r = pearson(x, y);
  return result;
}

std::string scatter_csv(const CorrelationResult& result) {
  std::ostringstream out;
  out << "id,epe_a,epe_b\n";
  for (const ScatterPoint& p : result.points)
    out << p.id << ',' << format_double(p.x) << ',' << format_double(p.y)
        << '\n';
  out << "# pearson_r," << format_double(result.r) << '\n';
  return out.str();
}

void emit_scatter_csv(const CorrelationResult& result,
                      const std::string& path) {
  write_file(path, scatter_csv(result));
}

}  // namespace disprobe
