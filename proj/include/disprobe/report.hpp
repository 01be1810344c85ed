#pragma once

#include <string>
#include <vector>

#include "disprobe/cache.hpp"

namespace disprobe {

// columns: model, dataset, threat, corruption_kind, severity, mean_epe,
// n_samples, seed, version; rows sorted by (model, corruption_kind,
// severity). Severity-0 rows carry clean results; corruption records add an
// "mc_epe" mean row.
std::string csv_report(const std::vector<EvalRecord>& records);
void emit_csv_report(const std::vector<EvalRecord>& records,
                     const std::string& path);

// lossless JSON array of records
std::string json_report(const std::vector<EvalRecord>& records);
void emit_json_report(const std::vector<EvalRecord>& records,
                      const std::string& path);
std::vector<EvalRecord> parse_json_report(const std::string& text);

// Per-sample scatter between two records' headline summaries, matched by
// sample id; quantifies whether performance under one threat predicts
// performance under another.
struct ScatterPoint {
  std::string id;
  double x = 0.0;
  double y = 0.0;
};

struct CorrelationResult {
  std::vector<ScatterPoint> points;
  double r = 0.0;  // Pearson correlation of (x, y)
};

CorrelationResult correlate_records(const EvalRecord& a, const EvalRecord& b);
std::string scatter_csv(const CorrelationResult& result);
void emit_scatter_csv(const CorrelationResult& result,
                      const std::string& path);

}  // namespace disprobe
