#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "disprobe/attacks.hpp"
#include "disprobe/cache.hpp"
#include "disprobe/corruption.hpp"
#include "disprobe/errors.hpp"
#include "disprobe/evaluate.hpp"
#include "disprobe/manifest.hpp"
#include "disprobe/metrics.hpp"
#include "disprobe/report.hpp"
#include "disprobe/rng.hpp"
#include "disprobe/threat.hpp"

namespace fs = std::filesystem;
using namespace disprobe;

namespace {

constexpr const char* kDefaultParams = "data/corruption_params.conf";

std::string sanitize_id(std::string id) {
  for (char& c : id)
    if (c == '/' || c == '\\' || c == ' ') c = '_';
  return id;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
}

double headline_epe(const EvalRecord& record) {
  switch (record.threat.variant) {
    case ThreatVariant::None: return record.summaries.at("clean").mean_epe;
    case ThreatVariant::Attack:
      return record.summaries.at("adversarial").mean_epe;
    case ThreatVariant::CommonCorruption2D: return record.mc_epe;
  }
  throw ConfigError("invalid threat variant");
}

struct EvaluateArgs {
  std::string model, dataset, threat_config, out, params = kDefaultParams;
  std::string cache_dir;
  bool retrieve_existing = false;
  uint64_t seed = 0;
  int jobs = 1;
};

int cmd_evaluate(const EvaluateArgs& args) {
  EvalRequest request;
  request.model_name = args.model;
  request.dataset = args.dataset;
  if (!args.threat_config.empty())
    request.threat = parse_threat_config(args.threat_config);
  request.retrieve_existing = args.retrieve_existing;
  request.seed = args.seed;

  EvalOptions options;
  options.cache_dir = args.cache_dir;
  options.params_path = args.params;
  options.jobs = args.jobs;

  const EvalRecord record = evaluate(request, options);
  if (!args.out.empty()) {
    emit_csv_report({record}, args.out + ".csv");
    emit_json_report({record}, args.out + ".json");
  }
  std::cout << "fingerprint=" << record.fingerprint << '\n';
  std::cout << "mean_epe=" << headline_epe(record) << '\n';
  return 0;
}

struct CorruptArgs {
  std::string input, kind, out, params = kDefaultParams;
  int severity = 1;
  uint64_t seed = 0;
};

int cmd_corrupt(const CorruptArgs& args) {
  const ImageBuffer image = load_image(args.input);
  const CorruptionSpec spec{parse_corruption_kind(args.kind), args.severity,
                            args.seed};
  spec.validate();
  const CorruptionParams params = CorruptionParams::load(args.params);
  save_image(args.out, apply_corruption(image, spec, params));
  std::cout << "out=" << args.out << '\n';
  return 0;
}

struct AttackArgs {
  std::string model, dataset, threat_config, out, dump_adversarial;
  uint64_t seed = 0;
};

int cmd_attack(const AttackArgs& args) {
  const ThreatSpec threat = parse_threat_config(args.threat_config);
  if (threat.variant != ThreatVariant::Attack)
    throw ConfigError("attack subcommand needs an attack-variant config");

  const StereoModel model(ModelConfig::preset(args.model));
  const DatasetManifest manifest = load_manifest(args.dataset);

  std::ostringstream csv;
  csv << "id,clean_epe,adv_epe,delta_linf,delta_l2,final_loss\n";
  csv.precision(17);
  std::vector<double> adv_epes;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const StereoSample sample = load_sample(manifest, i);
    AttackConfig config = threat.attack;
    config.seed =
        RngStream(args.seed ^ config.seed).substream(sample.id).next_u64();
    const AttackResult result = run_attack(model, sample, config);

    const double clean_epe = epe(model.predict(sample), sample.gt);
    const double adv_epe = epe(model.predict(result.adversarial), sample.gt);
    adv_epes.push_back(adv_epe);
    const IterStat& last = result.trace.back();
    csv << sample.id << ',' << clean_epe << ',' << adv_epe << ','
        << std::max(last.linf_left, last.linf_right) << ','
        << std::hypot(last.l2_left, last.l2_right) << ',' << result.final_loss
        << '\n';

    if (!args.dump_adversarial.empty()) {
      fs::create_directories(args.dump_adversarial);
      const std::string stem =
          (fs::path(args.dump_adversarial) / sanitize_id(sample.id)).string();
      save_image(stem + "_left.png", result.adversarial.left);
      save_image(stem + "_right.png", result.adversarial.right);
    }
  }
  if (!args.out.empty()) write_text(args.out, csv.str());
  std::cout << "n_samples=" << adv_epes.size() << '\n';
  std::cout << "mean_epe=" << dataset_mean_epe(adv_epes) << '\n';
  return 0;
}

struct ReportArgs {
  std::vector<std::string> records;
  std::string csv_out, json_out;
  std::vector<std::string> scatter;  // two record files
  std::string scatter_out;
};

int cmd_report(const ReportArgs& args) {
  if (!args.records.empty()) {
    std::vector<EvalRecord> records;
    for (const std::string& path : args.records)
      records.push_back(record_from_json(read_text(path)));
    if (!args.csv_out.empty()) emit_csv_report(records, args.csv_out);
    if (!args.json_out.empty()) emit_json_report(records, args.json_out);
    std::cout << "n_records=" << records.size() << '\n';
  }
  if (!args.scatter.empty()) {
    if (args.scatter.size() != 2)
      throw ConfigError("--scatter needs exactly two record files");
    const EvalRecord a = record_from_json(read_text(args.scatter[0]));
    const EvalRecord b = record_from_json(read_text(args.scatter[1]));
    const CorrelationResult result = correlate_records(a, b);
    if (!args.scatter_out.empty()) emit_scatter_csv(result, args.scatter_out);
    std::cout << "pearson_r=" << result.r << '\n';
  }
  if (args.records.empty() && args.scatter.empty())
    throw ConfigError("report: nothing to do (pass --records or --scatter)");
  return 0;
}

struct CacheArgs {
  std::string dir;
  bool list = false;
  std::string show;
  bool clear = false;
};

int cmd_cache(const CacheArgs& args) {
  const ResultCache cache(ResultCache::resolve_dir(args.dir));
  if (args.list) {
    size_t n = 0;
    for (const auto& entry : fs::directory_iterator(cache.dir())) {
      if (entry.path().extension() != ".json") continue;
      std::cout << "record=" << entry.path().stem().string() << '\n';
      ++n;
    }
    std::cout << "n_records=" << n << '\n';
  } else if (!args.show.empty()) {
    const auto record = cache.lookup(args.show);
    if (!record) throw IoError("no cached record '" + args.show + "'");
    std::cout << record_to_json(*record) << '\n';
  } else if (args.clear) {
    size_t n = 0;
    for (const auto& entry : fs::directory_iterator(cache.dir())) {
      if (entry.path().extension() != ".json") continue;
      fs::remove(entry.path());
      ++n;
    }
    std::cout << "n_removed=" << n << '\n';
  } else {
    std::cout << "cache_dir=" << cache.dir() << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"disparity-robustness benchmarking toolkit"};
  app.require_subcommand(1);

  EvaluateArgs ev;
  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "run a benchmark evaluation");
  evaluate_cmd->add_option("--model", ev.model, "model preset")->required();
  evaluate_cmd->add_option("--dataset", ev.dataset, "dataset manifest")
      ->required();
  evaluate_cmd->add_option("--threat-config", ev.threat_config,
                           "threat config file (omit for a clean run)");
  evaluate_cmd->add_flag("--retrieve-existing", ev.retrieve_existing,
                         "return the cached record when present");
  evaluate_cmd->add_option("--seed", ev.seed, "evaluation seed");
  evaluate_cmd->add_option("--out", ev.out, "report path prefix");
  evaluate_cmd->add_option("--params", ev.params,
                           "corruption parameter table");
  evaluate_cmd->add_option("--cache-dir", ev.cache_dir, "cache directory");
  evaluate_cmd->add_option("--jobs", ev.jobs, "worker threads");

  CorruptArgs co;
  CLI::App* corrupt_cmd =
      app.add_subcommand("corrupt", "corrupt a single image");
  corrupt_cmd->add_option("--input", co.input, "input image")->required();
  corrupt_cmd->add_option("--kind", co.kind, "corruption kind")->required();
  corrupt_cmd->add_option("--severity", co.severity, "severity 1..5")
      ->required();
  corrupt_cmd->add_option("--seed", co.seed, "corruption seed");
  corrupt_cmd->add_option("--out", co.out, "output image")->required();
  corrupt_cmd->add_option("--params", co.params, "corruption parameter table");

  AttackArgs at;
  CLI::App* attack_cmd =
      app.add_subcommand("attack", "attack a dataset and report per-sample EPE");
  attack_cmd->add_option("--model", at.model, "model preset")->required();
  attack_cmd->add_option("--dataset", at.dataset, "dataset manifest")
      ->required();
  attack_cmd->add_option("--threat-config", at.threat_config,
                         "attack-variant threat config")
      ->required();
  attack_cmd->add_option("--dump-adversarial", at.dump_adversarial,
                         "directory for adversarial image dumps");
  attack_cmd->add_option("--seed", at.seed, "evaluation seed");
  attack_cmd->add_option("--out", at.out, "per-sample CSV path");

  ReportArgs re;
  CLI::App* report_cmd =
      app.add_subcommand("report", "render stored records as CSV/JSON");
  report_cmd->add_option("--records", re.records, "record JSON files");
  report_cmd->add_option("--csv", re.csv_out, "CSV output path");
  report_cmd->add_option("--json", re.json_out, "JSON output path");
  report_cmd->add_option("--scatter", re.scatter,
                         "two record files for a per-sample scatter");
  report_cmd->add_option("--scatter-out", re.scatter_out,
                         "scatter CSV output path");

  CacheArgs ca;
  CLI::App* cache_cmd = app.add_subcommand("cache", "inspect the result cache");
  cache_cmd->add_option("--dir", ca.dir, "cache directory");
  cache_cmd->add_flag("--list", ca.list, "list cached fingerprints");
  cache_cmd->add_option("--show", ca.show, "print one record by fingerprint");
  cache_cmd->add_flag("--clear", ca.clear, "remove all cached records");

  try {
    app.parse(argc, argv);
    if (*evaluate_cmd) return cmd_evaluate(ev);
    if (*corrupt_cmd) return cmd_corrupt(co);
    if (*attack_cmd) return cmd_attack(at);
    if (*report_cmd) return cmd_report(re);
    if (*cache_cmd) return cmd_cache(ca);
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
