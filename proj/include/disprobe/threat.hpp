#pragma once

#include <string>

#include "disprobe/attacks.hpp"

namespace disprobe {

enum class ThreatVariant { None, Attack, CommonCorruption2D };

struct ThreatSpec {
  ThreatVariant variant = ThreatVariant::None;
  AttackConfig attack;      // Attack variant only
  int severity = 0;         // CommonCorruption2D variant only, 1..5
  std::string source_hash;  // sha256 of the config file text, "" for None

  // short label for reports: "none", the attack name, or
  // "2DCommonCorruption"
  std::string describe() const;
};

// key: value text, one scalar per line, '#' comments. Attack configs need
// threat_model/iterations/alpha/epsilon/lp_norm; corruption configs need
// threat_model=2DCommonCorruption and severity 1..5. Unknown keys are
// ConfigErrors. Integer-valued Linf epsilons are code values and are
// divided by 255.
ThreatSpec parse_threat_text(const std::string& text);
ThreatSpec parse_threat_config(const std::string& path);

}  // namespace disprobe
