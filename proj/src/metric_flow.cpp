#include "mflow/metric_flow.hpp"

namespace mflow {

StageTable::StageTable(const SchemeCoefficients& scheme)
    : steps(scheme.steps()), stages(scheme.stages()), rows(static_cast<std::size_t>(scheme.stages())) {
  for (int i = 1; i <= stages; ++i)
    for (const auto& [j, g] : scheme.row(i)) rows[static_cast<std::size_t>(i - 1)].emplace_back(j, to_double(g));
}

BootstrapPolicy parse_bootstrap(const std::string& text) {
  if (text == "stage3") return BootstrapPolicy::stage3();
  if (text == "substep_euler") return BootstrapPolicy::substep_euler();
  const std::string prefix = "substep_euler(";
  if (text.rfind(prefix, 0) == 0 && text.back() == ')') {
    const int r = std::stoi(text.substr(prefix.size(), text.size() - prefix.size() - 1));
    if (r < 1) throw std::invalid_argument("substep count must be positive");
    return BootstrapPolicy::substep_euler(r);
  }
  throw std::invalid_argument("unknown bootstrap policy '" + text + "'");
}

std::string to_string(const BootstrapPolicy& policy) {
  if (policy.kind == BootstrapPolicy::Kind::stage3) return "stage3";
  return "substep_euler(" + std::to_string(policy.substeps) + ")";
}

}  // namespace mflow
