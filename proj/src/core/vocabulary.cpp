#include "afford/core/vocabulary.hpp"

#include <string>

namespace afford {

std::optional<std::size_t> find_affordance(std::string_view name) {
  for (std::size_t i = 0; i < kNumAffordances; ++i) {
    if (kAffordanceNames[i] == name) return i;
  }
  if (name == "read/watch") return index_of(Affordance::kObserve);
  if (name == "tip/push") return index_of(Affordance::kTipPush);

  // pinch_pull, place_on, hook_pull, tip_push
  std::string dashed(name);
  bool changed = false;
  for (char& c : dashed) {
    if (c == '_') {
      c = '-';
      changed = true;
    }
  }
  if (changed) return find_affordance(dashed);
  return std::nullopt;
}

}  // namespace afford
