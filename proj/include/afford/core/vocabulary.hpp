#ifndef AFFORD_CORE_VOCABULARY_HPP_
#define AFFORD_CORE_VOCABULARY_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace afford {

inline constexpr std::size_t kNumAffordances = 15;

// Channel index == position in this list. Never reorder.
inline constexpr std::array<std::string_view, kNumAffordances> kAffordanceNames = {
    "obstruct", "pinch-pull", "break",   "sit",     "grasp",
    "illumination", "support", "place-on", "hook-pull", "tip-push",
    "warmth",   "observe",    "dry",     "roll",    "walk"};

enum class Affordance : std::size_t {
  kObstruct = 0,
  kPinchPull,
  kBreak,
  kSit,
  kGrasp,
  kIllumination,
  kSupport,
  kPlaceOn,
  kHookPull,
  kTipPush,
  kWarmth,
  kObserve,
  kDry,
  kRoll,
  kWalk,
};

constexpr std::size_t index_of(Affordance a) { return static_cast<std::size_t>(a); }

inline std::string_view affordance_name(std::size_t index) { return kAffordanceNames.at(index); }

// Canonical names plus alternate spellings ("read/watch",
// "tip/push", underscores instead of dashes). Case-sensitive.
std::optional<std::size_t> find_affordance(std::string_view name);

}  // namespace afford

#endif  // AFFORD_CORE_VOCABULARY_HPP_
