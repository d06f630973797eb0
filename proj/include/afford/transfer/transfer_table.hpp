#ifndef AFFORD_TRANSFER_TRANSFER_TABLE_HPP_
#define AFFORD_TRANSFER_TRANSFER_TABLE_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "afford/core/types.hpp"
#include "afford/core/vocabulary.hpp"

namespace afford::transfer {

// Presence per affordance; each entry is 0 (absent), 0.5 (partial) or 1.
using AffordanceVector = std::array<double, kNumAffordances>;

inline constexpr std::size_t kMaxEntries = 500;
inline constexpr std::string_view kWildcard = "*";

struct TransferEntry {
  std::string pattern;
  AffordanceVector vector{};
};

class TransferTable {
 public:
  TransferTable() = default;
  // Throws ArgumentError on an invalid pattern, a value outside {0,0.5,1},
  // a duplicate pattern or more than kMaxEntries entries.
  explicit TransferTable(std::vector<TransferEntry> entries);

  const std::vector<TransferEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const AffordanceVector* find(std::string_view pattern) const;

 private:
  std::vector<TransferEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_pattern_;
};

// Tab- or space-separated; see README for the layout.
TransferTable parse_table(std::string_view text);
std::string format_table(const TransferTable& table);

// Patterns tried for `path`, most specific first. For s1/s2/.../sn:
//   s1/.../sn, */s2/.../sn, s2/.../sn, */s3/.../sn, ..., */sn, sn, *
std::vector<std::string> candidate_patterns(std::string_view path);

struct Resolution {
  std::string pattern;
  AffordanceVector vector{};
};

std::optional<Resolution> resolve_entry(const TransferTable& table, std::string_view path);
std::optional<AffordanceVector> resolve(const TransferTable& table, std::string_view path);

// Unlabeled pixels and unresolved paths get mask 0 and all-zero channels.
std::pair<AffordanceTensor, CoverageMask> resolve_map(const TransferTable& table, const PartLabelMap& labels);

bool valid_pattern(std::string_view pattern);
bool valid_presence(double v);

}  // namespace afford::transfer

#endif  // AFFORD_TRANSFER_TRANSFER_TABLE_HPP_
