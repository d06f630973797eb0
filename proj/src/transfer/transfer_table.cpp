#include "afford/transfer/transfer_table.hpp"

#include <charconv>
#include <sstream>

#include "afford/core/errors.hpp"

namespace afford::transfer {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == '\t' || line[i] == ' ')) ++i;
    const std::size_t start = i;
    while (i < line.size() && line[i] != '\t' && line[i] != ' ') ++i;
    if (i > start) fields.push_back(line.substr(start, i - start));
  }
  return fields;
}

std::vector<std::string_view> split_path(std::string_view path) {
  std::vector<std::string_view> segments;
  std::size_t start = 0;
  while (true) {
    const std::size_t slash = path.find('/', start);
    segments.push_back(path.substr(start, slash == std::string_view::npos ? std::string_view::npos : slash - start));
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return segments;
}

std::string join(const std::vector<std::string_view>& segments, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < segments.size(); ++i) {
    if (i > from) out += '/';
    out += segments[i];
  }
  return out;
}

std::string format_presence(double v) {
  if (v == 0.0) return "0";
  if (v == 1.0) return "1";
  return "0.5";
}

}  // namespace

bool valid_presence(double v) { return v == 0.0 || v == 0.5 || v == 1.0; }

bool valid_pattern(std::string_view pattern) {
  if (pattern.empty()) return false;
  const auto segments = split_path(pattern);
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto seg = segments[i];
    if (seg.empty()) return false;
    if (seg.find_first_of(" \t\r\n") != std::string_view::npos) return false;
    if (seg.find('*') != std::string_view::npos && (i != 0 || seg != kWildcard)) return false;
  }
  return true;
}

TransferTable::TransferTable(std::vector<TransferEntry> entries) : entries_(std::move(entries)) {
  if (entries_.size() > kMaxEntries) {
    throw ArgumentError("transfer table has " + std::to_string(entries_.size()) + " entries, limit is " +
                        std::to_string(kMaxEntries));
  }
  by_pattern_.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (!valid_pattern(e.pattern)) throw ArgumentError("invalid pattern '" + e.pattern + "'");
    for (double v : e.vector) {
      if (!valid_presence(v)) {
        throw ArgumentError("pattern '" + e.pattern + "': value " + std::to_string(v) + " not in {0, 0.5, 1}");
      }
    }
    if (!by_pattern_.emplace(e.pattern, i).second) throw ArgumentError("duplicate pattern '" + e.pattern + "'");
  }
}

const AffordanceVector* TransferTable::find(std::string_view pattern) const {
  const auto it = by_pattern_.find(std::string(pattern));
  return it == by_pattern_.end() ? nullptr : &entries_[it->second].vector;
}

TransferTable parse_table(std::string_view text) {
  std::array<std::size_t, kNumAffordances> column_to_channel{};
  bool have_header = false;
  std::vector<TransferEntry> entries;
  std::unordered_map<std::string, std::size_t> seen;

  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.remove_prefix(3);

    const auto fields = split_fields(line);
    if (fields.empty() || fields.front().starts_with('#')) {
      if (eol == text.size()) break;
      continue;
    }

    if (!have_header) {
      if (fields.front() != "pattern") throw ParseError("header must start with 'pattern'", line_no);
      std::array<bool, kNumAffordances> used{};
      for (std::size_t c = 1; c < fields.size(); ++c) {
        const auto name = fields[c];
        const auto channel = find_affordance(name);
        if (!channel) throw ParseError("unknown affordance column '" + std::string(name) + "'", line_no);
        if (used[*channel]) throw ParseError("duplicate affordance column '" + std::string(name) + "'", line_no);
        used[*channel] = true;
        column_to_channel[c - 1] = *channel;
      }
      if (fields.size() != kNumAffordances + 1) {
        throw ParseError("header needs " + std::to_string(kNumAffordances) + " affordance columns, got " +
                             std::to_string(fields.size() - 1),
                         line_no);
      }
      have_header = true;
    } else {
      if (fields.size() != kNumAffordances + 1) {
        throw ParseError("expected pattern and " + std::to_string(kNumAffordances) + " values, got " +
                             std::to_string(fields.size()) + " fields",
                         line_no);
      }
      TransferEntry entry;
      entry.pattern = std::string(fields[0]);
      if (!valid_pattern(entry.pattern)) throw ParseError("invalid pattern '" + entry.pattern + "'", line_no);
      for (std::size_t c = 0; c < kNumAffordances; ++c) {
        const auto cell = fields[c + 1];
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc{} || ptr != cell.data() + cell.size() || !valid_presence(v)) {
          throw ParseError("value '" + std::string(cell) + "' for " + std::string(kAffordanceNames[column_to_channel[c]]) +
                               " not in {0, 0.5, 1}",
                           line_no);
        }
        entry.vector[column_to_channel[c]] = v;
      }
      if (const auto it = seen.find(entry.pattern); it != seen.end()) {
        throw ParseError("duplicate pattern '" + entry.pattern + "' (first on line " + std::to_string(it->second) + ")",
                         line_no);
      }
      seen.emplace(entry.pattern, line_no);
      if (entries.size() == kMaxEntries) {
        throw ParseError("more than " + std::to_string(kMaxEntries) + " entries", line_no);
      }
      entries.push_back(std::move(entry));
    }
    if (eol == text.size()) break;
  }
  if (!have_header) throw ParseError("missing header line", line_no);
  return TransferTable(std::move(entries));
}

std::string format_table(const TransferTable& table) {
  std::ostringstream out;
  out << "pattern";
  for (auto name : kAffordanceNames) out << '\t' << name;
  out << '\n';
  for (const auto& e : table.entries()) {
    out << e.pattern;
    for (double v : e.vector) out << '\t' << format_presence(v);
    out << '\n';
  }
  return out.str();
}

std::vector<std::string> candidate_patterns(std::string_view path) {
  std::vector<std::string> out;
  if (path.empty()) return out;
  const auto segments = split_path(path);
  for (std::size_t j = 0; j < segments.size(); ++j) {
    out.push_back(join(segments, j));
    if (j + 1 < segments.size()) out.push_back(std::string(kWildcard) + "/" + join(segments, j + 1));
  }
  out.emplace_back(kWildcard);
  return out;
}

std::optional<Resolution> resolve_entry(const TransferTable& table, std::string_view path) {
  for (auto& pattern : candidate_patterns(path)) {
    if (const auto* v = table.find(pattern)) return Resolution{std::move(pattern), *v};
  }
  return std::nullopt;
}

std::optional<AffordanceVector> resolve(const TransferTable& table, std::string_view path) {
  auto hit = resolve_entry(table, path);
  if (!hit) return std::nullopt;
  return hit->vector;
}

std::pair<AffordanceTensor, CoverageMask> resolve_map(const TransferTable& table, const PartLabelMap& labels) {
  const std::size_t h = labels.height();
  const std::size_t w = labels.width();
  AffordanceTensor tensor(h, w);
  CoverageMask mask(h, w);

  // Resolve each legend entry once.
  std::unordered_map<std::uint16_t, std::optional<AffordanceVector>> resolved;
  for (const auto& [index, path] : labels.legend()) resolved.emplace(index, resolve(table, path));

  const auto indices = labels.indices();
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] == 0) continue;
    const auto it = resolved.find(indices[i]);
    if (it == resolved.end() || !it->second) continue;
    mask.at(i) = 1;
    const auto& vec = *it->second;
    for (std::size_t a = 0; a < kNumAffordances; ++a) tensor.at(a, i) = vec[a];
  }
  return {std::move(tensor), std::move(mask)};
}

}  // namespace afford::transfer
