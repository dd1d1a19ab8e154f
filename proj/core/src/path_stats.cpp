#include "ksd/path_stats.hpp"

#include <algorithm>
#include <bit>
#include <string>

#include "ksd/errors.hpp"

namespace ksd {

namespace {

bool key_less(const BlockCount& a, const BlockCount& b) { return a.key < b.key; }

std::vector<BlockCount> marginalize(const std::vector<BlockCount>& table, int bits) {
  std::vector<BlockCount> out;
  for (const auto& bc : table) {
    const BlockKey p = block_prefix(bc.key, bits);
    if (!out.empty() && out.back().key == p) out.back().count += bc.count;
    else out.push_back({p, bc.count});
  }
  return out;
}

}  // namespace

void check_table_budget(std::size_t alphabet, int depth) {
  if (depth < 0) throw ConfigError("depth must be nonnegative");
  if (alphabet == 0 || alphabet > 65536) throw ConfigError("alphabet size out of range");
  const long need = long(depth + 1) * symbol_bits(alphabet);
  if (need > kBlockKeyBits)
    throw TableOverflow("depth " + std::to_string(depth) + " with " + std::to_string(alphabet) +
                        " cells needs " + std::to_string(need) + " key bits (limit 128)");
}

int symbol_bits(std::size_t alphabet) {
  return alphabet <= 1 ? 0 : std::bit_width(alphabet - 1);
}

BlockKey pack_block(std::span<const Symbol> symbols, int bits) {
  BlockKey k = 0;
  for (Symbol s : symbols) k = push_symbol(k, s, bits);
  return k;
}

std::vector<Symbol> unpack_block(BlockKey key, int length, int bits) {
  std::vector<Symbol> out(static_cast<std::size_t>(length));
  for (int i = length - 1; i >= 0; --i) {
    out[std::size_t(i)] = block_last(key, bits);
    key = block_prefix(key, bits);
  }
  return out;
}

std::vector<BlockCount> count_keys(std::vector<BlockKey>& keys) {
  std::sort(keys.begin(), keys.end());
  std::vector<BlockCount> out;
  for (BlockKey k : keys) {
    if (!out.empty() && out.back().key == k) ++out.back().count;
    else out.push_back({k, 1});
  }
  return out;
}

PathStats PathStats::from_top_table(std::vector<BlockCount> top, std::size_t alphabet, int depth) {
  PathStats s;
  s.alphabet_ = alphabet;
  s.bits_ = symbol_bits(alphabet);
  s.tables_.resize(static_cast<std::size_t>(depth) + 1);
  s.tables_[std::size_t(depth)] = std::move(top);
  for (int t = depth; t > 0; --t)
    s.tables_[std::size_t(t - 1)] = marginalize(s.tables_[std::size_t(t)], s.bits_);
  for (const auto& bc : s.tables_[0]) s.total_ += bc.count;
  return s;
}

PathStats PathStats::from_paths(std::span<const Symbol> symbols, std::size_t rows, std::size_t stride,
                                std::size_t alphabet, int depth) {
  check_table_budget(alphabet, depth);
  if (stride < std::size_t(depth) + 1 || symbols.size() < rows * stride)
    throw ConfigError("path table too short for the requested depth");
  const int bits = symbol_bits(alphabet);
  std::vector<BlockKey> keys(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const Symbol* row = symbols.data() + r * stride;
    for (int t = 0; t <= depth; ++t)
      if (row[t] >= alphabet) throw ConfigError("symbol outside the alphabet");
    keys[r] = pack_block(std::span<const Symbol>(row, std::size_t(depth) + 1), bits);
  }
  return from_top_table(count_keys(keys), alphabet, depth);
}

PathStats PathStats::from_orbit(std::span<const Symbol> orbit, std::size_t alphabet, int depth) {
  check_table_budget(alphabet, depth);
  if (orbit.size() < std::size_t(depth) + 1) throw ConfigError("orbit shorter than one window");
  const int bits = symbol_bits(alphabet);
  const std::size_t windows = orbit.size() - std::size_t(depth);
  const BlockKey mask = (depth + 1) * bits >= kBlockKeyBits
                            ? ~BlockKey(0)
                            : (BlockKey(1) << ((depth + 1) * bits)) - 1;
  std::vector<BlockKey> keys(windows);
  BlockKey k = 0;
  for (int i = 0; i < depth; ++i) k = push_symbol(k, orbit[std::size_t(i)], bits);
  for (std::size_t w = 0; w < windows; ++w) {
    const Symbol s = orbit[w + std::size_t(depth)];
    if (s >= alphabet) throw ConfigError("symbol outside the alphabet");
    k = push_symbol(k, s, bits) & mask;
    keys[w] = k;
  }
  return from_top_table(count_keys(keys), alphabet, depth);
}

PathStats PathStats::merge(const PathStats& a, const PathStats& b) {
  if (a.alphabet_ != b.alphabet_ || a.depth() != b.depth())
    throw ConfigError("merging path statistics of different shape");
  const auto& ta = a.tables_.back();
  const auto& tb = b.tables_.back();
  std::vector<BlockCount> top;
  top.reserve(ta.size() + tb.size());
  std::size_t i = 0, j = 0;
  while (i < ta.size() || j < tb.size()) {
    if (j == tb.size() || (i < ta.size() && ta[i].key < tb[j].key)) top.push_back(ta[i++]);
    else if (i == ta.size() || tb[j].key < ta[i].key) top.push_back(tb[j++]);
    else {
      top.push_back({ta[i].key, ta[i].count + tb[j].count});
      ++i;
      ++j;
    }
  }
  return from_top_table(std::move(top), a.alphabet_, a.depth());
}

std::uint64_t PathStats::count(int t, BlockKey key) const {
  const auto& tab = tables_.at(static_cast<std::size_t>(t));
  auto it = std::lower_bound(tab.begin(), tab.end(), BlockCount{key, 0}, key_less);
  return it != tab.end() && it->key == key ? it->count : 0;
}

double PathStats::conditional(int t, BlockKey key) const {
  if (t == 0) return probability(0, key);
  const std::uint64_t prefix = count(t - 1, block_prefix(key, bits_));
  return prefix == 0 ? 0.0 : double(count(t, key)) / double(prefix);
}

std::vector<std::uint64_t> PathStats::marginal_counts(int t) const {
  std::vector<std::uint64_t> c(alphabet_, 0);
  for (const auto& bc : tables_.at(static_cast<std::size_t>(t))) c[block_last(bc.key, bits_)] += bc.count;
  return c;
}

std::vector<double> PathStats::marginal(int t) const {
  const auto c = marginal_counts(t);
  std::vector<double> p(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) p[i] = double(c[i]) / double(total_);
  return p;
}

}  // namespace ksd
