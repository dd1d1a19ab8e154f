#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ksd/partition.hpp"

namespace ksd {

// Symbol block (a_0, ..., a_t) packed with a_0 in the most significant
// position, so blocks sharing a prefix are contiguous once sorted.
__extension__ typedef unsigned __int128 BlockKey;

inline constexpr int kBlockKeyBits = 128;

// Bits per symbol for an alphabet; 0 for a single-cell partition.
int symbol_bits(std::size_t alphabet);
// Throws TableOverflow when blocks of depth + 1 symbols do not fit a key.
void check_table_budget(std::size_t alphabet, int depth);

inline BlockKey push_symbol(BlockKey key, Symbol s, int bits) {
  return bits == 0 ? key : (key << bits) | BlockKey(s);
}
inline BlockKey block_prefix(BlockKey key, int bits) { return bits == 0 ? key : key >> bits; }
inline Symbol block_last(BlockKey key, int bits) {
  return bits == 0 ? Symbol(0) : Symbol(key & ((BlockKey(1) << bits) - 1));
}
BlockKey pack_block(std::span<const Symbol> symbols, int bits);
std::vector<Symbol> unpack_block(BlockKey key, int length, int bits);

struct BlockCount {
  BlockKey key;
  std::uint64_t count;
};

// Plug-in block counts for t = 0..depth. Table t holds blocks of length t+1
// and marginalizes exactly onto table t-1.
class PathStats {
 public:
  // `rows` symbol paths stored row-major with `stride` symbols per row;
  // the first depth+1 symbols of each row are used.
  static PathStats from_paths(std::span<const Symbol> symbols, std::size_t rows, std::size_t stride,
                              std::size_t alphabet, int depth);
  // Sliding windows of length depth+1 over one orbit; every window is complete.
  static PathStats from_orbit(std::span<const Symbol> orbit, std::size_t alphabet, int depth);
  // Order-independent sum of counts, merged by block key.
  static PathStats merge(const PathStats& a, const PathStats& b);

  int depth() const { return static_cast<int>(tables_.size()) - 1; }
  std::size_t alphabet() const { return alphabet_; }
  int bits() const { return bits_; }
  std::uint64_t total() const { return total_; }

  std::span<const BlockCount> table(int t) const { return tables_.at(static_cast<std::size_t>(t)); }
  std::uint64_t count(int t, BlockKey key) const;
  double probability(int t, BlockKey key) const { return double(count(t, key)) / double(total_); }
  // p(a_t | a_0..a_{t-1}); for t = 0 this is p(a_0).
  double conditional(int t, BlockKey key) const;
  // p_t(a): fraction of paths with a_t = a.
  std::vector<double> marginal(int t) const;
  std::vector<std::uint64_t> marginal_counts(int t) const;

 private:
  static PathStats from_top_table(std::vector<BlockCount> top, std::size_t alphabet, int depth);
  std::size_t alphabet_ = 1;
  int bits_ = 0;
  std::uint64_t total_ = 0;
  std::vector<std::vector<BlockCount>> tables_;
};

// Sorts keys and run-length encodes them.
std::vector<BlockCount> count_keys(std::vector<BlockKey>& keys);

}  // namespace ksd
