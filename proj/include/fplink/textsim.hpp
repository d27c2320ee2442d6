#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fplink/error.hpp"
#include "fplink/record.hpp"

namespace fplink {

namespace detail {

struct MatchBlock {
  std::size_t a_begin = 0;
  std::size_t b_begin = 0;
  std::size_t size = 0;
};

// Longest matching block between a[alo,ahi) and b[blo,bhi); ties broken
// leftmost in a, then leftmost in b. No junk heuristics.
inline MatchBlock find_longest_match(std::string_view a, std::string_view b, std::size_t alo,
                                     std::size_t ahi, std::size_t blo, std::size_t bhi,
                                     std::vector<std::size_t>& j2len,
                                     std::vector<std::size_t>& new_j2len) {
  MatchBlock best{alo, blo, 0};
  j2len.assign(bhi - blo + 1, 0);
  new_j2len.assign(bhi - blo + 1, 0);
  for (std::size_t i = alo; i < ahi; ++i) {
    for (std::size_t j = blo; j < bhi; ++j) {
      std::size_t k = 0;
      if (a[i] == b[j]) {
        k = (j > blo ? j2len[j - blo - 1] : 0) + 1;
        if (k > best.size) best = {i - k + 1, j - k + 1, k};
      }
      new_j2len[j - blo] = k;
    }
    j2len.swap(new_j2len);
  }
  return best;
}

inline std::size_t matched_total(std::string_view a, std::string_view b, std::size_t alo,
                                 std::size_t ahi, std::size_t blo, std::size_t bhi,
                                 std::vector<std::size_t>& j2len,
                                 std::vector<std::size_t>& new_j2len) {
  if (alo >= ahi || blo >= bhi) return 0;
  MatchBlock m = find_longest_match(a, b, alo, ahi, blo, bhi, j2len, new_j2len);
  if (m.size == 0) return 0;
  std::size_t total = m.size;
  total += matched_total(a, b, alo, m.a_begin, blo, m.b_begin, j2len, new_j2len);
  total += matched_total(a, b, m.a_begin + m.size, ahi, m.b_begin + m.size, bhi, j2len,
                         new_j2len);
  return total;
}

}  // namespace detail

// Gestalt pattern matching (Ratcliff-Obershelp): 2*M/T where M sums the
// matching blocks of the recursive longest-match decomposition and T is the
// combined length. Two empty strings are identical, hence 1.0. The raw
// decomposition depends on which side ties are broken over, so the arguments
// are put in lexicographic order first; that makes the score symmetric.
inline double ratio(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  if (b < a) std::swap(a, b);
  thread_local std::vector<std::size_t> j2len, new_j2len;
  std::size_t m = detail::matched_total(a, b, 0, a.size(), 0, b.size(), j2len, new_j2len);
  return 2.0 * static_cast<double>(m) / static_cast<double>(a.size() + b.size());
}

// Attributes (from `attrs`, order preserved) whose values differ byte-exactly.
struct DiffReport {
  std::vector<Attr> changed;
  std::size_t count = 0;

  std::vector<std::string> changed_names() const {
    std::vector<std::string> out;
    out.reserve(changed.size());
    for (Attr a : changed) out.emplace_back(attr_name(a));
    return out;
  }
};

inline DiffReport diff_features(const FingerprintRecord& fu, const FingerprintRecord& fk,
                                std::span<const Attr> attrs) {
  DiffReport rep;
  for (Attr a : attrs) {
    if (!attr_equal(fu, fk, a)) rep.changed.push_back(a);
  }
  rep.count = rep.changed.size();
  return rep;
}

inline DiffReport diff_features(const FingerprintRecord& fu, const FingerprintRecord& fk,
                                std::span<const std::string> attr_names) {
  std::vector<Attr> attrs;
  attrs.reserve(attr_names.size());
  for (const auto& name : attr_names) {
    auto a = attr_from_name(name);
    if (!a) throw Error("unknown attribute: \"" + name + "\"");
    attrs.push_back(*a);
  }
  return diff_features(fu, fk, attrs);
}

}  // namespace fplink
