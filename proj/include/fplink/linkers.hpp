#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fplink/attr_sets.hpp"
#include "fplink/error.hpp"
#include "fplink/forest.hpp"
#include "fplink/record.hpp"
#include "fplink/store.hpp"
#include "fplink/textsim.hpp"

namespace fplink {

enum class Algorithm { panopticlick, rla, hla };

inline std::string_view to_string(Algorithm a) {
  switch (a) {
    case Algorithm::panopticlick: return "pano";
    case Algorithm::rla: return "rla";
    case Algorithm::hla: return "hla";
  }
  return "pano";
}

inline Algorithm algorithm_from(std::string_view s) {
  if (s == "pano" || s == "panopticlick") return Algorithm::panopticlick;
  if (s == "rla") return Algorithm::rla;
  if (s == "hla") return Algorithm::hla;
  throw Error("unknown algorithm: \"" + std::string(s) + "\"");
}

enum class Reason {
  exact_match,
  changeable_single_diff,
  ratio_accept,
  rule_candidate,
  forest_top1,
  forest_top2_agree,
  no_match_new_id,
  ambiguous_new_id,
};

inline std::string_view to_string(Reason r) {
  switch (r) {
    case Reason::exact_match: return "exact_match";
    case Reason::changeable_single_diff: return "changeable_single_diff";
    case Reason::ratio_accept: return "ratio_accept";
    case Reason::rule_candidate: return "rule_candidate";
    case Reason::forest_top1: return "forest_top1";
    case Reason::forest_top2_agree: return "forest_top2_agree";
    case Reason::no_match_new_id: return "no_match_new_id";
    case Reason::ambiguous_new_id: return "ambiguous_new_id";
  }
  return "no_match_new_id";
}

inline Reason reason_from(std::string_view s) {
  for (Reason r : {Reason::exact_match, Reason::changeable_single_diff, Reason::ratio_accept,
                   Reason::rule_candidate, Reason::forest_top1, Reason::forest_top2_agree,
                   Reason::no_match_new_id, Reason::ambiguous_new_id}) {
    if (to_string(r) == s) return r;
  }
  throw Error("unknown reason: \"" + std::string(s) + "\"");
}

struct LinkDecision {
  int chain_id = 0;
  bool is_new = false;  // true iff chain_id was freshly minted for this record
  Reason reason = Reason::no_match_new_id;
};

// The fingerprints already identified, each with its chain. Entries point
// into the caller's stream, which must outlive the state.
struct ChainState {
  struct Entry {
    const FingerprintRecord* rec = nullptr;
    int chain_id = 0;
  };
  std::vector<Entry> known;
  int next_id = 0;

  void commit(const FingerprintRecord& rec, const LinkDecision& d) {
    known.push_back({&rec, d.chain_id});
    next_id = std::max(next_id, d.chain_id + 1);
  }
};

struct LinkerConfig {
  double pano_threshold = 0.85;
  double rla_threshold = 0.75;
  double hla_lambda = 0.994;
  double hla_diff = 0.1;
};

namespace detail {

inline std::optional<int> single_common_chain(std::span<const ChainState::Entry* const> group) {
  if (group.empty()) return std::nullopt;
  int chain = group.front()->chain_id;
  for (const auto* e : group) {
    if (e->chain_id != chain) return std::nullopt;
  }
  return chain;
}

inline LinkDecision fresh(const ChainState& chains, Reason r) {
  return {chains.next_id, true, r};
}

}  // namespace detail

// Panopticlick: exact eight-attribute matches win; otherwise a single
// one-diff candidate is accepted when the diff is changeable or the changed
// attribute is string-similar above the threshold.
inline LinkDecision link_panopticlick(const FingerprintRecord& fu, const ChainState& chains,
                                      double threshold = 0.85) {
  std::vector<const ChainState::Entry*> exact;
  std::vector<std::pair<const ChainState::Entry*, Attr>> candidates;
  for (const auto& e : chains.known) {
    Attr changed{};
    std::size_t diffs = 0;
    for (Attr a : kPano8) {
      if (!attr_equal(fu, *e.rec, a)) {
        changed = a;
        if (++diffs > 1) break;
      }
    }
    if (diffs == 0) {
      exact.push_back(&e);
    } else if (diffs == 1) {
      candidates.push_back({&e, changed});
    }
  }
  if (!exact.empty()) {
    if (auto chain = detail::single_common_chain(exact)) {
      return {*chain, false, Reason::exact_match};
    }
    return detail::fresh(chains, Reason::ambiguous_new_id);
  }
  if (candidates.size() == 1) {
    const auto& [entry, attr] = candidates.front();
    if (std::find(kPanoChangeable.begin(), kPanoChangeable.end(), attr) !=
        kPanoChangeable.end()) {
      return {entry->chain_id, false, Reason::changeable_single_diff};
    }
    if (ratio(attr_value(fu, attr), attr_value(*entry->rec, attr)) > threshold) {
      return {entry->chain_id, false, Reason::ratio_accept};
    }
    return detail::fresh(chains, Reason::no_match_new_id);
  }
  if (candidates.size() > 1) return detail::fresh(chains, Reason::ambiguous_new_id);
  return detail::fresh(chains, Reason::no_match_new_id);
}

namespace detail {

inline bool rla_first_set_passes(const FingerprintRecord& fu, const FingerprintRecord& fk) {
  if (!attrs_equal(fu, fk, kRlaSet1)) return false;
  // An unknown fingerprint carrying an older browser version can never come
  // from the same evolving browser; unparseable versions skip the check.
  auto cmp = compare_versions(fu.browser_version, fk.browser_version);
  return !(cmp && *cmp < 0);
}

inline bool rla_all_sets_equal(const FingerprintRecord& fu, const FingerprintRecord& fk) {
  return attrs_equal(fu, fk, kRlaSet2) && attrs_equal(fu, fk, kRlaSet3);
}

}  // namespace detail

// Rule-based linker: first-set differences (or an older browser version)
// veto a pair; survivors are exact on all three sets or rule candidates with
// similar second-set strings and few third-set changes.
inline LinkDecision link_rla(const FingerprintRecord& fu, const ChainState& chains,
                             double sim_threshold = 0.75) {
  std::vector<const ChainState::Entry*> exact;
  std::vector<const ChainState::Entry*> candidates;
  for (const auto& e : chains.known) {
    if (!detail::rla_first_set_passes(fu, *e.rec)) continue;
    if (detail::rla_all_sets_equal(fu, *e.rec)) {
      exact.push_back(&e);
      continue;
    }
    bool similar = true;
    std::size_t set2_diffs = 0;
    for (Attr a : kRlaSet2) {
      if (attr_equal(fu, *e.rec, a)) continue;
      ++set2_diffs;
      if (!(ratio(attr_value(fu, a), attr_value(*e.rec, a)) > sim_threshold)) {
        similar = false;
        break;
      }
    }
    if (!similar) continue;
    const std::size_t set3_diffs = count_diffs(fu, *e.rec, kRlaSet3);
    if (set3_diffs <= 1 && set2_diffs + set3_diffs <= 2) candidates.push_back(&e);
  }
  if (!exact.empty()) {
    if (auto chain = detail::single_common_chain(exact)) {
      return {*chain, false, Reason::exact_match};
    }
    return detail::fresh(chains, Reason::ambiguous_new_id);
  }
  if (!candidates.empty()) {
    if (auto chain = detail::single_common_chain(candidates)) {
      return {*chain, false, Reason::rule_candidate};
    }
    return detail::fresh(chains, Reason::ambiguous_new_id);
  }
  return detail::fresh(chains, Reason::no_match_new_id);
}

namespace detail {

struct HlaCandidate {
  const ChainState::Entry* entry;
  double p;
};

// Gate-passing candidates with their forest scores, before the lambda cut.
inline std::vector<HlaCandidate> hla_scored_candidates(const FingerprintRecord& fu,
                                                       const ChainState& chains,
                                                       const ForestModel& model) {
  std::vector<HlaCandidate> scored;
  for (const auto& e : chains.known) {
    if (!attrs_equal(fu, *e.rec, kHlaSet1)) continue;
    if (rla_all_sets_equal(fu, *e.rec)) continue;  // exact set, handled elsewhere
    if (hla_vector_diff_count(fu, *e.rec) >= 5) continue;
    scored.push_back({&e, predict_proba(model, featurize_pair(fu, *e.rec))});
  }
  return scored;
}

}  // namespace detail

// Hybrid linker: full-attribute exact matches short-circuit; otherwise
// first-set-equal candidates with fewer than five vector differences are
// scored by the forest, and the top score groups decide.
inline LinkDecision link_hla(const FingerprintRecord& fu, const ChainState& chains,
                             const ForestModel& model, double lambda = 0.994,
                             double diff = 0.1) {
  if (!model.trained()) throw Error("model required");
  std::vector<const ChainState::Entry*> exact;
  for (const auto& e : chains.known) {
    if (attrs_equal(fu, *e.rec, kHlaSet1) && detail::rla_all_sets_equal(fu, *e.rec)) {
      exact.push_back(&e);
    }
  }
  if (!exact.empty()) {
    if (auto chain = detail::single_common_chain(exact)) {
      return {*chain, false, Reason::exact_match};
    }
    return detail::fresh(chains, Reason::ambiguous_new_id);
  }

  auto scored = detail::hla_scored_candidates(fu, chains, model);
  std::vector<detail::HlaCandidate> candidates;
  for (const auto& c : scored) {
    if (c.p > lambda) candidates.push_back(c);
  }
  if (candidates.empty()) return detail::fresh(chains, Reason::no_match_new_id);

  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.p > b.p; });
  const double p1 = candidates.front().p;
  double p2 = -std::numeric_limits<double>::infinity();
  std::vector<const ChainState::Entry*> top1, top12;
  for (const auto& c : candidates) {
    if (c.p == p1) {
      top1.push_back(c.entry);
      top12.push_back(c.entry);
    } else {
      if (p2 == -std::numeric_limits<double>::infinity()) p2 = c.p;
      if (c.p == p2) top12.push_back(c.entry);
    }
  }
  if (auto chain = detail::single_common_chain(top1); chain && p1 > p2 + diff) {
    return {*chain, false, Reason::forest_top1};
  }
  if (auto chain = detail::single_common_chain(top12)) {
    return {*chain, false, Reason::forest_top2_agree};
  }
  return detail::fresh(chains, Reason::ambiguous_new_id);
}

struct Assignment {
  std::uint64_t counter = 0;
  int chain_id = 0;
  Reason reason = Reason::no_match_new_id;

  bool operator==(const Assignment&) const = default;
};

using AssignmentLog = std::vector<Assignment>;

// Processes the stream in order; every record is decided against all
// previously processed records and then joins the known set.
inline AssignmentLog replay(Algorithm algo, std::span<const FingerprintRecord> stream,
                            const ForestModel* model = nullptr,
                            const LinkerConfig& cfg = {}) {
  if (algo == Algorithm::hla && (model == nullptr || !model->trained())) {
    throw Error("model required");
  }
  AssignmentLog log;
  log.reserve(stream.size());
  ChainState chains;
  chains.known.reserve(stream.size());
  for (const auto& rec : stream) {
    LinkDecision d;
    switch (algo) {
      case Algorithm::panopticlick:
        d = link_panopticlick(rec, chains, cfg.pano_threshold);
        break;
      case Algorithm::rla:
        d = link_rla(rec, chains, cfg.rla_threshold);
        break;
      case Algorithm::hla:
        d = link_hla(rec, chains, *model, cfg.hla_lambda, cfg.hla_diff);
        break;
    }
    chains.commit(rec, d);
    log.push_back({rec.counter, d.chain_id, d.reason});
  }
  return log;
}

}  // namespace fplink
