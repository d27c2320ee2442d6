#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fplink/attr_sets.hpp"
#include "fplink/dataset.hpp"
#include "fplink/error.hpp"
#include "fplink/record.hpp"
#include "fplink/rng.hpp"
#include "fplink/store.hpp"

namespace fplink {

inline constexpr std::size_t kPairFeatureCount = 9;

// The nine-component comparison vector fed to the random forest: a change
// count, seven byte-equality flags and the created-date distance in days.
struct PairFeatureVector {
  double num_changes = 0;  // zero flags among the seven below
  double languages_eq = 1;
  double user_agent_eq = 1;
  double canvas_eq = 1;
  double time_diff_days = 0;
  double plugins_eq = 1;
  double fonts_eq = 1;
  double renderer_eq = 1;
  double resolution_eq = 1;

  std::array<double, kPairFeatureCount> to_array() const {
    return {num_changes, languages_eq, user_agent_eq, canvas_eq, time_diff_days,
            plugins_eq,  fonts_eq,     renderer_eq,   resolution_eq};
  }

  static constexpr std::array<const char*, kPairFeatureCount> component_names() {
    return {"num_changes", "languages_eq", "user_agent_eq",
            "canvas_eq",   "time_diff_days", "plugins_eq",
            "fonts_eq",    "renderer_eq",  "resolution_eq"};
  }

  bool operator==(const PairFeatureVector&) const = default;
};

inline PairFeatureVector featurize_pair(const FingerprintRecord& fu,
                                        const FingerprintRecord& fk) {
  PairFeatureVector v;
  v.languages_eq = fu.languages == fk.languages ? 1 : 0;
  v.user_agent_eq = fu.user_agent == fk.user_agent ? 1 : 0;
  v.canvas_eq = fu.canvas_hash == fk.canvas_hash ? 1 : 0;
  v.plugins_eq = fu.plugins == fk.plugins ? 1 : 0;
  v.fonts_eq = fu.fonts == fk.fonts ? 1 : 0;
  v.renderer_eq = fu.renderer == fk.renderer ? 1 : 0;
  v.resolution_eq = fu.resolution == fk.resolution ? 1 : 0;
  v.num_changes = 7 - (v.languages_eq + v.user_agent_eq + v.canvas_eq + v.plugins_eq +
                       v.fonts_eq + v.renderer_eq + v.resolution_eq);
  v.time_diff_days = std::abs(static_cast<double>(fu.created_date - fk.created_date)) /
                     static_cast<double>(kSecondsPerDay);
  return v;
}

// Differing attributes over the eight non-derived vector components (the
// seven flags plus the created-date comparison). The hybrid linker consults
// the forest only when this stays below five.
inline std::size_t hla_vector_diff_count(const FingerprintRecord& fu,
                                         const FingerprintRecord& fk) {
  PairFeatureVector v = featurize_pair(fu, fk);
  std::size_t n = static_cast<std::size_t>(v.num_changes);
  if (fu.created_date != fk.created_date) ++n;
  return n;
}

enum class PairLabel { same_user, different_user };

struct LabeledPair {
  PairFeatureVector vector;
  PairLabel label = PairLabel::different_user;
};

// Training pairs: positives are consecutive same-user records passing the
// first-set equality gate; negatives are uniformly sampled cross-user pairs
// passing the same gate. Sampling is bounded, so gate-hostile stores yield
// fewer (possibly zero) negatives plus a warning.
inline std::vector<LabeledPair> build_pairs(const FingerprintStore& train_split,
                                            std::size_t neg_per_pos, std::uint64_t seed,
                                            std::vector<std::string>* warnings = nullptr) {
  if (train_split.empty()) throw Error("insufficient training data");
  std::vector<LabeledPair> pairs;
  {
    auto groups = detail::group_by_user(train_split);
    for (const auto& [uid, idxs] : groups) {
      for (std::size_t k = 1; k < idxs.size(); ++k) {
        const auto& a = train_split.records[idxs[k - 1]];
        const auto& b = train_split.records[idxs[k]];
        if (!attrs_equal(a, b, kHlaSet1)) continue;
        pairs.push_back({featurize_pair(b, a), PairLabel::same_user});
      }
    }
  }
  if (pairs.empty()) throw Error("insufficient training data");
  const std::size_t n_pos = pairs.size();
  const std::size_t target = n_pos * neg_per_pos;
  Rng rng(seed);
  std::size_t attempts = 0;
  const std::size_t max_attempts = std::max<std::size_t>(1000, target * 200);
  std::size_t got = 0;
  const std::size_t n = train_split.size();
  while (got < target && attempts < max_attempts) {
    ++attempts;
    const auto& a = train_split.records[rng.bounded(n)];
    const auto& b = train_split.records[rng.bounded(n)];
    if (a.user_id == b.user_id) continue;
    if (!attrs_equal(a, b, kHlaSet1)) continue;
    pairs.push_back({featurize_pair(a, b), PairLabel::different_user});
    ++got;
  }
  if (got < target && warnings) {
    warnings->push_back("negative sampling exhausted: " + std::to_string(got) + "/" +
                        std::to_string(target) + " cross-user pairs pass the gate");
  }
  return pairs;
}

struct ForestHyperparams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;  // 0 = unlimited
  std::size_t min_leaf = 1;
  std::size_t features_per_split = 3;  // ceil(sqrt(9))
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // x[feature] <= threshold goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::uint32_t pos = 0;  // leaf class counts
  std::uint32_t neg = 0;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  double predict(const std::array<double, kPairFeatureCount>& x) const {
    std::int32_t i = 0;
    for (;;) {
      const TreeNode& n = nodes[static_cast<std::size_t>(i)];
      if (n.feature < 0) {
        return static_cast<double>(n.pos) / static_cast<double>(n.pos + n.neg);
      }
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
  }
};

struct ForestModel {
  ForestHyperparams hp;
  std::uint64_t seed = 0;
  std::string note;
  std::vector<DecisionTree> trees;

  bool trained() const { return !trees.empty(); }
};

namespace detail {

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;
};

inline double gini(std::size_t pos, std::size_t neg) {
  const double n = static_cast<double>(pos + neg);
  if (n == 0) return 0.0;
  const double p = static_cast<double>(pos) / n;
  const double q = static_cast<double>(neg) / n;
  return 1.0 - p * p - q * q;
}

struct TreeBuilder {
  const std::vector<std::array<double, kPairFeatureCount>>& xs;
  const std::vector<int>& ys;  // 1 = same_user
  const ForestHyperparams& hp;
  Rng& rng;
  DecisionTree& tree;

  std::int32_t build(std::vector<std::size_t>& idx, std::size_t lo, std::size_t hi,
                     std::size_t depth) {
    std::size_t pos = 0;
    for (std::size_t k = lo; k < hi; ++k) pos += static_cast<std::size_t>(ys[idx[k]]);
    const std::size_t n = hi - lo;
    const std::size_t neg = n - pos;

    auto make_leaf = [&]() {
      TreeNode leaf;
      leaf.pos = static_cast<std::uint32_t>(pos);
      leaf.neg = static_cast<std::uint32_t>(neg);
      tree.nodes.push_back(leaf);
      return static_cast<std::int32_t>(tree.nodes.size() - 1);
    };

    if (pos == 0 || neg == 0 || n < 2 * hp.min_leaf ||
        (hp.max_depth > 0 && depth >= hp.max_depth)) {
      return make_leaf();
    }

    // Random feature subset, examined in ascending order so ties resolve to
    // the lowest feature index, then the lowest threshold.
    std::array<std::size_t, kPairFeatureCount> feats;
    for (std::size_t i = 0; i < kPairFeatureCount; ++i) feats[i] = i;
    const std::size_t k_feats = std::min(hp.features_per_split, kPairFeatureCount);
    for (std::size_t i = 0; i < k_feats; ++i) {
      std::size_t j = i + static_cast<std::size_t>(rng.bounded(kPairFeatureCount - i));
      std::swap(feats[i], feats[j]);
    }
    std::sort(feats.begin(), feats.begin() + static_cast<std::ptrdiff_t>(k_feats));

    const double parent = gini(pos, neg);
    SplitChoice best;
    best.impurity = parent;
    std::vector<std::pair<double, int>> vals;
    vals.reserve(n);
    for (std::size_t fi = 0; fi < k_feats; ++fi) {
      const std::size_t f = feats[fi];
      vals.clear();
      for (std::size_t k = lo; k < hi; ++k) vals.push_back({xs[idx[k]][f], ys[idx[k]]});
      std::sort(vals.begin(), vals.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::size_t left_pos = 0;
      for (std::size_t k = 0; k + 1 < n; ++k) {
        left_pos += static_cast<std::size_t>(vals[k].second);
        if (vals[k].first == vals[k + 1].first) continue;
        const std::size_t n_left = k + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < hp.min_leaf || n_right < hp.min_leaf) continue;
        const std::size_t right_pos = pos - left_pos;
        const double w =
            (static_cast<double>(n_left) * gini(left_pos, n_left - left_pos) +
             static_cast<double>(n_right) * gini(right_pos, n_right - right_pos)) /
            static_cast<double>(n);
        if (w + 1e-12 < best.impurity) {
          best.feature = static_cast<int>(f);
          best.threshold = (vals[k].first + vals[k + 1].first) / 2.0;
          best.impurity = w;
        }
      }
    }
    if (best.feature < 0) return make_leaf();

    auto mid = std::stable_partition(
        idx.begin() + static_cast<std::ptrdiff_t>(lo),
        idx.begin() + static_cast<std::ptrdiff_t>(hi), [&](std::size_t i) {
          return xs[i][static_cast<std::size_t>(best.feature)] <= best.threshold;
        });
    const std::size_t cut = static_cast<std::size_t>(mid - idx.begin());

    TreeNode node;
    node.feature = best.feature;
    node.threshold = best.threshold;
    tree.nodes.push_back(node);
    const std::int32_t self = static_cast<std::int32_t>(tree.nodes.size() - 1);
    const std::int32_t l = build(idx, lo, cut, depth + 1);
    const std::int32_t r = build(idx, cut, hi, depth + 1);
    tree.nodes[static_cast<std::size_t>(self)].left = l;
    tree.nodes[static_cast<std::size_t>(self)].right = r;
    return self;
  }
};

}  // namespace detail

// Trains n_trees on bootstrap resamples; splits minimize Gini impurity over a
// random feature subset. Per-tree generators derive from the master seed, so
// a parallel implementation would reproduce the serial result.
inline ForestModel train(const std::vector<LabeledPair>& pairs, const ForestHyperparams& hp,
                         std::uint64_t seed) {
  if (hp.n_trees < 1) throw Error("n_trees must be >= 1");
  if (hp.min_leaf < 1) throw Error("min_leaf must be >= 1");
  if (hp.features_per_split < 1) throw Error("features_per_split must be >= 1");
  bool any_pos = false, any_neg = false;
  for (const auto& p : pairs) {
    (p.label == PairLabel::same_user ? any_pos : any_neg) = true;
  }
  if (!any_pos || !any_neg) throw Error("training pairs must contain both labels");

  std::vector<std::array<double, kPairFeatureCount>> xs;
  std::vector<int> ys;
  xs.reserve(pairs.size());
  ys.reserve(pairs.size());
  for (const auto& p : pairs) {
    xs.push_back(p.vector.to_array());
    ys.push_back(p.label == PairLabel::same_user ? 1 : 0);
  }

  ForestModel model;
  model.hp = hp;
  model.seed = seed;
  model.trees.resize(hp.n_trees);
  Rng master(seed);
  const std::size_t n = pairs.size();
  for (std::size_t t = 0; t < hp.n_trees; ++t) {
    Rng rng = master.fork(t);
    std::vector<std::size_t> sample(n);
    for (auto& s : sample) s = static_cast<std::size_t>(rng.bounded(n));
    detail::TreeBuilder builder{xs, ys, hp, rng, model.trees[t]};
    builder.build(sample, 0, n, 0);
  }
  return model;
}

// Mean over trees of the leaf positive-class fraction.
inline double predict_proba(const ForestModel& model,
                            const PairFeatureVector& vector) {
  if (!model.trained()) throw Error("model required");
  const auto x = vector.to_array();
  double sum = 0.0;
  for (const auto& t : model.trees) sum += t.predict(x);
  return sum / static_cast<double>(model.trees.size());
}

inline constexpr std::string_view kModelHeader = "#fplink-forest 1";

inline std::string serialize_model(const ForestModel& model) {
  std::string out(kModelHeader);
  out += '\n';
  char buf[128];
  std::snprintf(buf, sizeof(buf), "n_trees %zu\nmax_depth %zu\nmin_leaf %zu\n"
                "features_per_split %zu\nseed %llu\n",
                model.hp.n_trees, model.hp.max_depth, model.hp.min_leaf,
                model.hp.features_per_split, static_cast<unsigned long long>(model.seed));
  out += buf;
  out += "note " + detail::escape_field(model.note) + "\n";
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    std::snprintf(buf, sizeof(buf), "tree %zu %zu\n", t, model.trees[t].nodes.size());
    out += buf;
    for (const auto& n : model.trees[t].nodes) {
      if (n.feature < 0) {
        std::snprintf(buf, sizeof(buf), "L %u %u\n", n.pos, n.neg);
      } else {
        // hexfloat keeps thresholds (and so predictions) bit-identical
        std::snprintf(buf, sizeof(buf), "S %d %a %d %d\n", n.feature, n.threshold, n.left,
                      n.right);
      }
      out += buf;
    }
  }
  return out;
}

inline ForestModel parse_model(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kModelHeader) throw Error("bad model header");
  ForestModel model;
  std::size_t declared_trees = 0;
  auto need = [&](const char* key) -> std::string {
    if (!std::getline(in, line)) throw Error(std::string("model file truncated at ") + key);
    std::istringstream ls(line);
    std::string k;
    ls >> k;
    if (k != key) throw Error("model file: expected " + std::string(key) + ", got " + k);
    std::string rest;
    std::getline(ls, rest);
    if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
    return rest;
  };
  model.hp.n_trees = declared_trees = std::stoull(need("n_trees"));
  model.hp.max_depth = std::stoull(need("max_depth"));
  model.hp.min_leaf = std::stoull(need("min_leaf"));
  model.hp.features_per_split = std::stoull(need("features_per_split"));
  model.seed = std::stoull(need("seed"));
  model.note = detail::unescape_field(need("note"), 0);
  model.trees.reserve(declared_trees);
  for (std::size_t t = 0; t < declared_trees; ++t) {
    if (!std::getline(in, line)) throw Error("model file truncated");
    std::size_t ti = 0, n_nodes = 0;
    if (std::sscanf(line.c_str(), "tree %zu %zu", &ti, &n_nodes) != 2 || ti != t) {
      throw Error("model file: bad tree record");
    }
    DecisionTree tree;
    tree.nodes.reserve(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) {
      if (!std::getline(in, line)) throw Error("model file truncated");
      TreeNode node;
      if (line.size() > 1 && line[0] == 'L') {
        if (std::sscanf(line.c_str(), "L %u %u", &node.pos, &node.neg) != 2) {
          throw Error("model file: bad leaf");
        }
      } else if (line.size() > 1 && line[0] == 'S') {
        if (std::sscanf(line.c_str(), "S %d %la %d %d", &node.feature, &node.threshold,
                        &node.left, &node.right) != 4) {
          throw Error("model file: bad split");
        }
      } else {
        throw Error("model file: bad node line");
      }
      tree.nodes.push_back(node);
    }
    model.trees.push_back(std::move(tree));
  }
  return model;
}

inline void save_model(const ForestModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model: " + path);
  out << serialize_model(model);
  if (!out) throw Error("write failed: " + path);
}

inline ForestModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

// Canonical separable pair set: identical-looking pairs against pairs that
// differ in every compared attribute, over a spread of time distances.
inline std::vector<LabeledPair> make_separable_pairs(std::size_t per_class = 64) {
  std::vector<LabeledPair> pairs;
  pairs.reserve(2 * per_class);
  for (std::size_t i = 0; i < per_class; ++i) {
    PairFeatureVector pos;
    pos.time_diff_days = static_cast<double>(i % 10);
    pairs.push_back({pos, PairLabel::same_user});
    PairFeatureVector neg;
    neg.languages_eq = neg.user_agent_eq = neg.canvas_eq = 0;
    neg.plugins_eq = neg.fonts_eq = neg.renderer_eq = neg.resolution_eq = 0;
    neg.num_changes = 7;
    neg.time_diff_days = static_cast<double>(i % 10);
    pairs.push_back({neg, PairLabel::different_user});
  }
  return pairs;
}

// Standard model sourcing for campaigns and the CLI: pairs from the train
// split; when the store offers no gate-passing cross-user pairs, synthetic
// all-different negatives keep the forest trainable.
inline ForestModel train_default_model(const FingerprintStore& store, double train_frac,
                                       std::size_t neg_per_pos, const ForestHyperparams& hp,
                                       std::uint64_t seed,
                                       std::vector<std::string>* notes = nullptr) {
  FingerprintStore train_split;
  if (train_frac > 0.0 && train_frac < 1.0 &&
      static_cast<std::size_t>(train_frac * static_cast<double>(store.size())) > 0) {
    train_split = split(store, train_frac).first;
  } else {
    train_split = store;
    if (notes) notes->push_back("training on the whole store (no usable split)");
  }
  std::vector<std::string> warnings;
  auto pairs = build_pairs(train_split, neg_per_pos, seed, &warnings);
  bool any_neg = false;
  for (const auto& p : pairs) {
    if (p.label == PairLabel::different_user) any_neg = true;
  }
  std::string note;
  if (!any_neg) {
    // Mirror each positive's time distance so the time feature carries no
    // class signal; only the equality flags separate the labels.
    const std::size_t per_pos = std::max<std::size_t>(1, neg_per_pos);
    std::vector<LabeledPair> fill;
    for (const auto& p : pairs) {
      if (p.label != PairLabel::same_user) continue;
      PairFeatureVector neg;
      neg.languages_eq = neg.user_agent_eq = neg.canvas_eq = 0;
      neg.plugins_eq = neg.fonts_eq = neg.renderer_eq = neg.resolution_eq = 0;
      neg.num_changes = 7;
      neg.time_diff_days = p.vector.time_diff_days;
      for (std::size_t k = 0; k < per_pos; ++k) fill.push_back({neg, PairLabel::different_user});
    }
    pairs.insert(pairs.end(), fill.begin(), fill.end());
    note = "synthetic all-different negatives (no gate-passing cross-user pairs)";
    if (notes) notes->push_back(note);
  }
  if (notes) {
    for (auto& w : warnings) notes->push_back(std::move(w));
  }
  ForestModel model = train(pairs, hp, seed);
  model.note = note;
  return model;
}

}  // namespace fplink
