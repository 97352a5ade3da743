// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfm/common.hpp"

namespace mfm {

struct ItemRecord {
  std::string item_id;
  std::string title;
  Eigen::VectorXd image_feature;  // zero vector when has_image is false
  bool has_image = false;
};

struct Interaction {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;
  std::optional<int> rating;
  std::optional<std::string> explanation;
  std::optional<std::string> hint_word;
};

// Immutable after construction. Every user has at least three interactions
// and every interaction references a known user and item.
class Corpus {
 public:
  Corpus(std::vector<ItemRecord> items, std::vector<Interaction> interactions, int d_v);

  int d_v() const { return d_v_; }
  const std::vector<std::string>& users() const { return users_; }
  const std::map<std::string, ItemRecord>& items() const { return items_; }
  const std::vector<Interaction>& interactions() const { return interactions_; }

  const ItemRecord& item(const std::string& item_id) const;
  bool has_item(const std::string& item_id) const { return items_.count(item_id) != 0; }
  bool has_user(const std::string& user_id) const { return user_index_.count(user_id) != 0; }
  std::size_t user_index(const std::string& user_id) const;

  // Interaction indices of one user, chronological, ties in input order.
  const std::vector<std::size_t>& history(const std::string& user_id) const;
  std::vector<std::string> item_sequence(const std::string& user_id) const;

  friend bool operator==(const Corpus& a, const Corpus& b);

 private:
  int d_v_;
  std::vector<std::string> users_;
  std::map<std::string, ItemRecord> items_;
  std::vector<Interaction> interactions_;
  std::unordered_map<std::string, std::size_t> user_index_;
  std::vector<std::vector<std::size_t>> histories_;
};

struct IngestResult {
  Corpus corpus;
  std::size_t dropped_users = 0;
  std::size_t dropped_interactions = 0;
  std::vector<std::string> warnings;
};

// Reads the tab-separated interactions file and the feature file. Users with
// fewer than three interactions are dropped and reported in `warnings`.
IngestResult ingest(const std::filesystem::path& interactions_path,
                    const std::filesystem::path& features_path);

// Same as ingest() over in-memory text.
IngestResult ingest_text(const std::string& interactions_text, const std::string& features_text);

void write_interactions(const Corpus& corpus, const std::filesystem::path& path);
void write_features(const Corpus& corpus, const std::filesystem::path& path);
std::string format_interactions(const Corpus& corpus);
std::string format_features(const Corpus& corpus);

enum class Split { Train, Validation, Test };
const char* to_string(Split split);
Split parse_split(const std::string& name);

struct UserSplit {
  std::string user_id;
  std::vector<std::string> train;  // chronological
  std::string validation;
  std::string test;
};

struct SplitSpec {
  std::vector<UserSplit> sequential;  // corpus user order
  // Interaction indices of explanation records per split.
  std::vector<std::size_t> explanation_train;
  std::vector<std::size_t> explanation_validation;
  std::vector<std::size_t> explanation_test;

  const UserSplit& user(const std::string& user_id) const;
  const std::vector<std::size_t>& explanation(Split split) const;
};

// Leave-one-out: last item is the test target, second-last the validation
// target, the rest is training data.
SplitSpec build_sequential_splits(const Corpus& corpus);

// Seeded 8:1:1 partition of records that carry an explanation; only the
// explanation fields of the result are filled.
SplitSpec build_explanation_splits(const Corpus& corpus, std::uint64_t seed);

// Both of the above. Explanation splits are skipped when no record has one.
SplitSpec build_splits(const Corpus& corpus, std::uint64_t seed);

struct CandidateSet {
  std::string user_id;
  std::vector<std::string> item_ids;  // shuffled, contains ground_truth once
  std::string ground_truth;
};

inline constexpr std::size_t kDefaultCandidateSize = 100;

// One set per user for `split`. Negatives are drawn uniformly without
// replacement from items the user never interacted with.
std::vector<CandidateSet> build_candidate_sets(const Corpus& corpus, const SplitSpec& splits,
                                               Split split, std::uint64_t seed,
                                               std::size_t size = kDefaultCandidateSize);

CandidateSet sample_candidate_set(const Corpus& corpus, const std::string& user_id,
                                  const std::string& ground_truth, std::size_t size, Rng& rng);

struct GeneratorParams {
  std::size_t users = 50;
  std::size_t items = 20;
  int d_v = 16;
  std::size_t min_length = 5;
  std::size_t max_length = 8;
  double pattern_strength = 1.0;  // p in [0, 1]
  std::size_t period = 3;
  // When > 0, items are grouped into visual clusters and each user draws
  // new items from a preferred cluster instead of following a cycle.
  std::size_t clusters = 0;
  double cluster_noise = 0.25;
  std::size_t candidate_size = 10;
  bool explanations = true;
};

// Deterministic synthetic corpus with a planted next-item rule.
Corpus synthesize(const GeneratorParams& params, std::uint64_t seed);

// Item cluster assignment used by synthesize() in cluster mode.
std::size_t synthetic_cluster(std::size_t item_index, std::size_t clusters);

// Hint-word lexicon used for synthetic explanations.
const std::vector<std::string>& synthetic_lexicon();

}  // namespace mfm
