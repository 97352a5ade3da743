// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mfm/model.hpp"

namespace mfm {

enum class DecodeMode { Beam, Greedy };

const char* to_string(DecodeMode mode);
DecodeMode parse_decode_mode(const std::string& name);

struct DecodeConfig {
  int beam_size = 20;
  int max_length = 16;
  DecodeMode mode = DecodeMode::Beam;
  bool constrain_to_items = true;
  double alpha = 0.0;  // length normalization exponent

  void validate() const;
};

struct Hypothesis {
  std::vector<int> tokens;  // generated ids, eos included when emitted
  double log_prob = 0.0;
  bool finished = false;

  double score(double alpha) const;
};

// Prefix tree over tokenized item ids.
class ItemTrie {
 public:
  struct Node {
    std::map<int, int> children;
    std::optional<std::string> item;  // set on terminals
  };

  ItemTrie() : nodes_(1) {}

  // Throws ConfigError when `tokens` already ends at another item.
  void insert(const std::vector<int>& tokens, const std::string& item);

  static constexpr int root() { return 0; }
  int child(int node, int token) const;  // -1 when absent
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  // Children of `node` plus eos when the node ends an item.
  std::vector<int> legal(int node) const;
  // Item reached by walking `tokens` (eos terminates the walk).
  std::optional<std::string> lookup(const std::vector<int>& tokens) const;

  std::size_t items() const { return items_; }
  std::size_t nodes() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
  std::size_t items_ = 0;
};

ItemTrie build_item_trie(const std::vector<std::string>& item_ids, const Vocabulary& vocab);
ItemTrie build_item_trie(const Corpus& corpus, const Vocabulary& vocab);

// Log-probabilities of the next token given the generated prefix. Entries of
// -inf are never expanded.
using StepScorer = std::function<Eigen::VectorXd(const std::vector<int>& prefix)>;

// Finished hypotheses ranked by score / length^alpha, at most beam_size.
std::vector<Hypothesis> beam_search(const StepScorer& scorer, const DecodeConfig& config,
                                    const ItemTrie* trie = nullptr);

// Argmax per step, lower id on ties; same trie rules as beam_search.
Hypothesis greedy_decode(const StepScorer& scorer, const DecodeConfig& config, const ItemTrie* trie = nullptr);

// Scores prefixes with the model, encoding the prompt once. The pad token is
// never proposed.
template <typename Scalar>
StepScorer model_scorer(const ParameterStore<Scalar>& params, const RenderedPrompt& prompt);

struct RankedOutput {
  std::string text;
  double score = 0.0;
  std::vector<int> tokens;
};

template <typename Scalar>
std::vector<RankedOutput> beam_search(const ParameterStore<Scalar>& params, const RenderedPrompt& prompt,
                                      const Vocabulary& vocab, const DecodeConfig& config,
                                      const ItemTrie* trie = nullptr);

template <typename Scalar>
std::string greedy_decode(const ParameterStore<Scalar>& params, const RenderedPrompt& prompt,
                          const Vocabulary& vocab, const DecodeConfig& config);

struct DecodeRecord {
  std::string user_id;
  std::string template_id;
  int rank = 0;
  std::string output;
  double score = 0.0;
};

// `user_id \t template_id \t rank \t item_or_text \t score` per line.
std::string format_decode_records(const std::vector<DecodeRecord>& records);

}  // namespace mfm
