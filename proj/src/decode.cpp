// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include "mfm/decode.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

namespace mfm {

const char* to_string(DecodeMode mode) { return mode == DecodeMode::Beam ? "beam" : "greedy"; }

DecodeMode parse_decode_mode(const std::string& name) {
  if (name == "beam") return DecodeMode::Beam;
  if (name == "greedy") return DecodeMode::Greedy;
  throw ConfigError("unknown decode mode '" + name + "' (beam, greedy)");
}

void DecodeConfig::validate() const {
  if (beam_size < 1) throw DecodeError("decode.beam_size must be at least 1");
  if (max_length < 1) throw ConfigError("decode.max_length must be at least 1");
  if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("decode.alpha must lie in [0, 1]");
}

double Hypothesis::score(double alpha) const {
  if (alpha == 0 || tokens.empty()) return log_prob;
  return log_prob / std::pow(static_cast<double>(tokens.size()), alpha);
}

void ItemTrie::insert(const std::vector<int>& tokens, const std::string& item) {
  if (tokens.empty()) throw ConfigError("item '" + item + "' tokenizes to nothing");
  int at = root();
  for (int t : tokens) {
    if (t == kEosId || t == kPadId) throw ConfigError("item '" + item + "' contains a reserved token");
    auto& children = nodes_[static_cast<std::size_t>(at)].children;
    auto it = children.find(t);
    if (it == children.end()) {
      const int fresh = static_cast<int>(nodes_.size());
      children.emplace(t, fresh);
      nodes_.emplace_back();
      at = fresh;
    } else {
      at = it->second;
    }
  }
  auto& terminal = nodes_[static_cast<std::size_t>(at)].item;
  if (terminal) {
    if (*terminal == item) return;
    throw ConfigError("items '" + *terminal + "' and '" + item + "' have the same token sequence");
  }
  terminal = item;
  ++items_;
}

int ItemTrie::child(int node, int token) const {
  const auto& children = nodes_.at(static_cast<std::size_t>(node)).children;
  auto it = children.find(token);
  return it == children.end() ? -1 : it->second;
}

std::vector<int> ItemTrie::legal(int node) const {
  const auto& n = nodes_.at(static_cast<std::size_t>(node));
  std::vector<int> out;
  if (n.item) out.push_back(kEosId);
  for (const auto& [token, next] : n.children) out.push_back(token);
  std::sort(out.begin(), out.end());
  return out;
}

std::optional<std::string> ItemTrie::lookup(const std::vector<int>& tokens) const {
  int at = root();
  for (int t : tokens) {
    if (t == kEosId) break;
    at = child(at, t);
    if (at < 0) return std::nullopt;
  }
  return nodes_[static_cast<std::size_t>(at)].item;
}

ItemTrie build_item_trie(const std::vector<std::string>& item_ids, const Vocabulary& vocab) {
  // Sorted insertion makes node numbering independent of input order.
  std::vector<std::string> sorted(item_ids);
  std::sort(sorted.begin(), sorted.end());
  ItemTrie trie;
  for (const auto& id : sorted) trie.insert(encode(vocab, id).token_ids, id);
  return trie;
}

ItemTrie build_item_trie(const Corpus& corpus, const Vocabulary& vocab) {
  std::vector<std::string> ids;
  for (const auto& [id, item] : corpus.items()) ids.push_back(id);
  return build_item_trie(ids, vocab);
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Live {
  Hypothesis hyp;
  int node = ItemTrie::root();
};

struct Expansion {
  double log_prob;
  std::size_t parent;
  int token;
};

std::vector<int> successors(const ItemTrie* trie, int node, Eigen::Index vocab) {
  if (trie) {
    auto legal = trie->legal(node);
    if (legal.empty()) throw DecodeError("no legal continuation under the item constraint");
    return legal;
  }
  std::vector<int> all(static_cast<std::size_t>(vocab));
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  return all;
}

bool better(const Hypothesis& a, const Hypothesis& b, double alpha) {
  const double sa = a.score(alpha);
  const double sb = b.score(alpha);
  if (sa != sb) return sa > sb;
  return a.tokens < b.tokens;
}

}  // namespace

std::vector<Hypothesis> beam_search(const StepScorer& scorer, const DecodeConfig& config, const ItemTrie* trie) {
  config.validate();
  const auto beam = static_cast<std::size_t>(config.beam_size);
  std::vector<Live> alive(1);
  std::vector<Hypothesis> finished;
  for (int step = 0; step < config.max_length && !alive.empty(); ++step) {
    std::vector<Expansion> pool;
    for (std::size_t r = 0; r < alive.size(); ++r) {
      const auto lp = scorer(alive[r].hyp.tokens);
      for (int t : successors(trie, alive[r].node, lp.size())) {
        if (t < 0 || t >= lp.size()) throw DecodeError("scorer returned too few log-probabilities");
        if (lp(t) == kNegInf) continue;
        pool.push_back({alive[r].hyp.log_prob + lp(t), r, t});
      }
    }
    std::sort(pool.begin(), pool.end(), [](const Expansion& a, const Expansion& b) {
      if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    });
    if (pool.size() > beam) pool.resize(beam);
    std::vector<Live> next;
    for (const auto& e : pool) {
      const auto& parent = alive[e.parent];
      Live child;
      child.hyp.tokens = parent.hyp.tokens;
      child.hyp.tokens.push_back(e.token);
      child.hyp.log_prob = e.log_prob;
      if (e.token == kEosId) {
        child.hyp.finished = true;
        finished.push_back(std::move(child.hyp));
        continue;
      }
      child.node = trie ? trie->child(parent.node, e.token) : ItemTrie::root();
      if (static_cast<int>(child.hyp.tokens.size()) == config.max_length) {
        // Out of room: complete only if it spells an item.
        if (trie && !trie->node(child.node).item) continue;
        child.hyp.finished = true;
        finished.push_back(std::move(child.hyp));
        continue;
      }
      next.push_back(std::move(child));
    }
    alive = std::move(next);
    if (config.alpha == 0 && finished.size() >= beam && !alive.empty()) {
      // Scores only fall as hypotheses grow.
      std::vector<double> scores;
      for (const auto& h : finished) scores.push_back(h.log_prob);
      std::nth_element(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(beam - 1), scores.end(),
                       std::greater<>());
      double best_alive = kNegInf;
      for (const auto& l : alive) best_alive = std::max(best_alive, l.hyp.log_prob);
      if (scores[beam - 1] >= best_alive) break;
    }
  }
  std::sort(finished.begin(), finished.end(),
            [&](const Hypothesis& a, const Hypothesis& b) { return better(a, b, config.alpha); });
  if (finished.size() > beam) finished.resize(beam);
  return finished;
}

Hypothesis greedy_decode(const StepScorer& scorer, const DecodeConfig& config, const ItemTrie* trie) {
  if (config.max_length < 1) throw ConfigError("decode.max_length must be at least 1");
  Hypothesis h;
  int node = ItemTrie::root();
  for (int step = 0; step < config.max_length; ++step) {
    const auto lp = scorer(h.tokens);
    int best = -1;
    for (int t : successors(trie, node, lp.size())) {
      if (lp(t) == kNegInf) continue;
      if (best < 0 || lp(t) > lp(best)) best = t;
    }
    if (best < 0) throw DecodeError("every continuation has zero probability");
    h.tokens.push_back(best);
    h.log_prob += lp(best);
    if (best == kEosId) break;
    if (trie) node = trie->child(node, best);
  }
  if (trie && (h.tokens.empty() || h.tokens.back() != kEosId) && !trie->node(node).item) {
    throw DecodeError("greedy decoding ran out of length inside an item");
  }
  h.finished = true;
  return h;
}

template <typename Scalar>
StepScorer model_scorer(const ParameterStore<Scalar>& params, const RenderedPrompt& prompt) {
  Matrix<Scalar> encoded;
  {
    ad::Tape<Scalar> tape;
    Binder<Scalar> bind(tape, params);
    encoded = encode_prompt(bind, prompt).value();
  }
  return [&params, encoded = std::move(encoded)](const std::vector<int>& prefix) {
    ad::Tape<Scalar> tape;
    Binder<Scalar> bind(tape, params);
    std::vector<int> input{kPadId};
    input.insert(input.end(), prefix.begin(), prefix.end());
    auto logits = decode_logits(bind, tape.constant(encoded), input).value();
    Eigen::VectorXd row = logits.row(logits.rows() - 1).transpose().template cast<double>();
    row(kPadId) = kNegInf;
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    return Eigen::VectorXd(row.array() - lse);
  };
}

template <typename Scalar>
std::vector<RankedOutput> beam_search(const ParameterStore<Scalar>& params, const RenderedPrompt& prompt,
                                      const Vocabulary& vocab, const DecodeConfig& config, const ItemTrie* trie) {
  std::vector<RankedOutput> out;
  for (auto& h : beam_search(model_scorer(params, prompt), config, trie)) {
    RankedOutput r;
    r.text = decode(vocab, h.tokens);
    r.score = h.score(config.alpha);
    r.tokens = std::move(h.tokens);
    out.push_back(std::move(r));
  }
  return out;
}

template <typename Scalar>
std::string greedy_decode(const ParameterStore<Scalar>& params, const RenderedPrompt& prompt,
                          const Vocabulary& vocab, const DecodeConfig& config) {
  return decode(vocab, greedy_decode(model_scorer(params, prompt), config).tokens);
}

std::string format_decode_records(const std::vector<DecodeRecord>& records) {
  std::string out;
  char score[32];
  for (const auto& r : records) {
    std::snprintf(score, sizeof score, "%.6f", r.score);
    out += r.user_id + '\t' + r.template_id + '\t' + std::to_string(r.rank) + '\t' + r.output + '\t' + score + '\n';
  }
  return out;
}

#define MFM_INSTANTIATE(S)                                                                                  \
  template StepScorer model_scorer<S>(const ParameterStore<S>&, const RenderedPrompt&);                      \
  template std::vector<RankedOutput> beam_search<S>(const ParameterStore<S>&, const RenderedPrompt&,        \
                                                    const Vocabulary&, const DecodeConfig&, const ItemTrie*); \
  template std::string greedy_decode<S>(const ParameterStore<S>&, const RenderedPrompt&, const Vocabulary&, \
                                        const DecodeConfig&);

MFM_INSTANTIATE(float)
MFM_INSTANTIATE(double)

}  // namespace mfm
