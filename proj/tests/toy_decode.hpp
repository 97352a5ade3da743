// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

// Random per-prefix logit tables and an exhaustive sequence enumerator.

#pragma once

#include <algorithm>
#include <map>
#include <vector>

#include "mfm/decode.hpp"

namespace mfm::toy {

// Log-softmax of a random logit row per prefix, drawn on first use.
class TableScorer {
 public:
  TableScorer(int vocab, std::uint64_t seed, double spread = 2.0) : vocab_(vocab), rng_(seed), spread_(spread) {}

  Eigen::VectorXd operator()(const std::vector<int>& prefix) {
    auto it = table_.find(prefix);
    if (it != table_.end()) return it->second;
    Eigen::VectorXd z(vocab_);
    for (int i = 0; i < vocab_; ++i) z[i] = spread_ * standard_normal(rng_);
    const double m = z.maxCoeff();
    const double lse = m + std::log((z.array() - m).exp().sum());
    return table_[prefix] = z.array() - lse;
  }

  StepScorer scorer() {
    return [this](const std::vector<int>& p) { return (*this)(p); };
  }

 private:
  int vocab_;
  Rng rng_;
  double spread_;
  std::map<std::vector<int>, Eigen::VectorXd> table_;
};

// Every complete sequence: eos-terminated within max_length, or max_length
// tokens without eos. Sorted by log-probability, ties by tokens.
inline std::vector<Hypothesis> enumerate(const StepScorer& scorer, int vocab, int max_length) {
  std::vector<Hypothesis> out;
  std::vector<Hypothesis> frontier{Hypothesis{}};
  for (int step = 0; step < max_length; ++step) {
    std::vector<Hypothesis> next;
    for (const auto& h : frontier) {
      const auto lp = scorer(h.tokens);
      for (int t = 0; t < vocab; ++t) {
        Hypothesis c = h;
        c.tokens.push_back(t);
        c.log_prob += lp[t];
        if (t == kEosId || step + 1 == max_length) {
          c.finished = true;
          out.push_back(c);
        } else {
          next.push_back(c);
        }
      }
    }
    frontier = std::move(next);
  }
  std::sort(out.begin(), out.end(), [](const Hypothesis& a, const Hypothesis& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
  });
  return out;
}

inline std::size_t sequence_count(int vocab, int max_length) {
  std::size_t total = 0;
  std::size_t open = 1;
  for (int step = 0; step < max_length; ++step) {
    total += open;  // eos
    open *= std::size_t(vocab - 1);
  }
  return total + open;
}

}  // namespace mfm::toy
