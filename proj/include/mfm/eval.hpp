// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "mfm/decode.hpp"
#include "mfm/training.hpp"

namespace mfm {

struct RankingResult {
  std::vector<std::string> ranked;
  std::string ground_truth;
};

// 1 iff the ground truth is among the first k entries.
int hr_at_k(const RankingResult& r, int k);
// Single relevant item: 1 / log2(rank + 1) within the cutoff.
double ndcg_at_k(const RankingResult& r, int k);

struct TextPair {
  std::string generated;
  std::string reference;
};

// Lowercased whitespace tokens with punctuation split off.
std::vector<std::string> metric_tokens(std::string_view text);

// Corpus-level BLEU with n-grams up to 4, no smoothing.
double bleu4(const std::vector<TextPair>& pairs);

enum class RougeVariant { R1, R2, RL };
// Sentence-level F1 averaged over pairs.
double rouge(const std::vector<TextPair>& pairs, RougeVariant variant);

struct EvalReport {
  TaskGroup group = TaskGroup::Sequential;
  std::string template_id;
  Split split = Split::Test;
  std::map<std::string, double> metrics;
  std::size_t instances = 0;
  std::size_t dropped = 0;  // invalid or duplicate generated items
  std::string fingerprint;
  std::map<std::string, std::string> labels;  // e.g. tuning_mode, r, k
};

struct EvalOptions {
  Split split = Split::Test;
  std::size_t candidate_size = kDefaultCandidateSize;
  std::uint64_t seed = 0;  // candidate sampling
  std::string fingerprint;
  std::vector<DecodeRecord>* records = nullptr;  // decode outputs, when set
};

// Runs one template over every eval user (A, B) or record (C). Ranking
// metrics are fractions, text metrics percentages.
template <typename Scalar>
EvalReport evaluate(const ParameterStore<Scalar>& params, const TaskData& data, const DecodeConfig& config,
                    TaskGroup group, const std::string& template_id, const EvalOptions& options = {});

// The seen and unseen evaluation template of every group, in group order.
std::vector<std::pair<TaskGroup, std::string>> evaluation_protocol();

// One report per entry of evaluation_protocol(), restricted to `groups`.
template <typename Scalar>
std::vector<EvalReport> evaluate_protocol(const ParameterStore<Scalar>& params, const TaskData& data,
                                          const DecodeConfig& config, const std::vector<TaskGroup>& groups,
                                          const EvalOptions& options = {});

// Human-readable table and one JSON object per line.
std::string format_report_table(const std::vector<EvalReport>& reports);
std::string to_json_line(const EvalReport& report);
EvalReport parse_json_line(const std::string& line);

}  // namespace mfm
