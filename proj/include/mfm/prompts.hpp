// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mfm/corpus.hpp"
#include "mfm/tokenizer.hpp"

namespace mfm {

enum class TaskGroup { Sequential, Direct, Explanation };

const char* to_string(TaskGroup group);
TaskGroup parse_task_group(const std::string& name);
char group_letter(TaskGroup group);

enum class TemplateRole { Train, Unseen };

struct PromptTemplate {
  std::string id;  // "A-3"
  TaskGroup group = TaskGroup::Sequential;
  TemplateRole role = TemplateRole::Train;
  std::string input_pattern;
  std::string target_pattern;

  int number() const;
  bool uses(const std::string& placeholder) const;
};

// `id | task_group | role | input_pattern | target_pattern` per line; blank
// lines and lines starting with '#' are ignored. Validates placeholders,
// id uniqueness and the unseen-role rule.
std::vector<PromptTemplate> parse_templates(const std::string& text);
std::vector<PromptTemplate> load_templates(const std::filesystem::path& path);
std::string format_templates(const std::vector<PromptTemplate>& templates);

// The built-in set: 9 sequential, 8 direct and 12 explanation templates; the
// last of each group is held out for unseen-prompt evaluation.
const std::vector<PromptTemplate>& default_templates();

const PromptTemplate& find_template(const std::vector<PromptTemplate>& templates,
                                    const std::string& id);
std::vector<const PromptTemplate*> training_templates(const std::vector<PromptTemplate>& templates,
                                                      TaskGroup group);

// Evaluation template ids: seen then unseen, per group.
struct EvalTemplates {
  std::string seen;
  std::string unseen;
};
EvalTemplates eval_templates(TaskGroup group);

// Item tokens followed by k visual positions, all under one whole-word id.
struct MultimodalField {
  std::string item_id;
  TokenizedField tokens;
  int k = 0;
  bool has_image = false;
  Eigen::VectorXd feature;  // zero vector when the item has no image
};

MultimodalField expand_item_field(const ItemRecord& item, int k, const Vocabulary& vocab);

struct RenderContext {
  Split split = Split::Train;
  const CandidateSet* candidates = nullptr;     // direct recommendation
  std::optional<std::size_t> explanation_record;  // interaction index
  std::size_t max_length = 256;
};

struct RenderedPrompt {
  std::string template_id;
  TaskGroup group = TaskGroup::Sequential;
  std::string user_id;
  int k = 0;
  TokenizedField input;
  // One row per item field, in order of appearance.
  Eigen::MatrixXd image_features;
  // Position of the first visual token of each item field.
  std::vector<int> image_positions;
  std::vector<std::string> field_items;
  TokenizedField target;
  std::string target_text;
  std::size_t truncated_history = 0;

  // Target ids with the end-of-sequence token appended.
  std::vector<int> target_ids() const;
  std::size_t visual_count() const;
};

RenderedPrompt render(const PromptTemplate& tmpl, const Corpus& corpus, const SplitSpec& splits,
                      const std::string& user_id, int k, const Vocabulary& vocab,
                      const RenderContext& context);

// History items for a split: train[:-1], train, or train + validation.
std::vector<std::string> history_for(const UserSplit& split, Split which);
const std::string& target_for(const UserSplit& split, Split which);

// Every string a prompt can contain, for vocabulary construction.
std::vector<std::string> vocabulary_texts(const Corpus& corpus,
                                          const std::vector<PromptTemplate>& templates);

}  // namespace mfm
