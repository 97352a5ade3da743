// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include "mfm/prompts.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace mfm {
namespace {

// Built-in templates. Wording is ours; structure (group sizes, placeholders,
// hint usage, held-out last template) is what evaluation depends on.
constexpr const char* kDefaultTemplates = R"(# id | group | role | input | target
A-1 | Sequential | train | given the following purchase history of {user} : {history} predict next possible item to be purchased by the user ? | {item}
A-2 | Sequential | train | i find the purchase history list of {user} : {history} i wonder which is the next item to recommend to the user . can you help me decide ? | {item}
A-3 | Sequential | train | here is the purchase history list of {user} : {history} try to recommend next item to the user | {item}
A-4 | Sequential | train | {user} has bought {history} in the past . what will the user buy next ? | {item}
A-5 | Sequential | train | according to the purchase history of {user} : {history} can you recommend the next possible item to the user ? | {item}
A-6 | Sequential | train | {user} purchased {history} before . predict the next item for the user | {item}
A-7 | Sequential | train | by analyzing the purchases {history} of {user} , what is the next item the user is likely to buy ? | {item}
A-8 | Sequential | train | what should we recommend to {user} after the items {history} ? | {item}
A-9 | Sequential | unseen | {user} has the following purchase history : {history} does the user likely to buy another item next ? which one ? | {item}
B-1 | Direct | train | choose the best item from the candidates to recommend for {user} ? {candidates} | {item}
B-2 | Direct | train | we want to make recommendation for {user} . select the best item from these candidates : {candidates} | {item}
B-3 | Direct | train | which item of the following to recommend for {user} ? {candidates} | {item}
B-4 | Direct | train | pick the most suitable item for {user} from the list : {candidates} | {item}
B-5 | Direct | train | from the candidates {candidates} which one would {user} prefer ? | {item}
B-6 | Direct | train | {user} is shopping . recommend one of {candidates} | {item}
B-7 | Direct | train | select an item for {user} among the candidate items {candidates} | {item}
B-8 | Direct | unseen | here are some candidates : {candidates} choose the one that {user} would most likely buy | {item}
C-1 | Explanation | train | generate an explanation for {user} about this product : {item} | {explanation}
C-2 | Explanation | train | help {user} generate an explanation about {item} | {explanation}
C-3 | Explanation | train | what would {user} say about {item} ? | {explanation}
C-4 | Explanation | train | explain why {user} rated {item} the way they did | {explanation}
C-5 | Explanation | train | write a short review of {item} from the view of {user} | {explanation}
C-6 | Explanation | train | describe the opinion of {user} on {item} | {explanation}
C-7 | Explanation | train | generate an explanation for {user} about {item} based on the feature word {hint} | {explanation}
C-8 | Explanation | train | how would {user} comment on the {hint} of {item} ? | {explanation}
C-9 | Explanation | train | write a review of {item} by {user} mentioning {hint} | {explanation}
C-10 | Explanation | train | {user} bought {item} . explain the purchase using the word {hint} | {explanation}
C-11 | Explanation | train | what does {user} think about the {hint} of {item} ? | {explanation}
C-12 | Explanation | unseen | given the feature word {hint} , help {user} explain the rating of {item} | {explanation}
)";

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> placeholders(const std::string& pattern) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = pattern.find('{', pos)) != std::string::npos) {
    const auto close = pattern.find('}', pos);
    if (close == std::string::npos) break;
    out.push_back(pattern.substr(pos + 1, close - pos - 1));
    pos = close + 1;
  }
  return out;
}

const std::set<std::string>& allowed_inputs(TaskGroup g) {
  static const std::set<std::string> a = {"user", "history"};
  static const std::set<std::string> b = {"user", "candidates"};
  static const std::set<std::string> c = {"user", "item", "hint"};
  return g == TaskGroup::Sequential ? a : g == TaskGroup::Direct ? b : c;
}

const std::set<std::string>& allowed_targets(TaskGroup g) {
  static const std::set<std::string> item = {"item"};
  static const std::set<std::string> expl = {"explanation"};
  return g == TaskGroup::Explanation ? expl : item;
}

// A pattern is a sequence of words and placeholders.
struct Segment {
  bool placeholder = false;
  std::string text;
};

std::vector<Segment> segments(const std::string& pattern) {
  std::vector<Segment> out;
  std::size_t pos = 0;
  while (pos < pattern.size()) {
    const auto open = pattern.find('{', pos);
    if (open == std::string::npos) {
      out.push_back({false, pattern.substr(pos)});
      break;
    }
    if (open > pos) out.push_back({false, pattern.substr(pos, open - pos)});
    const auto close = pattern.find('}', open);
    out.push_back({true, pattern.substr(open + 1, close - open - 1)});
    pos = close + 1;
  }
  return out;
}

class PromptBuilder {
 public:
  PromptBuilder(const Vocabulary& vocab, RenderedPrompt& out) : vocab_(vocab), out_(out) {}

  void text(const std::string& text) {
    auto field = encode(vocab_, text);
    if (field.size() == 0) return;
    out_.input.append(field, next_word_);
    next_word_ = out_.input.whole_word_ids.back() + 1;
  }

  void item(const MultimodalField& field) {
    const int start = static_cast<int>(out_.input.size());
    out_.input.append(field.tokens, next_word_);
    ++next_word_;
    if (field.k > 0) {
      out_.image_positions.push_back(start + static_cast<int>(field.tokens.size()) - field.k);
      features_.push_back(field.feature);
    }
    out_.field_items.push_back(field.item_id);
  }

  void finish(int d_v) {
    out_.image_features.resize(static_cast<Eigen::Index>(features_.size()), d_v);
    for (std::size_t i = 0; i < features_.size(); ++i) {
      out_.image_features.row(static_cast<Eigen::Index>(i)) = features_[i].transpose();
    }
  }

 private:
  const Vocabulary& vocab_;
  RenderedPrompt& out_;
  int next_word_ = 0;
  std::vector<Eigen::VectorXd> features_;
};

}  // namespace

const char* to_string(TaskGroup group) {
  switch (group) {
    case TaskGroup::Sequential: return "Sequential";
    case TaskGroup::Direct: return "Direct";
    case TaskGroup::Explanation: return "Explanation";
  }
  return "?";
}

TaskGroup parse_task_group(const std::string& name) {
  if (name == "Sequential" || name == "sequential" || name == "A") return TaskGroup::Sequential;
  if (name == "Direct" || name == "direct" || name == "B") return TaskGroup::Direct;
  if (name == "Explanation" || name == "explanation" || name == "C") return TaskGroup::Explanation;
  throw ConfigError("unknown task group '" + name + "'");
}

char group_letter(TaskGroup group) {
  return group == TaskGroup::Sequential ? 'A' : group == TaskGroup::Direct ? 'B' : 'C';
}

int PromptTemplate::number() const {
  const auto dash = id.find('-');
  if (dash == std::string::npos) return 0;
  try {
    return std::stoi(id.substr(dash + 1));
  } catch (const std::exception&) {
    return 0;
  }
}

bool PromptTemplate::uses(const std::string& placeholder) const {
  const auto token = "{" + placeholder + "}";
  return input_pattern.find(token) != std::string::npos ||
         target_pattern.find(token) != std::string::npos;
}

std::vector<PromptTemplate> parse_templates(const std::string& text) {
  std::vector<PromptTemplate> out;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++number;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto bar = t.find('|', start);
      fields.push_back(trim(t.substr(start, bar == std::string::npos ? bar : bar - start)));
      if (bar == std::string::npos) break;
      start = bar + 1;
    }
    if (fields.size() != 5) throw ParseError("template needs 5 '|'-separated fields", number);
    PromptTemplate tmpl;
    tmpl.id = fields[0];
    tmpl.group = parse_task_group(fields[1]);
    if (fields[2] == "train") {
      tmpl.role = TemplateRole::Train;
    } else if (fields[2] == "unseen") {
      tmpl.role = TemplateRole::Unseen;
    } else {
      throw ParseError("role must be 'train' or 'unseen'", number);
    }
    tmpl.input_pattern = fields[3];
    tmpl.target_pattern = fields[4];
    if (tmpl.id.empty() || tmpl.id[0] != group_letter(tmpl.group) || tmpl.number() <= 0) {
      throw ParseError("template id '" + tmpl.id + "' must look like " +
                           std::string(1, group_letter(tmpl.group)) + "-<n>",
                       number);
    }
    if (!ids.insert(tmpl.id).second) throw ParseError("duplicate template id " + tmpl.id, number);
    for (const auto& p : placeholders(tmpl.input_pattern)) {
      if (!allowed_inputs(tmpl.group).count(p)) {
        throw ParseError("placeholder {" + p + "} not allowed in " + to_string(tmpl.group) +
                             " input",
                         number);
      }
    }
    const auto targets = placeholders(tmpl.target_pattern);
    if (targets.empty()) throw ParseError("target pattern has no placeholder", number);
    for (const auto& p : targets) {
      if (!allowed_targets(tmpl.group).count(p)) {
        throw ParseError("placeholder {" + p + "} not allowed in " + to_string(tmpl.group) +
                             " target",
                         number);
      }
    }
    out.push_back(std::move(tmpl));
  }
  for (auto group : {TaskGroup::Sequential, TaskGroup::Direct, TaskGroup::Explanation}) {
    const PromptTemplate* last = nullptr;
    int unseen = 0;
    for (const auto& t : out) {
      if (t.group != group) continue;
      if (!last || t.number() > last->number()) last = &t;
      if (t.role == TemplateRole::Unseen) ++unseen;
    }
    if (!last) continue;
    if (last->role != TemplateRole::Unseen || unseen != 1) {
      throw ConfigError(std::string("the highest-numbered ") + to_string(group) +
                        " template must be the only unseen one");
    }
  }
  return out;
}

std::vector<PromptTemplate> load_templates(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_templates(buf.str());
}

std::string format_templates(const std::vector<PromptTemplate>& templates) {
  std::string out;
  for (const auto& t : templates) {
    out += t.id + " | " + to_string(t.group) + " | " +
           (t.role == TemplateRole::Train ? "train" : "unseen") + " | " + t.input_pattern + " | " +
           t.target_pattern + '\n';
  }
  return out;
}

const std::vector<PromptTemplate>& default_templates() {
  static const std::vector<PromptTemplate> templates = parse_templates(kDefaultTemplates);
  return templates;
}

const PromptTemplate& find_template(const std::vector<PromptTemplate>& templates,
                                    const std::string& id) {
  for (const auto& t : templates) {
    if (t.id == id) return t;
  }
  throw ConfigError("unknown template " + id);
}

std::vector<const PromptTemplate*> training_templates(const std::vector<PromptTemplate>& templates,
                                                      TaskGroup group) {
  std::vector<const PromptTemplate*> out;
  for (const auto& t : templates) {
    if (t.group == group && t.role == TemplateRole::Train) out.push_back(&t);
  }
  return out;
}

EvalTemplates eval_templates(TaskGroup group) {
  switch (group) {
    case TaskGroup::Sequential: return {"A-3", "A-9"};
    case TaskGroup::Direct: return {"B-5", "B-8"};
    case TaskGroup::Explanation: return {"C-3", "C-12"};
  }
  return {};
}

MultimodalField expand_item_field(const ItemRecord& item, int k, const Vocabulary& vocab) {
  if (k < 0) throw ConfigError("image token count must be non-negative");
  MultimodalField field;
  field.item_id = item.item_id;
  field.k = k;
  field.has_image = item.has_image;
  field.feature = item.has_image ? item.image_feature
                                 : Eigen::VectorXd::Zero(item.image_feature.size());
  field.tokens = encode(vocab, item.item_id);
  // Item ids are single words, so every piece already has whole-word id 0.
  std::fill(field.tokens.whole_word_ids.begin(), field.tokens.whole_word_ids.end(), 0);
  for (int i = 0; i < k; ++i) {
    field.tokens.token_ids.push_back(kPadId);
    field.tokens.whole_word_ids.push_back(0);
    field.tokens.category_ids.push_back(1);
  }
  return field;
}

std::vector<int> RenderedPrompt::target_ids() const {
  auto ids = target.token_ids;
  ids.push_back(kEosId);
  return ids;
}

std::size_t RenderedPrompt::visual_count() const {
  return static_cast<std::size_t>(
      std::count(input.category_ids.begin(), input.category_ids.end(), 1));
}

std::vector<std::string> history_for(const UserSplit& split, Split which) {
  std::vector<std::string> history = split.train;
  switch (which) {
    case Split::Train: history.pop_back(); break;
    case Split::Validation: break;
    case Split::Test: history.push_back(split.validation); break;
  }
  return history;
}

const std::string& target_for(const UserSplit& split, Split which) {
  switch (which) {
    case Split::Train: return split.train.back();
    case Split::Validation: return split.validation;
    case Split::Test: return split.test;
  }
  return split.test;
}

RenderedPrompt render(const PromptTemplate& tmpl, const Corpus& corpus, const SplitSpec& splits,
                      const std::string& user_id, int k, const Vocabulary& vocab,
                      const RenderContext& context) {
  if (!corpus.has_user(user_id)) throw ConfigError("unknown user " + user_id);
  std::vector<std::string> history;
  std::string item_id;
  std::string hint;
  std::string target_text;
  switch (tmpl.group) {
    case TaskGroup::Sequential: {
      const auto& s = splits.user(user_id);
      history = history_for(s, context.split);
      if (history.empty()) {
        throw ConfigError("user " + user_id + " has no history for the " +
                          to_string(context.split) + " split");
      }
      target_text = target_for(s, context.split);
      break;
    }
    case TaskGroup::Direct:
      if (!context.candidates) throw ConfigError("direct recommendation needs a candidate set");
      if (context.candidates->user_id != user_id) {
        throw ConfigError("candidate set belongs to another user");
      }
      target_text = context.candidates->ground_truth;
      break;
    case TaskGroup::Explanation: {
      if (!context.explanation_record) throw ConfigError("explanation needs a record");
      const auto& rec = corpus.interactions().at(*context.explanation_record);
      if (rec.user_id != user_id) throw ConfigError("explanation record belongs to another user");
      if (!rec.explanation) throw ConfigError("record has no explanation");
      item_id = rec.item_id;
      if (tmpl.uses("hint")) {
        if (!rec.hint_word) throw ConfigError("template " + tmpl.id + " needs a hint word");
        hint = *rec.hint_word;
      }
      target_text = *rec.explanation;
      break;
    }
  }

  const auto parts = segments(tmpl.input_pattern);
  std::size_t dropped = 0;
  while (true) {
    RenderedPrompt out;
    out.template_id = tmpl.id;
    out.group = tmpl.group;
    out.user_id = user_id;
    out.k = k;
    out.truncated_history = dropped;
    PromptBuilder builder(vocab, out);
    auto item_list = [&](const std::vector<std::string>& ids) {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) builder.text(",");
        builder.item(expand_item_field(corpus.item(ids[i]), k, vocab));
      }
    };
    for (const auto& seg : parts) {
      if (!seg.placeholder) {
        builder.text(seg.text);
      } else if (seg.text == "user") {
        builder.text(user_id);
      } else if (seg.text == "history") {
        item_list({history.begin() + static_cast<std::ptrdiff_t>(dropped), history.end()});
      } else if (seg.text == "candidates") {
        item_list(context.candidates->item_ids);
      } else if (seg.text == "item") {
        builder.item(expand_item_field(corpus.item(item_id), k, vocab));
      } else if (seg.text == "hint") {
        builder.text(hint);
      }
    }
    builder.finish(corpus.d_v());
    if (out.input.size() <= context.max_length) {
      std::string target_pattern = tmpl.target_pattern;
      const auto key = tmpl.group == TaskGroup::Explanation ? "{explanation}" : "{item}";
      target_pattern.replace(target_pattern.find(key), std::string(key).size(), target_text);
      out.target_text = target_pattern;
      out.target = encode(vocab, out.target_text);
      return out;
    }
    if (tmpl.group != TaskGroup::Sequential || dropped + 1 >= history.size()) {
      throw ConfigError("prompt " + tmpl.id + " for " + user_id + " needs " +
                        std::to_string(out.input.size()) + " positions; the maximum is " +
                        std::to_string(context.max_length));
    }
    ++dropped;
  }
}

std::vector<std::string> vocabulary_texts(const Corpus& corpus,
                                          const std::vector<PromptTemplate>& templates) {
  std::vector<std::string> texts;
  for (const auto& t : templates) {
    // Placeholder names are not prompt words; drop them.
    std::string input;
    for (const auto& seg : segments(t.input_pattern)) {
      if (!seg.placeholder) input += seg.text + ' ';
    }
    texts.push_back(input);
  }
  texts.push_back(",");
  for (const auto& u : corpus.users()) texts.push_back(u);
  for (const auto& [id, item] : corpus.items()) {
    texts.push_back(id);
    if (!item.title.empty()) texts.push_back(item.title);
  }
  for (const auto& r : corpus.interactions()) {
    if (r.explanation) texts.push_back(*r.explanation);
    if (r.hint_word) texts.push_back(*r.hint_word);
  }
  return texts;
}

}  // namespace mfm
