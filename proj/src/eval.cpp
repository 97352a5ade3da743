// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include "mfm/eval.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

namespace mfm {

int hr_at_k(const RankingResult& r, int k) {
  const auto n = std::min(r.ranked.size(), static_cast<std::size_t>(std::max(k, 0)));
  return std::find(r.ranked.begin(), r.ranked.begin() + static_cast<std::ptrdiff_t>(n), r.ground_truth) !=
                 r.ranked.begin() + static_cast<std::ptrdiff_t>(n)
             ? 1
             : 0;
}

double ndcg_at_k(const RankingResult& r, int k) {
  for (std::size_t i = 0; i < r.ranked.size() && static_cast<int>(i) < k; ++i) {
    if (r.ranked[i] == r.ground_truth) return 1.0 / std::log2(static_cast<double>(i) + 2.0);
  }
  return 0.0;
}

std::vector<std::string> metric_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      flush();
    } else if (std::ispunct(c)) {
      flush();
      out.emplace_back(1, static_cast<char>(c));
    } else {
      word += static_cast<char>(std::tolower(c));
    }
  }
  flush();
  return out;
}

namespace {

using Ngrams = std::map<std::vector<std::string>, int>;

Ngrams count_ngrams(const std::vector<std::string>& tokens, std::size_t n) {
  Ngrams out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++out[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                   tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

int overlap(const Ngrams& candidate, const Ngrams& reference) {
  int hits = 0;
  for (const auto& [gram, count] : candidate) {
    auto it = reference.find(gram);
    if (it != reference.end()) hits += std::min(count, it->second);
  }
  return hits;
}

double f1(double hits, double candidate_total, double reference_total) {
  if (hits == 0) return 0.0;
  const double p = hits / candidate_total;
  const double r = hits / reference_total;
  return 2 * p * r / (p + r);
}

std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

}  // namespace

double bleu4(const std::vector<TextPair>& pairs) {
  std::array<double, 4> hits{};
  std::array<double, 4> totals{};
  double cand_len = 0;
  double ref_len = 0;
  for (const auto& p : pairs) {
    const auto c = metric_tokens(p.generated);
    const auto r = metric_tokens(p.reference);
    cand_len += double(c.size());
    ref_len += double(r.size());
    for (std::size_t n = 1; n <= 4; ++n) {
      const auto cg = count_ngrams(c, n);
      hits[n - 1] += overlap(cg, count_ngrams(r, n));
      totals[n - 1] += c.size() >= n ? double(c.size() - n + 1) : 0.0;
    }
  }
  if (cand_len == 0) return 0.0;
  double log_sum = 0;
  for (std::size_t n = 0; n < 4; ++n) {
    if (hits[n] == 0) return 0.0;
    log_sum += std::log(hits[n] / totals[n]);
  }
  const double bp = cand_len < ref_len ? std::exp(1.0 - ref_len / cand_len) : 1.0;
  return bp * std::exp(log_sum / 4.0);
}

double rouge(const std::vector<TextPair>& pairs, RougeVariant variant) {
  if (pairs.empty()) return 0.0;
  double sum = 0;
  for (const auto& p : pairs) {
    const auto c = metric_tokens(p.generated);
    const auto r = metric_tokens(p.reference);
    if (variant == RougeVariant::RL) {
      sum += f1(double(lcs(c, r)), double(c.size()), double(r.size()));
      continue;
    }
    const std::size_t n = variant == RougeVariant::R1 ? 1 : 2;
    const auto cg = count_ngrams(c, n);
    const auto rg = count_ngrams(r, n);
    if (cg.empty() && rg.empty()) {
      // Too short for any n-gram: only an exact match counts.
      sum += (c == r && !c.empty()) ? 1.0 : 0.0;
      continue;
    }
    const double ct = c.size() >= n ? double(c.size() - n + 1) : 0.0;
    const double rt = r.size() >= n ? double(r.size() - n + 1) : 0.0;
    sum += f1(overlap(cg, rg), ct, rt);
  }
  return sum / double(pairs.size());
}

namespace {

// Generated items mapped to corpus ids; invalid and repeated entries dropped.
std::vector<std::pair<std::string, double>> ranked_items(const std::vector<RankedOutput>& outputs,
                                                         const Corpus& corpus, const ItemTrie* trie,
                                                         std::size_t& dropped) {
  std::vector<std::pair<std::string, double>> out;
  std::set<std::string> seen;
  for (const auto& o : outputs) {
    std::optional<std::string> item;
    if (trie) item = trie->lookup(o.tokens);
    if (!item && corpus.has_item(o.text)) item = o.text;
    if (!item || !seen.insert(*item).second) {
      ++dropped;
      continue;
    }
    out.emplace_back(*item, o.score);
  }
  return out;
}

}  // namespace

template <typename Scalar>
EvalReport evaluate(const ParameterStore<Scalar>& params, const TaskData& data, const DecodeConfig& config,
                    TaskGroup group, const std::string& template_id, const EvalOptions& options) {
  config.validate();
  const auto& tmpl = find_template(data.templates, template_id);
  if (tmpl.group != group) {
    throw ConfigError("template " + template_id + " belongs to " + to_string(tmpl.group) + ", not " +
                      to_string(group));
  }
  const auto& mc = params.config();
  EvalReport report;
  report.group = group;
  report.template_id = template_id;
  report.split = options.split;
  report.fingerprint = options.fingerprint;
  RenderContext ctx;
  ctx.split = options.split;
  ctx.max_length = static_cast<std::size_t>(mc.max_len);
  auto record = [&](const std::string& user, int rank, const std::string& out, double score) {
    if (options.records) options.records->push_back({user, template_id, rank, out, score});
  };

  if (group == TaskGroup::Explanation) {
    std::vector<TextPair> pairs;
    for (auto index : data.splits.explanation(options.split)) {
      ctx.explanation_record = index;
      const auto& user = data.corpus.interactions().at(index).user_id;
      const auto prompt = render(tmpl, data.corpus, data.splits, user, mc.image_tokens, data.vocab, ctx);
      const auto text = config.mode == DecodeMode::Greedy
                            ? greedy_decode(params, prompt, data.vocab, config)
                            : [&] {
                                auto beams = beam_search(params, prompt, data.vocab, config);
                                return beams.empty() ? std::string() : beams.front().text;
                              }();
      record(user, 1, text, 0.0);
      pairs.push_back({text, prompt.target_text});
    }
    report.instances = pairs.size();
    if (!pairs.empty()) {
      report.metrics["BLEU4"] = 100.0 * bleu4(pairs);
      report.metrics["ROUGE1"] = 100.0 * rouge(pairs, RougeVariant::R1);
      report.metrics["ROUGE2"] = 100.0 * rouge(pairs, RougeVariant::R2);
      report.metrics["ROUGEL"] = 100.0 * rouge(pairs, RougeVariant::RL);
    }
    return report;
  }

  const std::vector<int> cutoffs = group == TaskGroup::Direct ? std::vector<int>{1, 5, 10} : std::vector<int>{5, 10};
  std::map<std::string, double> sums;
  std::optional<ItemTrie> full_trie;
  if (group == TaskGroup::Sequential && config.constrain_to_items) full_trie = build_item_trie(data.corpus, data.vocab);
  std::vector<CandidateSet> candidates;
  if (group == TaskGroup::Direct) {
    candidates = build_candidate_sets(data.corpus, data.splits, options.split, options.seed, options.candidate_size);
  }
  for (std::size_t u = 0; u < data.corpus.users().size(); ++u) {
    const auto& user = data.corpus.users()[u];
    std::optional<ItemTrie> local;
    const ItemTrie* trie = full_trie ? &*full_trie : nullptr;
    if (group == TaskGroup::Direct) {
      ctx.candidates = &candidates[u];
      if (config.constrain_to_items) {
        local = build_item_trie(candidates[u].item_ids, data.vocab);
        trie = &*local;
      }
    } else if (history_for(data.splits.user(user), options.split).empty()) {
      continue;
    }
    const auto prompt = render(tmpl, data.corpus, data.splits, user, mc.image_tokens, data.vocab, ctx);
    const auto outputs = beam_search(params, prompt, data.vocab, config, trie);
    RankingResult r;
    r.ground_truth = prompt.target_text;
    const auto items = ranked_items(outputs, data.corpus, trie, report.dropped);
    for (std::size_t i = 0; i < items.size(); ++i) {
      r.ranked.push_back(items[i].first);
      record(user, int(i) + 1, items[i].first, items[i].second);
    }
    for (int k : cutoffs) sums["HR@" + std::to_string(k)] += hr_at_k(r, k);
    for (int k : {5, 10}) sums["NDCG@" + std::to_string(k)] += ndcg_at_k(r, k);
    ++report.instances;
  }
  for (const auto& [name, total] : sums) {
    report.metrics[name] = report.instances ? total / double(report.instances) : 0.0;
  }
  return report;
}

std::string format_report_table(const std::vector<EvalReport>& reports) {
  std::set<std::string> label_keys;
  std::set<std::string> metric_keys;
  for (const auto& r : reports) {
    for (const auto& [k, v] : r.labels) label_keys.insert(k);
    for (const auto& [k, v] : r.metrics) metric_keys.insert(k);
  }
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"group", "template", "split"};
  header.insert(header.end(), label_keys.begin(), label_keys.end());
  header.insert(header.end(), metric_keys.begin(), metric_keys.end());
  header.push_back("n");
  rows.push_back(header);
  char buf[32];
  for (const auto& r : reports) {
    std::vector<std::string> row{to_string(r.group), r.template_id, to_string(r.split)};
    for (const auto& k : label_keys) {
      auto it = r.labels.find(k);
      row.push_back(it == r.labels.end() ? "-" : it->second);
    }
    for (const auto& k : metric_keys) {
      auto it = r.metrics.find(k);
      if (it == r.metrics.end()) {
        row.emplace_back("-");
      } else {
        std::snprintf(buf, sizeof buf, "%.4f", it->second);
        row.emplace_back(buf);
      }
    }
    row.push_back(std::to_string(r.instances));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out += row[i];
      if (i + 1 < row.size()) out += std::string(width[i] - row[i].size() + 2, ' ');
    }
    out += '\n';
  }
  return out;
}

std::string to_json_line(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["group"] = to_string(report.group);
  j["template"] = report.template_id;
  j["split"] = to_string(report.split);
  j["metrics"] = report.metrics;
  j["instances"] = report.instances;
  j["dropped"] = report.dropped;
  j["fingerprint"] = report.fingerprint;
  j["labels"] = report.labels;
  return j.dump();
}

EvalReport parse_json_line(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    EvalReport r;
    r.group = parse_task_group(j.at("group").get<std::string>());
    r.template_id = j.at("template").get<std::string>();
    r.split = parse_split(j.at("split").get<std::string>());
    r.metrics = j.at("metrics").get<std::map<std::string, double>>();
    r.instances = j.at("instances").get<std::size_t>();
    r.dropped = j.value("dropped", std::size_t{0});
    r.fingerprint = j.value("fingerprint", std::string());
    r.labels = j.value("labels", std::map<std::string, std::string>{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad report record: ") + e.what(), 0);
  }
}

std::vector<std::pair<TaskGroup, std::string>> evaluation_protocol() {
  std::vector<std::pair<TaskGroup, std::string>> out;
  for (auto g : {TaskGroup::Sequential, TaskGroup::Direct, TaskGroup::Explanation}) {
    const auto ids = eval_templates(g);
    out.emplace_back(g, ids.seen);
    out.emplace_back(g, ids.unseen);
  }
  return out;
}

template <typename Scalar>
std::vector<EvalReport> evaluate_protocol(const ParameterStore<Scalar>& params, const TaskData& data,
                                          const DecodeConfig& config, const std::vector<TaskGroup>& groups,
                                          const EvalOptions& options) {
  std::vector<EvalReport> out;
  for (const auto& [group, id] : evaluation_protocol()) {
    if (std::find(groups.begin(), groups.end(), group) == groups.end()) continue;
    // Text generation decodes greedily; ranking groups keep the beam.
    auto c = config;
    if (group == TaskGroup::Explanation) c.mode = DecodeMode::Greedy;
    out.push_back(evaluate(params, data, c, group, id, options));
  }
  return out;
}

template std::vector<EvalReport> evaluate_protocol<float>(const ParameterStore<float>&, const TaskData&,
                                                          const DecodeConfig&, const std::vector<TaskGroup>&,
                                                          const EvalOptions&);
template std::vector<EvalReport> evaluate_protocol<double>(const ParameterStore<double>&, const TaskData&,
                                                           const DecodeConfig&, const std::vector<TaskGroup>&,
                                                           const EvalOptions&);

template EvalReport evaluate<float>(const ParameterStore<float>&, const TaskData&, const DecodeConfig&, TaskGroup,
                                    const std::string&, const EvalOptions&);
template EvalReport evaluate<double>(const ParameterStore<double>&, const TaskData&, const DecodeConfig&,
                                     TaskGroup, const std::string&, const EvalOptions&);

}  // namespace mfm
