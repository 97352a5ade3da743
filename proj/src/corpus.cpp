// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include "mfm/corpus.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

namespace mfm {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::vector<std::string> split_spaces(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string word;
  while (in >> word) out.push_back(word);
  return out;
}

template <typename T>
bool parse_number(const std::string& text, T& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

// Splits into lines, dropping a trailing '\r'. Line numbers are 1-based.
std::vector<std::pair<std::size_t, std::string>> numbered_lines(const std::string& text) {
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.emplace_back(number, line);
  }
  return lines;
}

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Corpus::Corpus(std::vector<ItemRecord> items, std::vector<Interaction> interactions, int d_v)
    : d_v_(d_v), interactions_(std::move(interactions)) {
  if (d_v_ <= 0) throw DimensionError("corpus feature dimension must be positive");
  for (auto& item : items) {
    if (item.has_image) {
      if (item.image_feature.size() != d_v_) {
        throw DimensionError("item " + item.item_id + ": feature length " +
                             std::to_string(item.image_feature.size()) + " != d_v " +
                             std::to_string(d_v_));
      }
    } else {
      item.image_feature = Eigen::VectorXd::Zero(d_v_);
    }
    const std::string id = item.item_id;
    if (!items_.emplace(id, std::move(item)).second) {
      throw ConfigError("duplicate item id " + id);
    }
  }
  for (std::size_t i = 0; i < interactions_.size(); ++i) {
    const auto& rec = interactions_[i];
    if (!items_.count(rec.item_id)) {
      throw ConfigError("interaction references unknown item " + rec.item_id);
    }
    auto [it, inserted] = user_index_.emplace(rec.user_id, users_.size());
    if (inserted) {
      users_.push_back(rec.user_id);
      histories_.emplace_back();
    }
    histories_[it->second].push_back(i);
  }
  for (std::size_t u = 0; u < users_.size(); ++u) {
    auto& h = histories_[u];
    if (h.size() < 3) {
      throw ConfigError("user " + users_[u] + " has fewer than 3 interactions");
    }
    std::stable_sort(h.begin(), h.end(), [this](std::size_t a, std::size_t b) {
      return interactions_[a].timestamp < interactions_[b].timestamp;
    });
  }
}

const ItemRecord& Corpus::item(const std::string& item_id) const {
  auto it = items_.find(item_id);
  if (it == items_.end()) throw RangeError("unknown item " + item_id);
  return it->second;
}

std::size_t Corpus::user_index(const std::string& user_id) const {
  auto it = user_index_.find(user_id);
  if (it == user_index_.end()) throw RangeError("unknown user " + user_id);
  return it->second;
}

const std::vector<std::size_t>& Corpus::history(const std::string& user_id) const {
  return histories_[user_index(user_id)];
}

std::vector<std::string> Corpus::item_sequence(const std::string& user_id) const {
  std::vector<std::string> seq;
  for (auto i : history(user_id)) seq.push_back(interactions_[i].item_id);
  return seq;
}

bool operator==(const Corpus& a, const Corpus& b) {
  if (a.d_v_ != b.d_v_ || a.users_ != b.users_ || a.items_.size() != b.items_.size() ||
      a.interactions_.size() != b.interactions_.size()) {
    return false;
  }
  for (auto ia = a.items_.begin(), ib = b.items_.begin(); ia != a.items_.end(); ++ia, ++ib) {
    const auto& x = ia->second;
    const auto& y = ib->second;
    if (x.item_id != y.item_id || x.title != y.title || x.has_image != y.has_image ||
        x.image_feature != y.image_feature) {
      return false;
    }
  }
  for (std::size_t i = 0; i < a.interactions_.size(); ++i) {
    const auto& x = a.interactions_[i];
    const auto& y = b.interactions_[i];
    if (x.user_id != y.user_id || x.item_id != y.item_id || x.timestamp != y.timestamp ||
        x.rating != y.rating || x.explanation != y.explanation || x.hint_word != y.hint_word) {
      return false;
    }
  }
  return true;
}

IngestResult ingest_text(const std::string& interactions_text, const std::string& features_text) {
  // Features.
  int d_v = 0;
  std::vector<ItemRecord> items;
  std::unordered_set<std::string> seen_items;
  bool header_seen = false;
  for (const auto& [number, line] : numbered_lines(features_text)) {
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    if (!header_seen) {
      if (line.rfind("d_v=", 0) != 0 || !parse_number(line.substr(4), d_v) || d_v <= 0) {
        throw ParseError("feature file must start with d_v=<positive int>", number);
      }
      header_seen = true;
      continue;
    }
    const auto tokens = split_spaces(line);
    ItemRecord item;
    item.item_id = tokens.front();
    if (tokens.size() - 1 != static_cast<std::size_t>(d_v)) {
      throw DimensionError("item " + item.item_id + ": feature length " +
                           std::to_string(tokens.size() - 1) + " != d_v " + std::to_string(d_v) +
                           " (line " + std::to_string(number) + ")");
    }
    item.image_feature.resize(d_v);
    for (int j = 0; j < d_v; ++j) {
      double v = 0.0;
      if (!parse_number(tokens[j + 1], v)) {
        throw ParseError("bad real '" + tokens[j + 1] + "' for item " + item.item_id, number);
      }
      item.image_feature[j] = v;
    }
    item.has_image = true;
    if (!seen_items.insert(item.item_id).second) {
      throw ParseError("duplicate feature line for item " + item.item_id, number);
    }
    items.push_back(std::move(item));
  }
  if (!header_seen) throw ParseError("feature file is missing the d_v header", 1);

  // Interactions.
  std::vector<Interaction> records;
  for (const auto& [number, line] : numbered_lines(interactions_text)) {
    if (line.empty()) continue;
    auto fields = split_tabs(line);
    if (fields.size() < 3 || fields.size() > 6) {
      throw ParseError("expected 3 to 6 tab-separated fields, got " +
                           std::to_string(fields.size()),
                       number);
    }
    fields.resize(6);
    Interaction rec;
    rec.user_id = fields[0];
    rec.item_id = fields[1];
    if (rec.user_id.empty() || rec.item_id.empty()) {
      throw ParseError("empty user or item id", number);
    }
    if (!parse_number(fields[2], rec.timestamp)) {
      throw ParseError("bad timestamp '" + fields[2] + "'", number);
    }
    if (!fields[3].empty()) {
      int rating = 0;
      if (!parse_number(fields[3], rating) || rating < 1 || rating > 5) {
        throw ParseError("rating must be an integer in 1..5, got '" + fields[3] + "'", number);
      }
      rec.rating = rating;
    }
    if (!fields[4].empty()) rec.explanation = fields[4];
    if (!fields[5].empty()) rec.hint_word = fields[5];
    if (seen_items.insert(rec.item_id).second) {
      ItemRecord item;
      item.item_id = rec.item_id;
      items.push_back(std::move(item));
    }
    records.push_back(std::move(rec));
  }

  std::map<std::string, std::size_t> counts;
  for (const auto& r : records) ++counts[r.user_id];
  IngestResult result{Corpus({}, {}, 1), 0, 0, {}};
  std::vector<Interaction> kept;
  for (auto& r : records) {
    if (counts[r.user_id] >= 3) {
      kept.push_back(std::move(r));
    } else {
      ++result.dropped_interactions;
    }
  }
  for (const auto& [user, n] : counts) {
    if (n < 3) {
      ++result.dropped_users;
      result.warnings.push_back("dropped user " + user + " with " + std::to_string(n) +
                                " interaction(s); at least 3 are required");
    }
  }
  if (result.dropped_users > 0) {
    result.warnings.push_back("dropped " + std::to_string(result.dropped_users) + " user(s) and " +
                              std::to_string(result.dropped_interactions) + " interaction(s)");
  }
  if (kept.empty()) result.warnings.push_back("corpus has no users");
  result.corpus = Corpus(std::move(items), std::move(kept), d_v);
  return result;
}

IngestResult ingest(const std::filesystem::path& interactions_path,
                    const std::filesystem::path& features_path) {
  return ingest_text(read_file(interactions_path), read_file(features_path));
}

std::string format_interactions(const Corpus& corpus) {
  std::string out;
  for (const auto& r : corpus.interactions()) {
    out += r.user_id + '\t' + r.item_id + '\t' + std::to_string(r.timestamp) + '\t' +
           (r.rating ? std::to_string(*r.rating) : std::string()) + '\t' +
           r.explanation.value_or("") + '\t' + r.hint_word.value_or("") + '\n';
  }
  return out;
}

std::string format_features(const Corpus& corpus) {
  std::string out = "d_v=" + std::to_string(corpus.d_v()) + '\n';
  for (const auto& [id, item] : corpus.items()) {
    if (!item.has_image) continue;
    out += id;
    for (Eigen::Index j = 0; j < item.image_feature.size(); ++j) {
      out += ' ' + format_real(item.image_feature[j]);
    }
    out += '\n';
  }
  return out;
}

void write_interactions(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, format_interactions(corpus));
}

void write_features(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, format_features(corpus));
}

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Validation: return "validation";
    case Split::Test: return "test";
  }
  return "?";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "validation" || name == "val") return Split::Validation;
  if (name == "test") return Split::Test;
  throw ConfigError("unknown split '" + name + "'");
}

const UserSplit& SplitSpec::user(const std::string& user_id) const {
  for (const auto& s : sequential) {
    if (s.user_id == user_id) return s;
  }
  throw RangeError("no split for user " + user_id);
}

const std::vector<std::size_t>& SplitSpec::explanation(Split split) const {
  switch (split) {
    case Split::Train: return explanation_train;
    case Split::Validation: return explanation_validation;
    case Split::Test: return explanation_test;
  }
  return explanation_test;
}

SplitSpec build_sequential_splits(const Corpus& corpus) {
  SplitSpec spec;
  for (const auto& user : corpus.users()) {
    auto seq = corpus.item_sequence(user);
    UserSplit s;
    s.user_id = user;
    s.test = seq.back();
    s.validation = seq[seq.size() - 2];
    seq.resize(seq.size() - 2);
    s.train = std::move(seq);
    spec.sequential.push_back(std::move(s));
  }
  return spec;
}

SplitSpec build_explanation_splits(const Corpus& corpus, std::uint64_t seed) {
  std::vector<std::size_t> records;
  for (std::size_t i = 0; i < corpus.interactions().size(); ++i) {
    if (corpus.interactions()[i].explanation) records.push_back(i);
  }
  if (records.empty()) throw ConfigError("explanation task is empty: no record has an explanation");
  Rng rng(derive_seed(seed, "explanation-split"));
  shuffle(records.begin(), records.end(), rng);
  const auto n = static_cast<double>(records.size());
  const auto n_val = static_cast<std::size_t>(std::lround(0.1 * n));
  const auto n_test = n_val;
  const auto n_train = records.size() - n_val - n_test;
  SplitSpec spec;
  spec.explanation_train.assign(records.begin(), records.begin() + n_train);
  spec.explanation_validation.assign(records.begin() + n_train,
                                     records.begin() + n_train + n_val);
  spec.explanation_test.assign(records.begin() + n_train + n_val, records.end());
  return spec;
}

SplitSpec build_splits(const Corpus& corpus, std::uint64_t seed) {
  auto spec = build_sequential_splits(corpus);
  const bool any = std::any_of(corpus.interactions().begin(), corpus.interactions().end(),
                               [](const Interaction& r) { return r.explanation.has_value(); });
  if (any) {
    auto expl = build_explanation_splits(corpus, seed);
    spec.explanation_train = std::move(expl.explanation_train);
    spec.explanation_validation = std::move(expl.explanation_validation);
    spec.explanation_test = std::move(expl.explanation_test);
  }
  return spec;
}

CandidateSet sample_candidate_set(const Corpus& corpus, const std::string& user_id,
                                  const std::string& ground_truth, std::size_t size, Rng& rng) {
  if (size == 0) throw ConfigError("candidate size must be positive");
  std::unordered_set<std::string> interacted;
  for (auto i : corpus.history(user_id)) interacted.insert(corpus.interactions()[i].item_id);
  std::vector<std::string> eligible;
  for (const auto& [id, item] : corpus.items()) {
    if (!interacted.count(id)) eligible.push_back(id);
  }
  const std::size_t needed = size - 1;
  if (eligible.size() < needed) {
    throw ConfigError("too few eligible negatives for user " + user_id + ": need " +
                      std::to_string(needed) + ", have " + std::to_string(eligible.size()) +
                      "; use a smaller candidate size");
  }
  // Partial Fisher-Yates: the first `needed` slots become the sample.
  for (std::size_t i = 0; i < needed; ++i) {
    const auto j = i + uniform_index(rng, eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }
  CandidateSet set;
  set.user_id = user_id;
  set.ground_truth = ground_truth;
  set.item_ids.assign(eligible.begin(), eligible.begin() + needed);
  set.item_ids.push_back(ground_truth);
  shuffle(set.item_ids.begin(), set.item_ids.end(), rng);
  return set;
}

std::vector<CandidateSet> build_candidate_sets(const Corpus& corpus, const SplitSpec& splits,
                                               Split split, std::uint64_t seed, std::size_t size) {
  Rng rng(derive_seed(seed, std::string("candidates/") + to_string(split)));
  std::vector<CandidateSet> out;
  out.reserve(splits.sequential.size());
  for (const auto& s : splits.sequential) {
    const std::string& truth = split == Split::Train        ? s.train.back()
                               : split == Split::Validation ? s.validation
                                                            : s.test;
    out.push_back(sample_candidate_set(corpus, s.user_id, truth, size, rng));
  }
  return out;
}

std::size_t synthetic_cluster(std::size_t item_index, std::size_t clusters) {
  // Hashed so the cluster cannot be read off the digits of the item id.
  return clusters == 0 ? 0 : fnv1a(std::to_string(item_index)) % clusters;
}

const std::vector<std::string>& synthetic_lexicon() {
  static const std::vector<std::string> words = {"color", "fit",   "price", "quality",
                                                 "size",  "style", "fabric", "comfort"};
  return words;
}

namespace {

Eigen::VectorXd random_unit(int d, Rng& rng) {
  Eigen::VectorXd v(d);
  for (int j = 0; j < d; ++j) v[j] = standard_normal(rng);
  return v / v.norm();
}

std::string synthetic_explanation(int rating, const std::string& hint, std::size_t item_index) {
  static const char* positive[] = {"the %s is great", "i love the %s", "really nice %s"};
  static const char* neutral[] = {"the %s is fine", "the %s is okay", "decent %s overall"};
  static const char* negative[] = {"the %s is poor", "i dislike the %s", "bad %s overall"};
  const char** bank = rating >= 4 ? positive : rating == 3 ? neutral : negative;
  const char* pattern = bank[item_index % 3];
  char buf[128];
  std::snprintf(buf, sizeof buf, pattern, hint.c_str());
  return buf;
}

}  // namespace

Corpus synthesize(const GeneratorParams& params, std::uint64_t seed) {
  if (params.users == 0 || params.items == 0) throw ConfigError("synth: empty corpus requested");
  if (params.d_v <= 0) throw ConfigError("synth: d_v must be positive");
  if (params.min_length < 3 || params.max_length < params.min_length) {
    throw ConfigError("synth: need 3 <= min_length <= max_length");
  }
  if (params.pattern_strength < 0.0 || params.pattern_strength > 1.0) {
    throw ConfigError("synth: pattern strength must lie in [0, 1]");
  }
  if (params.items < params.candidate_size + params.max_length) {
    throw ConfigError("synth: item count " + std::to_string(params.items) +
                      " is below candidate size + max sequence length (" +
                      std::to_string(params.candidate_size + params.max_length) + ")");
  }
  if (params.clusters == 0 && (params.period == 0 || params.period > params.items)) {
    throw ConfigError("synth: period must lie in [1, items]");
  }
  if (params.clusters > params.items) throw ConfigError("synth: more clusters than items");

  Rng rng(derive_seed(seed, "synth"));
  std::vector<std::string> item_ids;
  std::vector<ItemRecord> items;
  std::vector<Eigen::VectorXd> centroids;
  for (std::size_t c = 0; c < params.clusters; ++c) centroids.push_back(random_unit(params.d_v, rng));
  for (std::size_t i = 0; i < params.items; ++i) {
    ItemRecord item;
    item.item_id = "item_" + std::to_string(i + 1);
    if (params.clusters > 0) {
      Eigen::VectorXd v = centroids[synthetic_cluster(i, params.clusters)];
      for (int j = 0; j < params.d_v; ++j) {
        v[j] += params.cluster_noise * standard_normal(rng) / std::sqrt(double(params.d_v));
      }
      item.image_feature = v / v.norm();
    } else {
      item.image_feature = random_unit(params.d_v, rng);
    }
    item.has_image = true;
    item_ids.push_back(item.item_id);
    items.push_back(std::move(item));
  }

  std::vector<std::vector<std::size_t>> by_cluster(params.clusters);
  for (std::size_t i = 0; i < params.items && params.clusters > 0; ++i) {
    by_cluster[synthetic_cluster(i, params.clusters)].push_back(i);
  }
  std::vector<std::size_t> occupied;
  for (std::size_t c = 0; c < by_cluster.size(); ++c) {
    if (!by_cluster[c].empty()) occupied.push_back(c);
  }

  const auto& lexicon = synthetic_lexicon();
  std::vector<Interaction> interactions;
  for (std::size_t u = 0; u < params.users; ++u) {
    const std::string user = "user_" + std::to_string(u + 1);
    const auto length =
        params.min_length + uniform_index(rng, params.max_length - params.min_length + 1);
    std::vector<std::size_t> sequence;
    if (params.clusters == 0) {
      std::vector<std::size_t> pool(params.items);
      std::iota(pool.begin(), pool.end(), 0);
      for (std::size_t i = 0; i < params.period; ++i) {
        std::swap(pool[i], pool[i + uniform_index(rng, params.items - i)]);
      }
      const auto offset = uniform_index(rng, params.period);
      for (std::size_t t = 0; t < length; ++t) {
        if (uniform01(rng) < params.pattern_strength) {
          sequence.push_back(pool[(offset + t) % params.period]);
        } else {
          sequence.push_back(uniform_index(rng, params.items));
        }
      }
    } else {
      auto members = by_cluster[occupied[uniform_index(rng, occupied.size())]];
      shuffle(members.begin(), members.end(), rng);
      std::size_t next_member = 0;
      for (std::size_t t = 0; t < length; ++t) {
        if (uniform01(rng) < params.pattern_strength) {
          sequence.push_back(members[next_member++ % members.size()]);
        } else {
          sequence.push_back(uniform_index(rng, params.items));
        }
      }
    }
    for (std::size_t t = 0; t < sequence.size(); ++t) {
      Interaction rec;
      rec.user_id = user;
      rec.item_id = item_ids[sequence[t]];
      rec.timestamp = 1'600'000'000 + static_cast<std::int64_t>(t) * 3600 +
                      static_cast<std::int64_t>(u);
      if (params.explanations) {
        const int rating = 1 + static_cast<int>(uniform_index(rng, 5));
        const auto& hint = lexicon[sequence[t] % lexicon.size()];
        rec.rating = rating;
        rec.hint_word = hint;
        rec.explanation = synthetic_explanation(rating, hint, sequence[t] / lexicon.size());
      }
      interactions.push_back(std::move(rec));
    }
  }
  return Corpus(std::move(items), std::move(interactions), params.d_v);
}

}  // namespace mfm
