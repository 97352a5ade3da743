// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include "mfm/run.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mfm/checkpoint.hpp"

namespace mfm {

namespace {

using Json = nlohmann::ordered_json;

// key, default
const std::vector<std::pair<std::string, std::string>> kDefaults = {
    {"run.seed", "0"},
    {"data.interactions", ""},
    {"data.features", ""},
    {"data.templates", "builtin"},
    {"synth.users", "50"},
    {"synth.items", "20"},
    {"synth.d_v", "16"},
    {"synth.min_length", "5"},
    {"synth.max_length", "8"},
    {"synth.pattern_strength", "1"},
    {"synth.period", "3"},
    {"synth.clusters", "0"},
    {"synth.cluster_noise", "0.25"},
    {"synth.candidate_size", "10"},
    {"synth.explanations", "true"},
    {"vocab.size", "512"},
    {"model.layers", "2"},
    {"model.d_model", "64"},
    {"model.heads", "4"},
    {"model.d_ff", "128"},
    {"model.image_tokens", "2"},
    {"model.reduction", "8"},
    {"model.max_len", "256"},
    {"model.max_whole_words", "256"},
    {"model.tuning_mode", "all_attn"},
    {"model.vocab_size", "0"},  // 0: taken from the vocabulary
    {"model.d_v", "0"},         // 0: taken from the corpus
    {"train.epochs", "10"},
    {"train.batch_size", "8"},
    {"train.learning_rate", "0.001"},
    {"train.weight_decay", "0.01"},
    {"train.beta1", "0.9"},
    {"train.beta2", "0.999"},
    {"train.adam_eps", "1e-8"},
    {"train.clip_norm", "1"},
    {"train.max_steps", "0"},
    {"train.groups", "sequential,direct,explanation"},
    {"train.candidate_size", "100"},
    {"train.direct_positive", "last"},
    {"train.template_weights", ""},
    {"decode.beam_size", "20"},
    {"decode.max_length", "16"},
    {"decode.mode", "beam"},
    {"decode.constrain_to_items", "true"},
    {"decode.alpha", "0"},
    {"decode.template", "A-3"},
    {"eval.split", "test"},
    {"eval.candidate_size", "100"},
    {"eval.groups", "sequential,direct,explanation"},
    {"eval.checkpoint", ""},
    {"eval.vocab", ""},
    {"gradcheck.probes", "200"},
    {"gradcheck.tolerance", "1e-4"},
    {"gradcheck.epsilon", "1e-3"},
    {"sweep.modes", "self_attn,all_attn,full"},
    {"sweep.reductions", "1,2,4,8,16"},
    {"sweep.image_tokens", "1,2,3,5"},
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    part = trim(part);
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

long as_long(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const long x = std::stol(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected an integer, got '" + v + "'");
}

double as_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used == v.size()) return x;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

std::size_t as_size(const std::string& key, const std::string& v) {
  const long x = as_long(key, v);
  if (x < 0) throw ConfigError(key + ": must be non-negative");
  return static_cast<std::size_t>(x);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& [k, v] : kDefaults) values_[k] = v;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::stringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'section.key = value'", number);
    try {
      c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), number);
    }
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void RunConfig::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not section.key=value");
  set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!values_.count(key)) throw ConfigError("unknown config key '" + key + "'");
  values_[key] = value;
  explicit_[key] = true;
}

const std::string& RunConfig::get(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::string RunConfig::resolved() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

std::string RunConfig::fingerprint() const {
  std::string text;
  for (const auto& [k, v] : values_) {
    if (k.rfind("run.", 0) != 0) text += k + "=" + v + "\n";
  }
  return hex64(fnv1a(text));
}

std::uint64_t RunConfig::seed() const {
  const long s = as_long("run.seed", get("run.seed"));
  if (s < 0) throw ConfigError("run.seed must be non-negative");
  return static_cast<std::uint64_t>(s);
}

GeneratorParams RunConfig::generator() const {
  GeneratorParams g;
  g.users = as_size("synth.users", get("synth.users"));
  g.items = as_size("synth.items", get("synth.items"));
  g.d_v = static_cast<int>(as_long("synth.d_v", get("synth.d_v")));
  g.min_length = as_size("synth.min_length", get("synth.min_length"));
  g.max_length = as_size("synth.max_length", get("synth.max_length"));
  g.pattern_strength = as_double("synth.pattern_strength", get("synth.pattern_strength"));
  g.period = as_size("synth.period", get("synth.period"));
  g.clusters = as_size("synth.clusters", get("synth.clusters"));
  g.cluster_noise = as_double("synth.cluster_noise", get("synth.cluster_noise"));
  g.candidate_size = as_size("synth.candidate_size", get("synth.candidate_size"));
  g.explanations = as_bool("synth.explanations", get("synth.explanations"));
  return g;
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.layers = static_cast<int>(as_long("model.layers", get("model.layers")));
  m.d_model = static_cast<int>(as_long("model.d_model", get("model.d_model")));
  m.heads = static_cast<int>(as_long("model.heads", get("model.heads")));
  m.d_ff = static_cast<int>(as_long("model.d_ff", get("model.d_ff")));
  m.image_tokens = static_cast<int>(as_long("model.image_tokens", get("model.image_tokens")));
  m.reduction = static_cast<int>(as_long("model.reduction", get("model.reduction")));
  m.max_len = static_cast<int>(as_long("model.max_len", get("model.max_len")));
  m.max_whole_words = static_cast<int>(as_long("model.max_whole_words", get("model.max_whole_words")));
  m.tuning_mode = parse_tuning_mode(get("model.tuning_mode"));
  m.vocab_size = static_cast<int>(as_long("model.vocab_size", get("model.vocab_size")));
  m.d_v = static_cast<int>(as_long("model.d_v", get("model.d_v")));
  return m;
}

TrainConfig RunConfig::train() const {
  TrainConfig t;
  t.epochs = static_cast<int>(as_long("train.epochs", get("train.epochs")));
  t.batch_size = static_cast<int>(as_long("train.batch_size", get("train.batch_size")));
  t.learning_rate = as_double("train.learning_rate", get("train.learning_rate"));
  t.weight_decay = as_double("train.weight_decay", get("train.weight_decay"));
  t.beta1 = as_double("train.beta1", get("train.beta1"));
  t.beta2 = as_double("train.beta2", get("train.beta2"));
  t.adam_eps = as_double("train.adam_eps", get("train.adam_eps"));
  t.clip_norm = as_double("train.clip_norm", get("train.clip_norm"));
  t.max_steps = as_long("train.max_steps", get("train.max_steps"));
  t.seed = seed();
  t.groups.clear();
  for (const auto& g : split_list(get("train.groups"))) t.groups.push_back(parse_task_group(g));
  t.candidate_size = as_size("train.candidate_size", get("train.candidate_size"));
  t.direct_positive = parse_direct_positive(get("train.direct_positive"));
  // "A-1:2, B-3:0.5"
  for (const auto& entry : split_list(get("train.template_weights"))) {
    const auto colon = entry.find(':');
    if (colon == std::string::npos) throw ConfigError("train.template_weights: expected id:weight, got " + entry);
    t.template_weights[trim(entry.substr(0, colon))] =
        as_double("train.template_weights", trim(entry.substr(colon + 1)));
  }
  return t;
}

DecodeConfig RunConfig::decode() const {
  DecodeConfig d;
  d.beam_size = static_cast<int>(as_long("decode.beam_size", get("decode.beam_size")));
  d.max_length = static_cast<int>(as_long("decode.max_length", get("decode.max_length")));
  d.mode = parse_decode_mode(get("decode.mode"));
  d.constrain_to_items = as_bool("decode.constrain_to_items", get("decode.constrain_to_items"));
  d.alpha = as_double("decode.alpha", get("decode.alpha"));
  return d;
}

std::vector<TaskGroup> RunConfig::eval_groups() const {
  std::vector<TaskGroup> out;
  for (const auto& g : split_list(get("eval.groups"))) out.push_back(parse_task_group(g));
  return out;
}

const std::vector<std::string> kCommands = {"synth",     "ingest",  "train", "evaluate", "decode",
                                            "gradcheck", "account", "sweep", "report"};

void RunConfig::validate(const std::string& command) const {
  if (std::find(kCommands.begin(), kCommands.end(), command) == kCommands.end()) {
    throw ConfigError("unknown command '" + command + "'");
  }
  // Typed accessors throw on malformed values.
  generator();
  train().validate();
  decode().validate();
  eval_groups();
  parse_split(get("eval.split"));
  for (const auto& m : split_list(get("sweep.modes"))) parse_tuning_mode(m);
  for (const auto& r : split_list(get("sweep.reductions"))) as_long("sweep.reductions", r);
  for (const auto& k : split_list(get("sweep.image_tokens"))) as_long("sweep.image_tokens", k);

  const bool seeded = command == "synth" || command == "train" || command == "sweep";
  if (seeded && !is_set("run.seed")) throw ConfigError(command + " requires run.seed");
  auto require_file = [&](const std::string& key) {
    const auto& p = get(key);
    if (p.empty()) throw ConfigError(command + " requires " + key);
    if (!std::filesystem::exists(p)) throw ConfigError(key + ": no such file " + p);
  };
  if (command == "ingest") {
    require_file("data.interactions");
    require_file("data.features");
  }
  if (!get("data.interactions").empty() && command != "synth") {
    require_file("data.interactions");
    require_file("data.features");
  }
  if (get("data.templates") != "builtin") require_file("data.templates");
  if (command == "evaluate" || command == "decode") {
    require_file("eval.checkpoint");
    require_file("eval.vocab");
  }
}

// ---------------------------------------------------------------------------

namespace {

struct Workspace {
  Corpus corpus;
  SplitSpec splits;
  std::vector<PromptTemplate> templates;
  Vocabulary vocab;

  TaskData data() const { return {corpus, splits, templates, vocab}; }
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + path.string());
}

Corpus load_corpus(const RunConfig& c, std::ostream& log) {
  if (c.get("data.interactions").empty()) return synthesize(c.generator(), c.seed());
  auto r = ingest(c.get("data.interactions"), c.get("data.features"));
  for (const auto& w : r.warnings) log << "warning: " << w << "\n";
  return std::move(r.corpus);
}

std::vector<PromptTemplate> load_templates(const RunConfig& c) {
  if (c.get("data.templates") == "builtin") return default_templates();
  return parse_templates(read_file(c.get("data.templates")));
}

Workspace workspace(const RunConfig& c, std::ostream& log, const Vocabulary* vocab = nullptr) {
  auto corpus = load_corpus(c, log);
  auto templates = load_templates(c);
  auto v = vocab ? *vocab
                 : build_vocab(vocabulary_texts(corpus, templates),
                               static_cast<int>(as_long("vocab.size", c.get("vocab.size"))));
  auto splits = build_splits(corpus, c.seed());
  return {std::move(corpus), std::move(splits), std::move(templates), std::move(v)};
}

ModelConfig model_for(const RunConfig& c, const Workspace& w) {
  auto m = c.model();
  if (m.vocab_size == 0) m.vocab_size = w.vocab.size();
  if (m.d_v == 0) m.d_v = w.corpus.d_v();
  if (m.vocab_size != w.vocab.size()) {
    throw DimensionError("model.vocab_size " + std::to_string(m.vocab_size) + " differs from the vocabulary (" +
                         std::to_string(w.vocab.size()) + ")");
  }
  if (m.d_v != w.corpus.d_v()) {
    throw DimensionError("model.d_v " + std::to_string(m.d_v) + " differs from the corpus (" +
                         std::to_string(w.corpus.d_v()) + ")");
  }
  m.validate();
  return m;
}

std::map<std::string, std::string> labels(const ModelConfig& m) {
  return {{"tuning_mode", to_string(m.tuning_mode)},
          {"r", std::to_string(m.reduction)},
          {"k", std::to_string(m.image_tokens)}};
}

Json accounting_json(const ModelConfig& m, const std::string& fp, std::optional<double> epoch_ms) {
  const auto count = count_parameters(parameter_layout(m), m.tuning_mode);
  Json j;
  j["fingerprint"] = fp;
  for (const auto& [k, v] : labels(m)) j[k] = v;
  j["total"] = count.total;
  j["trainable"] = count.trainable;
  j["percent"] = count.percent;
  if (epoch_ms) j["epoch_ms"] = *epoch_ms;
  return j;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  return v[v.size() / 2];
}

// VmRSS from /proc, or -1 where unavailable.
long resident_kb() {
  std::ifstream in("/proc/self/status");
  std::string key;
  while (in >> key) {
    if (key == "VmRSS:") {
      long kb = -1;
      in >> kb;
      return kb;
    }
    in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
  }
  return -1;
}

std::filesystem::path artifact(const std::filesystem::path& out, const std::string& stem, const std::string& fp,
                               const std::string& ext) {
  return out / (stem + "-" + fp + ext);
}

// Trains one model and writes vocab, checkpoint, per-epoch stats and
// accounting. Returns the trained parameters.
ParameterStore<float> train_run(const RunConfig& c, const Workspace& w, const std::filesystem::path& out,
                                std::ostream& log) {
  const auto fp = c.fingerprint();
  const auto m = model_for(c, w);
  auto params = initialize_parameters<float>(m, derive_seed(c.seed(), "model"));
  const auto tc = c.train();
  log << "train " << fp << ": " << to_string(m.tuning_mode) << " r=" << m.reduction << " k=" << m.image_tokens
      << ", " << params.count().trainable << " of " << params.count().total << " parameters trainable\n";
  std::string epochs;
  std::vector<double> ms;
  const long rss_before = resident_kb();
  auto result = train(params, tc, w.data());
  const long rss_after = resident_kb();
  std::string steps;
  char line[160];
  for (const auto& st : result.steps) {
    std::snprintf(line, sizeof line, "%d\t%ld\t%.6f\t%.6f\t%.3f\n", st.epoch, st.step, st.loss, st.grad_norm, st.ms);
    steps += line;
  }
  for (const auto& e : result.epochs) {
    Json j;
    j["epoch"] = e.epoch;
    j["mean_loss"] = e.mean_loss;
    j["ms"] = e.ms;
    j["steps"] = e.steps;
    j["tokens"] = e.tokens;
    epochs += j.dump() + "\n";
    ms.push_back(e.ms);
    log << "  epoch " << e.epoch << " loss " << e.mean_loss << " (" << static_cast<long>(e.ms) << " ms)\n";
  }
  w.vocab.save(artifact(out, "vocab", fp, ".txt"));
  save_checkpoint(params, artifact(out, "checkpoint", fp, ".bin"));
  write_file(artifact(out, "train", fp, ".jsonl"), epochs);
  write_file(artifact(out, "steps", fp, ".tsv"), steps);
  auto account = accounting_json(m, fp, ms.empty() ? std::nullopt : std::optional<double>(median(ms)));
  // Informational only; allocator reuse makes this noisy.
  if (rss_before >= 0 && rss_after >= 0) account["rss_delta_kb"] = rss_after - rss_before;
  write_file(artifact(out, "account", fp, ".json"), account.dump(2) + "\n");
  return params;
}

EvalOptions eval_options(const RunConfig& c) {
  EvalOptions eo;
  eo.split = parse_split(c.get("eval.split"));
  eo.candidate_size = as_size("eval.candidate_size", c.get("eval.candidate_size"));
  eo.seed = derive_seed(c.seed(), "candidates");
  eo.fingerprint = c.fingerprint();
  return eo;
}

void write_eval(const RunConfig& c, const Workspace& w, const ParameterStore<float>& params,
                const std::filesystem::path& out, std::ostream& log) {
  auto reports = evaluate_protocol(params, w.data(), c.decode(), c.eval_groups(), eval_options(c));
  std::string lines;
  for (auto& r : reports) {
    r.labels = labels(params.config());
    lines += to_json_line(r) + "\n";
  }
  write_file(artifact(out, "eval", c.fingerprint(), ".jsonl"), lines);
  log << format_report_table(reports);
}

}  // namespace

void execute(const std::string& command, const RunConfig& config, const std::filesystem::path& out,
             std::ostream& log) {
  if (command == "report") {
    log << report(out);
    return;
  }
  config.validate(command);
  std::filesystem::create_directories(out);
  const auto fp = config.fingerprint();
  write_file(artifact(out, "config", fp, ".txt"), config.resolved());

  if (command == "synth") {
    const auto corpus = synthesize(config.generator(), config.seed());
    write_interactions(corpus, artifact(out, "interactions", fp, ".tsv"));
    write_features(corpus, artifact(out, "features", fp, ".txt"));
    log << "synth " << fp << ": " << corpus.users().size() << " users, " << corpus.items().size() << " items, "
        << corpus.interactions().size() << " interactions\n";
  } else if (command == "ingest") {
    auto r = ingest(config.get("data.interactions"), config.get("data.features"));
    write_interactions(r.corpus, artifact(out, "interactions", fp, ".tsv"));
    write_features(r.corpus, artifact(out, "features", fp, ".txt"));
    Json j;
    j["fingerprint"] = fp;
    j["users"] = r.corpus.users().size();
    j["items"] = r.corpus.items().size();
    j["interactions"] = r.corpus.interactions().size();
    j["d_v"] = r.corpus.d_v();
    j["dropped_users"] = r.dropped_users;
    j["dropped_interactions"] = r.dropped_interactions;
    j["warnings"] = r.warnings;
    write_file(artifact(out, "ingest", fp, ".json"), j.dump(2) + "\n");
    for (const auto& w : r.warnings) log << "warning: " << w << "\n";
    log << "ingest " << fp << ": " << r.corpus.users().size() << " users kept, " << r.dropped_users
        << " dropped\n";
  } else if (command == "train") {
    const auto w = workspace(config, log);
    train_run(config, w, out, log);
  } else if (command == "evaluate" || command == "decode") {
    const auto vocab = Vocabulary::load(config.get("eval.vocab"));
    const auto w = workspace(config, log, &vocab);
    const auto params = load_checkpoint<float>(config.get("eval.checkpoint"), model_for(config, w));
    if (command == "evaluate") {
      write_eval(config, w, params, out, log);
    } else {
      const auto& id = config.get("decode.template");
      const auto& tmpl = find_template(w.templates, id);
      std::vector<DecodeRecord> records;
      auto eo = eval_options(config);
      eo.records = &records;
      auto dc = config.decode();
      evaluate(params, w.data(), dc, tmpl.group, id, eo);
      write_file(artifact(out, "decode", fp, ".tsv"), format_decode_records(records));
      log << "decode " << fp << ": " << records.size() << " records for " << id << "\n";
    }
  } else if (command == "gradcheck") {
    const auto w = workspace(config, log);
    const auto m = model_for(config, w);
    auto params = initialize_parameters<double>(m, derive_seed(config.seed(), "model"));
    // Off the identity point, so adapter down-projections carry gradient.
    randomize_adapters(params, derive_seed(config.seed(), "gradcheck/adapters"), 0.3);
    Rng rng(derive_seed(config.seed(), "gradcheck/batch"));
    auto tc = config.train();
    tc.candidate_size = std::min<std::size_t>(tc.candidate_size, 10);
    const auto inst = training_instances(w.data(), tc, m.image_tokens, static_cast<std::size_t>(m.max_len), rng);
    std::vector<const RenderedPrompt*> batch;
    for (std::size_t i = 0; i < std::min<std::size_t>(2, inst.size()); ++i) batch.push_back(&inst[i]);
    const auto report = grad_check(params, batch, as_size("gradcheck.probes", config.get("gradcheck.probes")),
                                   derive_seed(config.seed(), "gradcheck/probes"),
                                   as_double("gradcheck.epsilon", config.get("gradcheck.epsilon")),
                                   as_double("gradcheck.tolerance", config.get("gradcheck.tolerance")));
    Json j;
    j["fingerprint"] = fp;
    j["probes"] = report.probes.size();
    j["max_rel_error"] = report.max_rel_error;
    j["tolerance"] = report.tolerance;
    j["passed"] = report.passed();
    Json failures = Json::array();
    for (const auto& f : report.failures()) {
      failures.push_back({{"tensor", f.tensor}, {"row", f.row}, {"col", f.col}, {"analytic", f.analytic},
                          {"numeric", f.numeric}, {"rel_error", f.rel_error}});
    }
    j["failures"] = failures;
    write_file(artifact(out, "gradcheck", fp, ".json"), j.dump(2) + "\n");
    log << "gradcheck " << fp << ": " << report.probes.size() << " probes, max rel error " << report.max_rel_error
        << "\n";
    if (!report.passed()) {
      const auto f = report.failures().front();
      throw TrainingError("gradient check failed at " + f.tensor + "[" + std::to_string(f.row) + "," +
                          std::to_string(f.col) + "]: analytic " + std::to_string(f.analytic) + ", numeric " +
                          std::to_string(f.numeric));
    }
  } else if (command == "account") {
    auto m = config.model();
    if (m.vocab_size == 0) m.vocab_size = static_cast<int>(as_long("vocab.size", config.get("vocab.size")));
    if (m.d_v == 0) m.d_v = config.generator().d_v;
    m.validate();
    const auto j = accounting_json(m, fp, std::nullopt);
    write_file(artifact(out, "account", fp, ".json"), j.dump(2) + "\n");
    log << "account " << fp << ": " << to_string(m.tuning_mode) << " " << j["trainable"].get<std::size_t>()
        << " of " << j["total"].get<std::size_t>() << " trainable (" << j["percent"].get<double>() << "%)\n";
  } else if (command == "sweep") {
    const auto w = workspace(config, log);
    // One axis at a time around the configured point.
    std::vector<std::pair<std::string, std::string>> points;
    for (const auto& m : split_list(config.get("sweep.modes"))) points.emplace_back("model.tuning_mode", m);
    for (const auto& r : split_list(config.get("sweep.reductions"))) points.emplace_back("model.reduction", r);
    for (const auto& k : split_list(config.get("sweep.image_tokens"))) points.emplace_back("model.image_tokens", k);
    std::set<std::string> done;
    for (const auto& [key, value] : points) {
      auto point = config;
      point.set(key, value);
      const auto pfp = point.fingerprint();
      if (!done.insert(pfp).second) continue;
      write_file(artifact(out, "config", pfp, ".txt"), point.resolved());
      const auto params = train_run(point, w, out, log);
      write_eval(point, w, params, out, log);
    }
  }
}

std::string report(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("report: no such directory " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());

  struct Row {
    std::string group, tmpl, mode, r, k, fp;
    std::map<std::string, double> metrics;
  };
  std::vector<Row> rows;
  std::vector<Json> accounts;
  std::set<std::string> eval_fps;
  std::set<std::string> account_fps;
  std::vector<std::string> gaps;
  for (const auto& f : files) {
    const auto name = f.filename().string();
    if (name.rfind("eval-", 0) == 0 && f.extension() == ".jsonl") {
      std::stringstream in(read_file(f));
      std::string line;
      while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto r = parse_json_line(line);
        auto label = [&](const char* key) {
          auto it = r.labels.find(key);
          return it == r.labels.end() ? std::string("-") : it->second;
        };
        rows.push_back({to_string(r.group), r.template_id, label("tuning_mode"), label("r"), label("k"),
                        r.fingerprint, r.metrics});
        eval_fps.insert(r.fingerprint);
      }
    } else if (name.rfind("account-", 0) == 0 && f.extension() == ".json") {
      try {
        accounts.push_back(Json::parse(read_file(f)));
        account_fps.insert(accounts.back().value("fingerprint", ""));
      } catch (const Json::exception& e) {
        gaps.push_back(name + " is unreadable (" + e.what() + ")");
      }
    }
  }
  for (const auto& fp : eval_fps) {
    if (!account_fps.count(fp)) gaps.push_back("no accounting for eval run " + fp);
  }
  for (const auto& a : accounts) {
    const auto fp = a.value("fingerprint", "");
    if (a.contains("epoch_ms") && !eval_fps.count(fp)) gaps.push_back("no eval for trained run " + fp);
  }

  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    return std::tie(a.group, a.tmpl, a.mode, a.r, a.k, a.fp) < std::tie(b.group, b.tmpl, b.mode, b.r, b.k, b.fp);
  });
  std::stable_sort(accounts.begin(), accounts.end(), [](const Json& a, const Json& b) {
    return a.value("percent", 0.0) < b.value("percent", 0.0);
  });

  std::ostringstream out;
  char buf[160];
  if (!rows.empty()) {
    out << "group        template  mode       r    k    metrics\n";
    for (const auto& r : rows) {
      std::snprintf(buf, sizeof buf, "%-12s %-9s %-10s %-4s %-4s", r.group.c_str(), r.tmpl.c_str(), r.mode.c_str(),
                    r.r.c_str(), r.k.c_str());
      out << buf;
      for (const auto& [name, v] : r.metrics) {
        std::snprintf(buf, sizeof buf, " %s=%.4f", name.c_str(), v);
        out << buf;
      }
      out << "\n";
    }
  }
  if (!accounts.empty()) {
    if (!rows.empty()) out << "\n";
    out << "mode       r    k    trainable     total         percent   epoch_ms\n";
    for (const auto& a : accounts) {
      std::snprintf(buf, sizeof buf, "%-10s %-4s %-4s %-13zu %-13zu %-9.4f", a.value("tuning_mode", "-").c_str(),
                    a.value("r", "-").c_str(), a.value("k", "-").c_str(), a.value("trainable", std::size_t{0}),
                    a.value("total", std::size_t{0}), a.value("percent", 0.0));
      out << buf;
      if (a.contains("epoch_ms")) {
        std::snprintf(buf, sizeof buf, " %.1f", a["epoch_ms"].get<double>());
        out << buf;
      } else {
        out << " -";
      }
      out << "\n";
    }
  }
  for (const auto& g : gaps) out << "gap: " << g << "\n";
  return out.str();
}

}  // namespace mfm
