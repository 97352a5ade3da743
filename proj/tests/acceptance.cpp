// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

// Acceptance checks, one PASS/FAIL line each. With arguments, runs only the
// listed criterion numbers.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "mfm/checkpoint.hpp"
#include "mfm/eval.hpp"
#include "toy_decode.hpp"

using namespace mfm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct World {
  Corpus corpus;
  SplitSpec splits;
  Vocabulary vocab;
  TaskData data() const { return {corpus, splits, default_templates(), vocab}; }
};

World make_world(const GeneratorParams& gp, std::uint64_t seed) {
  auto corpus = synthesize(gp, seed);
  auto splits = build_splits(corpus, seed);
  auto vocab = build_vocab(vocabulary_texts(corpus, default_templates()), 512);
  return {std::move(corpus), std::move(splits), std::move(vocab)};
}

ModelConfig desk_for(const Vocabulary& vocab, TuningMode mode, int k = 2) {
  auto c = ModelConfig::desk();
  c.vocab_size = vocab.size();
  c.tuning_mode = mode;
  c.image_tokens = k;
  return c;
}

// Prompts of random templates and users across all three groups.
std::vector<RenderedPrompt> random_prompts(const World& w, int k, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const auto& templates = default_templates();
  const auto sets = build_candidate_sets(w.corpus, w.splits, Split::Test, seed, 10);
  std::vector<RenderedPrompt> out;
  while (out.size() < n) {
    const auto& t = templates[uniform_index(rng, templates.size())];
    RenderContext ctx;
    ctx.split = Split::Test;
    std::string user;
    if (t.group == TaskGroup::Explanation) {
      if (w.splits.explanation_test.empty()) continue;
      const auto rec = w.splits.explanation_test[uniform_index(rng, w.splits.explanation_test.size())];
      ctx.explanation_record = rec;
      user = w.corpus.interactions()[rec].user_id;
    } else {
      const auto& cs = sets[uniform_index(rng, sets.size())];
      ctx.candidates = &cs;
      user = cs.user_id;
    }
    out.push_back(render(t, w.corpus, w.splits, user, k, w.vocab, ctx));
  }
  return out;
}

Outcome gradient_correctness() {
  GeneratorParams gp;
  gp.users = 10;
  auto w = make_world(gp, 7);
  auto params = initialize_parameters<double>(desk_for(w.vocab, TuningMode::AllAttnAdapters), 1);
  // Away from the identity point, so adapter down-projections see gradient.
  randomize_adapters(params, 2, 0.3);
  TrainConfig tc;
  tc.candidate_size = 10;
  Rng rng(3);
  auto inst = training_instances(w.data(), tc, 2, 256, rng);
  std::vector<const RenderedPrompt*> batch;
  for (const auto& p : inst) {
    if (batch.size() < 3 && (batch.empty() || p.group != batch.back()->group)) batch.push_back(&p);
  }
  auto report = grad_check(params, batch, 200, 11);
  std::set<TensorKind> kinds;
  for (const auto& p : report.probes) kinds.insert(params[params.index_of(p.tensor)].spec.kind);
  const bool spans = kinds == std::set<TensorKind>{TensorKind::Adapter, TensorKind::Mapping, TensorKind::Category};
  std::string detail = fmt("%.0f probes, max rel error %.3g", double(report.probes.size()), report.max_rel_error);
  for (const auto& f : report.failures()) {
    detail += "; " + f.tensor + fmt("[%.0f,%.0f] %.6g vs %.6g", double(f.row), double(f.col), f.analytic, f.numeric);
  }
  return {report.passed() && spans && report.probes.size() == 200, detail};
}

Outcome identity_at_init() {
  GeneratorParams gp;
  auto w = make_world(gp, 7);
  auto with = initialize_parameters<float>(desk_for(w.vocab, TuningMode::AllAttnAdapters), 5);
  ParameterStore<float> self(desk_for(w.vocab, TuningMode::SelfAttnAdapters));
  ParameterStore<float> plain(desk_for(w.vocab, TuningMode::Full));
  copy_shared_tensors(with, self);
  copy_shared_tensors(with, plain);
  double worst = 0;
  for (const auto& p : random_prompts(w, 2, 50, 9)) {
    const auto dec = shift_right(p.target_ids());
    const auto ref = forward_logits(plain, p, dec);
    worst = std::max(worst, double((forward_logits(with, p, dec) - ref).cwiseAbs().maxCoeff()));
    worst = std::max(worst, double((forward_logits(self, p, dec) - ref).cwiseAbs().maxCoeff()));
  }
  return {worst <= 1e-6, fmt("50 prompts, max |diff| %.3g", worst)};
}

Outcome freeze_contract() {
  GeneratorParams gp;
  auto w = make_world(gp, 7);
  bool ok = true;
  std::string detail;
  for (auto mode : {TuningMode::SelfAttnAdapters, TuningMode::AllAttnAdapters}) {
    auto params = initialize_parameters<float>(desk_for(w.vocab, mode), 1);
    const auto initial = deserialize_checkpoint<float>(serialize_checkpoint(params), params.config());
    TrainConfig tc;
    tc.epochs = 100;
    tc.max_steps = 50;
    tc.candidate_size = 10;
    tc.learning_rate = 1e-2;
    auto result = train(params, tc, w.data());
    std::size_t frozen = 0;
    std::size_t changed = 0;
    bool moved = false;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const auto bytes = sizeof(float) * std::size_t(params[i].value.size());
      const bool same = std::memcmp(params[i].value.data(), initial[i].value.data(), bytes) == 0;
      if (params[i].frozen) {
        ++frozen;
        changed += same ? 0 : 1;
      } else {
        moved = moved || !same;
      }
    }
    ok = ok && changed == 0 && moved && result.steps.size() == 50 && frozen > 0;
    detail += std::string(detail.empty() ? "" : "; ") + to_string(mode) +
              fmt(": %.0f steps, %.0f/%.0f backbone tensors changed", double(result.steps.size()), double(changed),
                  double(frozen));
  }
  return {ok, detail};
}

// Pinned by the pre-build oracle run: both thresholds held from epoch 90.
constexpr int kOverfitEpochs = 150;

Outcome overfit_oracle() {
  GeneratorParams gp;  // p = 1, 50 users, 20 items
  auto w = make_world(gp, 7);
  // Direct prompts carry no history, so memorizing user -> item needs the
  // backbone to move.
  auto params = initialize_parameters<float>(desk_for(w.vocab, TuningMode::Full), 1);
  TrainConfig tc;
  tc.epochs = kOverfitEpochs;
  tc.seed = 3;
  tc.candidate_size = 10;
  tc.groups = {TaskGroup::Sequential, TaskGroup::Direct};
  train(params, tc, w.data());
  DecodeConfig dc;
  dc.beam_size = 20;
  EvalOptions eo;
  eo.split = Split::Train;
  eo.candidate_size = 10;
  eo.seed = 5;
  auto a = evaluate(params, w.data(), dc, TaskGroup::Sequential, "A-3", eo);
  auto b = evaluate(params, w.data(), dc, TaskGroup::Direct, "B-5", eo);
  const double hr5 = a.metrics.at("HR@5");
  const double hr1 = b.metrics.at("HR@1");
  return {hr5 >= 0.95 && hr1 >= 0.9,
          fmt("%.0f epochs, sequential HR@5 %.3f, direct HR@1 %.3f", kOverfitEpochs, hr5, hr1)};
}

Outcome beam_optimality() {
  int mismatches = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Rng pick(seed);
    const int vocab = 2 + int(uniform_index(pick, 3));
    const int len = 1 + int(uniform_index(pick, 3));
    toy::TableScorer table(vocab, 1000 + seed);
    auto scorer = table.scorer();
    DecodeConfig c;
    c.max_length = len;
    c.beam_size = int(toy::sequence_count(vocab, len));
    const auto beam = beam_search(scorer, c);
    const auto all = toy::enumerate(scorer, vocab, len);
    bool same = beam.size() == all.size();
    for (std::size_t i = 0; same && i < all.size(); ++i) {
      same = beam[i].tokens == all[i].tokens && beam[i].log_prob == all[i].log_prob;
    }
    c.beam_size = 1;
    same = same && beam_search(scorer, c).front().tokens == greedy_decode(scorer, c).tokens;
    mismatches += same ? 0 : 1;
  }
  return {mismatches == 0, fmt("100 tables, %.0f mismatches", mismatches)};
}

Outcome metric_oracles() {
  auto at = [](int rank) {
    RankingResult r;
    r.ground_truth = "t";
    for (int i = 1; i <= 20; ++i) r.ranked.push_back(i == rank ? "t" : "x" + std::to_string(i));
    return r;
  };
  bool ok = hr_at_k(at(1), 5) == 1 && hr_at_k(at(0), 5) == 0 && hr_at_k(at(6), 5) == 0 && hr_at_k(at(6), 10) == 1;
  ok = ok && ndcg_at_k(at(1), 5) == 1.0 && ndcg_at_k(at(3), 5) == 0.5 && ndcg_at_k(at(11), 10) == 0.0;
  const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-6; };
  ok = ok && near(bleu4({{"the cat sat on the mat", "the cat sat on the mat"}}), 1.0);
  ok = ok && bleu4({{"dog runs far away", "the cat sat on the mat"}}) == 0.0;
  ok = ok && near(bleu4({{"the cat sat on the mat", "the cat sat on a mat"}}), 0.537284965911771);
  for (auto v : {RougeVariant::R1, RougeVariant::R2, RougeVariant::RL}) {
    ok = ok && near(rouge({{"the fit is great", "the fit is great"}}, v), 1.0);
    ok = ok && rouge({{"good price", "bad color"}}, v) == 0.0;
  }
  const std::vector<TextPair> cat{{"the cat sat on the mat", "the cat sat on a mat"}};
  ok = ok && near(rouge(cat, RougeVariant::R1), 5.0 / 6.0) && near(rouge(cat, RougeVariant::R2), 0.6) &&
       near(rouge(cat, RougeVariant::RL), 5.0 / 6.0);

  Rng rng(17);
  std::vector<std::string> candidates;
  for (int i = 0; i < 100; ++i) candidates.push_back("c" + std::to_string(i));
  double hits = 0;
  for (int u = 0; u < 1000; ++u) {
    RankingResult r{candidates, candidates[uniform_index(rng, 100)]};
    shuffle(r.ranked.begin(), r.ranked.end(), rng);
    hits += hr_at_k(r, 10);
  }
  const double hr10 = hits / 1000;
  return {ok && std::abs(hr10 - 0.10) <= 0.03,
          std::string(ok ? "hand examples match" : "hand example mismatch") + fmt(", random HR@10 %.3f", hr10)};
}

Outcome accounting_ordering() {
  auto shape = ModelConfig::reference_scale();
  std::map<TuningMode, double> percent;
  for (auto mode : {TuningMode::SelfAttnAdapters, TuningMode::AllAttnAdapters, TuningMode::Full}) {
    shape.tuning_mode = mode;
    percent[mode] = count_parameters(parameter_layout(shape), mode).percent;
  }
  const double s = percent[TuningMode::SelfAttnAdapters];
  const double a = percent[TuningMode::AllAttnAdapters];
  const double f = percent[TuningMode::Full];
  const bool counts = 0 < s && s < a && a < f && f <= 100 && a < 6;

  // Epochs of the three modes interleaved, so drift in machine load hits
  // each mode alike.
  GeneratorParams gp;
  gp.users = 20;
  auto w = make_world(gp, 7);
  std::map<TuningMode, ParameterStore<float>> stores;
  std::map<TuningMode, std::vector<double>> ms;
  for (auto mode : {TuningMode::SelfAttnAdapters, TuningMode::AllAttnAdapters, TuningMode::Full}) {
    stores.emplace(mode, initialize_parameters<float>(desk_for(w.vocab, mode), 1));
  }
  TrainConfig tc;
  tc.epochs = 1;
  tc.candidate_size = 10;
  for (int rep = 0; rep < 5; ++rep) {
    for (auto& [mode, params] : stores) {
      tc.seed = std::uint64_t(rep);
      ms[mode].push_back(train(params, tc, w.data()).epochs.front().ms);
    }
  }
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double ts = median(ms[TuningMode::SelfAttnAdapters]);
  const double ta = median(ms[TuningMode::AllAttnAdapters]);
  const double tf = median(ms[TuningMode::Full]);
  return {counts && ts <= ta && ta <= tf,
          fmt("trainable %.3f%% < %.3f%% < %.0f%%", s, a, f) + fmt(", epoch ms %.0f <= %.0f <= %.0f", ts, ta, tf)};
}

Outcome multimodal_signal() {
  double gap = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    GeneratorParams gp;
    gp.users = 90;
    gp.items = 40;
    gp.clusters = 2;
    gp.candidate_size = 20;
    gp.explanations = false;
    auto w = make_world(gp, seed);
    std::map<int, double> hr5;
    for (int k : {2, 0}) {
      auto params = initialize_parameters<float>(desk_for(w.vocab, TuningMode::Full, k), seed);
      TrainConfig tc;
      tc.epochs = 80;
      tc.seed = seed;
      tc.candidate_size = gp.candidate_size;
      tc.groups = {TaskGroup::Direct, TaskGroup::Sequential};
      tc.direct_positive = DirectPositive::History;
      train(params, tc, w.data());
      DecodeConfig dc;
      dc.beam_size = 20;
      EvalOptions eo;
      eo.candidate_size = gp.candidate_size;
      eo.seed = seed;
      hr5[k] = evaluate(params, w.data(), dc, TaskGroup::Direct, "B-5", eo).metrics.at("HR@5");
    }
    gap += (hr5[2] - hr5[0]) / 3;
    detail += fmt("seed %.0f: k=2 %.3f k=0 %.3f; ", double(seed), hr5[2], hr5[0]);
  }
  return {gap >= 0.05, detail + fmt("mean gap %.3f", gap)};
}

Outcome protocol_fidelity() {
  bool ok = true;
  std::string detail;
  {
    GeneratorParams gp;
    auto w = make_world(gp, 7);
    TrainConfig tc;
    tc.candidate_size = 10;
    std::set<std::string> used;
    std::size_t rendered = 0;
    Rng rng(1);
    for (int epoch = 0; epoch < 20; ++epoch) {
      for (const auto& p : training_instances(w.data(), tc, 2, 256, rng)) {
        used.insert(p.template_id);
        ++rendered;
      }
    }
    const bool clean = !used.count("A-9") && !used.count("B-8") && !used.count("C-12");
    ok = ok && clean;
    detail += fmt("%.0f training prompts over %.0f templates", double(rendered), double(used.size())) +
              (clean ? ", no unseen ids" : ", UNSEEN ID USED");

    ModelConfig tiny = desk_for(w.vocab, TuningMode::AllAttnAdapters);
    tiny.layers = 1;
    tiny.d_model = 16;
    tiny.heads = 2;
    tiny.d_ff = 16;
    tiny.reduction = 4;
    auto params = initialize_parameters<float>(tiny, 1);
    DecodeConfig dc;
    dc.beam_size = 5;
    dc.max_length = 8;
    EvalOptions eo;
    eo.candidate_size = 10;
    std::multiset<std::string> ids;
    for (const auto& r : evaluate_protocol(params, w.data(), dc,
                                           {TaskGroup::Sequential, TaskGroup::Direct, TaskGroup::Explanation}, eo)) {
      ids.insert(r.template_id);
    }
    const std::multiset<std::string> expected{"A-3", "A-9", "B-5", "B-8", "C-3", "C-12"};
    ok = ok && ids == expected;
    detail += ids == expected ? "; eval ids A-3 A-9 B-5 B-8 C-3 C-12" : "; wrong eval ids";
  }
  {
    const std::filesystem::path data = MFM_TEST_DATA;
    auto r = ingest(data / "split_interactions.tsv", data / "split_features.txt");
    auto s = build_sequential_splits(r.corpus);
    using V = std::vector<std::string>;
    struct Row {
      const char* user;
      V train;
      const char* validation;
      const char* test;
    };
    const std::vector<Row> expected{{"uA", {"a1"}, "a2", "a3"},
                                    {"uB", {"b1", "b2", "b3"}, "b4", "b5"},
                                    {"uC", {"c1", "c3"}, "c2", "c4"},
                                    {"uD", {"d1", "d2", "d3", "d4"}, "d5", "d6"},
                                    {"uE", {"e1"}, "e2", "e3"}};
    bool splits_ok = r.dropped_users == 1 && s.sequential.size() == expected.size();
    for (const auto& row : expected) {
      const auto& u = s.user(row.user);
      splits_ok = splits_ok && u.train == row.train && u.validation == row.validation && u.test == row.test;
    }
    ok = ok && splits_ok;
    detail += splits_ok ? "; 5-user splits match" : "; 5-user splits differ";
  }
  return {ok, detail};
}

struct Criterion {
  int number;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "gradient correctness", gradient_correctness}, {2, "identity at init", identity_at_init},
      {3, "freeze contract", freeze_contract},           {4, "overfit oracle", overfit_oracle},
      {5, "beam optimality", beam_optimality},           {6, "metric oracles", metric_oracles},
      {7, "accounting ordering", accounting_ordering},   {8, "multimodal signal", multimodal_signal},
      {9, "protocol fidelity", protocol_fidelity},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.number)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", c.number, c.name, o.detail.c_str(),
                sec);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
