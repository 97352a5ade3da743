// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include <doctest.h>

#include <cmath>

#include "mfm/model.hpp"

using namespace mfm;

namespace {

// Closed-form fill shared with tests/oracles/forward_oracle.py.
void fill_closed_form(ParameterStore<double>& params) {
  for (auto& t : params) {
    double salt = double(t.spec.name.size());
    for (unsigned char c : t.spec.name) salt += c;
    for (Eigen::Index j = 0; j < t.value.size(); ++j) {
      t.value.data()[j] = 0.5 * std::sin(0.7 * double(j + 1) + 0.01 * salt);
    }
  }
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.layers = 1;
  c.d_model = 4;
  c.heads = 1;
  c.d_ff = 6;
  c.vocab_size = 7;
  c.d_v = 3;
  c.image_tokens = 1;
  c.reduction = 2;
  c.max_len = 8;
  c.max_whole_words = 8;
  return c;
}

RenderedPrompt tiny_prompt() {
  RenderedPrompt p;
  p.k = 1;
  p.input.token_ids = {3, 5, kPadId};
  p.input.whole_word_ids = {0, 1, 1};
  p.input.category_ids = {0, 0, 1};
  p.image_features.resize(1, 3);
  p.image_features << 0.5, -0.2, 0.1;
  p.image_positions = {2};
  return p;
}

// A prompt of random text and image slots for a desk model.
RenderedPrompt random_prompt(const ModelConfig& c, Rng& rng) {
  RenderedPrompt p;
  p.k = c.image_tokens;
  const int words = 3 + int(uniform_index(rng, 6));
  int slots = 0;
  for (int w = 0; w < words; ++w) {
    const int pieces = 1 + int(uniform_index(rng, 3));
    for (int i = 0; i < pieces; ++i) {
      p.input.token_ids.push_back(3 + int(uniform_index(rng, std::uint64_t(c.vocab_size - 3))));
      p.input.whole_word_ids.push_back(w);
      p.input.category_ids.push_back(0);
    }
    if (c.image_tokens > 0 && uniform_index(rng, 2) == 0) {
      p.image_positions.push_back(int(p.input.size()));
      for (int i = 0; i < c.image_tokens; ++i) {
        p.input.token_ids.push_back(kPadId);
        p.input.whole_word_ids.push_back(w);
        p.input.category_ids.push_back(1);
      }
      ++slots;
    }
  }
  p.image_features.resize(slots, c.d_v);
  for (Eigen::Index i = 0; i < p.image_features.size(); ++i) p.image_features.data()[i] = standard_normal(rng);
  return p;
}

}  // namespace

TEST_CASE("attention examples") {
  using M = Matrix<double>;
  M one(1, 1);
  one << 1;
  CHECK(attention(one, one, one)(0, 0) == doctest::Approx(1.0));

  M ones = M::Ones(2, 2);
  M v(2, 2);
  v << 2, 0, 0, 2;
  M out = attention(ones, ones, v);
  CHECK((out - M::Ones(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  M q = M::Identity(2, 2);
  M vv(2, 2);
  vv << 1, 2, 3, 4;
  M golden(2, 2);
  golden << 1.6604769013466861, 2.6604769013466861, 2.3395230986533139, 3.3395230986533139;
  CHECK((attention(q, q, vv) - golden).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(attention(M(2, 3), M(2, 2), M(2, 2)), DimensionError);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(4);
  Matrix<double> s(5, 7);
  for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = 10 * standard_normal(rng);
  ad::softmax_rows(s);
  for (Eigen::Index i = 0; i < s.rows(); ++i) CHECK(std::abs(s.row(i).sum() - 1.0) < 1e-9);
}

TEST_CASE("adapter examples") {
  using M = Matrix<double>;
  AdapterWeights<double> w{M::Ones(1, 1), M::Zero(1, 1), M::Ones(1, 1), M::Zero(1, 1)};
  M s(1, 1);
  s << 0;
  CHECK(adapter_apply(w, s)(0, 0) == doctest::Approx(0.0));
  s << 1;
  CHECK(adapter_apply(w, s)(0, 0) == doctest::Approx(1.84134).epsilon(1e-4));

  AdapterWeights<double> zero{M::Ones(4, 2), M::Ones(1, 2), M::Zero(2, 4), M::Zero(1, 4)};
  M x = M::Random(3, 4);
  CHECK(adapter_apply(zero, x) == x);
  CHECK_THROWS_AS(adapter_apply(zero, M(M::Zero(3, 5))), DimensionError);
}

TEST_CASE("mapping network examples") {
  using M = Matrix<double>;
  MappingWeights<double> zero{M::Zero(4, 3), M::Zero(1, 3), M::Zero(3, 6), M::Zero(1, 6)};
  RowVector<double> x = RowVector<double>::Random(4);
  auto out = map_image_feature(zero, x, 2);
  CHECK(out.rows() == 2);
  CHECK(out.cols() == 3);
  CHECK(out.isZero());

  MappingWeights<double> unit{M::Ones(1, 1), M::Zero(1, 1), M::Ones(1, 1), M::Zero(1, 1)};
  RowVector<double> two(1);
  two << 2;
  CHECK(map_image_feature(unit, two, 1)(0, 0) == doctest::Approx(1.9545).epsilon(1e-3));
  CHECK_THROWS_AS(map_image_feature(zero, RowVector<double>(RowVector<double>::Zero(5)), 2), DimensionError);
}

TEST_CASE("config validation") {
  ModelConfig c;
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.reduction = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(ModelConfig::desk().validate());
}

TEST_CASE("embedding rules") {
  auto c = tiny_config();
  ParameterStore<double> params(c);
  auto p = tiny_prompt();
  {
    ad::Tape<double> tape;
    Binder<double> bind(tape, params);
    CHECK(embed_sequence(bind, p).value().isZero());
  }
  fill_closed_form(params);
  ad::Tape<double> tape;
  Binder<double> bind(tape, params);
  auto x = embed_sequence(bind, p).value();
  const auto& tok = params.value("embedding.token");
  const auto& pos = params.value("embedding.position");
  const auto& ww = params.value("embedding.whole_word");
  const auto& cat = params.value("embedding.category");
  CHECK((x.row(0) - (tok.row(3) + pos.row(0) + ww.row(0) + cat.row(0))).norm() < 1e-12);
  CHECK((x.row(1) - (tok.row(5) + pos.row(1) + ww.row(1) + cat.row(0))).norm() < 1e-12);
  // The visual position gets the category-1 row and the word-1 addend.
  const RowVector<double> f = p.image_features.row(0);
  MappingWeights<double> net{params.value("mapping.w1"), params.value("mapping.b1"), params.value("mapping.w2"),
                             params.value("mapping.b2")};
  const RowVector<double> img = map_image_feature(net, f, 1).row(0);
  CHECK((x.row(2) - (img + pos.row(2) + ww.row(1) + cat.row(1))).norm() < 1e-12);

  auto bad = p;
  bad.input.whole_word_ids[0] = c.max_whole_words;
  CHECK_THROWS_AS(embed_sequence(bind, bad), RangeError);
  bad = p;
  bad.input.token_ids[0] = c.vocab_size;
  CHECK_THROWS_AS(embed_sequence(bind, bad), RangeError);
  bad = p;
  bad.k = 2;
  CHECK_THROWS_AS(embed_sequence(bind, bad), DimensionError);
}

TEST_CASE("golden forward logits") {
  auto c = tiny_config();
  ParameterStore<double> params(c);
  fill_closed_form(params);
  const auto logits = forward_logits(params, tiny_prompt(), {0, 4, 2});
  Matrix<double> golden(3, 7);
  golden << -0.80677747481087777, 0.82914004875497335, -0.75569108014919488, 0.59491798796622856,
      -0.36539895810566207, 0.093656135202183193, 0.18890915224929935,  //
      -0.54663425280989135, 0.43999821868880952, -0.28251805019612911, 0.092391418385074942,
      0.1084115332191639, -0.29668695555555213, 0.45067862219965707,  //
      -0.80986469536217157, 0.83002195716385824, -0.75426576720845088, 0.59135015616691737,
      -0.36010088938828797, 0.087240049585679129, 0.19570184194695119;
  CHECK((logits - golden).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("identity at initialization and mode independence") {
  auto with = ModelConfig::desk();
  auto without = with;
  without.tuning_mode = TuningMode::Full;
  auto self = with;
  self.tuning_mode = TuningMode::SelfAttnAdapters;
  auto a = initialize_parameters<double>(with, 3);
  ParameterStore<double> b(without);
  ParameterStore<double> s(self);
  copy_shared_tensors(a, b);
  copy_shared_tensors(a, s);
  Rng rng(8);
  for (int i = 0; i < 5; ++i) {
    auto p = random_prompt(with, rng);
    const std::vector<int> dec{0, 7, 9, 11};
    auto la = forward_logits(a, p, dec);
    CHECK((la - forward_logits(b, p, dec)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((la - forward_logits(s, p, dec)).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(la == forward_logits(a, p, dec));
  }
  // Flag changes alone never move outputs.
  auto p = random_prompt(with, rng);
  randomize_adapters(a, 5, 0.1);
  auto before = forward_logits(a, p, {0, 5});
  a.apply_tuning_mode(TuningMode::Full);
  CHECK(before == forward_logits(a, p, {0, 5}));
}

TEST_CASE("decoder is causal") {
  auto c = ModelConfig::desk();
  auto params = initialize_parameters<double>(c, 1);
  randomize_adapters(params, 2, 0.1);
  Rng rng(3);
  auto p = random_prompt(c, rng);
  auto base = forward_logits(params, p, {0, 10, 11, 12, 13});
  auto changed = forward_logits(params, p, {0, 10, 20, 12, 13});
  CHECK((base.topRows(2) - changed.topRows(2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK((base.bottomRows(3) - changed.bottomRows(3)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("parameter accounting") {
  auto c = ModelConfig::desk();
  c.tuning_mode = TuningMode::Full;
  auto full = count_parameters(parameter_layout(c), TuningMode::Full);
  CHECK(full.percent == doctest::Approx(100.0));
  CHECK(full.trainable == full.total);

  // Zero adapter sites and a frozen backbone: mapping plus category only.
  auto frozen = count_parameters(parameter_layout(c), TuningMode::AllAttnAdapters);
  const auto d = std::size_t(c.d_model);
  const auto k = std::size_t(c.image_tokens);
  const auto mapping = std::size_t(c.d_v) * d + d + d * k * d + k * d;
  CHECK(frozen.trainable == mapping + 2 * d);

  auto big = ModelConfig::reference_scale();
  big.tuning_mode = TuningMode::SelfAttnAdapters;
  auto s = count_parameters(parameter_layout(big), TuningMode::SelfAttnAdapters);
  big.tuning_mode = TuningMode::AllAttnAdapters;
  auto a = count_parameters(parameter_layout(big), TuningMode::AllAttnAdapters);
  CHECK(0.0 < s.percent);
  CHECK(s.percent < a.percent);
  CHECK(a.percent < 100.0);

  auto store = initialize_parameters<float>(ModelConfig::desk(), 1);
  for (const auto& t : store) {
    CHECK(t.frozen == (t.spec.kind == TensorKind::Backbone));
    if (t.spec.name.size() > 3 && t.spec.name.substr(t.spec.name.size() - 3) == ".up") CHECK(t.value.isZero());
  }
}

TEST_CASE("layer annotation on errors") {
  auto c = ModelConfig::desk();
  auto params = initialize_parameters<double>(c, 1);
  Rng rng(1);
  auto p = random_prompt(c, rng);
  p.image_features = Eigen::MatrixXd::Zero(p.image_features.rows(), c.d_v + 1);
  if (!p.image_positions.empty()) CHECK_THROWS_AS(forward_logits(params, p, {0}), DimensionError);
  CHECK_THROWS_AS(forward_logits(params, random_prompt(c, rng), {}), RangeError);
}
