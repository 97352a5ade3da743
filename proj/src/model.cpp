// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include "mfm/model.hpp"

namespace mfm {

const char* to_string(TuningMode mode) {
  switch (mode) {
    case TuningMode::SelfAttnAdapters: return "self_attn";
    case TuningMode::AllAttnAdapters: return "all_attn";
    case TuningMode::Full: return "full";
  }
  return "?";
}

TuningMode parse_tuning_mode(const std::string& name) {
  if (name == "self_attn" || name == "SelfAttnAdapters") return TuningMode::SelfAttnAdapters;
  if (name == "all_attn" || name == "AllAttnAdapters") return TuningMode::AllAttnAdapters;
  if (name == "full" || name == "Full") return TuningMode::Full;
  throw ConfigError("unknown tuning mode '" + name + "' (self_attn, all_attn, full)");
}

const char* to_string(TensorKind kind) {
  switch (kind) {
    case TensorKind::Backbone: return "backbone";
    case TensorKind::Adapter: return "adapter";
    case TensorKind::Mapping: return "mapping";
    case TensorKind::Category: return "category";
  }
  return "?";
}

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  positive(layers, "layers");
  positive(d_model, "d_model");
  positive(heads, "heads");
  positive(d_ff, "d_ff");
  positive(vocab_size, "vocab_size");
  positive(d_v, "d_v");
  positive(reduction, "reduction");
  positive(max_len, "max_len");
  positive(max_whole_words, "max_whole_words");
  if (image_tokens < 0) throw ConfigError("model.image_tokens must be non-negative");
  if (d_model % heads != 0) throw ConfigError("model.d_model must be divisible by model.heads");
  if (d_model % reduction != 0) {
    throw ConfigError("model.reduction must divide model.d_model");
  }
  if (vocab_size < 4) throw ConfigError("model.vocab_size must be at least 4");
}

ModelConfig ModelConfig::reference_scale() {
  ModelConfig c;
  c.layers = 6;
  c.d_model = 512;
  c.heads = 8;
  c.d_ff = 2048;
  c.vocab_size = 32100;
  c.d_v = 512;
  c.image_tokens = 2;
  c.reduction = 8;
  c.max_len = 1024;
  c.max_whole_words = 512;
  return c;
}

std::string adapter_site(AdapterLocation location, int layer) {
  const auto l = std::to_string(layer);
  switch (location) {
    case AdapterLocation::EncoderSelfAttn: return "encoder." + l + ".adapter_self";
    case AdapterLocation::EncoderFfn: return "encoder." + l + ".adapter_ffn";
    case AdapterLocation::DecoderSelfAttn: return "decoder." + l + ".adapter_self";
    case AdapterLocation::DecoderFfn: return "decoder." + l + ".adapter_ffn";
    case AdapterLocation::DecoderCrossAttn: return "decoder." + l + ".adapter_cross";
  }
  return "";
}

bool site_active(TuningMode mode, AdapterLocation location) {
  switch (mode) {
    case TuningMode::Full: return false;
    case TuningMode::SelfAttnAdapters: return location != AdapterLocation::DecoderCrossAttn;
    case TuningMode::AllAttnAdapters: return true;
  }
  return false;
}

bool is_trainable(TensorKind kind, TuningMode mode) {
  return mode == TuningMode::Full || kind != TensorKind::Backbone;
}

namespace {

void add_attention(std::vector<TensorSpec>& out, const std::string& prefix, int d) {
  for (const char* w : {"q", "k", "v", "o"}) out.push_back({prefix + "." + w, d, d, TensorKind::Backbone});
}

void add_norm(std::vector<TensorSpec>& out, const std::string& prefix, int d) {
  out.push_back({prefix + ".gamma", 1, d, TensorKind::Backbone});
  out.push_back({prefix + ".beta", 1, d, TensorKind::Backbone});
}

void add_ffn(std::vector<TensorSpec>& out, const std::string& prefix, int d, int d_ff) {
  out.push_back({prefix + ".w1", d, d_ff, TensorKind::Backbone});
  out.push_back({prefix + ".b1", 1, d_ff, TensorKind::Backbone});
  out.push_back({prefix + ".w2", d_ff, d, TensorKind::Backbone});
  out.push_back({prefix + ".b2", 1, d, TensorKind::Backbone});
}

void add_adapter(std::vector<TensorSpec>& out, const ModelConfig& c, AdapterLocation loc, int layer) {
  if (!site_active(c.tuning_mode, loc)) return;
  const auto prefix = adapter_site(loc, layer);
  const int m = c.bottleneck();
  out.push_back({prefix + ".down", c.d_model, m, TensorKind::Adapter});
  out.push_back({prefix + ".down_bias", 1, m, TensorKind::Adapter});
  out.push_back({prefix + ".up", m, c.d_model, TensorKind::Adapter});
  out.push_back({prefix + ".up_bias", 1, c.d_model, TensorKind::Adapter});
}

}  // namespace

std::vector<TensorSpec> parameter_layout(const ModelConfig& c) {
  c.validate();
  const int d = c.d_model;
  std::vector<TensorSpec> out;
  out.push_back({"embedding.token", c.vocab_size, d, TensorKind::Backbone});
  out.push_back({"embedding.position", c.max_len, d, TensorKind::Backbone});
  out.push_back({"embedding.whole_word", c.max_whole_words, d, TensorKind::Backbone});
  out.push_back({"embedding.category", 2, d, TensorKind::Category});
  if (c.image_tokens > 0) {
    out.push_back({"mapping.w1", c.d_v, d, TensorKind::Mapping});
    out.push_back({"mapping.b1", 1, d, TensorKind::Mapping});
    out.push_back({"mapping.w2", d, c.image_tokens * d, TensorKind::Mapping});
    out.push_back({"mapping.b2", 1, c.image_tokens * d, TensorKind::Mapping});
  }
  for (int l = 0; l < c.layers; ++l) {
    const auto p = "encoder." + std::to_string(l);
    add_attention(out, p + ".self_attn", d);
    add_adapter(out, c, AdapterLocation::EncoderSelfAttn, l);
    add_norm(out, p + ".norm1", d);
    add_ffn(out, p + ".ffn", d, c.d_ff);
    add_adapter(out, c, AdapterLocation::EncoderFfn, l);
    add_norm(out, p + ".norm2", d);
  }
  for (int l = 0; l < c.layers; ++l) {
    const auto p = "decoder." + std::to_string(l);
    add_attention(out, p + ".self_attn", d);
    add_adapter(out, c, AdapterLocation::DecoderSelfAttn, l);
    add_norm(out, p + ".norm1", d);
    add_attention(out, p + ".cross_attn", d);
    add_adapter(out, c, AdapterLocation::DecoderCrossAttn, l);
    add_norm(out, p + ".norm2", d);
    add_ffn(out, p + ".ffn", d, c.d_ff);
    add_adapter(out, c, AdapterLocation::DecoderFfn, l);
    add_norm(out, p + ".norm3", d);
  }
  return out;
}

ParameterCount count_parameters(const std::vector<TensorSpec>& layout, TuningMode mode) {
  ParameterCount count;
  for (const auto& t : layout) {
    count.total += t.size();
    if (is_trainable(t.kind, mode)) count.trainable += t.size();
  }
  count.percent = count.total == 0 ? 0.0 : 100.0 * double(count.trainable) / double(count.total);
  return count;
}

template <typename Scalar>
ParameterStore<Scalar>::ParameterStore(const ModelConfig& config) : config_(config) {
  for (auto& spec : parameter_layout(config)) {
    Tensor<Scalar> t;
    t.value = Matrix<Scalar>::Zero(spec.rows, spec.cols);
    t.frozen = !is_trainable(spec.kind, config.tuning_mode);
    t.spec = std::move(spec);
    index_.emplace(t.spec.name, tensors_.size());
    tensors_.push_back(std::move(t));
  }
}

template <typename Scalar>
std::size_t ParameterStore<Scalar>::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw RangeError("no parameter named " + name);
  return it->second;
}

template <typename Scalar>
void ParameterStore<Scalar>::apply_tuning_mode(TuningMode mode) {
  for (auto& t : tensors_) t.frozen = !is_trainable(t.spec.kind, mode);
}

template <typename Scalar>
ParameterCount ParameterStore<Scalar>::count() const {
  ParameterCount count;
  for (const auto& t : tensors_) {
    count.total += t.spec.size();
    if (!t.frozen) count.trainable += t.spec.size();
  }
  count.percent = count.total == 0 ? 0.0 : 100.0 * double(count.trainable) / double(count.total);
  return count;
}

template <typename Scalar>
std::vector<TensorSpec> ParameterStore<Scalar>::layout() const {
  std::vector<TensorSpec> out;
  for (const auto& t : tensors_) out.push_back(t.spec);
  return out;
}

template <typename Scalar>
template <typename Other>
ParameterStore<Other> ParameterStore<Scalar>::cast() const {
  ParameterStore<Other> out;
  out.config_ = config_;
  out.index_ = index_;
  for (const auto& t : tensors_) out.tensors_.push_back({t.spec, t.value.template cast<Other>(), t.frozen});
  return out;
}

namespace {

template <typename Scalar>
void fill_normal(Matrix<Scalar>& m, double stddev, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(stddev * standard_normal(rng));
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

template <typename Scalar>
ParameterStore<Scalar> initialize_parameters(const ModelConfig& config, std::uint64_t seed) {
  ParameterStore<Scalar> params(config);
  for (auto& t : params) {
    // One stream per tensor keeps initial values independent of layout order.
    Rng rng(derive_seed(seed, "init/" + t.spec.name));
    const auto& name = t.spec.name;
    if (ends_with(name, ".gamma")) {
      t.value.setOnes();
    } else if (ends_with(name, ".beta") || ends_with(name, "_bias") || ends_with(name, ".b1") ||
               ends_with(name, ".b2") || ends_with(name, ".up")) {
      t.value.setZero();
    } else if (name.rfind("embedding.", 0) == 0) {
      fill_normal(t.value, 0.25, rng);
    } else if (name == "mapping.w2") {
      fill_normal(t.value, 0.25 / std::sqrt(double(t.spec.rows)), rng);
    } else {
      fill_normal(t.value, 1.0 / std::sqrt(double(t.spec.rows)), rng);
    }
  }
  return params;
}

template <typename Scalar>
void copy_shared_tensors(const ParameterStore<Scalar>& from, ParameterStore<Scalar>& to) {
  for (auto& t : to) {
    if (!from.contains(t.spec.name)) continue;
    const auto& src = from.value(t.spec.name);
    if (src.rows() != t.value.rows() || src.cols() != t.value.cols()) {
      throw DimensionError("copy: shape mismatch for " + t.spec.name);
    }
    t.value = src;
  }
}

template <typename Scalar>
void randomize_adapters(ParameterStore<Scalar>& params, std::uint64_t seed, Scalar stddev) {
  for (auto& t : params) {
    if (t.spec.kind != TensorKind::Adapter) continue;
    if (!ends_with(t.spec.name, ".up") && !ends_with(t.spec.name, ".up_bias")) continue;
    Rng rng(derive_seed(seed, "adapter/" + t.spec.name));
    fill_normal(t.value, double(stddev), rng);
  }
}

// ---------------------------------------------------------------------------

template <typename Scalar>
Matrix<Scalar> attention(const Matrix<Scalar>& q, const Matrix<Scalar>& k, const Matrix<Scalar>& v,
                         const Matrix<Scalar>* mask) {
  if (q.cols() != k.cols() || k.rows() != v.rows() || q.cols() < 1) {
    throw DimensionError("attention: Q " + std::to_string(q.rows()) + "x" + std::to_string(q.cols()) +
                         ", K " + std::to_string(k.rows()) + "x" + std::to_string(k.cols()) + ", V " +
                         std::to_string(v.rows()) + "x" + std::to_string(v.cols()));
  }
  if (mask && (mask->rows() != q.rows() || mask->cols() != k.rows())) {
    throw DimensionError("attention: mask shape mismatch");
  }
  Matrix<Scalar> s = (q * k.transpose()) / std::sqrt(static_cast<Scalar>(q.cols()));
  if (mask) s += *mask;
  ad::softmax_rows(s);
  return s * v;
}

template <typename Scalar>
Matrix<Scalar> adapter_apply(const AdapterWeights<Scalar>& site, const Matrix<Scalar>& s) {
  if (s.cols() != site.down.rows() || site.up.cols() != s.cols() ||
      site.down.cols() != site.up.rows() || site.down_bias.cols() != site.down.cols() ||
      site.up_bias.cols() != site.up.cols()) {
    throw DimensionError("adapter: input width " + std::to_string(s.cols()) +
                         " does not match site shape");
  }
  Matrix<Scalar> h = s * site.down;
  h.rowwise() += site.down_bias.row(0);
  h = h.unaryExpr([](Scalar x) { return ad::gelu_value(x); });
  Matrix<Scalar> out = h * site.up;
  out.rowwise() += site.up_bias.row(0);
  return out + s;
}

template <typename Scalar>
Matrix<Scalar> map_image_feature(const MappingWeights<Scalar>& net, const RowVector<Scalar>& x, int k) {
  if (x.size() != net.w1.rows()) {
    throw DimensionError("mapping network expects a feature of width " + std::to_string(net.w1.rows()) +
                         ", got " + std::to_string(x.size()));
  }
  if (k <= 0 || net.w2.cols() % k != 0) throw DimensionError("mapping network: bad token count");
  RowVector<Scalar> h = x * net.w1 + net.b1.row(0);
  h = h.unaryExpr([](Scalar v) { return ad::gelu_value(v); });
  RowVector<Scalar> y = h * net.w2 + net.b2.row(0);
  const auto d = net.w2.cols() / k;
  return Eigen::Map<const Matrix<Scalar>>(y.data(), k, d);
}

// ---------------------------------------------------------------------------

template <typename Scalar>
ad::Var<Scalar> Binder<Scalar>::operator()(const std::string& name) {
  const auto idx = params_.index_of(name);
  auto it = leaves_.find(idx);
  if (it != leaves_.end()) return it->second;
  const auto& t = params_[idx];
  auto v = tape_.parameter(t.value, !t.frozen);
  leaves_.emplace(idx, v);
  return v;
}

namespace {

template <typename Scalar>
ad::Var<Scalar> linear(Binder<Scalar>& bind, ad::Var<Scalar> x, const std::string& w,
                       const std::string& b) {
  return ad::add_row(ad::matmul(x, bind(w)), bind(b));
}

// Identity when the site does not exist in this store.
template <typename Scalar>
ad::Var<Scalar> adapter(Binder<Scalar>& bind, ad::Var<Scalar> s, AdapterLocation loc, int layer) {
  const auto prefix = adapter_site(loc, layer);
  if (!bind.has(prefix + ".down")) return s;
  auto h = ad::gelu(linear(bind, s, prefix + ".down", prefix + ".down_bias"));
  return linear(bind, h, prefix + ".up", prefix + ".up_bias") + s;
}

template <typename Scalar>
ad::Var<Scalar> attention_block(Binder<Scalar>& bind, ad::Var<Scalar> x, ad::Var<Scalar> memory,
                                const std::string& prefix, const Matrix<Scalar>* mask) {
  const int heads = bind.params().config().heads;
  auto q = ad::matmul(x, bind(prefix + ".q"));
  auto k = ad::matmul(memory, bind(prefix + ".k"));
  auto v = ad::matmul(memory, bind(prefix + ".v"));
  auto a = ad::multi_head_attention(q, k, v, heads, mask);
  return ad::matmul(a, bind(prefix + ".o"));
}

template <typename Scalar>
ad::Var<Scalar> ffn_block(Binder<Scalar>& bind, ad::Var<Scalar> x, const std::string& prefix) {
  auto h = ad::gelu(linear(bind, x, prefix + ".w1", prefix + ".b1"));
  return linear(bind, h, prefix + ".w2", prefix + ".b2");
}

template <typename Scalar>
ad::Var<Scalar> norm(Binder<Scalar>& bind, ad::Var<Scalar> x, const std::string& prefix) {
  return ad::layer_norm(x, bind(prefix + ".gamma"), bind(prefix + ".beta"));
}

std::vector<int> iota_ids(std::size_t n) {
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(i);
  return ids;
}

template <typename Fn>
auto annotate(const std::string& where, Fn&& fn) {
  try {
    return fn();
  } catch (const DimensionError& e) {
    throw DimensionError(where + ": " + e.what());
  } catch (const RangeError& e) {
    throw RangeError(where + ": " + e.what());
  }
}

}  // namespace

template <typename Scalar>
ad::Var<Scalar> embed_sequence(Binder<Scalar>& bind, const RenderedPrompt& prompt) {
  const auto& c = bind.params().config();
  const auto& in = prompt.input;
  const auto n = in.size();
  if (n == 0) throw RangeError("empty prompt");
  if (in.whole_word_ids.size() != n || in.category_ids.size() != n) {
    throw DimensionError("prompt id lists differ in length");
  }
  if (n > static_cast<std::size_t>(c.max_len)) {
    throw RangeError("prompt length " + std::to_string(n) + " exceeds max_len " + std::to_string(c.max_len));
  }
  std::vector<int> text_positions;
  std::vector<int> text_ids;
  std::vector<int> visual_positions;
  for (std::size_t i = 0; i < n; ++i) {
    if (in.whole_word_ids[i] < 0 || in.whole_word_ids[i] >= c.max_whole_words) {
      throw RangeError("whole-word id " + std::to_string(in.whole_word_ids[i]) + " exceeds max_whole_words " +
                       std::to_string(c.max_whole_words));
    }
    if (in.category_ids[i] == 0) {
      if (in.token_ids[i] < 0 || in.token_ids[i] >= c.vocab_size) {
        throw RangeError("token id " + std::to_string(in.token_ids[i]) + " exceeds vocabulary size " +
                         std::to_string(c.vocab_size));
      }
      text_positions.push_back(static_cast<int>(i));
      text_ids.push_back(in.token_ids[i]);
    } else if (in.category_ids[i] == 1) {
      visual_positions.push_back(static_cast<int>(i));
    } else {
      throw RangeError("category id must be 0 or 1");
    }
  }
  auto& tape = bind.tape();
  const auto d = static_cast<Eigen::Index>(c.d_model);
  std::vector<ad::RowPlacement<Scalar>> parts;
  if (!text_positions.empty()) {
    parts.push_back({ad::gather_rows(bind("embedding.token"), text_ids), text_positions});
  }
  if (!visual_positions.empty()) {
    const auto slots = prompt.image_features.rows();
    if (prompt.k != c.image_tokens) {
      throw DimensionError("prompt has " + std::to_string(prompt.k) + " image tokens per item, model expects " +
                           std::to_string(c.image_tokens));
    }
    if (static_cast<std::size_t>(slots) * static_cast<std::size_t>(c.image_tokens) != visual_positions.size()) {
      throw DimensionError("visual position count does not match image slots");
    }
    if (prompt.image_features.cols() != c.d_v) {
      throw DimensionError("image feature width " + std::to_string(prompt.image_features.cols()) +
                           " != d_v " + std::to_string(c.d_v));
    }
    auto x = tape.constant(prompt.image_features.template cast<Scalar>());
    auto h = ad::gelu(linear(bind, x, "mapping.w1", "mapping.b1"));
    auto y = linear(bind, h, "mapping.w2", "mapping.b2");
    auto tokens = ad::reshape(y, slots * c.image_tokens, d);
    std::vector<int> positions;
    for (auto start : prompt.image_positions) {
      for (int t = 0; t < c.image_tokens; ++t) positions.push_back(start + t);
    }
    parts.push_back({tokens, positions});
  }
  auto content = ad::scatter_rows(tape, static_cast<Eigen::Index>(n), d, std::move(parts));
  auto pos = ad::gather_rows(bind("embedding.position"), iota_ids(n));
  auto words = ad::gather_rows(bind("embedding.whole_word"), in.whole_word_ids);
  auto cats = ad::gather_rows(bind("embedding.category"), in.category_ids);
  return content + pos + words + cats;
}

template <typename Scalar>
ad::Var<Scalar> encode_prompt(Binder<Scalar>& bind, const RenderedPrompt& prompt) {
  auto x = annotate("embedding", [&] { return embed_sequence(bind, prompt); });
  for (int l = 0; l < bind.params().config().layers; ++l) {
    const auto p = "encoder." + std::to_string(l);
    x = annotate(p, [&] {
      auto a = attention_block(bind, x, x, p + ".self_attn", static_cast<const Matrix<Scalar>*>(nullptr));
      a = adapter(bind, a, AdapterLocation::EncoderSelfAttn, l);
      auto y = norm(bind, x + a, p + ".norm1");
      auto f = adapter(bind, ffn_block(bind, y, p + ".ffn"), AdapterLocation::EncoderFfn, l);
      return norm(bind, y + f, p + ".norm2");
    });
  }
  return x;
}

template <typename Scalar>
ad::Var<Scalar> decode_logits(Binder<Scalar>& bind, ad::Var<Scalar> encoded, const std::vector<int>& decoder_input) {
  const auto& c = bind.params().config();
  const auto t = decoder_input.size();
  if (t == 0) throw RangeError("empty decoder input");
  if (t > static_cast<std::size_t>(c.max_len)) throw RangeError("decoder input exceeds max_len");
  auto token_table = bind("embedding.token");
  auto y = annotate("decoder embedding", [&] {
    return ad::gather_rows(token_table, decoder_input) + ad::gather_rows(bind("embedding.position"), iota_ids(t));
  });
  const Matrix<Scalar> mask = ad::causal_mask<Scalar>(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(t));
  for (int l = 0; l < c.layers; ++l) {
    const auto p = "decoder." + std::to_string(l);
    y = annotate(p, [&] {
      auto s = adapter(bind, attention_block(bind, y, y, p + ".self_attn", &mask), AdapterLocation::DecoderSelfAttn, l);
      auto z = norm(bind, y + s, p + ".norm1");
      auto x = adapter(bind, attention_block(bind, z, encoded, p + ".cross_attn", static_cast<const Matrix<Scalar>*>(nullptr)),
                       AdapterLocation::DecoderCrossAttn, l);
      z = norm(bind, z + x, p + ".norm2");
      auto f = adapter(bind, ffn_block(bind, z, p + ".ffn"), AdapterLocation::DecoderFfn, l);
      return norm(bind, z + f, p + ".norm3");
    });
  }
  return ad::matmul_nt(y, token_table);
}

template <typename Scalar>
ad::Var<Scalar> forward(Binder<Scalar>& bind, const RenderedPrompt& prompt, const std::vector<int>& decoder_input) {
  return decode_logits(bind, encode_prompt(bind, prompt), decoder_input);
}

std::vector<int> shift_right(const std::vector<int>& target) {
  std::vector<int> out{kPadId};
  if (!target.empty()) out.insert(out.end(), target.begin(), target.end() - 1);
  return out;
}

template <typename Scalar>
Matrix<Scalar> forward_logits(const ParameterStore<Scalar>& params, const RenderedPrompt& prompt,
                              const std::vector<int>& decoder_input) {
  ad::Tape<Scalar> tape;
  Binder<Scalar> bind(tape, params);
  return forward(bind, prompt, decoder_input).value();
}

#define MFM_INSTANTIATE(S)                                                                              \
  template class ParameterStore<S>;                                                                     \
  template class Binder<S>;                                                                             \
  template ParameterStore<S> initialize_parameters<S>(const ModelConfig&, std::uint64_t);              \
  template void copy_shared_tensors<S>(const ParameterStore<S>&, ParameterStore<S>&);                   \
  template void randomize_adapters<S>(ParameterStore<S>&, std::uint64_t, S);                            \
  template Matrix<S> attention<S>(const Matrix<S>&, const Matrix<S>&, const Matrix<S>&, const Matrix<S>*); \
  template Matrix<S> adapter_apply<S>(const AdapterWeights<S>&, const Matrix<S>&);                      \
  template Matrix<S> map_image_feature<S>(const MappingWeights<S>&, const RowVector<S>&, int);         \
  template ad::Var<S> embed_sequence<S>(Binder<S>&, const RenderedPrompt&);                             \
  template ad::Var<S> encode_prompt<S>(Binder<S>&, const RenderedPrompt&);                              \
  template ad::Var<S> decode_logits<S>(Binder<S>&, ad::Var<S>, const std::vector<int>&);                \
  template ad::Var<S> forward<S>(Binder<S>&, const RenderedPrompt&, const std::vector<int>&);           \
  template Matrix<S> forward_logits<S>(const ParameterStore<S>&, const RenderedPrompt&, const std::vector<int>&);

MFM_INSTANTIATE(float)
MFM_INSTANTIATE(double)

template ParameterStore<double> ParameterStore<float>::cast<double>() const;
template ParameterStore<float> ParameterStore<double>::cast<float>() const;
template ParameterStore<float> ParameterStore<float>::cast<float>() const;
template ParameterStore<double> ParameterStore<double>::cast<double>() const;

}  // namespace mfm
