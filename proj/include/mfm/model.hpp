// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "mfm/autodiff.hpp"
#include "mfm/prompts.hpp"

namespace mfm {

// Which parameters receive gradients. The adapter modes also decide which
// adapter sites exist: SelfAttnAdapters omits the decoder cross-attention
// sites, Full has no adapters at all (plain full fine-tuning).
enum class TuningMode { SelfAttnAdapters, AllAttnAdapters, Full };

const char* to_string(TuningMode mode);
TuningMode parse_tuning_mode(const std::string& name);

struct ModelConfig {
  int layers = 2;
  int d_model = 64;
  int heads = 4;
  int d_ff = 128;
  int vocab_size = 512;
  int d_v = 16;
  int image_tokens = 2;
  int reduction = 8;
  int max_len = 256;
  int max_whole_words = 256;
  TuningMode tuning_mode = TuningMode::AllAttnAdapters;

  int head_dim() const { return d_model / heads; }
  int bottleneck() const { return d_model / reduction; }
  void validate() const;

  static ModelConfig desk() { return {}; }
  // Encoder/decoder shape of the reference backbone (6 blocks, width 512,
  // 8 heads, 32,100 pieces, 1,024 input positions).
  static ModelConfig reference_scale();
};

enum class TensorKind { Backbone, Adapter, Mapping, Category };
const char* to_string(TensorKind kind);

struct TensorSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  TensorKind kind = TensorKind::Backbone;

  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

enum class AdapterLocation { EncoderSelfAttn, EncoderFfn, DecoderSelfAttn, DecoderFfn, DecoderCrossAttn };

// Prefix of an adapter site's tensors, e.g. "decoder.1.adapter_cross".
std::string adapter_site(AdapterLocation location, int layer);
bool site_active(TuningMode mode, AdapterLocation location);

// Every tensor of a model with this config, in a fixed order.
std::vector<TensorSpec> parameter_layout(const ModelConfig& config);

bool is_trainable(TensorKind kind, TuningMode mode);

struct ParameterCount {
  std::size_t total = 0;
  std::size_t trainable = 0;
  double percent = 0.0;
};

ParameterCount count_parameters(const std::vector<TensorSpec>& layout, TuningMode mode);

template <typename Scalar>
struct Tensor {
  TensorSpec spec;
  Matrix<Scalar> value;
  bool frozen = false;
};

// Named model tensors with a frozen/trainable flag each.
template <typename Scalar>
class ParameterStore {
 public:
  ParameterStore() = default;
  explicit ParameterStore(const ModelConfig& config);  // all zeros

  const ModelConfig& config() const { return config_; }
  std::size_t size() const { return tensors_.size(); }

  Tensor<Scalar>& operator[](std::size_t i) { return tensors_[i]; }
  const Tensor<Scalar>& operator[](std::size_t i) const { return tensors_[i]; }
  auto begin() { return tensors_.begin(); }
  auto end() { return tensors_.end(); }
  auto begin() const { return tensors_.begin(); }
  auto end() const { return tensors_.end(); }

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  std::size_t index_of(const std::string& name) const;
  const Matrix<Scalar>& value(const std::string& name) const { return tensors_[index_of(name)].value; }
  Matrix<Scalar>& value(const std::string& name) { return tensors_[index_of(name)].value; }
  bool frozen(const std::string& name) const { return tensors_[index_of(name)].frozen; }

  // Resets the frozen flags for `mode`. The adapter sites present are fixed
  // at construction.
  void apply_tuning_mode(TuningMode mode);

  ParameterCount count() const;
  std::vector<TensorSpec> layout() const;

  template <typename Other>
  ParameterStore<Other> cast() const;

 private:
  template <typename>
  friend class ParameterStore;

  ModelConfig config_;
  std::vector<Tensor<Scalar>> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Random initialization. Adapter up-projections and all biases start at
// zero so that every adapter is the identity.
template <typename Scalar>
ParameterStore<Scalar> initialize_parameters(const ModelConfig& config, std::uint64_t seed);

// Copies tensors present in both stores by name.
template <typename Scalar>
void copy_shared_tensors(const ParameterStore<Scalar>& from, ParameterStore<Scalar>& to);

// Overwrites every adapter up-projection with small random values.
template <typename Scalar>
void randomize_adapters(ParameterStore<Scalar>& params, std::uint64_t seed, Scalar stddev);

// ---------------------------------------------------------------------------
// Plain evaluation of the building blocks.

// softmax(Q K^T / sqrt(d_h) + mask) V for one head.
template <typename Scalar>
Matrix<Scalar> attention(const Matrix<Scalar>& q, const Matrix<Scalar>& k, const Matrix<Scalar>& v,
                         const Matrix<Scalar>* mask = nullptr);

template <typename Scalar>
struct AdapterWeights {
  Matrix<Scalar> down;       // d x m
  Matrix<Scalar> down_bias;  // 1 x m
  Matrix<Scalar> up;         // m x d
  Matrix<Scalar> up_bias;    // 1 x d
};

// f_up(GELU(f_down(S))) + S
template <typename Scalar>
Matrix<Scalar> adapter_apply(const AdapterWeights<Scalar>& site, const Matrix<Scalar>& s);

template <typename Scalar>
struct MappingWeights {
  Matrix<Scalar> w1;  // d_v x d
  Matrix<Scalar> b1;  // 1 x d
  Matrix<Scalar> w2;  // d x (k d)
  Matrix<Scalar> b2;  // 1 x (k d)
};

// Two linear layers with GELU between; returns k x d image tokens.
template <typename Scalar>
Matrix<Scalar> map_image_feature(const MappingWeights<Scalar>& net, const RowVector<Scalar>& x,
                                 int k);

// ---------------------------------------------------------------------------
// Recorded forward pass.

// Binds store tensors to tape leaves, once per tensor per tape.
template <typename Scalar>
class Binder {
 public:
  Binder(ad::Tape<Scalar>& tape, const ParameterStore<Scalar>& params) : tape_(tape), params_(params) {}

  ad::Var<Scalar> operator()(const std::string& name);
  bool has(const std::string& name) const { return params_.contains(name); }
  ad::Tape<Scalar>& tape() { return tape_; }
  const ParameterStore<Scalar>& params() const { return params_; }
  // Leaves created so far, by store index.
  const std::map<std::size_t, ad::Var<Scalar>>& leaves() const { return leaves_; }

 private:
  ad::Tape<Scalar>& tape_;
  const ParameterStore<Scalar>& params_;
  std::map<std::size_t, ad::Var<Scalar>> leaves_;
};

// Token + position + whole-word + category embeddings; visual positions take
// mapped image tokens in place of token embeddings.
template <typename Scalar>
ad::Var<Scalar> embed_sequence(Binder<Scalar>& bind, const RenderedPrompt& prompt);

template <typename Scalar>
ad::Var<Scalar> encode_prompt(Binder<Scalar>& bind, const RenderedPrompt& prompt);

// Logits (one row per decoder input position) for decoder inputs that start
// with the pad/start token.
template <typename Scalar>
ad::Var<Scalar> decode_logits(Binder<Scalar>& bind, ad::Var<Scalar> encoded,
                              const std::vector<int>& decoder_input);

template <typename Scalar>
ad::Var<Scalar> forward(Binder<Scalar>& bind, const RenderedPrompt& prompt,
                        const std::vector<int>& decoder_input);

// Right-shifted target: [pad] + target[:-1].
std::vector<int> shift_right(const std::vector<int>& target);

// Non-recording convenience wrapper.
template <typename Scalar>
Matrix<Scalar> forward_logits(const ParameterStore<Scalar>& params, const RenderedPrompt& prompt,
                              const std::vector<int>& decoder_input);

}  // namespace mfm
