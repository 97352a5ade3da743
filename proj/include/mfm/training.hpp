// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mfm/model.hpp"

namespace mfm {

// Positive item of a direct-recommendation training prompt: the last training
// item, or any training item of the user.
enum class DirectPositive { Last, History };

const char* to_string(DirectPositive p);
DirectPositive parse_direct_positive(const std::string& name);

struct TrainConfig {
  int epochs = 10;
  int batch_size = 8;
  double learning_rate = 1e-3;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 1.0;  // <= 0 disables clipping
  std::uint64_t seed = 0;
  // Stops after this many optimizer steps when > 0.
  long max_steps = 0;
  std::vector<TaskGroup> groups{TaskGroup::Sequential, TaskGroup::Direct, TaskGroup::Explanation};
  // Candidate list size for direct-recommendation training prompts.
  std::size_t candidate_size = kDefaultCandidateSize;
  DirectPositive direct_positive = DirectPositive::Last;
  // Relative template weights by id; missing ids weigh 1.
  std::map<std::string, double> template_weights;

  void validate() const;
};

struct StepStats {
  int epoch = 0;
  long step = 0;
  double loss = 0.0;
  double ms = 0.0;
  double grad_norm = 0.0;
  std::size_t tokens = 0;
};

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  double ms = 0.0;
  long steps = 0;
  std::size_t tokens = 0;
};

// Everything needed to render training prompts.
struct TaskData {
  const Corpus& corpus;
  const SplitSpec& splits;
  const std::vector<PromptTemplate>& templates;
  const Vocabulary& vocab;
};

// -log P(target | logits) summed over positions; pad targets are skipped.
template <typename Scalar>
Scalar nll_loss(const Matrix<Scalar>& logits, const std::vector<int>& target);

template <typename Scalar>
struct Gradients {
  Scalar loss = 0;  // mean over the batch of per-example token sums
  std::size_t tokens = 0;
  std::map<std::string, Matrix<Scalar>> tensors;  // trainable tensors only

  Scalar norm() const;
};

// Batch loss and its gradient with respect to every trainable tensor.
// Throws TrainingError naming the tensor on a non-finite entry.
template <typename Scalar>
Gradients<Scalar> compute_gradients(const ParameterStore<Scalar>& params,
                                    const std::vector<const RenderedPrompt*>& batch);

template <typename Scalar>
Scalar batch_loss(const ParameterStore<Scalar>& params, const std::vector<const RenderedPrompt*>& batch);

struct GradProbe {
  std::string tensor;
  Eigen::Index row = 0;
  Eigen::Index col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradProbe> probes;
  double max_rel_error = 0.0;
  double tolerance = 1e-4;

  bool passed() const { return max_rel_error < tolerance; }
  std::vector<GradProbe> failures() const;
};

// Compares analytic gradients with central differences at `probes`
// coordinates spread round-robin over the trainable tensors.
GradCheckReport grad_check(ParameterStore<double> params, const std::vector<const RenderedPrompt*>& batch,
                           std::size_t probes, std::uint64_t seed, double eps = 1e-3,
                           double tolerance = 1e-4);

// Decoupled weight decay Adam over the trainable tensors of a store.
template <typename Scalar>
class AdamW {
 public:
  explicit AdamW(const TrainConfig& config) : config_(config) {}

  void step(ParameterStore<Scalar>& params, const Gradients<Scalar>& grads);
  long steps() const { return t_; }

 private:
  TrainConfig config_;
  long t_ = 0;
  std::map<std::string, std::pair<Matrix<Scalar>, Matrix<Scalar>>> moments_;
};

// Instances of one epoch in presentation order: per user one sequential and
// one direct prompt, plus every explanation training record, each with a
// template drawn from the group's training templates.
std::vector<RenderedPrompt> training_instances(const TaskData& data, const TrainConfig& config, int k,
                                               std::size_t max_length, Rng& rng);

struct TrainResult {
  std::vector<EpochStats> epochs;
  std::vector<StepStats> steps;
  ParameterCount accounting;
};

using StepCallback = std::function<void(const StepStats&)>;

// On a non-finite loss or gradient the exception propagates and `params`
// holds the last good values.
template <typename Scalar>
TrainResult train(ParameterStore<Scalar>& params, const TrainConfig& config, const TaskData& data,
                  const StepCallback& on_step = {});

}  // namespace mfm
