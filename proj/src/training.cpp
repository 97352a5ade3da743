// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The mfm Authors

#include "mfm/training.hpp"

#include <chrono>
#include <cmath>

namespace mfm {

const char* to_string(DirectPositive p) { return p == DirectPositive::Last ? "last" : "history"; }

DirectPositive parse_direct_positive(const std::string& name) {
  if (name == "last") return DirectPositive::Last;
  if (name == "history") return DirectPositive::History;
  throw ConfigError("unknown direct positive '" + name + "' (last, history)");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be non-negative");
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be positive");
  if (weight_decay < 0) throw ConfigError("train.weight_decay must be non-negative");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
    throw ConfigError("train.beta1 and train.beta2 must lie in [0, 1)");
  }
  if (!(adam_eps > 0)) throw ConfigError("train.adam_eps must be positive");
  if (max_steps < 0) throw ConfigError("train.max_steps must be non-negative");
  if (candidate_size < 2) throw ConfigError("train.candidate_size must be at least 2");
  for (const auto& [id, w] : template_weights) {
    if (!(w >= 0) || !std::isfinite(w)) throw ConfigError("template weight for " + id + " must be >= 0");
  }
}

namespace {

std::vector<int> loss_targets(const std::vector<int>& target) {
  std::vector<int> out(target);
  for (auto& t : out) {
    if (t == kPadId) t = -1;
  }
  return out;
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

}  // namespace

template <typename Scalar>
Scalar nll_loss(const Matrix<Scalar>& logits, const std::vector<int>& target) {
  if (static_cast<std::size_t>(logits.rows()) != target.size()) {
    throw DimensionError("nll_loss: " + std::to_string(logits.rows()) + " steps but " +
                         std::to_string(target.size()) + " targets");
  }
  Scalar loss = 0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int y = target[static_cast<std::size_t>(i)];
    if (y == kPadId) continue;
    if (y < 0 || y >= logits.cols()) throw RangeError("nll_loss: target outside vocabulary");
    const auto row = logits.row(i);
    const Scalar m = row.maxCoeff();
    loss += m + std::log((row.array() - m).exp().sum()) - row(y);
  }
  return loss;
}

template <typename Scalar>
Scalar Gradients<Scalar>::norm() const {
  Scalar sq = 0;
  for (const auto& [name, g] : tensors) sq += g.squaredNorm();
  return std::sqrt(sq);
}

template <typename Scalar>
Gradients<Scalar> compute_gradients(const ParameterStore<Scalar>& params,
                                    const std::vector<const RenderedPrompt*>& batch) {
  Gradients<Scalar> out;
  for (const auto& t : params) {
    if (!t.frozen) out.tensors.emplace(t.spec.name, Matrix<Scalar>::Zero(t.value.rows(), t.value.cols()));
  }
  if (batch.empty()) return out;
  const Scalar weight = Scalar(1) / static_cast<Scalar>(batch.size());
  for (const auto* prompt : batch) {
    const auto target = prompt->target_ids();
    ad::Tape<Scalar> tape;
    Binder<Scalar> bind(tape, params);
    auto logits = forward(bind, *prompt, shift_right(target));
    auto loss = ad::cross_entropy_sum(logits, loss_targets(target));
    const Scalar value = loss.value()(0, 0);
    if (!std::isfinite(value)) {
      throw TrainingError("non-finite loss on a " + std::string(to_string(prompt->group)) + " prompt of user " +
                          prompt->user_id);
    }
    out.loss += weight * value;
    out.tokens += target.size();
    tape.backward(loss, weight);
    for (const auto& [idx, leaf] : bind.leaves()) {
      const auto& t = params[idx];
      if (t.frozen || !tape.has_grad(leaf.id)) continue;
      out.tensors.at(t.spec.name) += leaf.grad();
    }
  }
  for (const auto& [name, g] : out.tensors) {
    if (!g.allFinite()) throw TrainingError("non-finite gradient in " + name);
  }
  return out;
}

template <typename Scalar>
Scalar batch_loss(const ParameterStore<Scalar>& params, const std::vector<const RenderedPrompt*>& batch) {
  if (batch.empty()) return 0;
  Scalar total = 0;
  for (const auto* prompt : batch) {
    const auto target = prompt->target_ids();
    total += nll_loss(forward_logits(params, *prompt, shift_right(target)), target);
  }
  return total / static_cast<Scalar>(batch.size());
}

std::vector<GradProbe> GradCheckReport::failures() const {
  std::vector<GradProbe> out;
  for (const auto& p : probes) {
    if (!(p.rel_error < tolerance)) out.push_back(p);
  }
  return out;
}

GradCheckReport grad_check(ParameterStore<double> params, const std::vector<const RenderedPrompt*>& batch,
                           std::size_t probes, std::uint64_t seed, double eps, double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  const auto grads = compute_gradients(params, batch);
  std::vector<std::size_t> trainable;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].frozen) trainable.push_back(i);
  }
  if (trainable.empty() || probes == 0) return report;
  Rng rng(derive_seed(seed, "gradcheck"));
  for (std::size_t p = 0; p < probes; ++p) {
    auto& t = params[trainable[p % trainable.size()]];
    const auto flat = static_cast<Eigen::Index>(uniform_index(rng, static_cast<std::size_t>(t.value.size())));
    GradProbe probe;
    probe.tensor = t.spec.name;
    probe.row = flat / t.value.cols();
    probe.col = flat % t.value.cols();
    double& x = t.value(probe.row, probe.col);
    const double saved = x;
    x = saved + eps;
    const double up = batch_loss(params, batch);
    x = saved - eps;
    const double down = batch_loss(params, batch);
    x = saved;
    probe.numeric = (up - down) / (2 * eps);
    probe.analytic = grads.tensors.at(t.spec.name)(probe.row, probe.col);
    const double scale = std::max({std::abs(probe.analytic), std::abs(probe.numeric), 1e-8});
    probe.rel_error = std::abs(probe.analytic - probe.numeric) / scale;
    report.max_rel_error = std::max(report.max_rel_error, probe.rel_error);
    report.probes.push_back(std::move(probe));
  }
  return report;
}

template <typename Scalar>
void AdamW<Scalar>::step(ParameterStore<Scalar>& params, const Gradients<Scalar>& grads) {
  ++t_;
  Scalar clip = 1;
  if (config_.clip_norm > 0) {
    const Scalar norm = grads.norm();
    if (norm > Scalar(config_.clip_norm)) clip = Scalar(config_.clip_norm) / norm;
  }
  const auto lr = static_cast<Scalar>(config_.learning_rate);
  const auto b1 = static_cast<Scalar>(config_.beta1);
  const auto b2 = static_cast<Scalar>(config_.beta2);
  const auto eps = static_cast<Scalar>(config_.adam_eps);
  const auto wd = static_cast<Scalar>(config_.weight_decay);
  const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(config_.beta1, double(t_)));
  const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(config_.beta2, double(t_)));
  for (const auto& [name, raw] : grads.tensors) {
    auto& tensor = params[params.index_of(name)];
    if (tensor.frozen) throw TrainingError("gradient supplied for frozen tensor " + name);
    auto [it, fresh] = moments_.try_emplace(name);
    auto& [m, v] = it->second;
    if (fresh) {
      m = Matrix<Scalar>::Zero(raw.rows(), raw.cols());
      v = Matrix<Scalar>::Zero(raw.rows(), raw.cols());
    }
    const Matrix<Scalar> g = raw * clip;
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
    auto& p = tensor.value;
    p.array() -= lr * ((m.array() / c1) / ((v.array() / c2).sqrt() + eps) + wd * p.array());
  }
}

namespace {

const PromptTemplate* pick_template(const std::vector<const PromptTemplate*>& pool,
                                    const std::map<std::string, double>& weights, Rng& rng) {
  if (pool.empty()) return nullptr;
  if (weights.empty()) return pool[uniform_index(rng, pool.size())];
  std::vector<double> cumulative;
  double total = 0;
  for (const auto* t : pool) {
    auto it = weights.find(t->id);
    total += it == weights.end() ? 1.0 : it->second;
    cumulative.push_back(total);
  }
  if (!(total > 0)) return nullptr;
  const double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (u < cumulative[i]) return pool[i];
  }
  return pool.back();
}

bool wants(const TrainConfig& config, TaskGroup group) {
  return std::find(config.groups.begin(), config.groups.end(), group) != config.groups.end();
}

}  // namespace

std::vector<RenderedPrompt> training_instances(const TaskData& data, const TrainConfig& config, int k,
                                               std::size_t max_length, Rng& rng) {
  const auto seq_pool = training_templates(data.templates, TaskGroup::Sequential);
  const auto direct_pool = training_templates(data.templates, TaskGroup::Direct);
  const auto expl_pool = training_templates(data.templates, TaskGroup::Explanation);
  std::vector<RenderedPrompt> out;
  for (const auto& user : data.corpus.users()) {
    const auto& s = data.splits.user(user);
    if (wants(config, TaskGroup::Sequential) && s.train.size() >= 2) {
      if (const auto* t = pick_template(seq_pool, config.template_weights, rng)) {
        RenderContext ctx;
        ctx.split = Split::Train;
        ctx.max_length = max_length;
        out.push_back(render(*t, data.corpus, data.splits, user, k, data.vocab, ctx));
      }
    }
    if (wants(config, TaskGroup::Direct)) {
      if (const auto* t = pick_template(direct_pool, config.template_weights, rng)) {
        const auto& positive = config.direct_positive == DirectPositive::Last
                                   ? s.train.back()
                                   : s.train[uniform_index(rng, s.train.size())];
        const auto candidates = sample_candidate_set(data.corpus, user, positive, config.candidate_size, rng);
        RenderContext ctx;
        ctx.split = Split::Train;
        ctx.candidates = &candidates;
        ctx.max_length = max_length;
        out.push_back(render(*t, data.corpus, data.splits, user, k, data.vocab, ctx));
      }
    }
  }
  if (wants(config, TaskGroup::Explanation)) {
    for (auto record : data.splits.explanation_train) {
      const auto* t = pick_template(expl_pool, config.template_weights, rng);
      if (!t) break;
      RenderContext ctx;
      ctx.split = Split::Train;
      ctx.explanation_record = record;
      ctx.max_length = max_length;
      const auto& user = data.corpus.interactions().at(record).user_id;
      out.push_back(render(*t, data.corpus, data.splits, user, k, data.vocab, ctx));
    }
  }
  shuffle(out.begin(), out.end(), rng);
  return out;
}

template <typename Scalar>
TrainResult train(ParameterStore<Scalar>& params, const TrainConfig& config, const TaskData& data,
                  const StepCallback& on_step) {
  config.validate();
  const auto& mc = params.config();
  TrainResult result;
  result.accounting = params.count();
  AdamW<Scalar> optimizer(config);
  Rng rng(derive_seed(config.seed, "train"));
  long step = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto epoch_start = std::chrono::steady_clock::now();
    const auto instances =
        training_instances(data, config, mc.image_tokens, static_cast<std::size_t>(mc.max_len), rng);
    EpochStats es;
    es.epoch = epoch;
    bool stop = false;
    for (std::size_t begin = 0; begin < instances.size(); begin += static_cast<std::size_t>(config.batch_size)) {
      const auto step_start = std::chrono::steady_clock::now();
      const auto end = std::min(instances.size(), begin + static_cast<std::size_t>(config.batch_size));
      std::vector<const RenderedPrompt*> batch;
      for (auto i = begin; i < end; ++i) batch.push_back(&instances[i]);
      const auto grads = compute_gradients(params, batch);
      const double norm = static_cast<double>(grads.norm());
      optimizer.step(params, grads);
      StepStats ss;
      ss.epoch = epoch;
      ss.step = ++step;
      ss.loss = static_cast<double>(grads.loss);
      ss.grad_norm = norm;
      ss.tokens = grads.tokens;
      ss.ms = elapsed_ms(step_start);
      es.mean_loss += ss.loss;
      es.tokens += ss.tokens;
      ++es.steps;
      result.steps.push_back(ss);
      if (on_step) on_step(ss);
      if (config.max_steps > 0 && step >= config.max_steps) {
        stop = true;
        break;
      }
    }
    if (es.steps > 0) es.mean_loss /= double(es.steps);
    es.ms = elapsed_ms(epoch_start);
    result.epochs.push_back(es);
    if (stop) break;
  }
  return result;
}

#define MFM_INSTANTIATE(S)                                                                              \
  template S nll_loss<S>(const Matrix<S>&, const std::vector<int>&);                                    \
  template struct Gradients<S>;                                                                         \
  template Gradients<S> compute_gradients<S>(const ParameterStore<S>&, const std::vector<const RenderedPrompt*>&); \
  template S batch_loss<S>(const ParameterStore<S>&, const std::vector<const RenderedPrompt*>&);        \
  template class AdamW<S>;                                                                              \
  template TrainResult train<S>(ParameterStore<S>&, const TrainConfig&, const TaskData&, const StepCallback&);

MFM_INSTANTIATE(float)
MFM_INSTANTIATE(double)

}  // namespace mfm
