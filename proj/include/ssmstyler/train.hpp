#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "adam.hpp"
#include "corpus.hpp"
#include "error.hpp"
#include "losses.hpp"
#include "model.hpp"
#include "params.hpp"

namespace ssmstyler {

struct TrainOptions {
  std::size_t epochs = 5;
  std::uint64_t seed = 0;
  LossWeights weights{};
  FusionVariant variant = FusionVariant::transformer_ssm;
  AdamState adam{};
  // Reconstruction term for the decoder; its gradient stops at the decoder input.
  bool train_decoder = true;
};

struct TrainResult {
  ParamStore params;
  std::vector<LossReport> history;
};

using StepCallback = std::function<void(std::size_t step, const LossReport&)>;

/// Per-example Adam steps over the corpus, in corpus order, for `epochs` passes.
inline TrainResult train(const std::vector<ToyExample>& corpus, const ModelConfig& cfg,
                         const TrainOptions& opts, const StepCallback& on_step = {}) {
  if (corpus.empty()) throw InvalidArgument("training corpus is empty");
  opts.weights.validate();
  TrainResult r{init_params(opts.seed, cfg), {}};
  AdamState adam = opts.adam;
  const Vocabulary& vocab = Vocabulary::builtin();
  std::vector<TokenSequence> tokens;
  for (const auto& ex : corpus) tokens.push_back(tokenize(ex.prompt, vocab));
  const auto coupling = opts.train_decoder ? DecoderCoupling::detached : DecoderCoupling::none;

  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    for (std::size_t i = 0; i < corpus.size(); ++i, ++step) {
      const ToyExample& ex = corpus[i];
      const ForwardPass fp = forward_pass(cfg, r.params, ex.waveform, tokens[i], ex.frame_labels,
                                          opts.variant, opts.weights, coupling);
      if (!std::isfinite(fp.report.total) || !std::isfinite(fp.recon))
        throw NonFiniteError("non-finite loss at step " + std::to_string(step), step);
      r.params.zero_grad();
      backward_pass(cfg, fp, r.params, ex.waveform, tokens[i], ex.frame_labels, opts.weights,
                    coupling);
      try {
        adam_step(r.params, adam);
      } catch (const NonFiniteError& e) {
        throw NonFiniteError(std::string(e.what()) + " at step " + std::to_string(step), step);
      }
      if (!r.params.all_finite())
        throw NonFiniteError("non-finite parameter after step " + std::to_string(step), step);
      r.history.push_back(fp.report);
      if (on_step) on_step(step, fp.report);
    }
  }
  return r;
}

}  // namespace ssmstyler
