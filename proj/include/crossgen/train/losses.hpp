#pragma once

#include "crossgen/tensor/ops.hpp"
#include "crossgen/train/config.hpp"

namespace crossgen::train {

using tensor::Tensor;
using tensor::Var;

inline constexpr float kProbabilityClamp = 1e-7f;

// Pixelwise Bernoulli negative log-likelihood summed over each image, from
// decoder probabilities; one value per batch row.
Var reconstruction_loss(const Var& predicted, const Tensor& target);
// Same quantity from decoder logits (numerically stable; used in training).
Var reconstruction_loss_from_logits(const Var& logits, const Tensor& target);

// Scalar loss with its batch-mean components.
struct LossTerms {
  Var total;
  double reconstruction = 0.0;
  double kl = 0.0;
};

// mean over the batch of reconstruction + KL.
LossTerms vae_loss(const Var& logits, const Tensor& target, const Var& mu, const Var& log_var);

// -mean log D(real) - mean log(1 - D(fake)), probabilities clamped.
Var discriminator_loss(const Var& d_real, const Var& d_fake);

// minimax: mean log(1 - D(fake)); non_saturating: -mean log D(fake).
Var generator_adversarial_loss(const Var& d_fake, GeneratorLossMode mode);

struct GeneratorLoss {
  Var total;
  double adversarial = 0.0;
  double reconstruction = 0.0;  // unweighted batch mean
  double kl = 0.0;
};

// adversarial + alpha * mean reconstruction + mean KL; alpha weights only the
// reconstruction term.
GeneratorLoss generator_loss(const Var& d_fake, const Var& logits, const Tensor& target, const Var& mu,
                             const Var& log_var, double alpha, GeneratorLossMode mode);

}  // namespace crossgen::train
