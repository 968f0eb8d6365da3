#include "crossgen/train/losses.hpp"

namespace crossgen::train {

using namespace crossgen::tensor;

Var reconstruction_loss(const Var& predicted, const Tensor& target) {
  return binary_cross_entropy(predicted, target, kProbabilityClamp);
}

Var reconstruction_loss_from_logits(const Var& logits, const Tensor& target) {
  return binary_cross_entropy_with_logits(logits, target);
}

LossTerms vae_loss(const Var& logits, const Tensor& target, const Var& mu, const Var& log_var) {
  const Var recon = mean(reconstruction_loss_from_logits(logits, target));
  const Var kl = mean(kl_divergence(mu, log_var));
  return {add(recon, kl), recon.value()[0], kl.value()[0]};
}

Var discriminator_loss(const Var& d_real, const Var& d_fake) {
  return scale(add(mean(log_clamped(d_real, kProbabilityClamp)), mean(log1m_clamped(d_fake, kProbabilityClamp))),
               -1.0f);
}

Var generator_adversarial_loss(const Var& d_fake, GeneratorLossMode mode) {
  if (mode == GeneratorLossMode::minimax) return mean(log1m_clamped(d_fake, kProbabilityClamp));
  return scale(mean(log_clamped(d_fake, kProbabilityClamp)), -1.0f);
}

GeneratorLoss generator_loss(const Var& d_fake, const Var& logits, const Tensor& target, const Var& mu,
                             const Var& log_var, double alpha, GeneratorLossMode mode) {
  const Var adversarial = generator_adversarial_loss(d_fake, mode);
  const Var recon = mean(reconstruction_loss_from_logits(logits, target));
  const Var kl = mean(kl_divergence(mu, log_var));
  const Var total = add(add(adversarial, scale(recon, static_cast<float>(alpha))), kl);
  return {total, adversarial.value()[0], recon.value()[0], kl.value()[0]};
}

}  // namespace crossgen::train
