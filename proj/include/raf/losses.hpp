#pragma once

#include "raf/mask.hpp"
#include "raf/tensor.hpp"

namespace raf {

// Adversarial weight of the total objective.
inline constexpr double kLambdaAdvDefault = 0.01;

struct LossReport {
  double rec = 0.0;
  double adv_g = 0.0;
  double adv_d = 0.0;
  double total = 0.0;
  double lambda_adv = kLambdaAdvDefault;
};

// Mean absolute error inside the hole region plus mean absolute error
// outside it, each normalized by its own pixel count. The mask must contain
// at least one hole and one valid pixel.
double reconstruction_loss(const Tensor& y, const Tensor& x, const MaskSequence& masks);

// Hinge losses evaluated on caller-supplied discriminator scores:
//   adv_d = mean(relu(1 - d_fake)) + mean(relu(1 + d_real))
//   adv_g = -mean(d_fake)
//   total = rec + lambda_adv * adv_g
LossReport adversarial_losses(const Tensor& d_fake, const Tensor& d_real,
                              double lambda_adv, double rec);

}  // namespace raf
