#pragma once

#include <vector>

#include "cfa/tensor.hpp"

namespace cfa {

/// Scalar values of one loss evaluation. total is always
/// alpha * d_kl_soft + (1 - alpha) * (l_m + l_r), in exactly that
/// floating-point order.
struct LossBreakdown {
    double l_m = 0.0;
    double l_r = 0.0;
    double d_kl_soft = 0.0;
    double total = 0.0;
    double alpha = 0.0;
};

struct FinalLoss {
    Tensor total;
    LossBreakdown parts;
};

/// Shannon entropy of a probability vector, natural log, 0*log 0 = 0.
Tensor entropy(Tape& tape, const Tensor& p);

/// -sum p_i log q_i, with q clamped below at 1e-12 before the log.
Tensor cross_entropy(Tape& tape, const Tensor& p, const Tensor& q);

/// KL divergence between shared-space feature vectors. Both vectors are
/// softmax-normalized first, then KL(p_s || p_t) = H(p_s, p_t) - H(p_s).
/// Non-negative for all inputs.
Tensor kl_features(Tape& tape, const Tensor& f_student, const Tensor& f_teacher);

/// Sum of kl_features over every teacher.
Tensor loss_m(Tape& tape, const Tensor& f_student, const std::vector<Tensor>& f_teachers);

/// Reconstruction loss: sum over teachers of ||F' - F||_2. The squared
/// variant is exposed behind a switch; the default is the unsquared norm.
Tensor loss_r(Tape& tape, const std::vector<Tensor>& reconstructed,
              const std::vector<Tensor>& originals, bool squared = false);

/// KL between the softmaxed student logits and the stacked teacher target
/// distribution (already a probability vector over the union of classes).
Tensor kl_soft(Tape& tape, const Tensor& student_logits, const Tensor& stacked_teacher_probs);

/// Plain logit-matching distillation loss ||z_hat - z||_2^2. Single-teacher
/// baseline utility; not part of the amalgamation objective.
Tensor kd_loss(Tape& tape, const Tensor& student_logits, const Tensor& teacher_logits);

/// Blends the three terms: alpha * d_kl_soft + (1 - alpha) * (l_m + l_r).
FinalLoss final_loss(Tape& tape, const Tensor& d_kl_soft, const Tensor& l_m, const Tensor& l_r,
                     double alpha);

}  // namespace cfa
