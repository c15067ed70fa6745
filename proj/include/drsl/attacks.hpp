#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "drsl/losses.hpp"
#include "drsl/model.hpp"
#include "drsl/tensor.hpp"

namespace drsl {

enum class AttackKind { FGSM, IFGSM, PGD };
enum class AttackObjective { CE, TrainingLoss };

std::string to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& s);

struct AttackSpec {
  AttackKind kind = AttackKind::PGD;
  double epsilon = 0.0;      // l-inf budget in [0,1] pixel units; 0 is the identity
  double alpha = 0.0;        // I-FGSM per-step size
  std::size_t steps = 1;     // iteration count (N for I-FGSM, K for PGD)
  double step_size = 0.0;    // PGD step eta
  bool random_start = false; // PGD only; off by default, matching the update rule
  AttackObjective objective = AttackObjective::CE;
  LossSpec training_loss{};  // used when objective == TrainingLoss
  std::uint64_t seed = 0;    // random start draws

  void validate() const;
  static AttackSpec fgsm(double epsilon);
  static AttackSpec ifgsm(double epsilon, double alpha, std::size_t steps);
  static AttackSpec pgd(double epsilon, double step_size, std::size_t steps,
                        bool random_start = false);
};

struct AdvBatch {
  Tensor original;
  Tensor adversarial;                  // same shape, every pixel in [0, 1]
  std::vector<std::uint8_t> success;   // post-attack argmax != label
  std::vector<std::size_t> adv_pred;   // post-attack predicted class
};

// Elementwise clamp of adv into [orig - eps, orig + eps], then into [0, 1].
Tensor project_linf(const Tensor& adv, const Tensor& orig, double epsilon);

AdvBatch fgsm(const Model& model, const Tensor& batch, const std::vector<std::size_t>& labels,
              const AttackSpec& spec);
AdvBatch ifgsm(const Model& model, const Tensor& batch, const std::vector<std::size_t>& labels,
               const AttackSpec& spec);
AdvBatch pgd(const Model& model, const Tensor& batch, const std::vector<std::size_t>& labels,
             const AttackSpec& spec);

// Dispatch on spec.kind.
AdvBatch run_attack(const Model& model, const Tensor& batch,
                    const std::vector<std::size_t>& labels, const AttackSpec& spec);

// Adversarial-batch dump in the same binary container format as model
// checkpoints (magic "DRSL", named little-endian float64 blobs). Round-trips
// bit-exactly.
void save_adv_batch(const AdvBatch& batch, const std::string& path);
AdvBatch load_adv_batch(const std::string& path);

}  // namespace drsl
