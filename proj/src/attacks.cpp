#include "drsl/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "drsl/binio.hpp"
#include "drsl/rng.hpp"

namespace drsl {

std::string to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::FGSM: return "FGSM";
    case AttackKind::IFGSM: return "IFGSM";
    case AttackKind::PGD: return "PGD";
  }
  return "?";
}

AttackKind attack_kind_from_string(const std::string& s) {
  if (s == "FGSM" || s == "fgsm") return AttackKind::FGSM;
  if (s == "IFGSM" || s == "ifgsm" || s == "I-FGSM" || s == "i-fgsm") return AttackKind::IFGSM;
  if (s == "PGD" || s == "pgd") return AttackKind::PGD;
  throw ValueError("unknown attack kind '" + s + "' (expected FGSM, IFGSM or PGD)");
}

void AttackSpec::validate() const {
  if (!(epsilon >= 0.0)) throw ValueError("attack: epsilon must be >= 0");
  if (kind == AttackKind::IFGSM) {
    if (steps < 1) throw ValueError("attack: I-FGSM needs steps >= 1");
    if (!(alpha > 0.0)) throw ValueError("attack: I-FGSM needs alpha > 0");
  }
  if (kind == AttackKind::PGD) {
    if (steps < 1) throw ValueError("attack: PGD needs steps >= 1");
    if (!(step_size > 0.0)) throw ValueError("attack: PGD needs step_size > 0");
  }
  if (objective == AttackObjective::TrainingLoss) training_loss.validate();
}

AttackSpec AttackSpec::fgsm(double epsilon) {
  AttackSpec s;
  s.kind = AttackKind::FGSM;
  s.epsilon = epsilon;
  s.validate();
  return s;
}

AttackSpec AttackSpec::ifgsm(double epsilon, double alpha, std::size_t steps) {
  AttackSpec s;
  s.kind = AttackKind::IFGSM;
  s.epsilon = epsilon;
  s.alpha = alpha;
  s.steps = steps;
  s.validate();
  return s;
}

AttackSpec AttackSpec::pgd(double epsilon, double step_size, std::size_t steps,
                           bool random_start) {
  AttackSpec s;
  s.kind = AttackKind::PGD;
  s.epsilon = epsilon;
  s.step_size = step_size;
  s.steps = steps;
  s.random_start = random_start;
  s.validate();
  return s;
}

Tensor project_linf(const Tensor& adv, const Tensor& orig, double epsilon) {
  if (adv.shape() != orig.shape()) throw ShapeError("project_linf: shape mismatch");
  if (!(epsilon >= 0.0)) throw ValueError("project_linf: epsilon must be >= 0");
  const auto av = adv.values();
  const auto ov = orig.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double lo = ov[i] - epsilon;
    const double hi = ov[i] + epsilon;
    double v = av[i] < lo ? lo : (av[i] > hi ? hi : av[i]);
    v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
    out[i] = v;
  }
  return Tensor(adv.shape(), std::move(out));
}

namespace {

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

Tensor attack_objective(Tape* tape, const AttackSpec& spec, const Tensor& logits,
                        const std::vector<std::size_t>& labels) {
  if (spec.objective == AttackObjective::CE) return ce_loss(tape, logits, labels);
  return loss_forward(tape, spec.training_loss, logits, labels);
}

// Shared ascent loop: `steps` rounds of x <- project(x + step * sign(grad x)).
// FGSM, I-FGSM and PGD are parameterizations of this loop, which is what makes
// PGD(K=1, eta=eps) bit-identical to FGSM(eps).
AdvBatch iterate_attack(const Model& model, const Tensor& batch,
                        const std::vector<std::size_t>& labels, const AttackSpec& spec,
                        std::size_t steps, double step_size, bool random_start) {
  if (!model.frozen()) {
    throw ContractError("attacks require a frozen model (call freeze() after training)");
  }
  if (labels.size() != batch.dim(0)) throw ShapeError("attack: label count must equal batch size");

  AdvBatch result;
  result.original = batch;
  Tensor x = batch.clone();

  if (random_start && spec.epsilon > 0.0) {
    Rng rng(mix_seed(spec.seed, 0x7067645273ULL));
    auto xv = x.values_mut();
    for (double& v : xv) v += rng.next_uniform(-spec.epsilon, spec.epsilon);
    x = project_linf(x, batch, spec.epsilon);
  }

  for (std::size_t k = 0; k < steps; ++k) {
    Tensor probe = x.clone(/*requires_grad=*/true);
    Tape tape;
    Tensor logits = model.forward(&tape, probe);
    Tensor loss = attack_objective(&tape, spec, logits, labels);
    tape.backward(loss);
    const auto g = probe.grad();
    for (double v : g) {
      if (!std::isfinite(v)) throw NumericError("attack: non-finite gradient");
    }
    auto xv = x.values_mut();
    for (std::size_t i = 0; i < xv.size(); ++i) xv[i] += step_size * sign(g[i]);
    x = project_linf(x, batch, spec.epsilon);
  }

  result.adversarial = x;
  Tensor logits = model.forward(nullptr, x);
  const std::size_t b = logits.dim(0), c = logits.dim(1);
  const auto lv = logits.values();
  result.adv_pred.resize(b);
  result.success.resize(b);
  for (std::size_t r = 0; r < b; ++r) {
    result.adv_pred[r] = argmax(lv.subspan(r * c, c));
    result.success[r] = result.adv_pred[r] != labels[r] ? 1 : 0;
  }
  return result;
}

}  // namespace

AdvBatch fgsm(const Model& model, const Tensor& batch, const std::vector<std::size_t>& labels,
              const AttackSpec& spec) {
  if (spec.kind != AttackKind::FGSM) throw ValueError("fgsm: spec.kind must be FGSM");
  spec.validate();
  return iterate_attack(model, batch, labels, spec, 1, spec.epsilon, false);
}

AdvBatch ifgsm(const Model& model, const Tensor& batch, const std::vector<std::size_t>& labels,
               const AttackSpec& spec) {
  if (spec.kind != AttackKind::IFGSM) throw ValueError("ifgsm: spec.kind must be IFGSM");
  spec.validate();
  return iterate_attack(model, batch, labels, spec, spec.steps, spec.alpha, false);
}

AdvBatch pgd(const Model& model, const Tensor& batch, const std::vector<std::size_t>& labels,
             const AttackSpec& spec) {
  if (spec.kind != AttackKind::PGD) throw ValueError("pgd: spec.kind must be PGD");
  spec.validate();
  return iterate_attack(model, batch, labels, spec, spec.steps, spec.step_size,
                        spec.random_start);
}

AdvBatch run_attack(const Model& model, const Tensor& batch,
                    const std::vector<std::size_t>& labels, const AttackSpec& spec) {
  switch (spec.kind) {
    case AttackKind::FGSM: return fgsm(model, batch, labels, spec);
    case AttackKind::IFGSM: return ifgsm(model, batch, labels, spec);
    case AttackKind::PGD: return pgd(model, batch, labels, spec);
  }
  throw ValueError("run_attack: unknown attack kind");
}

// ---- adversarial-batch container ----------------------------------------------

namespace {

constexpr std::uint32_t kAdvVersion = 1;

void put_blob(std::ostream& os, const std::string& name, const Shape& shape,
              std::span<const double> data) {
  binio::put_string(os, name);
  binio::put_u32(os, static_cast<std::uint32_t>(shape.size()));
  for (std::size_t d : shape) binio::put_u64(os, d);
  for (double v : data) binio::put_f64(os, v);
}

Tensor get_blob(std::istream& is, const std::string& expected, const std::string& path) {
  const std::string name = binio::get_string(is);
  if (name != expected) {
    throw FormatError("adv batch: expected blob '" + expected + "', found '" + name + "' in " +
                      path);
  }
  const std::uint32_t ndim = binio::get_u32(is);
  Shape shape(ndim);
  for (std::uint32_t d = 0; d < ndim; ++d) shape[d] = static_cast<std::size_t>(binio::get_u64(is));
  std::vector<double> data(shape_numel(shape));
  for (double& v : data) v = binio::get_f64(is);
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

void save_adv_batch(const AdvBatch& batch, const std::string& path) {
  if (!batch.original.defined() || !batch.adversarial.defined()) {
    throw ContractError("save_adv_batch: empty batch");
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("adv batch: cannot open '" + path + "' for writing");
  os.write(binio::kMagic, 4);
  binio::put_u32(os, kAdvVersion);
  binio::put_string(os, "adv-batch");
  binio::put_u32(os, 4);  // blob count
  put_blob(os, "original", batch.original.shape(), batch.original.values());
  put_blob(os, "adversarial", batch.adversarial.shape(), batch.adversarial.values());
  const std::size_t n = batch.success.size();
  std::vector<double> flags(n), preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    flags[i] = batch.success[i];
    preds[i] = static_cast<double>(batch.adv_pred[i]);
  }
  put_blob(os, "success", Shape{n}, flags);
  put_blob(os, "adv_pred", Shape{n}, preds);
  if (!os) throw FormatError("adv batch: write to '" + path + "' failed");
}

AdvBatch load_adv_batch(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("adv batch: cannot open '" + path + "'");
  binio::check_magic(is, path);
  if (binio::get_u32(is) != kAdvVersion) throw FormatError("adv batch: unsupported version");
  if (binio::get_string(is) != "adv-batch") throw FormatError("adv batch: wrong container kind");
  if (binio::get_u32(is) != 4) throw FormatError("adv batch: unexpected blob count");
  AdvBatch batch;
  batch.original = get_blob(is, "original", path);
  batch.adversarial = get_blob(is, "adversarial", path);
  const Tensor flags = get_blob(is, "success", path);
  const Tensor preds = get_blob(is, "adv_pred", path);
  batch.success.resize(flags.numel());
  batch.adv_pred.resize(preds.numel());
  for (std::size_t i = 0; i < flags.numel(); ++i) {
    batch.success[i] = flags.values()[i] != 0.0 ? 1 : 0;
    batch.adv_pred[i] = static_cast<std::size_t>(preds.values()[i]);
  }
  return batch;
}

}  // namespace drsl
