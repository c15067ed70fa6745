#include "drsl/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace drsl {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ValueError("expected a boolean, got '" + v + "'");
}

double parse_double(const std::string& v) {
  std::size_t pos = 0;
  const double d = std::stod(v, &pos);
  if (pos != v.size()) throw ValueError("expected a number, got '" + v + "'");
  return d;
}

std::uint64_t parse_u64(const std::string& v) {
  std::size_t pos = 0;
  const unsigned long long u = std::stoull(v, &pos);
  if (pos != v.size()) throw ValueError("expected an integer, got '" + v + "'");
  return static_cast<std::uint64_t>(u);
}

// FNV-1a over the canonical config text.
std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::vector<LossSpec> ExperimentConfig::arms() const {
  std::vector<LossSpec> out;
  for (LossKind kind : loss_kinds) {
    switch (kind) {
      case LossKind::CE:
        out.push_back(LossSpec::ce());
        break;
      case LossKind::GCE:
        out.push_back(LossSpec::gce(gce_q));
        break;
      case LossKind::DRSL:
        for (double tau : taus) {
          out.push_back(LossSpec::drsl(tau, metric, restrict_to_non_true));
        }
        break;
    }
  }
  return out;
}

AttackSpec ExperimentConfig::attack_at(double epsilon, const LossSpec& training_loss) const {
  AttackSpec spec;
  spec.kind = attack_kind;
  spec.epsilon = epsilon;
  spec.alpha = attack_alpha;
  spec.steps = attack_steps;
  spec.step_size = attack_step_size > 0.0 ? attack_step_size : epsilon / 10.0;
  spec.random_start = attack_random_start;
  spec.objective = attack_objective;
  spec.training_loss = training_loss;
  if (spec.kind == AttackKind::FGSM) {
    spec.steps = 1;
  } else if (spec.kind == AttackKind::PGD && epsilon == 0.0) {
    spec.step_size = 1.0;  // any positive value; epsilon 0 forces the identity
  }
  return spec;
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream os;
  os << "data.name = " << to_string(data_name) << "\n";
  os << "data.dir = " << data_dir << "\n";
  os << "data.subset_size = " << subset_size << "\n";
  os << "data.test_subset_size = " << test_subset_size << "\n";
  os << "model.architecture = " << to_string(model.arch) << "\n";
  if (model.arch == Architecture::MLP) {
    os << "model.widths = ";
    for (std::size_t i = 0; i < model.hidden.size(); ++i) os << (i ? "," : "") << model.hidden[i];
    os << "\n";
  } else {
    os << "model.channels = ";
    for (std::size_t i = 0; i < model.channels.size(); ++i) {
      os << (i ? "," : "") << model.channels[i];
    }
    os << "\n";
    os << "model.dense_hidden = " << model.dense_hidden << "\n";
  }
  os << "loss.kind = ";
  for (std::size_t i = 0; i < loss_kinds.size(); ++i) {
    os << (i ? "," : "") << to_string(loss_kinds[i]);
  }
  os << "\n";
  os << "loss.q = " << format_double(gce_q) << "\n";
  os << "loss.tau = ";
  for (std::size_t i = 0; i < taus.size(); ++i) os << (i ? "," : "") << format_double(taus[i]);
  os << "\n";
  os << "loss.metric = " << to_string(metric) << "\n";
  os << "loss.restrict_to_non_true = " << (restrict_to_non_true ? "true" : "false") << "\n";
  os << "train.epochs = " << epochs << "\n";
  os << "train.batch_size = " << batch_size << "\n";
  os << "train.lr = " << format_double(lr) << "\n";
  os << "train.beta1 = " << format_double(beta1) << "\n";
  os << "train.beta2 = " << format_double(beta2) << "\n";
  os << "train.eps = " << format_double(adam_eps) << "\n";
  os << "attack.kind = " << to_string(attack_kind) << "\n";
  os << "attack.epsilon = ";
  for (std::size_t i = 0; i < epsilon_grid.size(); ++i) {
    os << (i ? "," : "") << format_double(epsilon_grid[i]);
  }
  os << "\n";
  os << "attack.alpha = " << format_double(attack_alpha) << "\n";
  os << "attack.steps = " << attack_steps << "\n";
  os << "attack.step_size = " << format_double(attack_step_size) << "\n";
  os << "attack.random_start = " << (attack_random_start ? "true" : "false") << "\n";
  os << "attack.loss = " << (attack_objective == AttackObjective::CE ? "CE" : "training-loss")
     << "\n";
  os << "attack.subset_size = " << attack_subset_size << "\n";
  os << "noise.rate = " << format_double(noise_rate) << "\n";
  os << "noise.seed = " << noise_seed << "\n";
  os << "seeds = ";
  for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
  os << "\n";
  return os.str();
}

std::string ExperimentConfig::config_hash() const {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a(canonical_text());
  return os.str();
}

void ExperimentConfig::validate(bool check_files) const {
  std::vector<std::string> problems;
  auto complain = [&problems](const std::string& msg) { problems.push_back(msg); };

  if (seeds.empty()) complain("seeds: list must be non-empty");
  if (loss_kinds.empty()) complain("loss.kind: list must be non-empty");
  if (!(gce_q > 0.0 && gce_q <= 1.0)) complain("loss.q: must be in (0, 1]");
  const bool has_drsl =
      std::find(loss_kinds.begin(), loss_kinds.end(), LossKind::DRSL) != loss_kinds.end();
  if (has_drsl) {
    if (taus.empty()) complain("loss.tau: DRSL arm needs at least one tau");
    for (double tau : taus) {
      if (!(tau >= 0.0)) complain("loss.tau: values must be >= 0");
    }
  }
  if (batch_size == 0) complain("train.batch_size: must be >= 1");
  if (!(lr > 0.0)) complain("train.lr: must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0) complain("train.beta1: must be in [0, 1)");
  if (beta2 < 0.0 || beta2 >= 1.0) complain("train.beta2: must be in [0, 1)");
  if (!(adam_eps > 0.0)) complain("train.eps: must be positive");
  if (epsilon_grid.empty()) complain("attack.epsilon: grid must be non-empty");
  for (double e : epsilon_grid) {
    if (!(e >= 0.0)) complain("attack.epsilon: values must be >= 0");
  }
  if (!std::is_sorted(epsilon_grid.begin(), epsilon_grid.end())) {
    complain("attack.epsilon: grid must be sorted ascending");
  }
  if (attack_kind != AttackKind::FGSM && attack_steps == 0) {
    complain("attack.steps: must be >= 1 for iterative attacks");
  }
  if (attack_kind == AttackKind::IFGSM && !(attack_alpha > 0.0)) {
    complain("attack.alpha: must be positive for I-FGSM");
  }
  if (attack_step_size < 0.0) complain("attack.step_size: must be >= 0");
  if (noise_rate < 0.0 || noise_rate > 1.0) complain("noise.rate: must be in [0, 1]");
  try {
    model.validate();
  } catch (const Error& e) {
    complain(e.what());
  }
  const auto& in = model.input_shape;
  const bool mnist_shape = in[0] == 1 && in[1] == 28 && in[2] == 28;
  const bool cifar_shape = in[0] == 3 && in[1] == 32 && in[2] == 32;
  if (data_name == DatasetName::MNIST && !mnist_shape) {
    complain("model.input_shape: MNIST requires (1, 28, 28)");
  }
  if (data_name == DatasetName::CIFAR10 && !cifar_shape) {
    complain("model.input_shape: CIFAR10 requires (3, 32, 32)");
  }
  if (check_files) {
    namespace fs = std::filesystem;
    if (data_dir.empty()) {
      complain("data.dir: must be set");
    } else if (!fs::exists(data_dir)) {
      complain("data.dir: directory not found: " + data_dir);
    } else {
      const std::vector<std::string> needed =
          data_name == DatasetName::MNIST
              ? std::vector<std::string>{"train-images-idx3-ubyte", "train-labels-idx1-ubyte",
                                         "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"}
              : std::vector<std::string>{"data_batch_1.bin", "test_batch.bin"};
      for (const std::string& base : needed) {
        const fs::path p = fs::path(data_dir) / base;
        if (!fs::exists(p) && !fs::exists(p.string() + ".gz")) {
          complain("data.dir: missing " + p.string() + "[.gz]");
        }
      }
    }
  }
  if (!problems.empty()) {
    std::ostringstream os;
    os << "invalid configuration (" << problems.size() << " problem"
       << (problems.size() > 1 ? "s" : "") << "):";
    for (const std::string& p : problems) os << "\n  - " << p;
    throw ConfigError(os.str());
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  ExperimentConfig cfg;
  bool test_subset_given = false;
  bool model_defaults = true;
  try {
    if (auto it = kv.find("data.name"); it != kv.end()) {
      cfg.data_name = dataset_name_from_string(it->second);
    }
    // Architecture first: it decides which model defaults apply.
    if (auto it = kv.find("model.architecture"); it != kv.end()) {
      cfg.model = architecture_from_string(it->second) == Architecture::MLP
                      ? ModelConfig::mlp_mnist()
                      : ModelConfig::vgg_small_cifar10();
      model_defaults = false;
    }
    if (model_defaults && cfg.data_name == DatasetName::CIFAR10) {
      cfg.model = ModelConfig::vgg_small_cifar10();
    }
    if (cfg.data_name == DatasetName::CIFAR10) {
      cfg.model.input_shape = {3, 32, 32};
      cfg.epsilon_grid = {2.0 / 255.0, 4.0 / 255.0, 8.0 / 255.0};
    }
    for (const auto& [key, value] : kv) {
      if (key == "data.name" || key == "model.architecture") continue;
      if (key == "data.dir") cfg.data_dir = value;
      else if (key == "data.subset_size") cfg.subset_size = parse_u64(value);
      else if (key == "data.test_subset_size") { cfg.test_subset_size = parse_u64(value); test_subset_given = true; }
      else if (key == "model.widths") {
        cfg.model.hidden.clear();
        for (const auto& w : split_list(value)) cfg.model.hidden.push_back(parse_u64(w));
      }
      else if (key == "model.channels") {
        cfg.model.channels.clear();
        for (const auto& c : split_list(value)) cfg.model.channels.push_back(parse_u64(c));
      }
      else if (key == "model.dense_hidden") cfg.model.dense_hidden = parse_u64(value);
      else if (key == "loss.kind") {
        cfg.loss_kinds.clear();
        for (const auto& k : split_list(value)) cfg.loss_kinds.push_back(loss_kind_from_string(k));
      }
      else if (key == "loss.q") cfg.gce_q = parse_double(value);
      else if (key == "loss.tau") {
        cfg.taus.clear();
        for (const auto& t : split_list(value)) cfg.taus.push_back(parse_double(t));
      }
      else if (key == "loss.metric") cfg.metric = metric_from_string(value);
      else if (key == "loss.restrict_to_non_true") cfg.restrict_to_non_true = parse_bool(value);
      else if (key == "train.epochs") cfg.epochs = parse_u64(value);
      else if (key == "train.batch_size") cfg.batch_size = parse_u64(value);
      else if (key == "train.lr") cfg.lr = parse_double(value);
      else if (key == "train.beta1") cfg.beta1 = parse_double(value);
      else if (key == "train.beta2") cfg.beta2 = parse_double(value);
      else if (key == "train.eps") cfg.adam_eps = parse_double(value);
      else if (key == "attack.kind") cfg.attack_kind = attack_kind_from_string(value);
      else if (key == "attack.epsilon") {
        cfg.epsilon_grid.clear();
        for (const auto& e : split_list(value)) cfg.epsilon_grid.push_back(parse_double(e));
      }
      else if (key == "attack.alpha") cfg.attack_alpha = parse_double(value);
      else if (key == "attack.steps") cfg.attack_steps = parse_u64(value);
      else if (key == "attack.step_size") cfg.attack_step_size = parse_double(value);
      else if (key == "attack.random_start") cfg.attack_random_start = parse_bool(value);
      else if (key == "attack.loss") {
        if (value == "CE" || value == "ce") cfg.attack_objective = AttackObjective::CE;
        else if (value == "training-loss" || value == "training_loss") {
          cfg.attack_objective = AttackObjective::TrainingLoss;
        } else {
          throw ValueError("attack.loss: expected CE or training-loss, got '" + value + "'");
        }
      }
      else if (key == "attack.subset_size") cfg.attack_subset_size = parse_u64(value);
      else if (key == "attack.dump_adv") cfg.attack_dump_adv = parse_bool(value);
      else if (key == "noise.rate") cfg.noise_rate = parse_double(value);
      else if (key == "noise.seed") cfg.noise_seed = parse_u64(value);
      else if (key == "seeds") {
        cfg.seeds.clear();
        for (const auto& s : split_list(value)) cfg.seeds.push_back(parse_u64(s));
      }
      else if (key == "output.dir") cfg.output_dir = value;
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!test_subset_given) {
    cfg.test_subset_size = cfg.subset_size == 0 ? 0 : std::max<std::size_t>(1, cfg.subset_size / 5);
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::ostringstream os;
  os << is.rdbuf();
  return parse_config_text(os.str());
}

}  // namespace drsl
