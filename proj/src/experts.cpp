#include "netmoe/experts.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "internal.hpp"
#include "netmoe/errors.hpp"
#include "netmoe/rng.hpp"
#include "netmoe/training.hpp"

static_assert(std::endian::native == std::endian::little,
              "model files assume a little-endian host");

namespace netmoe {

long long param_count(const MlpArchitecture& a) {
  const long long in = a.input_dim, h = a.hidden_width, out = a.output_dim;
  const long long layers = a.hidden_layers;
  return in * h + (layers - 1) * h * h + out * h + layers * h + out;
}

TrainConfig TrainConfig::paper() { return TrainConfig{}; }

TrainConfig TrainConfig::desk() {
  TrainConfig tc;
  tc.hidden_layers = 3;
  tc.hidden_width = 64;
  tc.epochs = 50;
  tc.minibatches_per_epoch = 8;
  tc.batch_size = 256;
  tc.validation_size = 512;
  tc.test_size = 1024;
  // ~250x fewer samples than the full setup; the larger step is what makes
  // the small budget converge (verified stable across all five families).
  tc.learning_rate = 0.1;
  return tc;
}

MlpArchitecture architecture_for(Domain domain, int num_users,
                                 const TrainConfig& tc) {
  const int k = num_users;
  MlpArchitecture arch;
  arch.hidden_layers = tc.hidden_layers;
  arch.hidden_width = tc.hidden_width;
  switch (domain) {
    case Domain::comm:
      arch.input_dim = 2 * k * k;
      arch.output_dim = k;
      break;
    case Domain::comp:
      arch.input_dim = k;
      arch.output_dim = k + 1;
      break;
    case Domain::joint:
      arch.input_dim = 2 * k * k + k;
      arch.output_dim = 2 * k + 1;
      break;
  }
  return arch;
}

Eigen::VectorXd build_features(const NetworkState& state, Domain domain,
                               const SystemConfig& cfg) {
  const int k = static_cast<int>(state.h_est.rows());
  Eigen::VectorXd comm_part;
  if (domain != Domain::comp) {
    // Effective estimated channels after beamforming; row-major over (k, j),
    // all real parts first, then all imaginary parts.
    const Eigen::MatrixXcd c = state.h_est * state.beamformer;
    comm_part.resize(2 * k * k);
    int pos = 0;
    for (int row = 0; row < k; ++row)
      for (int col = 0; col < k; ++col) comm_part(pos++) = c(row, col).real();
    for (int row = 0; row < k; ++row)
      for (int col = 0; col < k; ++col) comm_part(pos++) = c(row, col).imag();
  }
  Eigen::VectorXd comp_part;
  if (domain != Domain::comm) {
    // Workload intensities normalized by their prior mean to keep the
    // feature order-1.
    const double prior_mean = cfg.omega_shape * cfg.omega_scale;
    comp_part = state.omega_est / prior_mean;
  }
  switch (domain) {
    case Domain::comm: return comm_part;
    case Domain::comp: return comp_part;
    case Domain::joint: {
      Eigen::VectorXd x(comm_part.size() + comp_part.size());
      x << comm_part, comp_part;
      return x;
    }
  }
  return {};
}

Eigen::VectorXd detail::mlp_forward_cached(const PolicyParameters& p,
                                           const Eigen::VectorXd& x,
                                           ForwardCache* c) {
  if (p.weights.empty()) throw TrainError("forward: empty parameter set");
  if (p.weights.front().cols() != x.size())
    throw TrainError("forward: feature length " + std::to_string(x.size()) +
                     " does not match input width " +
                     std::to_string(p.weights.front().cols()));
  if (c) {
    c->x = x;
    c->pre.clear();
    c->act.clear();
  }
  Eigen::VectorXd h = x;
  for (std::size_t l = 0; l + 1 < p.weights.size(); ++l) {
    Eigen::VectorXd pre = p.weights[l] * h + p.biases[l];
    h = pre.array().max(0.0).matrix();
    if (c) {
      c->pre.push_back(std::move(pre));
      c->act.push_back(h);
    }
  }
  Eigen::VectorXd out = p.weights.back() * h + p.biases.back();
  if (c) c->pre.push_back(out);
  return out;
}

Eigen::VectorXd mlp_forward(const PolicyParameters& p,
                            const Eigen::VectorXd& x) {
  return detail::mlp_forward_cached(p, x, nullptr);
}

PolicyParameters init_parameters(const MlpArchitecture& arch,
                                 std::uint64_t seed) {
  if (arch.hidden_layers < 1 || arch.hidden_width < 1 || arch.input_dim < 1 ||
      arch.output_dim < 1)
    throw TrainError("init_parameters: degenerate architecture");
  PolicyParameters p;
  p.seed = seed;
  Rng rng(seed);
  std::vector<int> widths;
  widths.push_back(arch.input_dim);
  for (int l = 0; l < arch.hidden_layers; ++l) widths.push_back(arch.hidden_width);
  widths.push_back(arch.output_dim);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int i = 0; i < fan_out; ++i)
      for (int j = 0; j < fan_in; ++j)
        w(i, j) = bound * (2.0 * rng.uniform() - 1.0);
    Eigen::VectorXd b(fan_out);
    for (int i = 0; i < fan_out; ++i) b(i) = bound * (2.0 * rng.uniform() - 1.0);
    p.weights.push_back(std::move(w));
    p.biases.push_back(std::move(b));
  }
  return p;
}

Eigen::VectorXd detail::softmax(const Eigen::VectorXd& z) {
  const Eigen::VectorXd shifted = z.array() - z.maxCoeff();
  Eigen::VectorXd e = shifted.array().exp();
  return e / e.sum();
}

double detail::logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

Allocation detail::map_outputs_cached(const Eigen::VectorXd& z, Domain domain,
                                      const SystemConfig& cfg,
                                      MapCache* cache) {
  const int k = cfg.num_users;
  Allocation a;
  MapCache local;
  MapCache& c = cache ? *cache : local;
  c.domain = domain;
  switch (domain) {
    case Domain::comm: {
      if (z.size() != k) throw TrainError("map_outputs: comm logits must be K");
      a.kind = AllocKind::comm;
      c.soft_p = softmax(z);
      a.p_tx = cfg.p_max_tx * c.soft_p;
      a.f_co = Eigen::VectorXd::Zero(k);
      a.p_co = 0.0;
      break;
    }
    case Domain::comp: {
      if (z.size() != k + 1)
        throw TrainError("map_outputs: comp logits must be K+1");
      a.kind = AllocKind::comp;
      a.p_tx = Eigen::VectorXd::Zero(k);
      c.sig = logistic(z(0));
      c.p_co_target = cfg.p_max_co * c.sig;
      c.f_pow = std::pow(c.p_co_target / cfg.tau, 1.0 / cfg.mu);
      c.cap_binds = cfg.f_max < c.f_pow;
      c.f_cap = c.cap_binds ? cfg.f_max : c.f_pow;
      c.soft_f = softmax(z.tail(k));
      a.f_co = c.f_cap * c.soft_f;
      a.p_co = cpu_power_required(a.f_co, cfg);
      break;
    }
    case Domain::joint: {
      if (z.size() != 2 * k + 1)
        throw TrainError("map_outputs: joint logits must be 2K+1");
      a.kind = AllocKind::joint;
      c.soft_p = softmax(z.head(k + 1));
      a.p_tx = cfg.p_max * c.soft_p.head(k);
      c.p_co_target = cfg.p_max * c.soft_p(k);
      c.f_pow = std::pow(c.p_co_target / cfg.tau, 1.0 / cfg.mu);
      c.cap_binds = cfg.f_max < c.f_pow;
      c.f_cap = c.cap_binds ? cfg.f_max : c.f_pow;
      c.soft_f = softmax(z.tail(k));
      a.f_co = c.f_cap * c.soft_f;
      a.p_co = cpu_power_required(a.f_co, cfg);
      break;
    }
  }
  return a;
}

Allocation map_outputs(const Eigen::VectorXd& z, Domain domain,
                       const SystemConfig& cfg) {
  return detail::map_outputs_cached(z, domain, cfg, nullptr);
}

Allocation infer(const ExpertRecord& rec, const NetworkState& state,
                 const SystemConfig& cfg) {
  if (!rec.params)
    throw TrainError("expert " + rec.name + " has no trained parameters");
  const Eigen::VectorXd x = build_features(state, rec.spec.domain, cfg);
  return map_outputs(mlp_forward(*rec.params, x), rec.spec.domain, cfg);
}

namespace {

std::string role_text(const UtilitySpec& spec) {
  std::string prefix;
  switch (spec.domain) {
    case Domain::comm: prefix = "Comm. "; break;
    case Domain::comp: prefix = "Comp. "; break;
    case Domain::joint: prefix = ""; break;
  }
  std::string body;
  switch (spec.family) {
    case UtilityFamily::sum_rate: body = "sum rate max."; break;
    case UtilityFamily::min_rate: body = "min rate max."; break;
    case UtilityFamily::log_rate: body = "log rate max."; break;
    case UtilityFamily::max_delay: body = "max delay min."; break;
    case UtilityFamily::sum_delay: body = "sum delay min."; break;
  }
  std::string role = prefix + body;
  if (!role.empty()) role[0] = static_cast<char>(std::toupper(role[0]));
  return role;
}

std::string impact_text(UtilityFamily family) {
  switch (family) {
    case UtilityFamily::sum_rate: return "Throughput";
    case UtilityFamily::min_rate: return "Fairness";
    case UtilityFamily::log_rate: return "Balanced";
    case UtilityFamily::max_delay: return "Responsiveness";
    case UtilityFamily::sum_delay: return "Latency";
  }
  return "";
}

std::string domain_noun(Domain d) {
  switch (d) {
    case Domain::comm: return "communication";
    case Domain::comp: return "computing";
    case Domain::joint: return "communication and computing";
  }
  return "";
}

std::string objective_phrase(const UtilitySpec& spec) {
  switch (spec.family) {
    case UtilityFamily::sum_rate:
      switch (spec.domain) {
        case Domain::comm: return "maximization of sum-communication-rates of all users in network";
        case Domain::comp: return "maximization of sum-computing-rates of all users in network";
        case Domain::joint: return "maximization of sum-communication-and-computing-rates of all users in network";
      }
      break;
    case UtilityFamily::min_rate:
      return "maximization of the minimum " + domain_noun(spec.domain) +
             " rate across all users in network";
    case UtilityFamily::log_rate:
      return "maximization of logarithmic " + domain_noun(spec.domain) +
             " rates of all users in network";
    case UtilityFamily::max_delay:
      return "minimization of the worst-case " + domain_noun(spec.domain) +
             " delay among all users in network";
    case UtilityFamily::sum_delay:
      return "minimization of the total " + domain_noun(spec.domain) +
             " delay of all users in network";
  }
  return "";
}

std::string focus_sentence(const UtilitySpec& spec) {
  std::string lead;
  switch (spec.domain) {
    case Domain::comm: lead = "Communication"; break;
    case Domain::comp: lead = "Computing"; break;
    case Domain::joint: lead = "Joint communication and computing"; break;
  }
  std::string aspect;
  switch (spec.family) {
    case UtilityFamily::sum_rate: aspect = "throughput"; break;
    case UtilityFamily::min_rate: aspect = "fairness"; break;
    case UtilityFamily::log_rate: aspect = "throughput-fairness balance"; break;
    case UtilityFamily::max_delay: aspect = "responsiveness (worst-case delay)"; break;
    case UtilityFamily::sum_delay: aspect = "latency (total delay)"; break;
  }
  return lead + " " + aspect + " focused.";
}

std::string condition_sentence(const UtilitySpec& spec) {
  if (!spec.robust) {
    switch (spec.domain) {
      case Domain::comm:
        return "Optimized solution accounts for regular conditions, with "
               "accurate channel estimations and perfectly known channel "
               "state information.";
      case Domain::comp:
        return "Optimized solution accounts for regular conditions, with "
               "perfectly known computing demands.";
      case Domain::joint:
        return "Optimized solution accounts for regular conditions, with "
               "perfectly known channel state information and computing "
               "demands.";
    }
  } else {
    switch (spec.domain) {
      case Domain::comm:
        return "Optimized solution is robust against uncertain conditions, "
               "accounting for channel estimation errors.";
      case Domain::comp:
        return "Optimized solution is robust against uncertain conditions, "
               "accounting for errors in the estimated computing demands.";
      case Domain::joint:
        return "Optimized solution is robust against uncertain conditions, "
               "accounting for channel estimation errors and uncertain "
               "computing demands.";
    }
  }
  return "";
}

}  // namespace

std::vector<ExpertRecord> registry_build(const SystemConfig& cfg,
                                         const TrainConfig& tc) {
  std::vector<ExpertRecord> registry;
  registry.reserve(30);
  int index = 1;
  for (const auto& spec : enumerate_specs()) {
    ExpertRecord rec;
    rec.index = index++;
    rec.spec = spec;
    rec.name = spec.name();
    rec.role = role_text(spec);
    rec.tags.domain = spec.domain;
    rec.tags.robust = spec.robust;
    rec.tags.emphasis = impact_text(spec.family);
    rec.description = "Expert for " + objective_phrase(spec) + ". " +
                      focus_sentence(spec) + " " + condition_sentence(spec);
    rec.arch = architecture_for(spec.domain, cfg.num_users, tc);
    registry.push_back(std::move(rec));
  }
  return registry;
}

std::vector<ExpertRecord> registry_subset(const std::vector<ExpertRecord>& all,
                                          const std::vector<int>& indices) {
  std::vector<ExpertRecord> out;
  out.reserve(indices.size());
  for (int idx : indices) {
    if (idx < 1 || idx > static_cast<int>(all.size()))
      throw ConfigError("registry index out of range: " + std::to_string(idx));
    out.push_back(all[static_cast<std::size_t>(idx - 1)]);
  }
  return out;
}

namespace {

constexpr char kMagic[4] = {'N', 'M', 'O', 'E'};
constexpr std::uint32_t kVersion = 1;

void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint64_t read_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw IoError("model file truncated");
  return v;
}

void write_doubles(std::ostream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data),
            static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& in, double* data, std::size_t n) {
  in.read(reinterpret_cast<char*>(data),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw IoError("model file truncated");
}

}  // namespace

void save_expert(const ExpertRecord& rec, const std::string& path) {
  if (!rec.params) throw IoError("save_expert: record has no parameters");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("save_expert: cannot open " + path);

  nlohmann::ordered_json meta;
  meta["name"] = rec.name;
  meta["index"] = rec.index;
  meta["utility"] = rec.spec.name();
  meta["role"] = rec.role;
  meta["impact"] = rec.tags.emphasis;
  // Users served is recoverable from the architecture but stored explicitly
  // so config mismatches are caught before any shape arithmetic.
  meta["num_users"] = static_cast<int>(
      rec.spec.domain == Domain::comp
          ? rec.arch.input_dim
          : (rec.spec.domain == Domain::comm ? rec.arch.output_dim
                                             : rec.arch.output_dim / 2));
  meta["arch"] = {{"input_dim", rec.arch.input_dim},
                  {"hidden_layers", rec.arch.hidden_layers},
                  {"hidden_width", rec.arch.hidden_width},
                  {"output_dim", rec.arch.output_dim}};
  meta["seed"] = rec.params->seed;
  meta["epochs_trained"] = rec.params->epochs_trained;
  const std::string header = meta.dump();

  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  write_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  std::uint64_t n_params = 0;
  for (std::size_t l = 0; l < rec.params->weights.size(); ++l)
    n_params += rec.params->weights[l].size() + rec.params->biases[l].size();
  write_u64(out, n_params);
  for (std::size_t l = 0; l < rec.params->weights.size(); ++l) {
    write_doubles(out, rec.params->weights[l].data(),
                  static_cast<std::size_t>(rec.params->weights[l].size()));
    write_doubles(out, rec.params->biases[l].data(),
                  static_cast<std::size_t>(rec.params->biases[l].size()));
  }
  write_u64(out, rec.params->loss_trace.size());
  write_doubles(out, rec.params->loss_trace.data(), rec.params->loss_trace.size());
  if (!out) throw IoError("save_expert: write failure on " + path);
}

ExpertRecord load_expert(const std::string& path, const SystemConfig& cfg) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_expert: cannot open " + path);

  char magic[4];
  in.read(magic, sizeof magic);
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError("load_expert: not a model file: " + path);
  if (version != kVersion)
    throw IoError("load_expert: unsupported model version " +
                  std::to_string(version));

  const std::uint64_t header_len = read_u64(in);
  std::string header(header_len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw IoError("model file truncated");

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("load_expert: corrupt header: ") + e.what());
  }

  ExpertRecord rec;
  try {
    rec.name = meta.at("name").get<std::string>();
    rec.index = meta.at("index").get<int>();
    rec.spec = spec_from_name(meta.at("utility").get<std::string>());
    rec.role = meta.at("role").get<std::string>();
    rec.tags.domain = rec.spec.domain;
    rec.tags.robust = rec.spec.robust;
    rec.tags.emphasis = meta.at("impact").get<std::string>();
    const auto& arch = meta.at("arch");
    rec.arch.input_dim = arch.at("input_dim").get<int>();
    rec.arch.hidden_layers = arch.at("hidden_layers").get<int>();
    rec.arch.hidden_width = arch.at("hidden_width").get<int>();
    rec.arch.output_dim = arch.at("output_dim").get<int>();
    const int file_users = meta.at("num_users").get<int>();
    if (file_users != cfg.num_users)
      throw IoError("load_expert: model trained for " +
                    std::to_string(file_users) + " users, config has " +
                    std::to_string(cfg.num_users));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("load_expert: corrupt header: ") + e.what());
  }

  PolicyParameters params;
  params.seed = meta.value("seed", std::uint64_t{0});
  params.epochs_trained = meta.value("epochs_trained", 0);

  std::vector<int> widths;
  widths.push_back(rec.arch.input_dim);
  for (int l = 0; l < rec.arch.hidden_layers; ++l)
    widths.push_back(rec.arch.hidden_width);
  widths.push_back(rec.arch.output_dim);

  const std::uint64_t n_params = read_u64(in);
  if (n_params != static_cast<std::uint64_t>(param_count(rec.arch)))
    throw IoError("load_expert: parameter count mismatch in " + path);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    Eigen::MatrixXd w(widths[l + 1], widths[l]);
    read_doubles(in, w.data(), static_cast<std::size_t>(w.size()));
    Eigen::VectorXd b(widths[l + 1]);
    read_doubles(in, b.data(), static_cast<std::size_t>(b.size()));
    params.weights.push_back(std::move(w));
    params.biases.push_back(std::move(b));
  }
  const std::uint64_t n_trace = read_u64(in);
  params.loss_trace.resize(n_trace);
  read_doubles(in, params.loss_trace.data(), n_trace);

  rec.params = std::move(params);
  return rec;
}

}  // namespace netmoe
