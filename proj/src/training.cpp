#include "netmoe/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "internal.hpp"
#include "netmoe/errors.hpp"
#include "netmoe/rng.hpp"
#include "netmoe/uncertainty.hpp"

namespace netmoe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLn2 = 0.6931471805599453;

// Substream tags so every draw in a training run hangs off the one seed.
constexpr std::uint64_t kStreamInit = 101;
constexpr std::uint64_t kStreamValState = 202;
constexpr std::uint64_t kStreamValRobust = 203;
constexpr std::uint64_t kStreamTrainState = 404;
constexpr std::uint64_t kStreamTrainRobust = 405;

double loss_sign(UtilitySense sense) {
  return sense == UtilitySense::maximize ? -1.0 : 1.0;
}

/// Utility of `alloc` against one ground-truth realization (gains, omega),
/// optionally with the gradient w.r.t. (p_tx, f_co) accumulated into d_p/d_f.
/// gains may be empty for comp-domain specs.
double utility_with_grad(const UtilitySpec& spec, const Eigen::MatrixXd& gains,
                         const Eigen::VectorXd& omega, const Allocation& alloc,
                         const SystemConfig& cfg, bool want_grad,
                         Eigen::VectorXd* d_p, Eigen::VectorXd* d_f) {
  const int k = cfg.num_users;
  const bool has_comm = spec.domain != Domain::comp;
  const bool has_comp = spec.domain != Domain::comm;

  Eigen::VectorXd sinr, r_tx, denom;
  if (has_comm) {
    const double noise = cfg.noise_psd * cfg.bandwidth;
    sinr.resize(k);
    r_tx.resize(k);
    denom.resize(k);
    for (int u = 0; u < k; ++u) {
      double interference = 0.0;
      for (int j = 0; j < k; ++j)
        if (j != u) interference += gains(u, j) * alloc.p_tx(j);
      denom(u) = interference + noise;
      sinr(u) = gains(u, u) * alloc.p_tx(u) / denom(u);
      r_tx(u) = cfg.bandwidth * std::log2(1.0 + sinr(u) / cfg.sinr_gap);
    }
  }
  Eigen::VectorXd r_co;
  if (has_comp) r_co = (alloc.f_co.array() / omega.array()).matrix();

  // Utility partials w.r.t. the per-side rates.
  Eigen::VectorXd du_r_tx = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd du_r_co = Eigen::VectorXd::Zero(k);
  double value = 0.0;

  const bool rate_family = spec.family == UtilityFamily::sum_rate ||
                           spec.family == UtilityFamily::min_rate ||
                           spec.family == UtilityFamily::log_rate;
  if (rate_family) {
    Eigen::VectorXd r(k);
    switch (spec.domain) {
      case Domain::comm: r = r_tx; break;
      case Domain::comp: r = r_co; break;
      case Domain::joint: r = r_tx + r_co; break;
    }
    Eigen::VectorXd du_r = Eigen::VectorXd::Zero(k);
    switch (spec.family) {
      case UtilityFamily::sum_rate:
        value = r.sum();
        du_r.setOnes();
        break;
      case UtilityFamily::min_rate: {
        int arg = 0;
        for (int u = 1; u < k; ++u)
          if (r(u) < r(arg)) arg = u;
        value = r(arg);
        du_r(arg) = 1.0;
        break;
      }
      case UtilityFamily::log_rate: {
        value = 0.0;
        bool degenerate = false;
        for (int u = 0; u < k; ++u) {
          if (r(u) <= 0.0) {
            degenerate = true;
            break;
          }
          value += std::log(r(u));
        }
        if (degenerate) {
          value = -kInf;
          want_grad = false;  // flat region; leave the gradient at zero
        } else {
          du_r = r.cwiseInverse();
        }
        break;
      }
      default: break;
    }
    if (has_comm) du_r_tx = du_r;
    if (has_comp) du_r_co = du_r;
  } else {
    // Delay family: t = payload / rate per side, +inf when the rate is zero.
    Eigen::VectorXd t_tx, t_co;
    if (has_comm) {
      t_tx.resize(k);
      for (int u = 0; u < k; ++u)
        t_tx(u) = r_tx(u) > 0.0 ? cfg.d_out / r_tx(u) : kInf;
    }
    if (has_comp) {
      t_co.resize(k);
      for (int u = 0; u < k; ++u)
        t_co(u) = r_co(u) > 0.0 ? cfg.d_in / r_co(u) : kInf;
    }
    Eigen::VectorXd t(k);
    switch (spec.domain) {
      case Domain::comm: t = t_tx; break;
      case Domain::comp: t = t_co; break;
      case Domain::joint: t = t_tx + t_co; break;
    }
    Eigen::VectorXd du_t = Eigen::VectorXd::Zero(k);
    if (spec.family == UtilityFamily::max_delay) {
      int arg = 0;
      for (int u = 1; u < k; ++u)
        if (t(u) > t(arg)) arg = u;
      value = t(arg);
      du_t(arg) = 1.0;
    } else {  // sum_delay
      value = t.sum();
      du_t.setOnes();
    }
    if (want_grad) {
      // dt/dr = -payload / r^2 per side; skip users at zero rate (the value
      // is +inf there and the step direction is meaningless anyway).
      for (int u = 0; u < k; ++u) {
        if (has_comm && r_tx(u) > 0.0)
          du_r_tx(u) += du_t(u) * (-cfg.d_out / (r_tx(u) * r_tx(u)));
        if (has_comp && r_co(u) > 0.0)
          du_r_co(u) += du_t(u) * (-cfg.d_in / (r_co(u) * r_co(u)));
      }
    }
  }

  if (want_grad) {
    if (has_comm && d_p) {
      for (int u = 0; u < k; ++u) {
        if (du_r_tx(u) == 0.0) continue;
        const double dr_dsinr =
            cfg.bandwidth / (kLn2 * (cfg.sinr_gap + sinr(u)));
        const double c = du_r_tx(u) * dr_dsinr;
        (*d_p)(u) += c * gains(u, u) / denom(u);
        for (int j = 0; j < k; ++j)
          if (j != u) (*d_p)(j) += c * (-sinr(u) * gains(u, j) / denom(u));
      }
    }
    if (has_comp && d_f)
      *d_f += (du_r_co.array() / omega.array()).matrix();
  }
  return value;
}

/// Index of the realization the nearest-rank quantile selects (first
/// occurrence of the selected value, so ties resolve to the lowest index).
int select_order_stat(const std::vector<double>& values, double gamma,
                      QuantileTail tail) {
  const int n = static_cast<int>(values.size());
  int rank = static_cast<int>(std::ceil(gamma * n));
  rank = std::clamp(rank, 1, n);
  const int idx = tail == QuantileTail::lower ? rank - 1 : n - rank;
  std::vector<double> work = values;
  std::nth_element(work.begin(), work.begin() + idx, work.end());
  const double selected = work[static_cast<std::size_t>(idx)];
  for (int m = 0; m < n; ++m)
    if (values[m] == selected) return m;
  return 0;
}

/// Logit gradient from the allocation gradient through the feasible-set map.
Eigen::VectorXd map_backward(const detail::MapCache& c, const SystemConfig& cfg,
                             const Eigen::VectorXd& d_p,
                             const Eigen::VectorXd& d_f) {
  const auto softmax_vjp = [](const Eigen::VectorXd& s,
                              const Eigen::VectorXd& g) {
    const double dot = s.dot(g);
    return (s.array() * (g.array() - dot)).matrix().eval();
  };
  switch (c.domain) {
    case Domain::comm:
      return softmax_vjp(c.soft_p, (cfg.p_max_tx * d_p).eval());
    case Domain::comp: {
      const int k = static_cast<int>(c.soft_f.size());
      const double dfcap_dpco =
          c.cap_binds ? 0.0 : c.f_pow / (cfg.mu * c.p_co_target);
      Eigen::VectorXd dz(k + 1);
      dz(0) = d_f.dot(c.soft_f) * dfcap_dpco * cfg.p_max_co * c.sig *
              (1.0 - c.sig);
      dz.tail(k) = softmax_vjp(c.soft_f, (c.f_cap * d_f).eval());
      return dz;
    }
    case Domain::joint: {
      const int k = static_cast<int>(c.soft_f.size());
      const double dfcap_dpco =
          c.cap_binds ? 0.0 : c.f_pow / (cfg.mu * c.p_co_target);
      Eigen::VectorXd gs(k + 1);
      gs.head(k) = cfg.p_max * d_p;
      gs(k) = cfg.p_max * d_f.dot(c.soft_f) * dfcap_dpco;
      Eigen::VectorXd dz(2 * k + 1);
      dz.head(k + 1) = softmax_vjp(c.soft_p, gs);
      dz.tail(k) = softmax_vjp(c.soft_f, (c.f_cap * d_f).eval());
      return dz;
    }
  }
  return {};
}

void mlp_backward(const PolicyParameters& p, const detail::ForwardCache& fc,
                  Eigen::VectorXd delta, ParameterGrad& g) {
  for (int l = static_cast<int>(p.weights.size()) - 1; l >= 0; --l) {
    const Eigen::VectorXd& input =
        l == 0 ? fc.x : fc.act[static_cast<std::size_t>(l - 1)];
    g.weights[static_cast<std::size_t>(l)].noalias() +=
        delta * input.transpose();
    g.biases[static_cast<std::size_t>(l)] += delta;
    if (l > 0) {
      delta = (p.weights[static_cast<std::size_t>(l)].transpose() * delta).eval();
      const Eigen::VectorXd& pre = fc.pre[static_cast<std::size_t>(l - 1)];
      for (int i = 0; i < delta.size(); ++i)
        if (pre(i) <= 0.0) delta(i) = 0.0;
    }
  }
}

double loss_core(const UtilitySpec& spec, const PolicyParameters& p,
                 const NetworkState& state, const TrainConfig& tc,
                 const SystemConfig& cfg, std::uint64_t robust_seed,
                 ParameterGrad* grad_out) {
  detail::ForwardCache fc;
  detail::MapCache mc;
  const Eigen::VectorXd x = build_features(state, spec.domain, cfg);
  const Eigen::VectorXd z =
      detail::mlp_forward_cached(p, x, grad_out ? &fc : nullptr);
  const Allocation alloc =
      detail::map_outputs_cached(z, spec.domain, cfg, grad_out ? &mc : nullptr);

  const int k = cfg.num_users;
  Eigen::VectorXd d_p = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd d_f = Eigen::VectorXd::Zero(k);
  const bool needs_gains = spec.domain != Domain::comp;
  double value = 0.0;

  if (!spec.robust) {
    const Eigen::MatrixXd gains =
        needs_gains ? effective_gains(state.h_est, state.beamformer)
                    : Eigen::MatrixXd();
    value = utility_with_grad(spec, gains, state.omega_est, alloc, cfg,
                              grad_out != nullptr, &d_p, &d_f);
  } else {
    ErrorModel model = ErrorModel::from_config(cfg);
    model.m_samples = tc.train_m_samples;
    std::vector<double> values(static_cast<std::size_t>(model.m_samples));
    for (int m = 0; m < model.m_samples; ++m) {
      Rng rng = Rng::derive(robust_seed, static_cast<std::uint64_t>(m));
      const NetworkState pert = sample_perturbed_state(state, model, rng);
      const Eigen::MatrixXd gains =
          needs_gains ? effective_gains(pert.h_true, pert.beamformer)
                      : Eigen::MatrixXd();
      values[static_cast<std::size_t>(m)] = utility_with_grad(
          spec, gains, pert.omega_true, alloc, cfg, false, nullptr, nullptr);
    }
    const int m_star = select_order_stat(values, cfg.quantile_gamma,
                                         pessimistic_tail(spec.sense()));
    value = values[static_cast<std::size_t>(m_star)];
    if (grad_out) {
      // Subgradient through the selected realization only: regenerate it and
      // run the grad pass there.
      Rng rng = Rng::derive(robust_seed, static_cast<std::uint64_t>(m_star));
      const NetworkState pert = sample_perturbed_state(state, model, rng);
      const Eigen::MatrixXd gains =
          needs_gains ? effective_gains(pert.h_true, pert.beamformer)
                      : Eigen::MatrixXd();
      utility_with_grad(spec, gains, pert.omega_true, alloc, cfg, true, &d_p,
                        &d_f);
    }
  }

  const double scale = loss_scale(spec.family, cfg);
  const double sgn = loss_sign(spec.sense());
  if (grad_out) {
    const double w = sgn / scale;
    const Eigen::VectorXd dz =
        map_backward(mc, cfg, (w * d_p).eval(), (w * d_f).eval());
    mlp_backward(p, fc, dz, *grad_out);
  }
  return sgn * value / scale;
}

}  // namespace

ParameterGrad ParameterGrad::zeros_like(const PolicyParameters& p) {
  ParameterGrad g;
  g.weights.reserve(p.weights.size());
  g.biases.reserve(p.biases.size());
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    g.weights.push_back(
        Eigen::MatrixXd::Zero(p.weights[l].rows(), p.weights[l].cols()));
    g.biases.push_back(Eigen::VectorXd::Zero(p.biases[l].size()));
  }
  return g;
}

void ParameterGrad::add_scaled(const ParameterGrad& other, double scale) {
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights[l].noalias() += scale * other.weights[l];
    biases[l].noalias() += scale * other.biases[l];
  }
}

double ParameterGrad::squared_norm() const {
  double acc = 0.0;
  for (std::size_t l = 0; l < weights.size(); ++l)
    acc += weights[l].squaredNorm() + biases[l].squaredNorm();
  return acc;
}

double loss_scale(UtilityFamily family, const SystemConfig& cfg) {
  switch (family) {
    case UtilityFamily::sum_rate:
    case UtilityFamily::min_rate:
      return cfg.bandwidth;  // rates are O(W); keep the loss O(1)
    case UtilityFamily::log_rate:
      return 1.0;  // already log-domain
    case UtilityFamily::max_delay:
    case UtilityFamily::sum_delay:
      return 1.0e-3;  // delays land in milliseconds
  }
  return 1.0;
}

double state_loss(const UtilitySpec& spec, const PolicyParameters& p,
                  const NetworkState& state, const TrainConfig& tc,
                  const SystemConfig& cfg, std::uint64_t robust_seed) {
  return loss_core(spec, p, state, tc, cfg, robust_seed, nullptr);
}

double state_loss_grad(const UtilitySpec& spec, const PolicyParameters& p,
                       const NetworkState& state, const TrainConfig& tc,
                       const SystemConfig& cfg, std::uint64_t robust_seed,
                       ParameterGrad& grad) {
  return loss_core(spec, p, state, tc, cfg, robust_seed, &grad);
}

double train_expert(ExpertRecord& rec, const TrainConfig& tc,
                    const SystemConfig& cfg, std::uint64_t seed) {
  rec.arch = architecture_for(rec.spec.domain, cfg.num_users, tc);
  PolicyParameters params =
      init_parameters(rec.arch, Rng::mix_seed(seed, kStreamInit));
  params.seed = seed;
  params.loss_trace.clear();

  // Fixed validation set; robust specs get one frozen perturbation stream per
  // state so the trace is comparable across epochs.
  std::vector<NetworkState> val_states;
  std::vector<std::uint64_t> val_robust;
  val_states.reserve(static_cast<std::size_t>(tc.validation_size));
  for (int v = 0; v < tc.validation_size; ++v) {
    Rng rng(Rng::mix_seed(Rng::mix_seed(seed, kStreamValState),
                          static_cast<std::uint64_t>(v)));
    val_states.push_back(generate_state(cfg, rng));
    val_robust.push_back(Rng::mix_seed(Rng::mix_seed(seed, kStreamValRobust),
                                       static_cast<std::uint64_t>(v)));
  }

  long long sample_counter = 0;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    for (int batch = 0; batch < tc.minibatches_per_epoch; ++batch) {
      ParameterGrad grad = ParameterGrad::zeros_like(params);
      double batch_loss = 0.0;
      for (int i = 0; i < tc.batch_size; ++i) {
        const std::uint64_t sample_seed =
            Rng::mix_seed(Rng::mix_seed(seed, kStreamTrainState),
                          static_cast<std::uint64_t>(sample_counter++));
        Rng rng(sample_seed);
        const NetworkState state = generate_state(cfg, rng);
        batch_loss +=
            state_loss_grad(rec.spec, params, state, tc, cfg,
                            Rng::mix_seed(sample_seed, kStreamTrainRobust),
                            grad);
      }
      if (!std::isfinite(batch_loss))
        throw TrainError(rec.name + ": loss diverged at epoch " +
                         std::to_string(epoch));
      const double inv = 1.0 / tc.batch_size;
      const double norm = std::sqrt(grad.squared_norm()) * inv;
      if (!std::isfinite(norm))
        throw TrainError(rec.name + ": gradient diverged at epoch " +
                         std::to_string(epoch));
      double step = tc.learning_rate * inv;
      if (norm > tc.grad_clip_norm && norm > 0.0)
        step *= tc.grad_clip_norm / norm;
      for (std::size_t l = 0; l < params.weights.size(); ++l) {
        params.weights[l].noalias() -= step * grad.weights[l];
        params.biases[l].noalias() -= step * grad.biases[l];
      }
    }

    double val_loss = 0.0;
    for (int v = 0; v < tc.validation_size; ++v)
      val_loss += state_loss(rec.spec, params, val_states[static_cast<std::size_t>(v)],
                             tc, cfg, val_robust[static_cast<std::size_t>(v)]);
    val_loss /= tc.validation_size;
    if (!std::isfinite(val_loss))
      throw TrainError(rec.name + ": validation loss diverged at epoch " +
                       std::to_string(epoch));
    params.loss_trace.push_back(val_loss);
  }

  params.epochs_trained = tc.epochs;
  rec.params = std::move(params);
  return rec.params->loss_trace.empty() ? 0.0 : rec.params->loss_trace.back();
}

}  // namespace netmoe
