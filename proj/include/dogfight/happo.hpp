// On-policy heterogeneous-agent PPO: GAE advantages from a centralized
// critic, then one clipped-surrogate update per agent in a freshly drawn
// order. After each agent finishes, the shared per-sample correction factor
// is multiplied by that agent's full-buffer probability ratio, so every later
// agent optimizes against the product of its predecessors' updates times the
// joint advantage.
#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dogfight/common.hpp"
#include "dogfight/neural.hpp"
#include "dogfight/rng.hpp"

namespace dogfight {

struct HappoConfig {
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_epsilon = 0.2;
    int epochs = 5;
    int minibatches = 4;
    double actor_lr = 5e-4;
    double critic_lr = 5e-4;
    double entropy_coef = 0.01;
    double value_coef = 1.0;
    double max_grad_norm = 0.5;
    bool normalize_advantage = true;
    bool randomize_agent_order = true;
    bool clip_value_loss = false;
};

/// One actor network plus its head and optimizer state.
struct ActorPolicy {
    Mlp net;
    PolicyHead head;
    AdamState adam;

    std::vector<std::span<double>> param_spans() {
        auto s = net.param_spans();
        if (head.kind == HeadKind::Gaussian) s.emplace_back(head.log_std);
        return s;
    }
};

struct CentralCritic {
    Mlp net;
    AdamState adam;
};

/// Heterogeneous policies: one actor per agent (no parameter sharing), one
/// centralized critic over the concatenated learner observations.
struct AgentPolicies {
    std::vector<ActorPolicy> actors;
    CentralCritic critic;
};

/// On-policy storage for E envs x T decision steps. Joint quantities (value,
/// reward, done, advantage, correction factor) are per (t, e) sample; the
/// observation/action/log-prob triples are per agent on top of that.
/// Sample index = t * envs + e.
struct RolloutBuffer {
    int envs = 0;
    int steps = 0;
    int agents = 0;

    std::vector<std::vector<double>> joint_obs;        // [sample]
    std::vector<std::vector<double>> final_joint_obs;  // [env], for bootstrap
    std::vector<double> joint_reward;                  // mean over learner agents
    std::vector<std::uint8_t> done;                    // episode ended at this step
    std::vector<double> value;
    std::vector<double> advantage;
    std::vector<double> returns;
    std::vector<double> factor;  // the running multi-agent correction

    std::vector<std::vector<std::vector<double>>> obs;  // [agent][sample]
    std::vector<std::vector<Action>> actions;           // [agent][sample]
    std::vector<std::vector<double>> logp_old;          // [agent][sample]

    int sample_count() const { return envs * steps; }
    int index(int t, int e) const { return t * envs + e; }

    void reserve(int n_envs, int n_steps, int n_agents) {
        envs = n_envs;
        steps = n_steps;
        agents = n_agents;
        const std::size_t n = static_cast<std::size_t>(n_envs) * n_steps;
        joint_obs.assign(n, {});
        final_joint_obs.assign(static_cast<std::size_t>(n_envs), {});
        joint_reward.assign(n, 0.0);
        done.assign(n, 0);
        value.assign(n, 0.0);
        advantage.assign(n, 0.0);
        returns.assign(n, 0.0);
        factor.assign(n, 0.0);
        obs.assign(static_cast<std::size_t>(n_agents), std::vector<std::vector<double>>(n));
        actions.assign(static_cast<std::size_t>(n_agents), std::vector<Action>(n));
        logp_old.assign(static_cast<std::size_t>(n_agents), std::vector<double>(n, 0.0));
    }
};

/// Standard recursive GAE over one env stream. `values` carries T+1 entries,
/// the last being the bootstrap value for a non-terminal truncation.
inline void compute_gae(const std::vector<double>& rewards,
                        const std::vector<double>& values,
                        const std::vector<std::uint8_t>& dones, double gamma,
                        double lambda, std::vector<double>& advantages,
                        std::vector<double>& returns) {
    const std::size_t T = rewards.size();
    if (values.size() != T + 1 || dones.size() != T)
        throw std::invalid_argument("compute_gae: array lengths are incongruent");
    advantages.assign(T, 0.0);
    returns.assign(T, 0.0);
    double gae = 0.0;
    for (std::size_t i = T; i-- > 0;) {
        const double not_done = dones[i] ? 0.0 : 1.0;
        const double delta =
            rewards[i] + gamma * values[i + 1] * not_done - values[i];
        gae = delta + gamma * lambda * not_done * gae;
        advantages[i] = gae;
        returns[i] = gae + values[i];
    }
}

/// The per-sample clipped objective with the multi-agent factor m:
/// min(r * m, clip(r, 1-eps, 1+eps) * m).
inline double surrogate_objective(double ratio, double factor, double epsilon) {
    const double clipped = clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    return std::min(ratio * factor, clipped * factor);
}

struct HappoMetrics {
    std::vector<double> policy_loss;      // per agent
    std::vector<double> dist_entropy;     // per agent
    std::vector<double> actor_grad_norm;  // per agent, pre-clip mean
    std::vector<double> imp_mean;         // per agent, full-buffer recompute
    std::vector<double> imp_min;
    std::vector<double> imp_max;
    double value_loss = 0.0;
    double critic_grad_norm = 0.0;
    double average_step_rewards = 0.0;
    std::vector<std::size_t> agent_order;
    // factor snapshots after each agent in update order (test introspection)
    std::vector<std::vector<double>> factor_after_agent;
};

namespace detail {

inline Matrix stack_rows(const std::vector<std::vector<double>>& rows,
                         const std::vector<int>& idx) {
    Matrix m(static_cast<int>(idx.size()), static_cast<int>(rows[0].size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const auto& src = rows[static_cast<std::size_t>(idx[r])];
        std::copy(src.begin(), src.end(), m.row(static_cast<int>(r)));
    }
    return m;
}

inline Matrix stack_all_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        std::copy(rows[r].begin(), rows[r].end(), m.row(static_cast<int>(r)));
    return m;
}

}  // namespace detail

/// One actor minibatch: the clipped-surrogate-plus-entropy loss and, when
/// grads is non-null, its exact parameter gradients.
struct HappoActorBatch {
    const Matrix& obs;                        // [B, obs_dim]
    const std::vector<const Action*>& actions;
    const std::vector<double>& logp_old;      // [B]
    const std::vector<double>& factor;        // [B]
};

struct HappoActorLoss {
    double loss = 0.0;       // -mean(objective) - ent_coef * mean(entropy)
    double surrogate = 0.0;  // -mean(objective)
    double entropy = 0.0;    // mean entropy
};

inline HappoActorLoss happo_actor_loss(ActorPolicy& actor, const HappoActorBatch& batch,
                                       const HappoConfig& cfg, MlpGrads* grads,
                                       std::vector<double>* dlog_std) {
    const int B = batch.obs.rows;
    ForwardCache cache;
    const Matrix logits = mlp_forward(actor.net, batch.obs, grads ? &cache : nullptr);
    Matrix dlogits(B, actor.head.logits_dim());
    double obj_sum = 0.0, ent_sum = 0.0;
    for (int r = 0; r < B; ++r) {
        const Action& act = *batch.actions[static_cast<std::size_t>(r)];
        const auto le = logp_entropy(actor.head, logits.row(r), act);
        const double ratio = std::exp(le.logp - batch.logp_old[static_cast<std::size_t>(r)]);
        const double m = batch.factor[static_cast<std::size_t>(r)];
        obj_sum += surrogate_objective(ratio, m, cfg.clip_epsilon);
        ent_sum += le.entropy;
        if (!grads) continue;
        // derivative of the selected min branch w.r.t. logp
        const double unclipped = ratio * m;
        const double clipped =
            clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * m;
        double dobj_dlogp = 0.0;
        if (unclipped <= clipped) {
            dobj_dlogp = unclipped;  // d(r*m)/dlogp = r*m
        } else if (ratio > 1.0 - cfg.clip_epsilon && ratio < 1.0 + cfg.clip_epsilon) {
            dobj_dlogp = unclipped;  // clip inactive inside the band
        }
        logp_entropy_backward(actor.head, logits.row(r), act, -dobj_dlogp / B,
                              -cfg.entropy_coef / B, dlogits.row(r),
                              dlog_std ? dlog_std->data() : nullptr);
    }
    HappoActorLoss out;
    out.surrogate = -obj_sum / B;
    out.entropy = ent_sum / B;
    out.loss = out.surrogate - cfg.entropy_coef * out.entropy;
    if (!std::isfinite(out.loss))
        throw std::runtime_error("happo: non-finite actor loss");
    if (grads) mlp_backward(actor.net, cache, dlogits, *grads);
    return out;
}

/// Critic minibatch MSE (optionally PPO-style value-clipped) against the GAE
/// returns. Gradients accumulate into grads when non-null.
inline double happo_critic_loss(Mlp& critic, const Matrix& obs,
                                const std::vector<double>& targets,
                                const std::vector<double>& value_old,
                                const HappoConfig& cfg, MlpGrads* grads) {
    const int B = obs.rows;
    ForwardCache cache;
    const Matrix v = mlp_forward(critic, obs, grads ? &cache : nullptr);
    Matrix dv(B, 1);
    double loss = 0.0;
    for (int r = 0; r < B; ++r) {
        const double target = targets[static_cast<std::size_t>(r)];
        const double err = v.at(r, 0) - target;
        if (cfg.clip_value_loss) {
            const double old = value_old[static_cast<std::size_t>(r)];
            const double clipped = old + clamp(v.at(r, 0) - old, -cfg.clip_epsilon,
                                               cfg.clip_epsilon);
            const double err_clip = clipped - target;
            if (err_clip * err_clip > err * err) {
                const bool inside = std::abs(v.at(r, 0) - old) < cfg.clip_epsilon;
                loss += cfg.value_coef * err_clip * err_clip / B;
                dv.at(r, 0) = inside ? cfg.value_coef * 2.0 * err_clip / B : 0.0;
                continue;
            }
        }
        loss += cfg.value_coef * err * err / B;
        dv.at(r, 0) = cfg.value_coef * 2.0 * err / B;
    }
    if (!std::isfinite(loss)) throw std::runtime_error("happo: non-finite critic loss");
    if (grads) mlp_backward(critic, cache, dv, *grads);
    return loss;
}

/// Critic values for every stored sample plus the per-env bootstrap, then
/// GAE and (optionally) advantage normalization. Fills buffer.value,
/// buffer.advantage, buffer.returns and seeds buffer.factor.
inline void prepare_advantages(AgentPolicies& policies, RolloutBuffer& buffer,
                               const HappoConfig& cfg) {
    const int S = buffer.sample_count();
    {
        const Matrix all = detail::stack_all_rows(buffer.joint_obs);
        const Matrix v = mlp_forward(policies.critic.net, all);
        for (int s = 0; s < S; ++s) buffer.value[static_cast<std::size_t>(s)] = v.at(s, 0);
    }
    const Matrix final_obs = detail::stack_all_rows(buffer.final_joint_obs);
    const Matrix bootstrap = mlp_forward(policies.critic.net, final_obs);

    std::vector<double> rewards(static_cast<std::size_t>(buffer.steps));
    std::vector<double> values(static_cast<std::size_t>(buffer.steps) + 1);
    std::vector<std::uint8_t> dones(static_cast<std::size_t>(buffer.steps));
    std::vector<double> adv, ret;
    for (int e = 0; e < buffer.envs; ++e) {
        for (int t = 0; t < buffer.steps; ++t) {
            const int s = buffer.index(t, e);
            rewards[static_cast<std::size_t>(t)] = buffer.joint_reward[static_cast<std::size_t>(s)];
            values[static_cast<std::size_t>(t)] = buffer.value[static_cast<std::size_t>(s)];
            dones[static_cast<std::size_t>(t)] = buffer.done[static_cast<std::size_t>(s)];
        }
        values[static_cast<std::size_t>(buffer.steps)] = bootstrap.at(e, 0);
        compute_gae(rewards, values, dones, cfg.gamma, cfg.gae_lambda, adv, ret);
        for (int t = 0; t < buffer.steps; ++t) {
            const int s = buffer.index(t, e);
            buffer.advantage[static_cast<std::size_t>(s)] = adv[static_cast<std::size_t>(t)];
            buffer.returns[static_cast<std::size_t>(s)] = ret[static_cast<std::size_t>(t)];
        }
    }

    if (cfg.normalize_advantage) {
        double mean = 0.0;
        for (double a : buffer.advantage) mean += a;
        mean /= static_cast<double>(S);
        double var = 0.0;
        for (double a : buffer.advantage) var += (a - mean) * (a - mean);
        var /= static_cast<double>(S);
        const double inv = 1.0 / std::sqrt(var + 1e-8);
        for (int s = 0; s < S; ++s)
            buffer.factor[static_cast<std::size_t>(s)] =
                (buffer.advantage[static_cast<std::size_t>(s)] - mean) * inv;
    } else {
        buffer.factor = buffer.advantage;
    }
}

/// Sequential HAPPO update over a filled buffer. Returns the per-agent and
/// critic diagnostics; throws on non-finite losses.
inline HappoMetrics sequential_update(AgentPolicies& policies, RolloutBuffer& buffer,
                                      const HappoConfig& cfg, Rng& rng) {
    const int S = buffer.sample_count();
    const int N = buffer.agents;
    if (S <= 0) throw std::invalid_argument("sequential_update: empty buffer");

    prepare_advantages(policies, buffer, cfg);

    HappoMetrics metrics;
    metrics.policy_loss.assign(static_cast<std::size_t>(N), 0.0);
    metrics.dist_entropy.assign(static_cast<std::size_t>(N), 0.0);
    metrics.actor_grad_norm.assign(static_cast<std::size_t>(N), 0.0);
    metrics.imp_mean.assign(static_cast<std::size_t>(N), 0.0);
    metrics.imp_min.assign(static_cast<std::size_t>(N), 0.0);
    metrics.imp_max.assign(static_cast<std::size_t>(N), 0.0);

    if (cfg.randomize_agent_order) {
        metrics.agent_order = rng.permutation(static_cast<std::size_t>(N));
    } else {
        metrics.agent_order.resize(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) metrics.agent_order[static_cast<std::size_t>(i)] = static_cast<std::size_t>(i);
    }

    std::vector<int> indices(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i) indices[static_cast<std::size_t>(i)] = i;

    for (const std::size_t agent : metrics.agent_order) {
        ActorPolicy& actor = policies.actors[agent];
        double loss_acc = 0.0, entropy_acc = 0.0, norm_acc = 0.0;
        int batches = 0;

        for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
            rng.shuffle(indices);
            const int per_batch = (S + cfg.minibatches - 1) / cfg.minibatches;
            for (int b = 0; b < cfg.minibatches; ++b) {
                const int lo = b * per_batch;
                const int hi = std::min(S, lo + per_batch);
                if (lo >= hi) continue;
                std::vector<int> batch(indices.begin() + lo, indices.begin() + hi);
                const int B = static_cast<int>(batch.size());

                const Matrix in = detail::stack_rows(buffer.obs[agent], batch);
                std::vector<const Action*> acts(static_cast<std::size_t>(B));
                std::vector<double> lp(static_cast<std::size_t>(B)),
                    fac(static_cast<std::size_t>(B));
                for (int r = 0; r < B; ++r) {
                    const int s = batch[static_cast<std::size_t>(r)];
                    acts[static_cast<std::size_t>(r)] =
                        &buffer.actions[agent][static_cast<std::size_t>(s)];
                    lp[static_cast<std::size_t>(r)] =
                        buffer.logp_old[agent][static_cast<std::size_t>(s)];
                    fac[static_cast<std::size_t>(r)] =
                        buffer.factor[static_cast<std::size_t>(s)];
                }
                MlpGrads grads(actor.net);
                std::vector<double> dlog_std(actor.head.log_std.size(), 0.0);
                const HappoActorLoss result = happo_actor_loss(
                    actor, HappoActorBatch{in, acts, lp, fac}, cfg, &grads, &dlog_std);
                loss_acc += result.surrogate;
                entropy_acc += result.entropy;
                ++batches;

                auto gspans = grads.grad_spans();
                if (actor.head.kind == HeadKind::Gaussian) gspans.emplace_back(dlog_std);
                norm_acc += global_norm_clip(gspans, cfg.max_grad_norm);
                adam_step(actor.param_spans(), as_const_spans(gspans), actor.adam,
                          cfg.actor_lr);
            }
        }

        // recompute the ratio over the full buffer with the finished policy
        // and fold it into the running factor
        const Matrix all = detail::stack_all_rows(buffer.obs[agent]);
        const Matrix logits = mlp_forward(actor.net, all);
        double imp_sum = 0.0, imp_min = 1e300, imp_max = -1e300;
        for (int s = 0; s < S; ++s) {
            const auto le = logp_entropy(actor.head, logits.row(s),
                                         buffer.actions[agent][static_cast<std::size_t>(s)]);
            const double ratio =
                std::exp(le.logp - buffer.logp_old[agent][static_cast<std::size_t>(s)]);
            buffer.factor[static_cast<std::size_t>(s)] *= ratio;
            imp_sum += ratio;
            imp_min = std::min(imp_min, ratio);
            imp_max = std::max(imp_max, ratio);
        }
        metrics.factor_after_agent.push_back(buffer.factor);
        metrics.policy_loss[agent] = loss_acc / std::max(batches, 1);
        metrics.dist_entropy[agent] = entropy_acc / std::max(batches, 1);
        metrics.actor_grad_norm[agent] = norm_acc / std::max(batches, 1);
        metrics.imp_mean[agent] = imp_sum / S;
        metrics.imp_min[agent] = imp_min;
        metrics.imp_max[agent] = imp_max;
    }

    // critic regression to the GAE returns, after all actors
    const std::vector<double> value_old = buffer.value;
    double vloss_acc = 0.0, vnorm_acc = 0.0;
    int vbatches = 0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(indices);
        const int per_batch = (S + cfg.minibatches - 1) / cfg.minibatches;
        for (int b = 0; b < cfg.minibatches; ++b) {
            const int lo = b * per_batch;
            const int hi = std::min(S, lo + per_batch);
            if (lo >= hi) continue;
            std::vector<int> batch(indices.begin() + lo, indices.begin() + hi);
            const int B = static_cast<int>(batch.size());
            const Matrix in = detail::stack_rows(buffer.joint_obs, batch);
            std::vector<double> targets(static_cast<std::size_t>(B)),
                old(static_cast<std::size_t>(B));
            for (int r = 0; r < B; ++r) {
                const int s = batch[static_cast<std::size_t>(r)];
                targets[static_cast<std::size_t>(r)] =
                    buffer.returns[static_cast<std::size_t>(s)];
                old[static_cast<std::size_t>(r)] = value_old[static_cast<std::size_t>(s)];
            }
            MlpGrads grads(policies.critic.net);
            vloss_acc +=
                happo_critic_loss(policies.critic.net, in, targets, old, cfg, &grads);
            ++vbatches;
            vnorm_acc += global_norm_clip(grads.grad_spans(), cfg.max_grad_norm);
            adam_step(policies.critic.net.param_spans(),
                      as_const_spans(grads.grad_spans()), policies.critic.adam,
                      cfg.critic_lr);
        }
    }
    metrics.value_loss = vloss_acc / std::max(vbatches, 1);
    metrics.critic_grad_norm = vnorm_acc / std::max(vbatches, 1);

    double rew = 0.0;
    for (double r : buffer.joint_reward) rew += r;
    metrics.average_step_rewards = rew / S;
    return metrics;
}

}  // namespace dogfight
