// Off-policy maximum-entropy heterogeneous-agent actor-critic: a FIFO replay
// buffer, twin centralized soft critics over (joint observation, joint action
// encoding) with polyak-tracked targets, sequential per-agent actor updates,
// and optional temperature adaptation.
//
// Discrete heads use exact categorical expectations enumerated over the
// agent's whole action tuple space (no relaxation), which is what the
// enumeration oracles in the tests rely on. Gaussian heads use a single
// reparameterized sample.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dogfight/common.hpp"
#include "dogfight/happo.hpp"  // ActorPolicy
#include "dogfight/neural.hpp"
#include "dogfight/rng.hpp"

namespace dogfight {

struct HasacConfig {
    double gamma = 0.99;
    double tau = 0.005;           // polyak step toward the online critics
    double init_alpha = 0.2;      // entropy temperature
    bool auto_alpha = true;
    double target_entropy_scale = 0.6;  // x sum(ln group size) for discrete heads
    int batch_size = 256;
    int warmup_steps = 2000;      // env steps of random actions before updates
    double updates_per_step = 1.0;
    std::size_t capacity = 200000;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double alpha_lr = 3e-4;
    double max_grad_norm = 10.0;
};

/// One stored environment transition (already reduced to the learner agents).
struct Transition {
    std::vector<std::vector<double>> obs;       // per agent
    std::vector<Action> actions;                // per agent
    double reward = 0.0;                        // shared scalar fed to the critics
    std::vector<std::vector<double>> next_obs;  // per agent
    bool done = false;
};

/// Circular FIFO store with uniform sampling.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return data_.size(); }

    void store(Transition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
    }

    /// Oldest-first logical indexing.
    const Transition& at(std::size_t logical) const {
        return data_[(head_ + logical) % data_.size()];
    }

    std::vector<std::size_t> sample_indices(std::size_t batch, Rng& rng) const {
        if (batch > data_.size())
            throw std::invalid_argument("ReplayBuffer: sampling " + std::to_string(batch) +
                                        " from " + std::to_string(data_.size()) +
                                        " stored transitions");
        std::vector<std::size_t> idx(batch);
        for (auto& i : idx) i = rng.uniform_index(data_.size());
        return idx;
    }

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // index of the oldest element once full
    std::vector<Transition> data_;
};

// ---- action encoding for the centralized critics ----

inline int action_encoding_dim(const PolicyHead& head) {
    return head.kind == HeadKind::MultiDiscrete ? head.logits_dim() : head.dim;
}

/// Concatenated per-group one-hots for discrete heads; the squashed values
/// for Gaussian heads.
inline void encode_action(const PolicyHead& head, const Action& a, double* out) {
    if (head.kind == HeadKind::MultiDiscrete) {
        int off = 0;
        for (std::size_t g = 0; g < head.groups.size(); ++g) {
            for (int i = 0; i < head.groups[g]; ++i) out[off + i] = 0.0;
            out[off + a.discrete[g]] = 1.0;
            off += head.groups[g];
        }
    } else {
        for (int i = 0; i < head.dim; ++i) out[i] = a.squashed[static_cast<std::size_t>(i)];
    }
}

/// All index tuples of a multi-discrete head, in odometer order.
inline std::vector<std::vector<int>> enumerate_tuples(const std::vector<int>& groups) {
    std::vector<std::vector<int>> tuples;
    std::vector<int> cur(groups.size(), 0);
    while (true) {
        tuples.push_back(cur);
        int g = static_cast<int>(groups.size()) - 1;
        while (g >= 0) {
            if (++cur[static_cast<std::size_t>(g)] < groups[static_cast<std::size_t>(g)]) break;
            cur[static_cast<std::size_t>(g)] = 0;
            --g;
        }
        if (g < 0) break;
    }
    return tuples;
}

struct SoftCritics {
    Mlp q1, q2;          // online
    Mlp target1, target2;
    AdamState adam1, adam2;
};

inline void polyak_update(Mlp& target, const Mlp& online, double tau) {
    for (std::size_t l = 0; l < online.weights.size(); ++l) {
        for (std::size_t i = 0; i < online.weights[l].data.size(); ++i)
            target.weights[l].data[i] =
                tau * online.weights[l].data[i] + (1.0 - tau) * target.weights[l].data[i];
        for (std::size_t i = 0; i < online.biases[l].size(); ++i)
            target.biases[l][i] =
                tau * online.biases[l][i] + (1.0 - tau) * target.biases[l][i];
    }
}

/// Plain MSE regression loss of one critic; gradients accumulate into grads
/// when non-null.
inline double critic_mse_loss(Mlp& net, const Matrix& in,
                              const std::vector<double>& target, MlpGrads* grads) {
    const int B = in.rows;
    ForwardCache cache;
    const Matrix q = mlp_forward(net, in, grads ? &cache : nullptr);
    Matrix dq(B, 1);
    double loss = 0.0;
    for (int i = 0; i < B; ++i) {
        const double err = q.at(i, 0) - target[static_cast<std::size_t>(i)];
        loss += err * err / B;
        dq.at(i, 0) = 2.0 * err / B;
    }
    if (!std::isfinite(loss)) throw std::runtime_error("hasac: non-finite critic loss");
    if (grads) mlp_backward(net, cache, dq, *grads);
    return loss;
}

struct HasacMetrics {
    double critic1_loss = 0.0;
    double critic2_loss = 0.0;
    double critic_grad_norm = 0.0;
    std::vector<double> actor_loss;       // per agent
    std::vector<double> dist_entropy;     // per agent
    std::vector<double> actor_grad_norm;  // per agent
    double alpha = 0.0;
};

/// The trainer owns the per-agent actors, the twin critics, and the
/// temperature. All stochastic choices draw from the Rng handed to each call.
class HasacTrainer {
public:
    HasacTrainer(std::vector<ActorPolicy> actors, int joint_obs_dim,
                 const HasacConfig& cfg)
        : cfg_(cfg), actors_(std::move(actors)), joint_obs_dim_(joint_obs_dim) {
        log_alpha_ = std::log(cfg.init_alpha);
        enc_offset_.assign(actors_.size() + 1, 0);
        for (std::size_t a = 0; a < actors_.size(); ++a) {
            enc_offset_[a + 1] = enc_offset_[a] + action_encoding_dim(actors_[a].head);
            if (actors_[a].head.kind == HeadKind::MultiDiscrete)
                tuples_.push_back(enumerate_tuples(actors_[a].head.groups));
            else
                tuples_.emplace_back();
        }
        target_entropy_ = 0.0;
        for (const auto& actor : actors_) {
            if (actor.head.kind == HeadKind::MultiDiscrete) {
                double h = 0.0;
                for (int g : actor.head.groups) h += std::log(static_cast<double>(g));
                target_entropy_ += cfg.target_entropy_scale * h;
            } else {
                target_entropy_ += -static_cast<double>(actor.head.dim);
            }
        }
        target_entropy_ /= static_cast<double>(actors_.size());
    }

    void init_critics(const std::vector<int>& hidden, Rng& rng) {
        const int in = joint_obs_dim_ + enc_offset_.back();
        critics_.q1 = make_mlp(in, hidden, 1, 1.0, rng);
        critics_.q2 = make_mlp(in, hidden, 1, 1.0, rng);
        critics_.target1 = critics_.q1;
        critics_.target2 = critics_.q2;
    }

    int agent_count() const { return static_cast<int>(actors_.size()); }
    std::vector<ActorPolicy>& actors() { return actors_; }
    const std::vector<ActorPolicy>& actors() const { return actors_; }
    SoftCritics& critics() { return critics_; }
    double alpha() const { return std::exp(log_alpha_); }
    double log_alpha() const { return log_alpha_; }
    void set_log_alpha(double v) { log_alpha_ = v; }
    double target_entropy() const { return target_entropy_; }

    /// Per-sample soft state value under the target critics: for each agent,
    /// the exact expectation over its own action tuples (others fixed at
    /// fresh samples from the current policies), averaged over agents.
    /// V_m = sum_a pi_m(a|s') * (min Q'(s', a, a_others) - alpha log pi_m(a|s')).
    std::vector<double> soft_value(const std::vector<const Transition*>& batch, Rng& rng) {
        const int B = static_cast<int>(batch.size());
        const int N = agent_count();
        std::vector<std::vector<double>> next_obs_rows(static_cast<std::size_t>(B));
        for (int i = 0; i < B; ++i)
            next_obs_rows[static_cast<std::size_t>(i)] =
                concat_obs(batch[static_cast<std::size_t>(i)]->next_obs);

        // fresh joint samples a_hat from every agent's current policy
        Matrix enc(B, enc_offset_.back());
        std::vector<Matrix> agent_logits;
        for (int a = 0; a < N; ++a) {
            Matrix in(B, actors_[static_cast<std::size_t>(a)].net.input_dim());
            for (int i = 0; i < B; ++i) {
                const auto& obs = batch[static_cast<std::size_t>(i)]->next_obs[static_cast<std::size_t>(a)];
                std::copy(obs.begin(), obs.end(), in.row(i));
            }
            Matrix logits = mlp_forward(actors_[static_cast<std::size_t>(a)].net, in);
            for (int i = 0; i < B; ++i) {
                const Action sample =
                    sample_action(actors_[static_cast<std::size_t>(a)].head, logits.row(i), rng);
                encode_action(actors_[static_cast<std::size_t>(a)].head, sample,
                              enc.row(i) + enc_offset_[static_cast<std::size_t>(a)]);
            }
            agent_logits.push_back(std::move(logits));
        }

        std::vector<double> value(static_cast<std::size_t>(B), 0.0);
        for (int m = 0; m < N; ++m) {
            const ActorPolicy& actor = actors_[static_cast<std::size_t>(m)];
            if (actor.head.kind == HeadKind::MultiDiscrete) {
                const Matrix qmin = enumerate_qmin(critics_.target1, critics_.target2,
                                                   next_obs_rows, enc, m);
                for (int i = 0; i < B; ++i) {
                    const double* logits = agent_logits[static_cast<std::size_t>(m)].row(i);
                    value[static_cast<std::size_t>(i)] +=
                        expected_soft_q(actor.head, m, logits, qmin, i) / N;
                }
            } else {
                // single reparameterized sample: reuse the fresh joint sample
                Matrix in(B, critics_.target1.input_dim());
                for (int i = 0; i < B; ++i)
                    build_q_input(next_obs_rows[static_cast<std::size_t>(i)], enc.row(i), in.row(i));
                const Matrix q1 = mlp_forward(critics_.target1, in);
                const Matrix q2 = mlp_forward(critics_.target2, in);
                for (int i = 0; i < B; ++i) {
                    Action sampled;
                    sampled.raw.resize(static_cast<std::size_t>(actor.head.dim));
                    decode_gaussian(actor.head, enc.row(i) + enc_offset_[static_cast<std::size_t>(m)],
                                    sampled);
                    const auto le = logp_entropy(
                        actor.head, agent_logits[static_cast<std::size_t>(m)].row(i), sampled);
                    value[static_cast<std::size_t>(i)] +=
                        (std::min(q1.at(i, 0), q2.at(i, 0)) - alpha() * le.logp) / N;
                }
            }
        }
        return value;
    }

    /// Soft Bellman regression for both critics, then polyak target tracking.
    void critic_update(const std::vector<const Transition*>& batch, Rng& rng,
                       HasacMetrics& metrics) {
        const int B = static_cast<int>(batch.size());
        const std::vector<double> next_value = soft_value(batch, rng);
        std::vector<double> target(static_cast<std::size_t>(B));
        for (int i = 0; i < B; ++i) {
            const Transition& t = *batch[static_cast<std::size_t>(i)];
            target[static_cast<std::size_t>(i)] =
                t.reward + cfg_.gamma * (t.done ? 0.0 : 1.0) * next_value[static_cast<std::size_t>(i)];
            if (!std::isfinite(target[static_cast<std::size_t>(i)]))
                throw std::runtime_error("hasac: non-finite critic target");
        }

        Matrix in(B, critics_.q1.input_dim());
        for (int i = 0; i < B; ++i) {
            const Transition& t = *batch[static_cast<std::size_t>(i)];
            std::vector<double> enc(static_cast<std::size_t>(enc_offset_.back()), 0.0);
            for (int a = 0; a < agent_count(); ++a)
                encode_action(actors_[static_cast<std::size_t>(a)].head,
                              t.actions[static_cast<std::size_t>(a)],
                              enc.data() + enc_offset_[static_cast<std::size_t>(a)]);
            build_q_input(concat_obs(t.obs), enc.data(), in.row(i));
        }

        double norms = 0.0;
        const double l1 = regress_critic(critics_.q1, critics_.adam1, in, target, norms);
        const double l2 = regress_critic(critics_.q2, critics_.adam2, in, target, norms);
        metrics.critic1_loss = l1;
        metrics.critic2_loss = l2;
        metrics.critic_grad_norm = norms / 2.0;

        polyak_update(critics_.target1, critics_.q1, cfg_.tau);
        polyak_update(critics_.target2, critics_.q2, cfg_.tau);
    }

    /// Sequential per-agent actor step: agent m minimizes
    /// E[ sum_a pi_m(a|s) (alpha log pi_m(a|s) - min Q(s, a, a_others)) ]
    /// where predecessors in the drawn order contribute fresh samples from
    /// their already-updated policies and the rest keep the batch actions.
    void actor_update_sequential(const std::vector<const Transition*>& batch, Rng& rng,
                                 HasacMetrics& metrics) {
        const int B = static_cast<int>(batch.size());
        const int N = agent_count();
        metrics.actor_loss.assign(static_cast<std::size_t>(N), 0.0);
        metrics.dist_entropy.assign(static_cast<std::size_t>(N), 0.0);
        metrics.actor_grad_norm.assign(static_cast<std::size_t>(N), 0.0);

        std::vector<std::vector<double>> obs_rows(static_cast<std::size_t>(B));
        for (int i = 0; i < B; ++i)
            obs_rows[static_cast<std::size_t>(i)] = concat_obs(batch[static_cast<std::size_t>(i)]->obs);

        const std::vector<std::size_t> order = rng.permutation(static_cast<std::size_t>(N));
        std::vector<bool> updated(static_cast<std::size_t>(N), false);

        for (const std::size_t m : order) {
            // joint encoding: batch actions, except updated agents resample
            Matrix enc(B, enc_offset_.back());
            for (int i = 0; i < B; ++i) {
                const Transition& t = *batch[static_cast<std::size_t>(i)];
                for (int a = 0; a < N; ++a)
                    if (!updated[static_cast<std::size_t>(a)])
                        encode_action(actors_[static_cast<std::size_t>(a)].head,
                                      t.actions[static_cast<std::size_t>(a)],
                                      enc.row(i) + enc_offset_[static_cast<std::size_t>(a)]);
            }
            for (int a = 0; a < N; ++a) {
                if (!updated[static_cast<std::size_t>(a)]) continue;
                Matrix in(B, actors_[static_cast<std::size_t>(a)].net.input_dim());
                for (int i = 0; i < B; ++i) {
                    const auto& o = batch[static_cast<std::size_t>(i)]->obs[static_cast<std::size_t>(a)];
                    std::copy(o.begin(), o.end(), in.row(i));
                }
                const Matrix logits = mlp_forward(actors_[static_cast<std::size_t>(a)].net, in);
                for (int i = 0; i < B; ++i) {
                    const Action s =
                        sample_action(actors_[static_cast<std::size_t>(a)].head, logits.row(i), rng);
                    encode_action(actors_[static_cast<std::size_t>(a)].head, s,
                                  enc.row(i) + enc_offset_[static_cast<std::size_t>(a)]);
                }
            }

            ActorPolicy& actor = actors_[m];
            Matrix actor_obs(B, actor.net.input_dim());
            for (int i = 0; i < B; ++i) {
                const auto& o = batch[static_cast<std::size_t>(i)]->obs[m];
                std::copy(o.begin(), o.end(), actor_obs.row(i));
            }
            MlpGrads grads(actor.net);
            double entropy = 0.0, loss = 0.0;
            std::vector<double> dlog_std(actor.head.log_std.size(), 0.0);
            if (actor.head.kind == HeadKind::MultiDiscrete) {
                loss = discrete_actor_loss(static_cast<int>(m), obs_rows, actor_obs, enc,
                                           &entropy, &grads);
            } else {
                Matrix xi(B, actor.head.dim);
                for (auto& v : xi.data) v = rng.normal();
                loss = gaussian_actor_loss(static_cast<int>(m), obs_rows, actor_obs, enc,
                                           xi, &entropy, &grads, &dlog_std);
            }
            auto gspans = grads.grad_spans();
            if (actor.head.kind == HeadKind::Gaussian) gspans.emplace_back(dlog_std);
            metrics.actor_grad_norm[m] = global_norm_clip(gspans, cfg_.max_grad_norm);
            adam_step(actor.param_spans(), as_const_spans(gspans), actor.adam,
                      cfg_.actor_lr);
            metrics.actor_loss[m] = loss;
            metrics.dist_entropy[m] = entropy;
            updated[m] = true;
        }
        metrics.alpha = alpha();
    }

    /// Exact-expectation actor loss for a multi-discrete agent:
    /// mean_i sum_a pi(a|s_i) (alpha log pi(a|s_i) - min Q(s_i, a, others)).
    /// Differentiable in the actor parameters only; the critics are constants.
    double discrete_actor_loss(int m, const std::vector<std::vector<double>>& joint_obs_rows,
                               const Matrix& actor_obs, const Matrix& enc,
                               double* entropy_out, MlpGrads* grads) {
        ActorPolicy& actor = actors_[static_cast<std::size_t>(m)];
        const int B = actor_obs.rows;
        const auto& tuples = tuples_[static_cast<std::size_t>(m)];
        const Matrix qmin = enumerate_qmin(critics_.q1, critics_.q2, joint_obs_rows, enc, m);

        ForwardCache cache;
        const Matrix logits = mlp_forward(actor.net, actor_obs, grads ? &cache : nullptr);

        Matrix dlogits(B, actor.head.logits_dim());
        double loss = 0.0, entropy = 0.0;
        const double a = alpha();
        std::vector<std::vector<double>> probs;
        std::vector<double> marginal(static_cast<std::size_t>(actor.head.logits_dim()));
        for (int i = 0; i < B; ++i) {
            probs.clear();
            int off = 0;
            for (int g : actor.head.groups) {
                std::vector<double> p(static_cast<std::size_t>(g));
                detail::softmax_row(logits.row(i) + off, g, p.data());
                double h = 0.0;
                for (double x : p)
                    if (x > 0.0) h -= x * std::log(x);
                entropy += h / B;
                probs.push_back(std::move(p));
                off += g;
            }
            // f(a) = alpha * log pi(a) - qmin(a); dL/dl_{g,j} = E[(1{a_g=j} - p_gj) f]
            std::fill(marginal.begin(), marginal.end(), 0.0);
            double expect_f = 0.0;
            for (std::size_t t = 0; t < tuples.size(); ++t) {
                double prob = 1.0, logp = 0.0;
                for (std::size_t g = 0; g < actor.head.groups.size(); ++g) {
                    const double pg = probs[g][static_cast<std::size_t>(tuples[t][g])];
                    prob *= pg;
                    logp += std::log(std::max(pg, 1e-300));
                }
                const double f = a * logp - qmin.at(i, static_cast<int>(t));
                const double pf = prob * f;
                expect_f += pf;
                int goff = 0;
                for (std::size_t g = 0; g < actor.head.groups.size(); ++g) {
                    marginal[static_cast<std::size_t>(goff + tuples[t][g])] += pf;
                    goff += actor.head.groups[static_cast<std::size_t>(g)];
                }
            }
            loss += expect_f / B;
            int goff = 0;
            for (std::size_t g = 0; g < actor.head.groups.size(); ++g) {
                for (int j = 0; j < actor.head.groups[g]; ++j)
                    dlogits.at(i, goff + j) =
                        (marginal[static_cast<std::size_t>(goff + j)] -
                         probs[g][static_cast<std::size_t>(j)] * expect_f) / B;
                goff += actor.head.groups[g];
            }
        }
        if (!std::isfinite(loss))
            throw std::runtime_error("hasac: non-finite actor loss (agent " +
                                     std::to_string(m) + ")");
        if (grads) mlp_backward(actor.net, cache, dlogits, *grads);
        if (entropy_out) *entropy_out = entropy;
        return loss;
    }

    /// Reparameterized single-sample actor loss for a Gaussian agent. xi is
    /// the fixed standard-normal draw, so the loss is deterministic in the
    /// parameters (which is what the finite-difference checks need).
    double gaussian_actor_loss(int m, const std::vector<std::vector<double>>& joint_obs_rows,
                               const Matrix& actor_obs, const Matrix& enc, const Matrix& xi,
                               double* entropy_out, MlpGrads* grads,
                               std::vector<double>* dlog_std) {
        ActorPolicy& actor = actors_[static_cast<std::size_t>(m)];
        const int B = actor_obs.rows;
        const int D = actor.head.dim;

        ForwardCache cache;
        const Matrix mean = mlp_forward(actor.net, actor_obs, grads ? &cache : nullptr);

        Matrix qin(B, critics_.q1.input_dim());
        Matrix u(B, D);
        for (int i = 0; i < B; ++i) {
            build_q_input(joint_obs_rows[static_cast<std::size_t>(i)], enc.row(i), qin.row(i));
            double* slice = qin.row(i) + joint_obs_dim_ + enc_offset_[static_cast<std::size_t>(m)];
            for (int d = 0; d < D; ++d) {
                const double sigma = std::exp(actor.head.log_std[static_cast<std::size_t>(d)]);
                u.at(i, d) = mean.at(i, d) + sigma * xi.at(i, d);
                slice[d] = detail::squash_to(u.at(i, d), actor.head.lo[static_cast<std::size_t>(d)],
                                             actor.head.hi[static_cast<std::size_t>(d)]);
            }
        }
        double entropy_val = 0.0;
        for (int d = 0; d < D; ++d)
            entropy_val += actor.head.log_std[static_cast<std::size_t>(d)] + 0.5 +
                           detail::kLogSqrt2Pi;

        ForwardCache qc1, qc2;
        const Matrix q1 = mlp_forward(critics_.q1, qin, grads ? &qc1 : nullptr);
        const Matrix q2 = mlp_forward(critics_.q2, qin, grads ? &qc2 : nullptr);
        Matrix up1(B, 1), up2(B, 1);
        double loss = 0.0;
        const double a = alpha();
        for (int i = 0; i < B; ++i) {
            Action act;
            act.raw.assign(u.row(i), u.row(i) + D);
            const auto le = logp_entropy(actor.head, mean.row(i), act);
            const double qm = std::min(q1.at(i, 0), q2.at(i, 0));
            loss += (a * le.logp - qm) / B;
            // -qmin/B flows through whichever critic is the minimum
            if (q1.at(i, 0) <= q2.at(i, 0)) up1.at(i, 0) = -1.0 / B;
            else up2.at(i, 0) = -1.0 / B;
        }
        if (!std::isfinite(loss))
            throw std::runtime_error("hasac: non-finite actor loss (agent " +
                                     std::to_string(m) + ")");
        if (entropy_out) *entropy_out = entropy_val;
        if (!grads) return loss;

        // dq/d(input), sliced at agent m's action block
        MlpGrads scratch1(critics_.q1), scratch2(critics_.q2);
        Matrix din1, din2;
        mlp_backward(critics_.q1, qc1, up1, scratch1, &din1);
        mlp_backward(critics_.q2, qc2, up2, scratch2, &din2);

        Matrix dmean(B, D);
        const int slice0 = joint_obs_dim_ + enc_offset_[static_cast<std::size_t>(m)];
        for (int i = 0; i < B; ++i) {
            for (int d = 0; d < D; ++d) {
                const double t = std::tanh(u.at(i, d));
                const double span = 0.5 * (actor.head.hi[static_cast<std::size_t>(d)] -
                                           actor.head.lo[static_cast<std::size_t>(d)]);
                const double da_du = span * (1.0 - t * t);
                const double sigma = std::exp(actor.head.log_std[static_cast<std::size_t>(d)]);
                // under reparameterization, d logp / du comes from the squash
                // correction only (the base density term is constant in u for
                // a fixed xi)
                const double dlogp_du = 2.0 * t;
                const double dq_da = din1.at(i, slice0 + d) + din2.at(i, slice0 + d);
                const double du_dls = sigma * xi.at(i, d);
                dmean.at(i, d) = (a / B) * dlogp_du + dq_da * da_du;
                if (dlog_std)
                    (*dlog_std)[static_cast<std::size_t>(d)] +=
                        (a / B) * (dlogp_du * du_dls - 1.0) + dq_da * da_du * du_dls;
            }
        }
        mlp_backward(actor.net, cache, dmean, *grads);
        return loss;
    }

    /// One temperature step: minimize log_alpha * (H_observed - H_target).
    double temperature_update(double observed_entropy) {
        if (!cfg_.auto_alpha) return alpha();
        log_alpha_ -= cfg_.alpha_lr * (observed_entropy - target_entropy_);
        return alpha();
    }

    const HasacConfig& config() const { return cfg_; }

    /// Exposed for the enumeration oracle tests.
    Matrix enumerate_qmin(const Mlp& qa, const Mlp& qb,
                          const std::vector<std::vector<double>>& joint_obs_rows,
                          const Matrix& enc_rows, int agent) {
        const auto& tuples = tuples_[static_cast<std::size_t>(agent)];
        const PolicyHead& head = actors_[static_cast<std::size_t>(agent)].head;
        const int B = static_cast<int>(joint_obs_rows.size());
        const int T = static_cast<int>(tuples.size());
        Matrix qmin(B, T);
        const int chunk = std::max(1, 8192 / std::max(T, 1));
        for (int i0 = 0; i0 < B; i0 += chunk) {
            const int nb = std::min(chunk, B - i0);
            Matrix in(nb * T, qa.input_dim());
            for (int i = 0; i < nb; ++i) {
                for (int t = 0; t < T; ++t) {
                    double* row = in.row(i * T + t);
                    build_q_input(joint_obs_rows[static_cast<std::size_t>(i0 + i)],
                                  enc_rows.row(i0 + i), row);
                    double* slice = row + joint_obs_dim_ + enc_offset_[static_cast<std::size_t>(agent)];
                    Action a;
                    a.discrete = tuples[static_cast<std::size_t>(t)];
                    encode_action(head, a, slice);
                }
            }
            const Matrix q1 = mlp_forward(qa, in);
            const Matrix q2 = mlp_forward(qb, in);
            for (int i = 0; i < nb; ++i)
                for (int t = 0; t < T; ++t)
                    qmin.at(i0 + i, t) = std::min(q1.at(i * T + t, 0), q2.at(i * T + t, 0));
        }
        return qmin;
    }

    const std::vector<std::vector<int>>& tuples_for(int agent) const {
        return tuples_[static_cast<std::size_t>(agent)];
    }

    std::vector<double> concat_obs(const std::vector<std::vector<double>>& per_agent) const {
        std::vector<double> joint;
        joint.reserve(static_cast<std::size_t>(joint_obs_dim_));
        for (const auto& o : per_agent) joint.insert(joint.end(), o.begin(), o.end());
        return joint;
    }

private:
    void build_q_input(const std::vector<double>& joint_obs, const double* enc,
                       double* row) const {
        std::copy(joint_obs.begin(), joint_obs.end(), row);
        std::copy(enc, enc + enc_offset_.back(), row + joint_obs_dim_);
    }

    void decode_gaussian(const PolicyHead& head, const double* squashed, Action& out) const {
        out.squashed.assign(squashed, squashed + head.dim);
        out.raw.resize(static_cast<std::size_t>(head.dim));
        for (int i = 0; i < head.dim; ++i) {
            const double span = 0.5 * (head.hi[static_cast<std::size_t>(i)] -
                                       head.lo[static_cast<std::size_t>(i)]);
            const double t = clamp((squashed[i] - head.lo[static_cast<std::size_t>(i)]) / span - 1.0,
                                   -1.0 + 1e-12, 1.0 - 1e-12);
            out.raw[static_cast<std::size_t>(i)] = std::atanh(t);
        }
    }

    /// sum_a pi(a|s) * (qmin(a) - alpha log pi(a|s)) over the tuple table.
    double expected_soft_q(const PolicyHead& head, int agent, const double* logits,
                           const Matrix& qmin, int row) {
        const auto& tuples = tuples_[static_cast<std::size_t>(agent)];
        std::vector<std::vector<double>> probs;
        int off = 0;
        for (int g : head.groups) {
            std::vector<double> p(static_cast<std::size_t>(g));
            detail::softmax_row(logits + off, g, p.data());
            probs.push_back(std::move(p));
            off += g;
        }
        double v = 0.0;
        for (std::size_t t = 0; t < tuples.size(); ++t) {
            double prob = 1.0, logp = 0.0;
            for (std::size_t g = 0; g < head.groups.size(); ++g) {
                const double pg = probs[g][static_cast<std::size_t>(tuples[t][g])];
                prob *= pg;
                logp += std::log(std::max(pg, 1e-300));
            }
            v += prob * (qmin.at(row, static_cast<int>(t)) - alpha() * logp);
        }
        return v;
    }

    double regress_critic(Mlp& net, AdamState& adam, const Matrix& in,
                          const std::vector<double>& target, double& norm_acc) {
        MlpGrads grads(net);
        const double loss = critic_mse_loss(net, in, target, &grads);
        norm_acc += global_norm_clip(grads.grad_spans(), cfg_.max_grad_norm);
        adam_step(net.param_spans(), as_const_spans(grads.grad_spans()), adam,
                  cfg_.critic_lr);
        return loss;
    }

    HasacConfig cfg_;
    std::vector<ActorPolicy> actors_;
    SoftCritics critics_;
    int joint_obs_dim_ = 0;
    std::vector<int> enc_offset_;
    std::vector<std::vector<std::vector<int>>> tuples_;
    double log_alpha_ = 0.0;
    double target_entropy_ = 0.0;
};

}  // namespace dogfight
