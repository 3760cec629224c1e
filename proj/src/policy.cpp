#include "dcpl/policy.hpp"

#include <cmath>

namespace dcpl {

namespace {

double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

Mlp Mlp::make(int inputs, const std::vector<int>& hidden, int outputs, OutputHead head, Rng& rng) {
    Mlp net;
    net.head = head;
    std::normal_distribution<double> gauss(0.0, 1.0);
    int fan_in = inputs;
    auto add_layer = [&](int fan_out) {
        Layer layer;
        layer.weight = Mat::NullaryExpr(fan_out, fan_in, [&]() {
            return gauss(rng) / std::sqrt(static_cast<double>(fan_in));
        });
        layer.bias = Vec::Zero(fan_out);
        net.layers.push_back(std::move(layer));
        fan_in = fan_out;
    };
    for (int width : hidden) add_layer(width);
    add_layer(outputs);
    return net;
}

Vec Mlp::forward(const Vec& x, Trace* trace) const {
    if (!layers.empty() && x.size() != layers.front().weight.cols())
        throw ValidationError("network input width mismatch: got " + std::to_string(x.size()) +
                              ", expected " + std::to_string(layers.front().weight.cols()));
    if (trace) {
        trace->input = x;
        trace->pre.clear();
        trace->post.clear();
    }
    Vec h = x;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Vec pre = layers[l].weight * h + layers[l].bias;
        const bool last = l + 1 == layers.size();
        Vec post;
        if (!last) {
            post = pre.array().tanh();
        } else if (head == OutputHead::Softplus) {
            post = pre.unaryExpr([](double v) { return softplus(v); });
        } else {
            post = pre;
        }
        if (trace) {
            trace->pre.push_back(pre);
            trace->post.push_back(post);
        }
        h = std::move(post);
    }
    return h;
}

Mlp::Gradients Mlp::zero_gradients() const {
    Gradients g;
    for (const Layer& layer : layers) {
        Layer zero;
        zero.weight = Mat::Zero(layer.weight.rows(), layer.weight.cols());
        zero.bias = Vec::Zero(layer.bias.size());
        g.layers.push_back(std::move(zero));
    }
    g.input = Vec::Zero(layers.empty() ? 0 : layers.front().weight.cols());
    return g;
}

void Mlp::backward(const Trace& trace, const Vec& output_grad, Gradients& grads) const {
    Vec delta = output_grad;
    for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
        const bool last = l + 1 == static_cast<int>(layers.size());
        if (last && head == OutputHead::Softplus) {
            delta = delta.cwiseProduct(trace.pre[l].unaryExpr([](double v) { return sigmoid(v); }));
        } else if (!last) {
            delta = delta.cwiseProduct(
                trace.post[l].unaryExpr([](double v) { return 1.0 - v * v; }));
        }
        const Vec& below = l == 0 ? trace.input : trace.post[l - 1];
        grads.layers[l].weight += delta * below.transpose();
        grads.layers[l].bias += delta;
        delta = layers[l].weight.transpose() * delta;
    }
    grads.input += delta;
}

void Mlp::Gradients::accumulate(const Gradients& other) {
    for (std::size_t l = 0; l < layers.size(); ++l) {
        layers[l].weight += other.layers[l].weight;
        layers[l].bias += other.layers[l].bias;
    }
    input += other.input;
}

void Mlp::Gradients::scale(double s) {
    for (auto& layer : layers) {
        layer.weight *= s;
        layer.bias *= s;
    }
    input *= s;
}

double Mlp::Gradients::norm() const {
    double sq = 0.0;
    for (const auto& layer : layers) sq += layer.weight.squaredNorm() + layer.bias.squaredNorm();
    return std::sqrt(sq);
}

bool Mlp::Gradients::finite() const {
    for (const auto& layer : layers)
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    return true;
}

int Mlp::parameter_count() const {
    int count = 0;
    for (const Layer& layer : layers)
        count += static_cast<int>(layer.weight.size() + layer.bias.size());
    return count;
}

double Mlp::max_abs_delta(const Mlp& other) const {
    double worst = 0.0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        worst = std::max(worst,
                         (layers[l].weight - other.layers[l].weight).cwiseAbs().maxCoeff());
        worst = std::max(worst, (layers[l].bias - other.layers[l].bias).cwiseAbs().maxCoeff());
    }
    return worst;
}

bool sgd_ascent(Mlp& net, const Mlp::Gradients& grads, double learning_rate, double clip_norm) {
    if (!grads.finite()) return false;
    double scale = 1.0;
    const double norm = grads.norm();
    if (clip_norm > 0.0 && norm > clip_norm) scale = clip_norm / norm;
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        net.layers[l].weight += learning_rate * scale * grads.layers[l].weight;
        net.layers[l].bias += learning_rate * scale * grads.layers[l].bias;
    }
    return true;
}

ClusterActions split_policy_output(const Vec& output, int n_clusters) {
    ClusterActions actions;
    actions.tweet = output.segment(0, n_clusters);
    actions.retweet = Mat(n_clusters, n_clusters);
    for (int m = 0; m < n_clusters; ++m)
        actions.retweet.row(m) = output.segment(n_clusters + m * n_clusters, n_clusters).transpose();
    return actions;
}

Vec merge_policy_gradient(const Vec& tweet_grad, const Mat& retweet_grad) {
    const int c = static_cast<int>(tweet_grad.size());
    Vec out(c + c * c);
    out.segment(0, c) = tweet_grad;
    for (int m = 0; m < c; ++m)
        out.segment(c + m * c, c) = retweet_grad.row(m).transpose();
    return out;
}

InterventionPlan user_interventions(const InterventionInputs& in, InterventionTrace* trace) {
    const Mat& x = *in.features;
    const Mat& y = *in.centroids;
    const VecI& assign = *in.assignment;
    const int n = static_cast<int>(x.rows());
    const int c = static_cast<int>(y.rows());
    if (in.tweet_budget < 0.0 || in.retweet_budget < 0.0)
        throw ValidationError("user_interventions: budgets must be nonnegative");

    Vec distances(n);
    if (in.unit_distances) {
        distances.setOnes();
    } else {
        for (int i = 0; i < n; ++i) distances(i) = (x.row(i) - y.row(assign(i))).norm();
    }

    Vec raw_tweet(n);
    for (int i = 0; i < n; ++i) raw_tweet(i) = in.actions->tweet(assign(i)) * distances(i);

    // pairwise retweet incentives collapse to per-user values through the
    // kernel-weighted average; grouping by source cluster keeps it O(N·C)
    Mat cluster_pull(c, n);  // T_{m',i} = Σ_{j∈m'} d_j Φ_ji
    if (in.retweet_kernel->is_low_rank()) {
        const Mat& u = in.retweet_kernel->factor_u();
        const Mat& v = in.retweet_kernel->factor_v();
        Mat group_u = Mat::Zero(c, u.cols());  // Σ_{j∈m'} d_j U_j
        for (int j = 0; j < n; ++j) group_u.row(assign(j)) += distances(j) * u.row(j);
        cluster_pull = group_u * v.transpose();
    } else {
        const Mat& phi = in.retweet_kernel->dense_matrix();
        cluster_pull.setZero();
        for (int j = 0; j < n; ++j) cluster_pull.row(assign(j)) += distances(j) * phi.row(j);
    }

    Vec raw_retweet(n);
    if (in.tied_retweet) {
        raw_retweet = raw_tweet;
    } else {
        for (int i = 0; i < n; ++i) {
            // ã_i = (d_i/N)·Σ_{m'} a_{C,ℛ}(c_i, m')·Σ_{j∈m'} d_j·Φ_ji
            double acc = 0.0;
            for (int m = 0; m < c; ++m)
                acc += in.actions->retweet(assign(i), m) * cluster_pull(m, i);
            raw_retweet(i) = distances(i) * acc / n;
        }
    }

    auto normalize = [n](const Vec& raw, double budget, double& sum, bool& uniform) {
        sum = raw.sum();
        if (sum <= 0.0) {
            uniform = true;
            return Vec::Constant(n, budget / n).eval();
        }
        uniform = false;
        return Vec((budget / sum) * raw);
    };

    InterventionPlan plan;
    plan.stage = in.stage;
    plan.tweet_budget = in.tweet_budget;
    plan.retweet_budget = in.retweet_budget;
    double sum_t = 0.0, sum_r = 0.0;
    bool uni_t = false, uni_r = false;
    plan.tweet = normalize(raw_tweet, in.tweet_budget, sum_t, uni_t);
    plan.retweet = normalize(raw_retweet, in.retweet_budget, sum_r, uni_r);

    if (trace) {
        trace->distances = std::move(distances);
        trace->raw_tweet = std::move(raw_tweet);
        trace->raw_retweet = std::move(raw_retweet);
        trace->sum_tweet = sum_t;
        trace->sum_retweet = sum_r;
        trace->uniform_tweet = uni_t;
        trace->uniform_retweet = uni_r;
        trace->cluster_pull = std::move(cluster_pull);
    }
    return plan;
}

ClusterActions intervention_backward(const InterventionInputs& in, const InterventionTrace& trace,
                                     const Vec& tweet_plan_grad, const Vec& retweet_plan_grad) {
    const VecI& assign = *in.assignment;
    const int n = static_cast<int>(assign.size());
    const int c = static_cast<int>(in.centroids->rows());

    // through a = B·ã/Σã:  ∂a_i/∂ã_j = (B/Σ)δ_ij − a_i/Σ
    auto raw_grad = [&](const Vec& plan_grad, const Vec& raw, double sum, double budget,
                        bool uniform) {
        if (uniform || sum <= 0.0) return Vec::Zero(n).eval();
        const Vec plan = (budget / sum) * raw;
        const double dot = plan_grad.dot(plan);
        return Vec((budget / sum) * plan_grad - Vec::Constant(n, dot / sum));
    };

    Vec g_raw_tweet = raw_grad(tweet_plan_grad, trace.raw_tweet, trace.sum_tweet, in.tweet_budget,
                               trace.uniform_tweet);
    const Vec g_raw_retweet = raw_grad(retweet_plan_grad, trace.raw_retweet, trace.sum_retweet,
                                       in.retweet_budget, trace.uniform_retweet);

    ClusterActions grads;
    grads.tweet = Vec::Zero(c);
    grads.retweet = Mat::Zero(c, c);

    if (in.tied_retweet) {
        g_raw_tweet += g_raw_retweet;  // both plans consumed the same raw vector
    } else {
        for (int i = 0; i < n; ++i) {
            const double w = g_raw_retweet(i) * trace.distances(i) / n;
            if (w == 0.0) continue;
            for (int m = 0; m < c; ++m)
                grads.retweet(assign(i), m) += w * trace.cluster_pull(m, i);
        }
    }
    for (int i = 0; i < n; ++i)
        grads.tweet(assign(i)) += g_raw_tweet(i) * trace.distances(i);
    return grads;
}

Vec StageReward::next_state_flat() const { return flatten_rows(next_state); }

Vec flatten_rows(const Mat& m) {
    Vec out(m.size());
    int at = 0;
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) out(at++) = m(i, j);
    return out;
}

StageReward expected_stage_reward(const StageEnvironment& env, const InterventionPlan& plan) {
    StageReward out;
    out.true_tweet = env.base_true_tweet + env.response_tweet * plan.tweet;
    out.true_retweet = env.base_true_retweet + env.response_retweet * plan.retweet;
    out.summand_tweet = out.true_tweet.cwiseProduct(env.reward_weight_tweet);
    out.summand_retweet = out.true_retweet.cwiseProduct(env.reward_weight_retweet);
    out.tweet = out.summand_tweet.sum();
    out.retweet = out.summand_retweet.sum();

    const int n = static_cast<int>(out.true_tweet.size());
    out.next_state = Mat(n, kStateCols);
    out.next_state.col(0) = out.true_tweet;
    out.next_state.col(1) = env.fake_tweet;
    out.next_state.col(2) = out.true_retweet;
    out.next_state.col(3) = env.fake_retweet;
    out.next_state.col(4) = env.likes;
    return out;
}

Vec payoff_features(const Vec& summand_latest, const Vec& summand_previous) {
    return summand_latest - summand_previous;
}

Vec contribution_features(const StageEnvironment& env, const InterventionPlan& plan, Activity z) {
    // zeroing a_i changes only E[n_i] via the diagonal of the response map,
    // so the i-th summand drops by response_ii · a_i · weight_i
    if (z == Activity::Tweet)
        return env.response_tweet.diagonal()
            .cwiseProduct(plan.tweet)
            .cwiseProduct(env.reward_weight_tweet);
    if (z == Activity::Retweet)
        return env.response_retweet.diagonal()
            .cwiseProduct(plan.retweet)
            .cwiseProduct(env.reward_weight_retweet);
    throw ValidationError("contribution features are defined for tweets and retweets");
}

double return_weight(int stage_one_based, double gamma) {
    if (gamma >= 1.0) return static_cast<double>(stage_one_based);
    return (1.0 - std::pow(gamma, stage_one_based)) / (1.0 - gamma);
}

ObjectiveTrace total_objective(const std::vector<double>& rewards,
                               const std::vector<Vec>& states_flat, const Mlp& value_net,
                               double gamma) {
    const int k_stages = static_cast<int>(rewards.size());
    if (k_stages == 0) throw ValidationError("total_objective: need at least one stage");
    if (states_flat.size() != rewards.size())
        throw ValidationError("total_objective: rewards/states length mismatch");

    ObjectiveTrace trace;
    trace.discounted.resize(k_stages);
    double running = 0.0;
    for (int k = k_stages - 1; k >= 0; --k) {
        running = rewards[k] + gamma * running;
        trace.discounted[k] = running;
    }
    for (int k = 0; k < k_stages; ++k) {
        const double v = value_net.forward(states_flat[k])(0);
        trace.value.push_back(v);
        trace.advantage.push_back(trace.discounted[k] - v);
        trace.j_theta += trace.advantage[k];
        trace.j_phi -= std::abs(v - trace.discounted[k]);
    }
    return trace;
}

}  // namespace dcpl
