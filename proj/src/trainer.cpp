#include "dcpl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dcpl {

Method parse_method(const std::string& name) {
    std::string s;
    for (char c : name) s += static_cast<char>(std::tolower(c));
    if (s == "dcpl") return Method::Dcpl;
    if (s == "nc-1") return Method::Nc1;
    if (s == "nc-n") return Method::NcN;
    if (s == "nc-tr") return Method::NcTr;
    if (s == "nc-pf") return Method::NcPf;
    if (s == "rnd") return Method::Rnd;
    if (s == "c-net") return Method::CNet;
    if (s == "km-r") return Method::KmR;
    if (s == "km-s") return Method::KmS;
    throw ValidationError("unknown method '" + name +
                          "' (valid: dcpl, nc-1, nc-n, nc-tr, nc-pf, rnd, c-net, km-r, km-s)");
}

const char* method_name(Method m) {
    switch (m) {
        case Method::Dcpl: return "dcpl";
        case Method::Nc1: return "nc-1";
        case Method::NcN: return "nc-n";
        case Method::NcTr: return "nc-tr";
        case Method::NcPf: return "nc-pf";
        case Method::Rnd: return "rnd";
        case Method::CNet: return "c-net";
        case Method::KmR: return "km-r";
        case Method::KmS: return "km-s";
    }
    return "?";
}

bool ReclusterSchedule::should(int epoch) const {
    if (never || spans.empty()) return false;
    int period = spans.back().second;
    for (const auto& [last, p] : spans)
        if (epoch <= last) {
            period = p;
            break;
        }
    return period <= 1 || epoch % period == 0;
}

void TrainConfig::validate(int n_stages) const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in (0, 1]");
    if (delta <= 0.0) throw ValidationError("delta must be positive");
    if (std::abs(eps1 + eps2 - 1.0) > 1e-9) throw ValidationError("eps1 + eps2 must equal 1");
    if (n_clusters < 1) throw ValidationError("need at least one cluster");
    if (budgets.rows() != 2 || budgets.cols() != n_stages)
        throw ValidationError("budgets must be 2×K");
    if ((budgets.array() < 0.0).any()) throw ValidationError("budgets must be nonnegative");
    if (max_epochs < 0) throw ValidationError("max_epochs must be nonnegative");
}

TrainConfig configure_baseline(Method m, TrainConfig base, int n_users) {
    base.method = m;
    switch (m) {
        case Method::Dcpl:
            break;
        case Method::Nc1:
            base.n_clusters = 1;
            base.schedule = ReclusterSchedule::none();
            break;
        case Method::NcN:
        case Method::NcTr:
        case Method::NcPf:
            base.n_clusters = n_users;
            base.schedule = ReclusterSchedule::none();
            break;
        case Method::Rnd:
        case Method::CNet:
        case Method::KmR:
        case Method::KmS:
            base.schedule = ReclusterSchedule::none();
            break;
    }
    return base;
}

VecI baseline_assignment(Method m, int n_clusters, const InitialClusters& init,
                         const std::vector<Mat>& states, const Network& net,
                         std::uint64_t seed) {
    const int n = net.n_users();
    switch (m) {
        case Method::Dcpl:
        case Method::KmR: {
            if (init.model.n_clusters == n_clusters) return init.model.assignment;
            Rng rng = make_rng(seed, 30);
            return kmeans_pp(init.features, n_clusters, rng).assignment;
        }
        case Method::Nc1:
            return VecI::Zero(n);
        case Method::NcN:
        case Method::NcTr:
        case Method::NcPf: {
            VecI ident(n);
            for (int i = 0; i < n; ++i) ident(i) = i;
            return ident;
        }
        case Method::Rnd: {
            // round-robin base keeps every group populated
            std::vector<int> labels(n);
            for (int i = 0; i < n; ++i) labels[i] = i % n_clusters;
            Rng rng = make_rng(seed, 31);
            std::shuffle(labels.begin(), labels.end(), rng);
            VecI out(n);
            for (int i = 0; i < n; ++i) out(i) = labels[i];
            return out;
        }
        case Method::CNet: {
            Rng rng = make_rng(seed, 32);
            return kmeans_pp(standardize(network_features(net)), n_clusters, rng).assignment;
        }
        case Method::KmS: {
            Mat mean_state = Mat::Zero(n, kStateCols);
            for (const Mat& s : states) mean_state += s;
            if (!states.empty()) mean_state /= static_cast<double>(states.size());
            Mat joint(n, init.features_raw.cols() + kStateCols);
            joint << init.features_raw, mean_state;
            Rng rng = make_rng(seed, 33);
            return kmeans_pp(standardize(joint), n_clusters, rng).assignment;
        }
    }
    throw ValidationError("unhandled method");
}

int policy_input_width(const TrainConfig& cfg, int n_users) {
    if (cfg.features_in_state()) return kStateCols * n_users + 4 * n_users;
    return kStateCols * cfg.n_clusters;
}

std::pair<Mlp, Mlp> make_networks(const TrainConfig& cfg, int n_users) {
    Rng policy_rng = make_rng(cfg.seed, 11);
    Rng value_rng = make_rng(cfg.seed, 12);
    const int c = cfg.n_clusters;
    Mlp policy = Mlp::make(policy_input_width(cfg, n_users), cfg.policy_hidden, c + c * c,
                           OutputHead::Softplus, policy_rng);
    Mlp value = Mlp::make(kStateCols * n_users, cfg.value_hidden, 1, OutputHead::Linear,
                          value_rng);
    return {std::move(policy), std::move(value)};
}

namespace {

Mat unflatten_rows(const Vec& v, int rows, int cols) {
    Mat m(rows, cols);
    int at = 0;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = v(at++);
    return m;
}

std::vector<Vec> stage_start_excitations(const HawkesModel& model, Process p, const EventLog& log,
                                         const StagePartition& part) {
    const int idx = static_cast<int>(p);
    const double omega = model.omega[idx];
    const Kernel& kern = model.kernel_for(p);
    const bool low_rank = kern.is_low_rank();

    Vec state = Vec::Zero(low_rank ? kern.rank() : model.n_users);
    double state_time = 0.0;
    bool has_state = false;

    std::vector<std::pair<double, int>> stream;
    for (const Event& ev : log)
        if (process_of(ev) == p && ev.t < part.boundary(part.n_stages - 1))
            stream.emplace_back(ev.t, stream_user(ev));
    std::sort(stream.begin(), stream.end());

    std::vector<Vec> out;
    std::size_t next = 0;
    for (int k = 0; k < part.n_stages; ++k) {
        const double target = part.boundary(k);
        while (next < stream.size() && stream[next].first < target) {
            const auto& [t, u] = stream[next++];
            if (has_state) state *= std::exp(-omega * (t - state_time));
            if (low_rank)
                state += omega * kern.factor_u().row(u).transpose();
            else
                state += omega * kern.dense_matrix().row(u).transpose();
            state_time = t;
            has_state = true;
        }
        Vec at_boundary = state;
        if (has_state) at_boundary *= std::exp(-omega * (target - state_time));
        out.push_back(low_rank ? Vec(kern.factor_v() * at_boundary) : at_boundary);
    }
    return out;
}

struct StageRecord {
    VecI assign;
    Mat features;
    Mat centroids;
    Mlp::Trace policy_trace;
    ClusterActions actions;
    InterventionTrace itrace;
    InterventionPlan plan;
    StageReward reward;
    Mlp::Trace value_next_trace;
    double r = 0.0;
    Mat contributions;  // N×2
};

struct EpochRun {
    std::vector<StageRecord> records;
    std::vector<double> rewards;
};

class Engine {
public:
    Engine(const TrainConfig& cfg, const TrainInputs& in) : cfg_(cfg), in_(in) {
        n_ = in.net->n_users();
        k_ = in.window.n_stages;
        c_ = cfg.n_clusters;
        build();
    }

    EpochRun run_epoch(const Mlp& policy, const Mlp& value, std::vector<VecI>& assignments,
                       bool recluster, const FrozenTrajectory* frozen) const {
        EpochRun run;
        run.records.reserve(k_);
        Mat features = frozen ? frozen->features[0] : in_.init->features;

        for (int kk = 0; kk < k_; ++kk) {
            StageRecord rec;
            rec.assign = frozen ? frozen->assignments[kk] : assignments[kk];
            rec.features = features;

            const StageEnvironment& env = stages_[kk];
            const Mat cluster_state = group_means(rec.assign, c_, env.state);

            Vec input;
            if (cfg_.features_in_state()) {
                input.resize(kStateCols * n_ + 4 * n_);
                input << flatten_rows(env.state), flatten_rows(rec.features);
            } else {
                input = flatten_rows(cluster_state);
            }
            const Vec output = policy.forward(input, &rec.policy_trace);
            rec.actions = split_policy_output(output, c_);

            rec.centroids = group_means(rec.assign, c_, rec.features);

            InterventionInputs ii;
            ii.actions = &rec.actions;
            ii.features = &rec.features;
            ii.centroids = &rec.centroids;
            ii.assignment = &rec.assign;
            ii.retweet_kernel = &in_.model->kernel_for(Process::TrueRetweet);
            ii.tweet_budget = cfg_.budgets(0, kk);
            ii.retweet_budget = cfg_.budgets(1, kk);
            ii.stage = kk + 1;
            ii.tied_retweet = cfg_.tied_retweet_head();
            ii.unit_distances = cfg_.per_user_actions();
            rec.plan = user_interventions(ii, &rec.itrace);

            rec.reward = expected_stage_reward(env, rec.plan);
            const Vec next_flat = rec.reward.next_state_flat();
            const double v_next = value.forward(next_flat, &rec.value_next_trace)(0);
            rec.r = rec.reward.total() + cfg_.gamma * v_next;
            run.rewards.push_back(rec.r);

            rec.contributions = Mat(n_, 2);
            rec.contributions.col(0) = contribution_features(env, rec.plan, Activity::Tweet);
            rec.contributions.col(1) = contribution_features(env, rec.plan, Activity::Retweet);

            if (!frozen && kk + 1 < k_) {
                Mat raw = Mat::Zero(n_, 4);
                if (kk >= 1) {
                    raw.col(0) = payoff_features(rec.reward.summand_tweet,
                                                 run.records[kk - 1].reward.summand_tweet);
                    raw.col(1) = payoff_features(rec.reward.summand_retweet,
                                                 run.records[kk - 1].reward.summand_retweet);
                }
                raw.col(2) = rec.contributions.col(0);
                raw.col(3) = rec.contributions.col(1);
                features = standardize(raw);
                if (recluster)
                    assignments[kk + 1] = update_clusters(rec.centroids, rec.assign, features,
                                                          cfg_.cluster_tol, cfg_.eps1, cfg_.eps2)
                                              .assignment;
            } else if (frozen && kk + 1 < k_) {
                features = frozen->features[kk + 1];
            }

            run.records.push_back(std::move(rec));
        }
        return run;
    }

    struct GradientBundle {
        Mlp::Gradients policy;
        Mlp::Gradients value;
        double j_theta = 0.0;
        double j_phi = 0.0;
    };

    GradientBundle gradients(const EpochRun& run, const Mlp& policy, const Mlp& value) const {
        GradientBundle g;
        g.policy = policy.zero_gradients();
        g.value = value.zero_gradients();

        std::vector<double> discounted(k_);
        double running = 0.0;
        for (int kk = k_ - 1; kk >= 0; --kk) {
            running = run.rewards[kk] + cfg_.gamma * running;
            discounted[kk] = running;
        }

        for (int kk = 0; kk < k_; ++kk) {
            Mlp::Trace tr;
            const double v = value.forward(state_flats_[kk], &tr)(0);
            const double diff = v - discounted[kk];
            g.j_theta += discounted[kk] - v;
            g.j_phi -= std::abs(diff);
            const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            value.backward(tr, Vec::Constant(1, -sign), g.value);
        }

        for (int kk = 0; kk < k_; ++kk) {
            const StageRecord& rec = run.records[kk];
            const StageEnvironment& env = stages_[kk];
            const double weight = return_weight(kk + 1, cfg_.gamma);

            Mlp::Gradients scratch = value.zero_gradients();
            value.backward(rec.value_next_trace, Vec::Constant(1, cfg_.gamma * weight), scratch);
            const Mat state_grad = unflatten_rows(scratch.input, n_, kStateCols);

            const Vec count_grad_tweet = weight * env.reward_weight_tweet + state_grad.col(0);
            const Vec count_grad_retweet = weight * env.reward_weight_retweet + state_grad.col(2);
            const Vec plan_grad_tweet = env.response_tweet.transpose() * count_grad_tweet;
            const Vec plan_grad_retweet = env.response_retweet.transpose() * count_grad_retweet;

            InterventionInputs ii;
            ii.actions = &rec.actions;
            ii.features = &rec.features;
            ii.centroids = &rec.centroids;
            ii.assignment = &rec.assign;
            ii.retweet_kernel = &in_.model->kernel_for(Process::TrueRetweet);
            ii.tweet_budget = cfg_.budgets(0, kk);
            ii.retweet_budget = cfg_.budgets(1, kk);
            ii.stage = kk + 1;
            ii.tied_retweet = cfg_.tied_retweet_head();
            ii.unit_distances = cfg_.per_user_actions();
            const ClusterActions action_grads =
                intervention_backward(ii, rec.itrace, plan_grad_tweet, plan_grad_retweet);

            policy.backward(rec.policy_trace,
                            merge_policy_gradient(action_grads.tweet, action_grads.retweet),
                            g.policy);
        }
        return g;
    }

    const std::vector<Vec>& state_flats() const { return state_flats_; }

private:
    void build() {
        const HawkesModel& model = *in_.model;
        const double dt = in_.window.dt;

        const StageMoments m_tt = stage_moments(model, Process::TrueTweet, dt);
        const StageMoments m_tr = stage_moments(model, Process::TrueRetweet, dt);
        const StageMoments m_ft = stage_moments(model, Process::FakeTweet, dt);
        const StageMoments m_fr = stage_moments(model, Process::FakeRetweet, dt);
        const StageMoments m_like = stage_moments(model, Process::Like, dt);

        const auto exc_tt = stage_start_excitations(model, Process::TrueTweet, *in_.log, in_.window);
        const auto exc_tr =
            stage_start_excitations(model, Process::TrueRetweet, *in_.log, in_.window);
        const auto exc_ft = stage_start_excitations(model, Process::FakeTweet, *in_.log, in_.window);
        const auto exc_fr =
            stage_start_excitations(model, Process::FakeRetweet, *in_.log, in_.window);
        const auto exc_like = stage_start_excitations(model, Process::Like, *in_.log, in_.window);

        const Mat& gram = in_.net->gram();
        for (int kk = 0; kk < k_; ++kk) {
            StageEnvironment env;
            env.state = in_.states[kk];
            env.response_tweet = m_tt.response;
            env.response_retweet = m_tr.response;
            env.base_true_tweet =
                m_tt.expected_counts(model.mu[static_cast<int>(Process::TrueTweet)], exc_tt[kk]);
            env.base_true_retweet =
                m_tr.expected_counts(model.mu[static_cast<int>(Process::TrueRetweet)], exc_tr[kk]);
            env.fake_tweet =
                m_ft.expected_counts(model.mu[static_cast<int>(Process::FakeTweet)], exc_ft[kk]);
            env.fake_retweet =
                m_fr.expected_counts(model.mu[static_cast<int>(Process::FakeRetweet)], exc_fr[kk]);
            env.likes = m_like.expected_counts(model.mu[static_cast<int>(Process::Like)],
                                               exc_like[kk]);
            env.reward_weight_tweet = gram * env.fake_tweet / n_;
            env.reward_weight_retweet = gram * env.fake_retweet / n_;
            state_flats_.push_back(flatten_rows(env.state));
            stages_.push_back(std::move(env));
        }
    }

    const TrainConfig& cfg_;
    const TrainInputs& in_;
    int n_ = 0, k_ = 0, c_ = 0;
    std::vector<StageEnvironment> stages_;
    std::vector<Vec> state_flats_;
};

}  // namespace

TrainResult train(const TrainConfig& cfg, const TrainInputs& inputs) {
    const int k_stages = inputs.window.n_stages;
    cfg.validate(k_stages);
    if (static_cast<int>(inputs.states.size()) != k_stages)
        throw ValidationError("train: states must cover every stage");
    if (inputs.assignment.size() != inputs.net->n_users())
        throw ValidationError("train: assignment size mismatch");
    if (inputs.assignment.size() > 0 && inputs.assignment.maxCoeff() >= cfg.n_clusters)
        throw ValidationError("train: assignment references a missing cluster");

    TrainResult result;
    auto [policy, value] = make_networks(cfg, inputs.net->n_users());
    result.policy_input_dim = policy_input_width(cfg, inputs.net->n_users());

    Engine engine(cfg, inputs);
    std::vector<VecI> assignments(k_stages, inputs.assignment);

    std::vector<Mat> last_features, last_centroids, last_contributions;
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const bool recluster = cfg.dynamic_clusters() && cfg.schedule.should(epoch);
        EpochRun run = engine.run_epoch(policy, value, assignments, recluster, nullptr);
        Engine::GradientBundle grads = engine.gradients(run, policy, value);

        const Mlp before = policy;
        const bool stepped = sgd_ascent(policy, grads.policy, cfg.eta_theta, cfg.grad_clip);
        sgd_ascent(value, grads.value, cfg.eta_phi, cfg.grad_clip);

        EpochTrace trace;
        trace.j_theta = grads.j_theta;
        trace.j_phi = grads.j_phi;
        trace.mean_reward = std::accumulate(run.rewards.begin(), run.rewards.end(), 0.0) /
                            std::max<std::size_t>(run.rewards.size(), 1);
        trace.reclustered = recluster;
        trace.stepped = stepped;
        trace.delta_theta = stepped ? policy.max_abs_delta(before) : 0.0;
        result.epochs.push_back(trace);

        if (cfg.record_plans) {
            std::vector<InterventionPlan> plans;
            for (const StageRecord& rec : run.records) plans.push_back(rec.plan);
            result.plans.push_back(std::move(plans));
        }

        last_features.clear();
        last_centroids.clear();
        last_contributions.clear();
        for (const StageRecord& rec : run.records) {
            last_features.push_back(rec.features);
            last_centroids.push_back(rec.centroids);
            last_contributions.push_back(rec.contributions);
        }

        if (stepped && trace.delta_theta < cfg.delta) {
            result.converged = true;
            break;
        }
    }

    result.policy = std::move(policy);
    result.value = std::move(value);
    result.stage_assignments = std::move(assignments);
    result.stage_features = std::move(last_features);
    result.stage_centroids = std::move(last_centroids);
    result.stage_contributions = std::move(last_contributions);
    result.final_assignment = result.stage_assignments.empty()
                                  ? inputs.assignment
                                  : result.stage_assignments.back();
    return result;
}

FrozenTrajectory capture_trajectory(const TrainConfig& cfg, const TrainInputs& inputs,
                                    const Mlp& policy, const Mlp& value) {
    cfg.validate(inputs.window.n_stages);
    Engine engine(cfg, inputs);
    std::vector<VecI> assignments(inputs.window.n_stages, inputs.assignment);
    const bool recluster = cfg.dynamic_clusters() && cfg.schedule.should(1);
    EpochRun run = engine.run_epoch(policy, value, assignments, recluster, nullptr);

    FrozenTrajectory frozen;
    for (const StageRecord& rec : run.records) {
        frozen.assignments.push_back(rec.assign);
        frozen.features.push_back(rec.features);
    }
    return frozen;
}

std::pair<double, double> evaluate_objective(const TrainConfig& cfg, const TrainInputs& inputs,
                                             const Mlp& policy, const Mlp& value,
                                             const FrozenTrajectory& frozen,
                                             const std::vector<double>* fixed_rewards) {
    Engine engine(cfg, inputs);
    std::vector<VecI> scratch(inputs.window.n_stages, inputs.assignment);
    EpochRun run = engine.run_epoch(policy, value, scratch, false, &frozen);

    const std::vector<double>& rewards = fixed_rewards ? *fixed_rewards : run.rewards;
    ObjectiveTrace trace = total_objective(rewards, engine.state_flats(), value, cfg.gamma);
    return {trace.j_theta, trace.j_phi};
}

std::vector<double> stage_rewards(const TrainConfig& cfg, const TrainInputs& inputs,
                                  const Mlp& policy, const Mlp& value,
                                  const FrozenTrajectory& frozen) {
    Engine engine(cfg, inputs);
    std::vector<VecI> scratch(inputs.window.n_stages, inputs.assignment);
    return engine.run_epoch(policy, value, scratch, false, &frozen).rewards;
}

void objective_gradients(const TrainConfig& cfg, const TrainInputs& inputs, const Mlp& policy,
                         const Mlp& value, const FrozenTrajectory& frozen,
                         Mlp::Gradients& policy_grads, Mlp::Gradients& value_grads) {
    Engine engine(cfg, inputs);
    std::vector<VecI> scratch(inputs.window.n_stages, inputs.assignment);
    EpochRun run = engine.run_epoch(policy, value, scratch, false, &frozen);
    Engine::GradientBundle grads = engine.gradients(run, policy, value);
    policy_grads = std::move(grads.policy);
    value_grads = std::move(grads.value);
}

}  // namespace dcpl
