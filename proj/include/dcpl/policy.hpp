#pragma once

#include "dcpl/clustering.hpp"
#include "dcpl/hawkes.hpp"

#include <vector>

namespace dcpl {

// Feed-forward net with tanh hidden layers; the output head is linear or
// softplus (softplus keeps actions nonnegative).
enum class OutputHead { Linear, Softplus };

struct Mlp {
    struct Layer {
        Mat weight;  // out×in
        Vec bias;
    };

    std::vector<Layer> layers;
    OutputHead head = OutputHead::Linear;

    static Mlp make(int inputs, const std::vector<int>& hidden, int outputs, OutputHead head,
                    Rng& rng);

    struct Trace {
        Vec input;
        std::vector<Vec> pre;   // pre-activation per layer
        std::vector<Vec> post;  // activation per layer (last = output)
    };

    Vec forward(const Vec& x, Trace* trace = nullptr) const;

    struct Gradients {
        std::vector<Layer> layers;
        Vec input;  // ∂objective/∂input

        void accumulate(const Gradients& other);
        void scale(double s);
        double norm() const;
        bool finite() const;
    };

    Gradients zero_gradients() const;
    // Reverse pass from ∂objective/∂output; accumulates into grads.
    void backward(const Trace& trace, const Vec& output_grad, Gradients& grads) const;

    int parameter_count() const;
    double max_abs_delta(const Mlp& other) const;
};

// Ascent step with global-norm clipping; returns false (and leaves the
// parameters untouched) when the gradient is not finite.
bool sgd_ascent(Mlp& net, const Mlp::Gradients& grads, double learning_rate,
                double clip_norm = 10.0);

// Cluster-level actions: one tweet boost per cluster, one retweet boost per
// ordered cluster pair.
struct ClusterActions {
    Vec tweet;    // C
    Mat retweet;  // C×C, (m, m') = incentive for m to retweet m'
};

ClusterActions split_policy_output(const Vec& output, int n_clusters);
Vec merge_policy_gradient(const Vec& tweet_grad, const Mat& retweet_grad);

// Cached intermediates of the cluster-to-user action map, needed by the
// reverse pass.
struct InterventionTrace {
    Vec distances;        // ‖X_i − Y_{c(i)}‖₂
    Vec raw_tweet;        // ã before budget normalization
    Vec raw_retweet;
    double sum_tweet = 0.0;
    double sum_retweet = 0.0;
    bool uniform_tweet = false;   // degenerate all-zero ã → uniform plan
    bool uniform_retweet = false;
    Mat cluster_pull;     // C'×N: T_{m',i} = Σ_{j∈m'} d_j Φ_ji
};

struct InterventionInputs {
    const ClusterActions* actions = nullptr;
    const Mat* features = nullptr;        // X (standardized), N×D
    const Mat* centroids = nullptr;       // C×D
    const VecI* assignment = nullptr;
    const Kernel* retweet_kernel = nullptr;
    double tweet_budget = 0.0;
    double retweet_budget = 0.0;
    int stage = 0;
    bool tied_retweet = false;  // reuse the tweet incentives for the retweet plan
    // per-user policies (C = N): the head outputs are the user incentives and
    // the centroid-distance weights drop out (they are identically zero there)
    bool unit_distances = false;
};

InterventionPlan user_interventions(const InterventionInputs& in, InterventionTrace* trace);

// Reverse of user_interventions: plan adjoints → cluster-action adjoints.
ClusterActions intervention_backward(const InterventionInputs& in, const InterventionTrace& trace,
                                     const Vec& tweet_plan_grad, const Vec& retweet_plan_grad);

// Everything about one stage that does not depend on the policy parameters.
struct StageEnvironment {
    Mat state;                 // s_{U,k}, N×5
    Mat response_tweet;        // ∂E[n(T,𝒯)]/∂a
    Mat response_retweet;
    Vec base_true_tweet;       // E[n(T,z)] at a = 0
    Vec base_true_retweet;
    Vec fake_tweet;            // E[n(F,𝒯)]
    Vec fake_retweet;
    Vec likes;                 // E[w]
    Vec reward_weight_tweet;   // GᵀG·E[n(F,z)] / N
    Vec reward_weight_retweet;
};

struct StageReward {
    double tweet = 0.0;
    double retweet = 0.0;
    Vec summand_tweet;    // per-user decomposition, sums to the reward
    Vec summand_retweet;
    Vec true_tweet;       // E[n(T,z)] under the plan
    Vec true_retweet;
    Mat next_state;       // expected s_{U,k'}, N×5

    double total() const { return tweet + retweet; }
    Vec next_state_flat() const;
};

StageReward expected_stage_reward(const StageEnvironment& env, const InterventionPlan& plan);

// Payoff: change of a user's expected-reward share between consecutive applied
// stages (zero when the earlier stage does not exist).
Vec payoff_features(const Vec& summand_latest, const Vec& summand_previous);

// Contribution: drop in a user's expected-reward share when their own incentive
// is zeroed with everyone else's held fixed. Nonnegative by construction.
Vec contribution_features(const StageEnvironment& env, const InterventionPlan& plan, Activity z);

// Alg-style discounted return trace: D_k, advantages, and the two objectives.
struct ObjectiveTrace {
    std::vector<double> discounted;  // D_k
    std::vector<double> advantage;   // B_k = D_k − V(s_k)
    std::vector<double> value;       // V(s_k)
    double j_theta = 0.0;
    double j_phi = 0.0;
};

ObjectiveTrace total_objective(const std::vector<double>& rewards,
                               const std::vector<Vec>& states_flat, const Mlp& value_net,
                               double gamma);

// Coefficient of r_j inside Σ_k D_k (the θ-relevant part of J_θ).
double return_weight(int stage_one_based, double gamma);

Vec flatten_rows(const Mat& m);

}  // namespace dcpl
