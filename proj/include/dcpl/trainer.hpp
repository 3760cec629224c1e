#pragma once

#include "dcpl/policy.hpp"

#include <limits>
#include <string>
#include <utility>

namespace dcpl {

enum class Method { Dcpl, Nc1, NcN, NcTr, NcPf, Rnd, CNet, KmR, KmS };

Method parse_method(const std::string& name);
const char* method_name(Method m);

// Epochs between cluster updates, growing as training settles.
struct ReclusterSchedule {
    // (last epoch of the span, period); epochs beyond the final span reuse its period
    std::vector<std::pair<int, int>> spans;
    bool never = false;

    bool should(int epoch) const;

    static ReclusterSchedule defaults() {
        return {{{10, 1}, {30, 2}, {std::numeric_limits<int>::max(), 5}}, false};
    }
    static ReclusterSchedule none() { return {{}, true}; }
};

struct TrainConfig {
    Method method = Method::Dcpl;
    int n_clusters = 8;
    double gamma = 0.7;
    double eta_theta = 1e-3;
    double eta_phi = 1e-3;
    double delta = 1e-4;        // convergence threshold on ‖Δθ‖∞
    double eps1 = 0.5;
    double eps2 = 0.5;
    double cluster_tol = 1e-6;  // UpdateClusters centroid-movement stop
    int max_epochs = 60;
    std::vector<int> policy_hidden = {64, 64};
    std::vector<int> value_hidden = {64};
    double grad_clip = 10.0;
    ReclusterSchedule schedule = ReclusterSchedule::defaults();
    std::uint64_t seed = 1;
    Mat budgets;                // 2×K; row 0 tweet, row 1 retweet
    bool record_plans = true;

    bool tied_retweet_head() const { return method == Method::NcN; }
    bool features_in_state() const { return method == Method::NcPf; }
    bool dynamic_clusters() const { return method == Method::Dcpl; }
    bool per_user_actions() const {
        return method == Method::NcN || method == Method::NcTr || method == Method::NcPf;
    }

    void validate(int n_stages) const;
};

// Per-method configuration tweaks; cluster counts for the NC variants become N.
TrainConfig configure_baseline(Method m, TrainConfig base, int n_users);

// Initial memberships per method (static baselines compute theirs once here).
VecI baseline_assignment(Method m, int n_clusters, const InitialClusters& init,
                         const std::vector<Mat>& states, const Network& net, std::uint64_t seed);

struct TrainInputs {
    const HawkesModel* model = nullptr;
    const Network* net = nullptr;
    const EventLog* log = nullptr;  // all events up to the window end (history + window)
    StagePartition window;
    std::vector<Mat> states;        // s_{U,k} for k = 1..K
    const InitialClusters* init = nullptr;
    VecI assignment;                // starting memberships (from baseline_assignment)
};

struct EpochTrace {
    double j_theta = 0.0;
    double j_phi = 0.0;
    double mean_reward = 0.0;
    double delta_theta = 0.0;
    bool reclustered = false;
    bool stepped = false;
};

struct TrainResult {
    Mlp policy;
    Mlp value;
    std::vector<VecI> stage_assignments;  // final per-stage memberships
    std::vector<Mat> stage_features;      // standardized X_k of the last epoch
    std::vector<Mat> stage_centroids;     // Y_k of the last epoch
    std::vector<Mat> stage_contributions; // per stage N×2 contribution features q
    VecI final_assignment;
    std::vector<EpochTrace> epochs;
    std::vector<std::vector<InterventionPlan>> plans;  // per recorded epoch
    bool converged = false;

    int policy_input_dim = 0;
};

TrainResult train(const TrainConfig& cfg, const TrainInputs& inputs);

int policy_input_width(const TrainConfig& cfg, int n_users);

// --- gradient-check support ---

struct FrozenTrajectory {
    std::vector<VecI> assignments;
    std::vector<Mat> features;
};

// Per-stage cluster quantities induced by the given parameters at the base point.
FrozenTrajectory capture_trajectory(const TrainConfig& cfg, const TrainInputs& inputs,
                                    const Mlp& policy, const Mlp& value);

// (J_θ, J_φ) with the clustering trajectory held fixed. When fixed_rewards is
// given, the return trace is built from those values instead of the freshly
// computed ones — J_φ's finite-difference check perturbs φ with the {r_k}
// inputs pinned, matching how the objective treats them.
std::pair<double, double> evaluate_objective(const TrainConfig& cfg, const TrainInputs& inputs,
                                             const Mlp& policy, const Mlp& value,
                                             const FrozenTrajectory& frozen,
                                             const std::vector<double>* fixed_rewards = nullptr);

// The r_k sequence induced by the parameters on a frozen trajectory.
std::vector<double> stage_rewards(const TrainConfig& cfg, const TrainInputs& inputs,
                                  const Mlp& policy, const Mlp& value,
                                  const FrozenTrajectory& frozen);

// Analytic gradients of the frozen-trajectory objective.
void objective_gradients(const TrainConfig& cfg, const TrainInputs& inputs, const Mlp& policy,
                         const Mlp& value, const FrozenTrajectory& frozen,
                         Mlp::Gradients& policy_grads, Mlp::Gradients& value_grads);

// Seeded nets sized for the configuration (the trainer's own initialization).
std::pair<Mlp, Mlp> make_networks(const TrainConfig& cfg, int n_users);

}  // namespace dcpl
