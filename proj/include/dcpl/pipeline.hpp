#pragma once

#include "dcpl/eval.hpp"
#include "dcpl/trainer.hpp"

#include <string>
#include <vector>

namespace dcpl {

// Contiguous experiment windows: training data, simulated training data (STD),
// simulated evaluation data (SED), and the real held-out continuation.
struct WindowLayout {
    double train_begin = 0.0;
    double train_end = 10.0;
    double std_end = 20.0;
    double sed_end = 30.0;
    double heldout_end = 40.0;
    double dt = 1.0;
};

struct RunConfig {
    std::string events_path;
    std::string network_path;
    int n_users = 0;  // 0: infer from the network file
    WindowLayout windows;
    FitConfig fit;
    TrainConfig train_base;
    std::vector<int> candidates = {2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    std::vector<std::string> methods = {"dcpl", "km-r", "rnd"};
    std::vector<std::uint64_t> seeds = {1};
    std::vector<int> impact_gaps = {0, 2, 5, 8};
    std::vector<double> impact_deltas = {1, 2, 3, 4, 5};
    int jobs = 0;  // 0: hardware concurrency
};

// Artifacts shared by every method for one seed: the fitted/known model, the
// simulated training window, initial clusters, and the sampled budgets.
struct Experiment {
    const Network* net = nullptr;
    const HawkesModel* model = nullptr;
    EventLog training_log;  // real events before the STD window
    EventLog std_log;       // simulated training data
    EventLog context_log;   // training_log ∪ std_log, sorted
    StagePartition train_part, std_part, sed_part;
    std::vector<Mat> std_states;
    InitialClusters init;
    Mat budgets;  // 2×K, sampled once per seed
};

Experiment prepare_experiment(const RunConfig& cfg, const Network& net, const HawkesModel& model,
                              const EventLog& real_log, std::uint64_t seed);

TrainConfig method_config(const RunConfig& cfg, const Experiment& exp, Method method,
                          std::uint64_t seed);

TrainResult run_training(const RunConfig& cfg, const Experiment& exp, Method method,
                         std::uint64_t seed);

// Paired-seed SED rollouts with and without the learned interventions: per
// stage the policy reads the realized state, its plan is injected into the
// true-news intensities, and both variants share per-stage seeds.
struct SedEvaluation {
    EventLog with_plan;
    EventLog without_plan;
    PerformanceBreakdown perf_with;
    PerformanceBreakdown perf_without;
    std::vector<InterventionPlan> plans;
};

SedEvaluation evaluate_on_sed(const Experiment& exp, const TrainConfig& cfg,
                              const TrainResult& result, std::uint64_t seed);

}  // namespace dcpl
