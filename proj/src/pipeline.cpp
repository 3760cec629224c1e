#include "dcpl/pipeline.hpp"

#include <algorithm>

namespace dcpl {

Experiment prepare_experiment(const RunConfig& cfg, const Network& net, const HawkesModel& model,
                              const EventLog& real_log, std::uint64_t seed) {
    Experiment exp;
    exp.net = &net;
    exp.model = &model;
    const WindowLayout& w = cfg.windows;
    exp.train_part = partition_stages(w.train_begin, w.train_end, w.dt);
    exp.std_part = partition_stages(w.train_end, w.std_end, w.dt);
    exp.sed_part = partition_stages(w.std_end, w.sed_end, w.dt);

    for (const Event& ev : real_log)
        if (ev.t < w.train_end) exp.training_log.push_back(ev);

    SimulateOptions options;
    options.seed = mix_seed(seed, 101);
    exp.std_log = simulate(model, net, exp.std_part, exp.training_log, nullptr, options);

    exp.context_log = exp.training_log;
    exp.context_log.insert(exp.context_log.end(), exp.std_log.begin(), exp.std_log.end());
    sort_events(exp.context_log);

    exp.std_states = window_states(exp.context_log, net.n_users(), exp.std_part);

    Rng cluster_rng = make_rng(seed, 102);
    exp.init = initial_clusters(exp.training_log, net, exp.train_part,
                                cfg.train_base.n_clusters, cluster_rng);

    Rng budget_rng = make_rng(seed, 103);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    exp.budgets = Mat(2, exp.std_part.n_stages);
    for (int z = 0; z < 2; ++z)
        for (int k = 0; k < exp.std_part.n_stages; ++k)
            exp.budgets(z, k) = net.n_users() * uniform(budget_rng);
    return exp;
}

TrainConfig method_config(const RunConfig& cfg, const Experiment& exp, Method method,
                          std::uint64_t seed) {
    TrainConfig tc = configure_baseline(method, cfg.train_base, exp.net->n_users());
    tc.seed = seed;
    tc.budgets = exp.budgets;
    return tc;
}

TrainResult run_training(const RunConfig& cfg, const Experiment& exp, Method method,
                         std::uint64_t seed) {
    TrainConfig tc = method_config(cfg, exp, method, seed);
    TrainInputs inputs;
    inputs.model = exp.model;
    inputs.net = exp.net;
    inputs.log = &exp.context_log;
    inputs.window = exp.std_part;
    inputs.states = exp.std_states;
    inputs.init = &exp.init;
    inputs.assignment = baseline_assignment(method, tc.n_clusters, exp.init, exp.std_states,
                                            *exp.net, seed);
    return train(tc, inputs);
}

namespace {

EventLog rollout_sed(const Experiment& exp, const TrainConfig& cfg, const TrainResult* result,
                     std::uint64_t seed, std::vector<InterventionPlan>* plans_out) {
    const Network& net = *exp.net;
    const int n = net.n_users();
    const StagePartition& part = exp.sed_part;

    EventLog history = exp.context_log;
    EventLog generated;

    const Mat* features = nullptr;
    Mat centroids;
    const VecI* assignment = nullptr;
    if (result) {
        features = &result->stage_features.back();
        assignment = &result->final_assignment;
        centroids = group_means(*assignment, cfg.n_clusters, *features);
    }

    for (int k = 0; k < part.n_stages; ++k) {
        StagePartition stage;
        stage.start = part.boundary(k);
        stage.dt = part.dt;
        stage.n_stages = 1;

        std::vector<InterventionPlan> stage_plans;
        if (result) {
            const Mat state = stage_counts(history, n, stage.start - part.dt, stage.start);
            Vec input;
            if (cfg.features_in_state()) {
                input.resize(kStateCols * n + 4 * n);
                input << flatten_rows(state), flatten_rows(*features);
            } else {
                input = flatten_rows(group_means(*assignment, cfg.n_clusters, state));
            }
            const ClusterActions actions =
                split_policy_output(result->policy.forward(input), cfg.n_clusters);

            InterventionInputs ii;
            ii.actions = &actions;
            ii.features = features;
            ii.centroids = &centroids;
            ii.assignment = assignment;
            ii.retweet_kernel = &exp.model->kernel_for(Process::TrueRetweet);
            ii.tweet_budget = cfg.budgets(0, k % cfg.budgets.cols());
            ii.retweet_budget = cfg.budgets(1, k % cfg.budgets.cols());
            ii.stage = k + 1;
            ii.tied_retweet = cfg.tied_retweet_head();
            ii.unit_distances = cfg.per_user_actions();
            stage_plans.push_back(user_interventions(ii, nullptr));
            if (plans_out) plans_out->push_back(stage_plans.back());
        }

        SimulateOptions options;
        options.seed = mix_seed(seed, 200 + static_cast<std::uint64_t>(k));
        EventLog events = simulate(*exp.model, net, stage, history,
                                   result ? &stage_plans : nullptr, options);
        history.insert(history.end(), events.begin(), events.end());
        generated.insert(generated.end(), events.begin(), events.end());
    }
    return generated;
}

}  // namespace

SedEvaluation evaluate_on_sed(const Experiment& exp, const TrainConfig& cfg,
                              const TrainResult& result, std::uint64_t seed) {
    SedEvaluation eval;
    eval.with_plan = rollout_sed(exp, cfg, &result, seed, &eval.plans);
    eval.without_plan = rollout_sed(exp, cfg, nullptr, seed, nullptr);
    eval.perf_with = performance(eval.with_plan, *exp.net, exp.sed_part);
    eval.perf_without = performance(eval.without_plan, *exp.net, exp.sed_part);
    return eval;
}

}  // namespace dcpl
