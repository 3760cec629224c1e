// Acceptance suite: every criterion prints one pass/fail line. Run all with no
// arguments or a single one with --criterion N.

#include "dcpl/eval.hpp"
#include "dcpl/fixture.hpp"
#include "dcpl/json_io.hpp"
#include "dcpl/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

using namespace dcpl;

namespace {

struct Criterion {
    int id;
    const char* name;
    std::function<bool(std::string&)> run;
};

std::string fixture_dir() {
    // the bundled instance is regenerated in-place if missing
    const std::string dir = "/tmp/dcpl_acceptance_fixture";
    static bool made = false;
    if (!made) {
        write_fixture(dir, 4242);
        made = true;
    }
    return dir;
}

RunConfig fixture_config() {
    RunConfig cfg = load_run_config(fixture_dir() + "/config.json");
    cfg.events_path = fixture_dir() + "/events.jsonl";
    cfg.network_path = fixture_dir() + "/network.csv";
    return cfg;
}

HawkesModel poisson_model(int n, double mu) {
    HawkesModel model;
    model.n_users = n;
    for (Process p : kAllProcesses) {
        model.mu[static_cast<int>(p)] = Vec::Constant(n, mu);
        model.omega[static_cast<int>(p)] = 1.0;
    }
    model.kernels[0] = Kernel::dense(Mat::Zero(n, n));
    model.kernels[1] = Kernel::dense(Mat::Zero(n, n));
    model.kernels[2] = Kernel::dense(Mat::Zero(n, n));
    return model;
}

// --- 1: Poisson degeneration --------------------------------------------

bool criterion_poisson(std::string& detail) {
    const int n = 5;
    const double horizon = 1000.0;
    const Network net = random_network(n, 0.4, 12001);
    const HawkesModel model = poisson_model(n, 1.0);
    const StagePartition part = partition_stages(0, horizon, 1.0);

    int within = 0, total = 0;
    std::vector<double> gaps;
    for (int run = 0; run < 20; ++run) {
        SimulateOptions options;
        options.seed = 5000 + run;
        const EventLog log = simulate(model, net, part, {}, nullptr, options);
        Vec counts = Vec::Zero(n);
        std::vector<std::vector<double>> times(n);
        for (const Event& ev : log)
            if (process_of(ev) == Process::TrueTweet) {
                counts(ev.user) += 1.0;
                times[ev.user].push_back(ev.t);
            }
        for (int i = 0; i < n; ++i) {
            ++total;
            if (std::abs(counts(i) - horizon) <= 3.0 * std::sqrt(horizon)) ++within;
            double prev = 0.0;
            for (double t : times[i]) {
                if (gaps.size() < 20000) gaps.push_back(t - prev);
                prev = t;
            }
        }
    }
    const double fraction = static_cast<double>(within) / total;

    // KS against Exp(1) on pooled inter-event times
    const std::size_t ks_n = std::min<std::size_t>(gaps.size(), 10000);
    gaps.resize(ks_n);
    std::sort(gaps.begin(), gaps.end());
    double d_stat = 0.0;
    for (std::size_t i = 0; i < ks_n; ++i) {
        const double cdf = 1.0 - std::exp(-gaps[i]);
        d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i + 1) / ks_n));
        d_stat = std::max(d_stat, std::abs(cdf - static_cast<double>(i) / ks_n));
    }
    const double ks_critical = 1.628 / std::sqrt(static_cast<double>(ks_n));  // α = 0.01

    std::ostringstream os;
    os << "count coverage " << 100.0 * fraction << "%, KS D=" << d_stat << " (crit "
       << ks_critical << ", n=" << ks_n << ")";
    detail = os.str();
    return fraction >= 0.95 && d_stat < ks_critical;
}

// --- 2: expected counts vs Monte Carlo -----------------------------------

bool criterion_expected_counts(std::string& detail) {
    const int n = 10, reps = 5000;
    double worst = 0.0;
    for (int instance = 0; instance < 5; ++instance) {
        const Network net = random_network(n, 0.35, 13000 + instance);
        const HawkesModel model = random_stable_model(net, 0.55, 13100 + instance);

        // two instances carry history so the entering excitation is nonzero
        EventLog history;
        if (instance < 2) {
            const StagePartition warm = partition_stages(0, 3, 1.0);
            SimulateOptions options;
            options.seed = 13200 + instance;
            history = simulate(model, net, warm, {}, nullptr, options);
        }
        const double t0 = history.empty() ? 0.0 : 3.0;
        StagePartition stage;
        stage.start = t0;
        stage.dt = 1.0;
        stage.n_stages = 1;

        const StageMoments m = stage_moments(model, Process::TrueTweet, 1.0);
        const Vec g0 = residual_excitation(model, Process::TrueTweet, history, t0);
        const Vec expected =
            m.expected_counts(model.mu[static_cast<int>(Process::TrueTweet)], g0);

        Vec mc = Vec::Zero(n);
        for (int r = 0; r < reps; ++r) {
            SimulateOptions options;
            options.seed = mix_seed(13300 + instance, r);
            const EventLog log = simulate(model, net, stage, history, nullptr, options);
            for (const Event& ev : log)
                if (process_of(ev) == Process::TrueTweet) mc(ev.user) += 1.0;
        }
        mc /= reps;
        worst = std::max(worst, (expected - mc).norm() / mc.norm());
    }
    std::ostringstream os;
    os << "worst relative L2 error " << worst << " over 5 instances x " << reps << " reps";
    detail = os.str();
    return worst < 0.05;
}

// --- 3: estimation recovery ----------------------------------------------

bool criterion_estimation(std::string& detail) {
    const int n = 20;
    const double horizon = 2000.0;
    std::vector<double> mu_errors, phi_errors;
    for (int seed = 0; seed < 5; ++seed) {
        const Network net = random_network(n, 0.15, 14000 + seed);
        Rng rng(14100 + seed);
        std::uniform_real_distribution<double> uniform(0.6, 1.4);
        Mat phi = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j : net.followers(i)) phi(i, j) = uniform(rng);
        phi *= 0.4 / spectral_radius(phi);

        HawkesModel truth = poisson_model(n, 0.0);
        truth.mu[static_cast<int>(Process::FakeTweet)] = Vec::Constant(n, 0.5);
        truth.mu[static_cast<int>(Process::TrueTweet)] = Vec::Constant(n, 0.5);
        truth.kernels[static_cast<int>(Activity::Tweet)] = Kernel::dense(phi);

        const StagePartition part = partition_stages(0, horizon, 1.0);
        SimulateOptions options;
        options.seed = 14200 + seed;
        const EventLog log = simulate(truth, net, part, {}, nullptr, options);

        FitConfig cfg;
        cfg.max_iterations = 400;
        const HawkesModel fitted = fit_hawkes(log, net, 0, horizon, cfg);

        const Vec mu_hat = fitted.mu[static_cast<int>(Process::TrueTweet)];
        std::vector<double> rel;
        for (int i = 0; i < n; ++i) rel.push_back(std::abs(mu_hat(i) - 0.5) / 0.5);
        std::nth_element(rel.begin(), rel.begin() + n / 2, rel.end());
        mu_errors.push_back(rel[n / 2]);

        const Mat phi_hat = fitted.kernel_for(Process::TrueTweet).materialize();
        phi_errors.push_back((phi_hat - phi).norm() / phi.norm());
    }
    std::sort(mu_errors.begin(), mu_errors.end());
    std::sort(phi_errors.begin(), phi_errors.end());
    const double mu_med = mu_errors[2], phi_med = phi_errors[2];
    std::ostringstream os;
    os << "median mu error " << 100.0 * mu_med << "%, median Phi Frobenius error " << phi_med;
    detail = os.str();
    return mu_med <= 0.20 && phi_med <= 0.30;
}

// --- helpers for training-based criteria ----------------------------------

struct FixtureBench {
    Network net;
    HawkesModel model;
    EventLog events;
    RunConfig cfg;

    FixtureBench() {
        cfg = fixture_config();
        net = load_network(cfg.network_path, cfg.n_users);
        events = load_events(cfg.events_path, net.n_users());
        model = fit_hawkes(events, net, cfg.windows.train_begin, cfg.windows.train_end, cfg.fit);
    }
};

// --- 4: budget invariant ---------------------------------------------------

bool criterion_budget(std::string& detail) {
    FixtureBench bench;
    const Experiment exp = prepare_experiment(bench.cfg, bench.net, bench.model, bench.events, 7);
    const TrainResult result = run_training(bench.cfg, exp, Method::Dcpl, 7);

    double worst = 0.0;
    long plans = 0;
    for (const auto& epoch : result.plans)
        for (const auto& plan : epoch) {
            ++plans;
            worst = std::max(worst, std::abs(plan.tweet.lpNorm<1>() - plan.tweet_budget) /
                                        std::max(1.0, plan.tweet_budget));
            worst = std::max(worst, std::abs(plan.retweet.lpNorm<1>() - plan.retweet_budget) /
                                        std::max(1.0, plan.retweet_budget));
        }

    // degenerate zero-distance case → exactly uniform
    const int n = bench.net.n_users();
    ClusterActions actions;
    actions.tweet = Vec::Ones(2);
    actions.retweet = Mat::Ones(2, 2);
    Mat features = Mat::Zero(n, 4);
    Mat centroids = Mat::Zero(2, 4);
    VecI assign = VecI::Zero(n);
    InterventionInputs ii;
    ii.actions = &actions;
    ii.features = &features;
    ii.centroids = &centroids;
    ii.assignment = &assign;
    ii.retweet_kernel = &bench.model.kernel_for(Process::TrueRetweet);
    ii.tweet_budget = 5.0;
    ii.retweet_budget = 3.0;
    const InterventionPlan uniform = user_interventions(ii, nullptr);
    bool uniform_ok = true;
    for (int i = 0; i < n; ++i) {
        uniform_ok = uniform_ok && uniform.tweet(i) == 5.0 / n;
        uniform_ok = uniform_ok && uniform.retweet(i) == 3.0 / n;
    }

    std::ostringstream os;
    os << plans << " plans, worst L1 deviation " << worst << ", degenerate case "
       << (uniform_ok ? "uniform" : "NOT uniform");
    detail = os.str();
    return worst <= 1e-9 && uniform_ok;
}

// --- 5: gradient checks ------------------------------------------------------

struct GradCheckOutcome {
    double worst_rel = 0.0;
    int informative = 0;
    bool ok = true;
};

GradCheckOutcome gradient_check(int n_users, const VecI* forced_assignment) {
    const Network net = random_network(n_users, 0.5, 15000 + n_users);
    const HawkesModel model = random_stable_model(net, 0.4, 15100 + n_users);
    const StagePartition full = partition_stages(0, 7, 1.0);
    SimulateOptions options;
    options.seed = 15200;
    const EventLog log = simulate(model, net, full, {}, nullptr, options);
    const StagePartition window = partition_stages(5, 7, 1.0);  // K = 2

    TrainConfig cfg;
    cfg.n_clusters = 2;
    cfg.seed = 23;
    cfg.policy_hidden = {6};
    cfg.value_hidden = {5};
    cfg.budgets = Mat::Constant(2, 2, 3.0);
    cfg = configure_baseline(Method::Dcpl, cfg, n_users);

    Rng rng = make_rng(15300, 1);
    InitialClusters init = initial_clusters(log, net, partition_stages(0, 5, 1.0), 2, rng);

    TrainInputs inputs;
    inputs.model = &model;
    inputs.net = &net;
    inputs.log = &log;
    inputs.window = window;
    inputs.states = window_states(log, n_users, window);
    inputs.init = &init;
    inputs.assignment = forced_assignment ? *forced_assignment : init.model.assignment;

    auto [policy, value] = make_networks(cfg, n_users);
    const FrozenTrajectory frozen = capture_trajectory(cfg, inputs, policy, value);
    Mlp::Gradients pg = policy.zero_gradients();
    Mlp::Gradients vg = value.zero_gradients();
    objective_gradients(cfg, inputs, policy, value, frozen, pg, vg);

    GradCheckOutcome out;
    const double eps = 1e-5;
    auto compare = [&](double analytic, double fd) {
        if (std::abs(fd) > 1e-8) {
            const double rel = std::abs(analytic - fd) / std::max(1.0, std::abs(fd));
            out.worst_rel = std::max(out.worst_rel, rel);
            out.ok = out.ok && rel <= 1e-4;
            ++out.informative;
        } else {
            out.ok = out.ok && std::abs(analytic) < 1e-7;
        }
    };

    for (std::size_t l = 0; l < policy.layers.size(); ++l) {
        auto probe = [&](double* param, double analytic) {
            const double saved = *param;
            *param = saved + eps;
            const double fp = evaluate_objective(cfg, inputs, policy, value, frozen).first;
            *param = saved - eps;
            const double fm = evaluate_objective(cfg, inputs, policy, value, frozen).first;
            *param = saved;
            compare(analytic, (fp - fm) / (2 * eps));
        };
        for (int i = 0; i < policy.layers[l].weight.size(); ++i)
            probe(policy.layers[l].weight.data() + i, pg.layers[l].weight.data()[i]);
        for (int i = 0; i < policy.layers[l].bias.size(); ++i)
            probe(policy.layers[l].bias.data() + i, pg.layers[l].bias(i));
    }

    const std::vector<double> base_rewards = stage_rewards(cfg, inputs, policy, value, frozen);
    for (std::size_t l = 0; l < value.layers.size(); ++l) {
        auto probe = [&](double* param, double analytic) {
            const double saved = *param;
            *param = saved + eps;
            const double fp =
                evaluate_objective(cfg, inputs, policy, value, frozen, &base_rewards).second;
            *param = saved - eps;
            const double fm =
                evaluate_objective(cfg, inputs, policy, value, frozen, &base_rewards).second;
            *param = saved;
            compare(analytic, (fp - fm) / (2 * eps));
        };
        for (int i = 0; i < value.layers[l].weight.size(); ++i)
            probe(value.layers[l].weight.data() + i, vg.layers[l].weight.data()[i]);
        for (int i = 0; i < value.layers[l].bias.size(); ++i)
            probe(value.layers[l].bias.data() + i, vg.layers[l].bias(i));
    }
    return out;
}

bool criterion_gradients(std::string& detail) {
    // the minimal 3-user instance (any 2-partition of 3 users leaves the policy
    // head scale-invariant, so θ gradients legitimately vanish there), plus a
    // balanced 4-user instance where the θ chain is fully exercised
    const GradCheckOutcome spec_instance = gradient_check(3, nullptr);
    VecI balanced(4);
    balanced << 0, 0, 1, 1;
    const GradCheckOutcome informative = gradient_check(4, &balanced);

    std::ostringstream os;
    os << "3-user worst rel " << spec_instance.worst_rel << " (" << spec_instance.informative
       << " informative), 4-user worst rel " << informative.worst_rel << " ("
       << informative.informative << " informative)";
    detail = os.str();
    return spec_instance.ok && informative.ok && informative.informative > 10;
}

// --- 6: reductions ----------------------------------------------------------

bool criterion_reductions(std::string& detail) {
    FixtureBench bench;
    const Experiment exp = prepare_experiment(bench.cfg, bench.net, bench.model, bench.events, 9);

    RunConfig one_cluster = bench.cfg;
    one_cluster.train_base.n_clusters = 1;
    const TrainResult nc1 = run_training(bench.cfg, exp, Method::Nc1, 9);
    const TrainResult dcpl_c1 = run_training(one_cluster, exp, Method::Dcpl, 9);

    bool nc1_ok = nc1.policy.max_abs_delta(dcpl_c1.policy) == 0.0 &&
                  nc1.value.max_abs_delta(dcpl_c1.value) == 0.0;
    for (std::size_t e = 0; e < nc1.plans.size() && nc1_ok; ++e)
        for (std::size_t k = 0; k < nc1.plans[e].size(); ++k)
            nc1_ok = nc1_ok &&
                     (nc1.plans[e][k].tweet - dcpl_c1.plans[e][k].tweet).cwiseAbs().maxCoeff() ==
                         0.0;

    RunConfig never = bench.cfg;
    never.train_base.schedule = ReclusterSchedule::none();
    const TrainResult dcpl_never = run_training(never, exp, Method::Dcpl, 9);
    const TrainResult kmr = run_training(bench.cfg, exp, Method::KmR, 9);
    bool kmr_ok = dcpl_never.policy.max_abs_delta(kmr.policy) == 0.0 &&
                  dcpl_never.value.max_abs_delta(kmr.value) == 0.0;
    for (std::size_t k = 0; k < kmr.stage_assignments.size() && kmr_ok; ++k)
        kmr_ok = kmr_ok && (dcpl_never.stage_assignments[k] - kmr.stage_assignments[k])
                                   .cwiseAbs()
                                   .maxCoeff() == 0;

    // ε₂ = 1 idempotence
    Rng rng(16000);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat x(12, 3);
    for (int i = 0; i < 36; ++i) x(i / 3, i % 3) = gauss(rng);
    Rng krng(16001);
    const ClusterModel base = kmeans_pp(x, 3, krng);
    const ClusterModel once = update_clusters(base.centroids, base.assignment, x, 1e-10, 0.0, 1.0);
    const ClusterModel twice =
        update_clusters(once.centroids, once.assignment, x, 1e-10, 0.0, 1.0);
    const bool idem = (once.assignment - twice.assignment).cwiseAbs().maxCoeff() == 0 &&
                      (once.centroids - twice.centroids).norm() == 0.0;

    std::ostringstream os;
    os << "nc-1 == dcpl(C=1): " << (nc1_ok ? "bit-exact" : "DIFFER")
       << "; dcpl(never) == km-r: " << (kmr_ok ? "bit-exact" : "DIFFER")
       << "; eps2=1 idempotent: " << (idem ? "yes" : "no");
    detail = os.str();
    return nc1_ok && kmr_ok && idem;
}

// --- 7: contribution nonnegativity -------------------------------------------

bool criterion_contributions(std::string& detail) {
    FixtureBench bench;
    const Experiment exp = prepare_experiment(bench.cfg, bench.net, bench.model, bench.events, 11);
    const TrainResult result = run_training(bench.cfg, exp, Method::Dcpl, 11);
    double worst = 0.0;
    for (const Mat& q : result.stage_contributions) worst = std::min(worst, q.minCoeff());
    std::ostringstream os;
    os << "min contribution feature " << worst << " across " << result.stage_contributions.size()
       << " stages";
    detail = os.str();
    return worst >= -1e-12;
}

// --- 8: directional method ordering ------------------------------------------

bool criterion_ordering(std::string& detail) {
    const int n = 200, seeds = 10;
    const Network net = two_block_network(n, 17000);
    const HawkesModel model = two_block_model(net, 17001);

    RunConfig cfg;
    cfg.windows = {0.0, 10.0, 20.0, 30.0, 40.0, 1.0};
    cfg.train_base.n_clusters = 8;
    cfg.train_base.max_epochs = 30;
    cfg.train_base.eta_theta = 2e-2;
    cfg.train_base.eta_phi = 5e-3;

    const StagePartition warm = partition_stages(0, 10, 1.0);
    const std::vector<Method> methods = {Method::Dcpl, Method::KmR, Method::NcTr, Method::Rnd};
    std::vector<std::vector<double>> perf(methods.size(), std::vector<double>(seeds));

    for (int s = 0; s < seeds; ++s) {
        SimulateOptions options;
        options.seed = mix_seed(17100, s);
        const EventLog real_log = simulate(model, net, warm, {}, nullptr, options);
        const Experiment exp = prepare_experiment(cfg, net, model, real_log, 17200 + s);
        for (std::size_t m = 0; m < methods.size(); ++m) {
            const TrainResult result = run_training(cfg, exp, methods[m], 17200 + s);
            const TrainConfig tc = method_config(cfg, exp, methods[m], 17200 + s);
            const SedEvaluation eval = evaluate_on_sed(exp, tc, result, 17200 + s);
            perf[m][s] = eval.perf_with.total;
        }
    }

    auto ordering = [&](int a, int b, const char* label, std::ostringstream& os) {
        int wins = 0, ties = 0;
        for (int s = 0; s < seeds; ++s) {
            if (perf[a][s] > perf[b][s]) ++wins;
            else if (perf[a][s] == perf[b][s]) ++ties;
        }
        const double p = sign_test_p(wins, seeds - ties);
        const bool mean_ok = mean_of(perf[a]) > mean_of(perf[b]);
        os << label << " wins " << wins << "/" << seeds << " p=" << p << "; ";
        return mean_ok && p < 0.05;
    };

    std::ostringstream os;
    os << "mean P: dcpl=" << mean_of(perf[0]) << " km-r=" << mean_of(perf[1])
       << " nc-tr=" << mean_of(perf[2]) << " rnd=" << mean_of(perf[3]) << "; ";
    const bool a = ordering(0, 1, "dcpl>km-r", os);
    const bool b = ordering(0, 2, "dcpl>nc-tr", os);
    const bool c = ordering(1, 3, "km-r>rnd", os);
    detail = os.str();
    return a && b && c;
}

// --- 9: intervention efficacy -------------------------------------------------

bool criterion_efficacy(std::string& detail) {
    FixtureBench bench;
    int wins = 0, ties = 0;
    const int seeds = 10;
    for (int s = 0; s < seeds; ++s) {
        const Experiment exp =
            prepare_experiment(bench.cfg, bench.net, bench.model, bench.events, 18000 + s);
        const TrainResult result = run_training(bench.cfg, exp, Method::Dcpl, 18000 + s);
        const TrainConfig tc = method_config(bench.cfg, exp, Method::Dcpl, 18000 + s);
        const SedEvaluation eval = evaluate_on_sed(exp, tc, result, 18000 + s);
        if (eval.perf_with.total > eval.perf_without.total) ++wins;
        else if (eval.perf_with.total == eval.perf_without.total) ++ties;
    }
    std::ostringstream os;
    os << "intervention raised P in " << wins << "/" << seeds
       << " paired seeds (sign p=" << sign_test_p(wins, seeds - ties) << ")";
    detail = os.str();
    return wins >= 8;
}

// --- 10: cluster alignment -----------------------------------------------------

double mean_alignment(double eps2, std::uint64_t seed) {
    RunConfig cfg = fixture_config();
    cfg.train_base.eps1 = 1.0 - eps2;
    cfg.train_base.eps2 = eps2;
    const Network net = load_network(cfg.network_path, cfg.n_users);
    const EventLog events = load_events(cfg.events_path, net.n_users());
    const HawkesModel model =
        fit_hawkes(events, net, cfg.windows.train_begin, cfg.windows.train_end, cfg.fit);
    const Experiment exp = prepare_experiment(cfg, net, model, events, seed);
    const TrainResult result = run_training(cfg, exp, Method::Dcpl, seed);
    const auto rows = cluster_alignment(result.stage_assignments);
    double sum = 0.0;
    for (const auto& r : rows) sum += r.ari;
    return rows.empty() ? 1.0 : sum / rows.size();
}

bool criterion_alignment(std::string& detail) {
    const double ari_default = mean_alignment(0.5, 19001);
    const double ari_anchored = mean_alignment(0.9, 19001);
    std::ostringstream os;
    os << "mean consecutive ARI: eps2=0.5 -> " << ari_default << ", eps2=0.9 -> "
       << ari_anchored;
    detail = os.str();
    return ari_default >= 0.6 && ari_anchored >= 0.9;
}

// --- 11: cluster-count selection -------------------------------------------------

bool criterion_selection(std::string& detail) {
    int hits = 0;
    for (int s = 0; s < 10; ++s) {
        Rng data_rng(20000 + s);
        std::normal_distribution<double> gauss(0.0, 0.5);
        Mat x(45, 2);
        const double centers[3][2] = {{0, 0}, {10, 0}, {5, 9}};
        for (int i = 0; i < 45; ++i) {
            x(i, 0) = centers[i / 15][0] + gauss(data_rng);
            x(i, 1) = centers[i / 15][1] + gauss(data_rng);
        }
        Rng rng(20100 + s);
        if (select_num_clusters(x, {1, 2, 3, 4, 5, 6}, rng).chosen == 3) ++hits;
    }

    const RunConfig cfg = fixture_config();
    const Network net = load_network(cfg.network_path, cfg.n_users);
    const EventLog events = load_events(cfg.events_path, net.n_users());
    const StagePartition train_part =
        partition_stages(cfg.windows.train_begin, cfg.windows.train_end, cfg.windows.dt);
    const Mat features = standardize(initial_reward_features(events, net, train_part));
    Rng rng(20200);
    std::vector<int> candidates;
    for (int c = 1; c <= 15; ++c) candidates.push_back(c);
    const ClusterSelection sel = select_num_clusters(features, candidates, rng);

    std::ostringstream os;
    os << "3-blob elbow hit " << hits << "/10; pipeline features chose C=" << sel.chosen;
    detail = os.str();
    return hits >= 9 && sel.chosen >= 4 && sel.chosen <= 12;
}

// --- 12: ARI/NMI exact oracles ----------------------------------------------------

bool criterion_metric_oracles(std::string& detail) {
    double worst = 0.0;
    long pairs = 0;
    for (int n = 2; n <= 8; ++n) {
        long total = 1;
        for (int i = 0; i < n; ++i) total *= 3;
        auto decode = [&](long code) {
            VecI v(n);
            for (int i = 0; i < n; ++i) {
                v(i) = static_cast<int>(code % 3);
                code /= 3;
            }
            return v;
        };
        std::vector<VecI> labelings;
        labelings.reserve(total);
        for (long c = 0; c < total; ++c) labelings.push_back(decode(c));

        for (long a = 0; a < total; ++a) {
            const VecI& va = labelings[a];
            for (long b = a; b < total; ++b) {
                const VecI& vb = labelings[b];
                ++pairs;
                // pair-counting oracle
                double n11 = 0, n00 = 0, n10 = 0, n01 = 0;
                for (int i = 0; i < n; ++i)
                    for (int j = i + 1; j < n; ++j) {
                        const bool sa = va(i) == va(j), sb = vb(i) == vb(j);
                        if (sa && sb) ++n11;
                        else if (!sa && !sb) ++n00;
                        else if (sa) ++n10;
                        else ++n01;
                    }
                const double denom = (n11 + n10) * (n10 + n00) + (n11 + n01) * (n01 + n00);
                const double oracle_ari =
                    denom == 0.0 ? 1.0 : 2.0 * (n11 * n00 - n10 * n01) / denom;
                worst = std::max(worst, std::abs(adjusted_rand_index(va, vb) - oracle_ari));

                // entropy oracle
                double joint[3][3] = {};
                double pa[3] = {}, pb[3] = {};
                for (int i = 0; i < n; ++i) {
                    joint[va(i)][vb(i)] += 1.0 / n;
                    pa[va(i)] += 1.0 / n;
                    pb[vb(i)] += 1.0 / n;
                }
                double ha = 0, hb = 0, mi = 0;
                for (int i = 0; i < 3; ++i) {
                    if (pa[i] > 0) ha -= pa[i] * std::log(pa[i]);
                    if (pb[i] > 0) hb -= pb[i] * std::log(pb[i]);
                }
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        if (joint[i][j] > 0)
                            mi += joint[i][j] * std::log(joint[i][j] / (pa[i] * pb[j]));
                const double oracle_nmi = (ha + hb) < 1e-12 ? 1.0 : mi / (0.5 * (ha + hb));
                worst = std::max(
                    worst, std::abs(normalized_mutual_information(va, vb) - oracle_nmi));
                if (worst > 1e-10) {
                    std::ostringstream os;
                    os << "mismatch at n=" << n << " pair " << a << "," << b;
                    detail = os.str();
                    return false;
                }
            }
        }
    }
    std::ostringstream os;
    os << pairs << " label pairs checked, worst deviation " << worst;
    detail = os.str();
    return worst <= 1e-10;
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i)
        if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) only = std::atoi(argv[i + 1]);

    const std::vector<Criterion> criteria = {
        {1, "Poisson degeneration", criterion_poisson},
        {2, "expected counts vs Monte Carlo", criterion_expected_counts},
        {3, "estimation recovery", criterion_estimation},
        {4, "budget invariant", criterion_budget},
        {5, "gradient checks", criterion_gradients},
        {6, "reductions", criterion_reductions},
        {7, "contribution nonnegativity", criterion_contributions},
        {8, "method ordering", criterion_ordering},
        {9, "intervention efficacy", criterion_efficacy},
        {10, "cluster alignment", criterion_alignment},
        {11, "cluster-count selection", criterion_selection},
        {12, "ARI/NMI oracles", criterion_metric_oracles},
    };

    bool all_ok = true;
    for (const Criterion& c : criteria) {
        if (only != 0 && c.id != only) continue;
        const auto start = std::chrono::steady_clock::now();
        std::string detail;
        bool ok = false;
        try {
            ok = c.run(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (ok ? "[PASS]" : "[FAIL]") << " criterion " << c.id << " — " << c.name
                  << ": " << detail << " (" << secs << " s)\n";
        all_ok = all_ok && ok;
    }
    return all_ok ? 0 : 1;
}
