#include "dcpl/fixture.hpp"
#include "dcpl/json_io.hpp"
#include "dcpl/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

namespace fs = std::filesystem;
using namespace dcpl;

namespace {

std::uint64_t fallback_seed() {
    if (const char* env = std::getenv("DCPL_SEED")) return std::strtoull(env, nullptr, 10);
    return 1;
}

// "2..15" or "2,5,9"
std::vector<int> parse_int_range(const std::string& text) {
    std::vector<int> out;
    const auto dots = text.find("..");
    if (dots != std::string::npos) {
        const int lo = std::stoi(text.substr(0, dots));
        const int hi = std::stoi(text.substr(dots + 2));
        for (int v = lo; v <= hi; ++v) out.push_back(v);
        return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
    return out;
}

std::vector<std::string> parse_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(item);
    return out;
}

std::vector<double> parse_double_list(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
}

struct LoadedData {
    Network net;
    EventLog events;
};

LoadedData load_data(const RunConfig& cfg) {
    LoadedData data;
    data.net = load_network(cfg.network_path, cfg.n_users);
    data.events = load_events(cfg.events_path, data.net.n_users());
    return data;
}

HawkesModel fit_or_load(const RunConfig& cfg, const LoadedData& data,
                        const std::string& model_path) {
    if (!model_path.empty()) return load_model(model_path);
    return fit_hawkes(data.events, data.net, cfg.windows.train_begin, cfg.windows.train_end,
                      cfg.fit);
}

void write_trace_csv(const std::string& path, const TrainResult& result) {
    std::ofstream out(path);
    out << "epoch,j_theta,j_phi,mean_reward,delta_theta,reclustered\n";
    for (std::size_t e = 0; e < result.epochs.size(); ++e) {
        const EpochTrace& t = result.epochs[e];
        out << (e + 1) << ',' << t.j_theta << ',' << t.j_phi << ',' << t.mean_reward << ','
            << t.delta_theta << ',' << (t.reclustered ? 1 : 0) << '\n';
    }
}

void write_budgets_csv(const std::string& path, const Mat& budgets) {
    std::ofstream out(path);
    out << "stage,tweet,retweet\n";
    for (int k = 0; k < budgets.cols(); ++k)
        out << (k + 1) << ',' << budgets(0, k) << ',' << budgets(1, k) << '\n';
}

Mat read_budgets_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::string line;
    std::getline(in, line);
    std::vector<std::array<double, 2>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string stage, tweet, retweet;
        std::getline(ss, stage, ',');
        std::getline(ss, tweet, ',');
        std::getline(ss, retweet);
        rows.push_back({std::stod(tweet), std::stod(retweet)});
    }
    Mat budgets(2, static_cast<int>(rows.size()));
    for (std::size_t k = 0; k < rows.size(); ++k) {
        budgets(0, static_cast<int>(k)) = rows[k][0];
        budgets(1, static_cast<int>(k)) = rows[k][1];
    }
    return budgets;
}

void write_matrix_csv(const std::string& path, const Mat& m) {
    std::ofstream out(path);
    for (int i = 0; i < m.rows(); ++i) {
        for (int j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
        out << '\n';
    }
}

Mat read_matrix_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        rows.push_back(parse_double_list(line));
    }
    Mat m(static_cast<int>(rows.size()), rows.empty() ? 0 : static_cast<int>(rows[0].size()));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            m(static_cast<int>(i), static_cast<int>(j)) = rows[i][j];
    return m;
}

// Everything cmd_evaluate needs to replay the SED rollouts.
void persist_run(const std::string& dir, const RunConfig& cfg, const Experiment& exp,
                 Method method, std::uint64_t seed, const TrainResult& result) {
    fs::create_directories(dir);
    fs::create_directories(dir + "/checkpoints");

    RunConfig resolved = cfg;
    resolved.methods = {method_name(method)};
    resolved.seeds = {seed};
    save_run_config(dir + "/config.json", resolved);
    save_model(dir + "/model.json", *exp.model);
    save_events(dir + "/std.jsonl", exp.std_log);
    write_budgets_csv(dir + "/budgets.csv", exp.budgets);
    write_trace_csv(dir + "/trace.csv", result);
    write_assignments_csv(dir + "/clusters.csv", result.stage_assignments);
    write_matrix_csv(dir + "/final_features.csv", result.stage_features.back());
    save_assignment_csv(dir + "/final_assignment.csv", result.final_assignment);

    CheckpointMeta meta;
    meta.n_clusters = configure_baseline(method, cfg.train_base, exp.net->n_users()).n_clusters;
    meta.n_users = exp.net->n_users();
    meta.seed = seed;
    meta.epoch = static_cast<int>(result.epochs.size());
    meta.method = method_name(method);
    save_checkpoint(dir + "/checkpoints/epoch_final.json", result.policy, result.value, meta);
}

int evaluate_run_dir(const std::string& dir) {
    RunConfig cfg = load_run_config(dir + "/config.json");
    const LoadedData data = load_data(cfg);
    const HawkesModel model = load_model(dir + "/model.json");
    const Method method = parse_method(cfg.methods.at(0));
    const std::uint64_t seed = cfg.seeds.at(0);

    Experiment exp;
    exp.net = &data.net;
    exp.model = &model;
    exp.train_part =
        partition_stages(cfg.windows.train_begin, cfg.windows.train_end, cfg.windows.dt);
    exp.std_part = partition_stages(cfg.windows.train_end, cfg.windows.std_end, cfg.windows.dt);
    exp.sed_part = partition_stages(cfg.windows.std_end, cfg.windows.sed_end, cfg.windows.dt);
    for (const Event& ev : data.events)
        if (ev.t < cfg.windows.train_end) exp.training_log.push_back(ev);
    exp.std_log = load_events(dir + "/std.jsonl", data.net.n_users());
    exp.context_log = exp.training_log;
    exp.context_log.insert(exp.context_log.end(), exp.std_log.begin(), exp.std_log.end());
    sort_events(exp.context_log);
    exp.budgets = read_budgets_csv(dir + "/budgets.csv");

    TrainConfig tc = configure_baseline(method, cfg.train_base, data.net.n_users());
    tc.seed = seed;
    tc.budgets = exp.budgets;

    TrainResult result;
    CheckpointMeta meta;
    load_checkpoint(dir + "/checkpoints/epoch_final.json", result.policy, result.value, meta);
    result.stage_features = {read_matrix_csv(dir + "/final_features.csv")};
    result.final_assignment = load_assignment_csv(dir + "/final_assignment.csv",
                                                  data.net.n_users());

    const SedEvaluation eval = evaluate_on_sed(exp, tc, result, seed);

    save_events(dir + "/sed_with.jsonl", eval.with_plan);
    save_events(dir + "/sed_without.jsonl", eval.without_plan);
    write_stage_rewards_csv(dir + "/stage_rewards.csv", eval.perf_with, eval.perf_without);

    std::vector<VecI> stage_assignments;
    {
        std::ifstream in(dir + "/clusters.csv");
        std::string line;
        std::getline(in, line);
        std::vector<std::map<int, int>> by_stage;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::stringstream ss(line);
            std::string user, stage, cluster;
            std::getline(ss, user, ',');
            std::getline(ss, stage, ',');
            std::getline(ss, cluster);
            const std::size_t k = std::stoul(stage);
            if (by_stage.size() < k) by_stage.resize(k);
            by_stage[k - 1][std::stoi(user)] = std::stoi(cluster);
        }
        for (const auto& m : by_stage) {
            VecI a(data.net.n_users());
            for (const auto& [u, c] : m) a(u) = c;
            stage_assignments.push_back(a);
        }
    }
    write_alignment_csv(dir + "/alignment.csv", cluster_alignment(stage_assignments));
    write_transitions_csv(dir + "/transitions.csv", cluster_transitions(stage_assignments));

    // impact over the real continuation past the STD window
    EventLog continuation;
    for (const Event& ev : data.events)
        if (ev.t >= cfg.windows.std_end && ev.t < cfg.windows.heldout_end)
            continuation.push_back(ev);
    const auto impact = impact_analysis(eval.with_plan, continuation, exp.sed_part,
                                        cfg.windows.sed_end, cfg.windows.heldout_end,
                                        cfg.impact_gaps, cfg.impact_deltas);
    write_impact_csv(dir + "/impact.csv", impact);

    std::vector<MethodPerformance> rows(1);
    rows[0].method = method_name(method);
    rows[0].perf_with = {eval.perf_with.total};
    rows[0].perf_without = {eval.perf_without.total};
    write_comparison_report(dir + "/report.json", rows);

    std::cout << "evaluate: method=" << method_name(method) << " seed=" << seed
              << " P_with=" << eval.perf_with.total << " P_without=" << eval.perf_without.total
              << " -> " << dir << "\n";
    return 0;
}

int run_compare(RunConfig cfg, const std::string& out_dir) {
    const LoadedData data = load_data(cfg);
    const HawkesModel model = fit_or_load(cfg, data, "");
    fs::create_directories(out_dir);
    save_model(out_dir + "/model.json", model);

    std::vector<Method> methods;
    for (const auto& name : cfg.methods) methods.push_back(parse_method(name));

    struct Cell {
        double with = 0.0;
        double without = 0.0;
    };
    std::vector<std::vector<Cell>> table(methods.size(),
                                         std::vector<Cell>(cfg.seeds.size()));

    unsigned jobs = cfg.jobs > 0 ? static_cast<unsigned>(cfg.jobs)
                                 : std::max(1u, std::thread::hardware_concurrency());
    jobs = std::min<unsigned>(jobs, cfg.seeds.size());

    std::mutex mutex;
    std::size_t next_seed = 0;
    auto worker = [&]() {
        while (true) {
            std::size_t s;
            {
                std::lock_guard<std::mutex> lock(mutex);
                if (next_seed >= cfg.seeds.size()) return;
                s = next_seed++;
            }
            const std::uint64_t seed = cfg.seeds[s];
            const Experiment exp = prepare_experiment(cfg, data.net, model, data.events, seed);
            for (std::size_t m = 0; m < methods.size(); ++m) {
                const TrainResult result = run_training(cfg, exp, methods[m], seed);
                const TrainConfig tc = method_config(cfg, exp, methods[m], seed);
                const SedEvaluation eval = evaluate_on_sed(exp, tc, result, seed);
                std::lock_guard<std::mutex> lock(mutex);
                table[m][s] = {eval.perf_with.total, eval.perf_without.total};
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    std::vector<MethodPerformance> rows;
    for (std::size_t m = 0; m < methods.size(); ++m) {
        MethodPerformance row;
        row.method = method_name(methods[m]);
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s) {
            row.perf_with.push_back(table[m][s].with);
            row.perf_without.push_back(table[m][s].without);
        }
        rows.push_back(std::move(row));
    }
    write_comparison_report(out_dir + "/report.json", rows);

    std::ofstream csv(out_dir + "/comparison.csv");
    csv << "method,seed,perf_with,perf_without\n";
    for (std::size_t m = 0; m < methods.size(); ++m)
        for (std::size_t s = 0; s < cfg.seeds.size(); ++s)
            csv << method_name(methods[m]) << ',' << cfg.seeds[s] << ',' << table[m][s].with
                << ',' << table[m][s].without << '\n';

    std::cout << "compare: " << methods.size() << " methods x " << cfg.seeds.size()
              << " seeds -> " << out_dir << "/report.json\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamic cluster-based incentive policies over Hawkes diffusion models"};
    app.require_subcommand(1);

    // fit
    auto* fit = app.add_subcommand("fit", "estimate the activity processes from an event log");
    std::string fit_events, fit_network, fit_out, fit_grid;
    int fit_rank = 2, fit_users = 0, fit_iters = 500;
    double fit_begin = 0.0, fit_end = -1.0;
    fit->add_option("--events", fit_events, "event log (JSON lines)")->required();
    fit->add_option("--network", fit_network, "follower edge list CSV")->required();
    fit->add_option("--out", fit_out, "output model path")->required();
    fit->add_option("--rank", fit_rank, "retweet kernel rank");
    fit->add_option("--omega-grid", fit_grid, "comma-separated decay candidates");
    fit->add_option("--users", fit_users, "declared user count");
    fit->add_option("--iterations", fit_iters, "gradient iterations");
    fit->add_option("--t-begin", fit_begin, "fit window start (hours)");
    fit->add_option("--t-end", fit_end, "fit window end (hours, default: last event)");

    // simulate
    auto* sim = app.add_subcommand("simulate", "generate events from a model");
    std::string sim_model, sim_network, sim_out, sim_plans;
    std::vector<double> sim_window;
    double sim_dt = 1.0;
    std::uint64_t sim_seed = fallback_seed();
    sim->add_option("--model", sim_model, "model JSON")->required();
    sim->add_option("--network", sim_network, "follower edge list CSV")->required();
    sim->add_option("--window", sim_window, "t0 t1 (hours)")->expected(2)->required();
    sim->add_option("--interventions", sim_plans, "per-stage plan JSON");
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("--dt", sim_dt, "stage length (hours)");
    sim->add_option("--out", sim_out, "output event log")->required();

    // cluster
    auto* clu = app.add_subcommand("cluster", "score cluster counts on empirical reward features");
    std::string clu_events, clu_network, clu_out, clu_candidates = "2..15";
    double clu_begin = 0.0, clu_end = 10.0, clu_dt = 1.0;
    std::uint64_t clu_seed = fallback_seed();
    clu->add_option("--events", clu_events)->required();
    clu->add_option("--network", clu_network)->required();
    clu->add_option("--candidates", clu_candidates, "range like 2..15 or list");
    clu->add_option("--t-begin", clu_begin);
    clu->add_option("--t-end", clu_end);
    clu->add_option("--dt", clu_dt);
    clu->add_option("--seed", clu_seed);
    clu->add_option("--out", clu_out, "output directory")->required();

    // train
    auto* tr = app.add_subcommand("train", "learn an intervention policy");
    std::string tr_config, tr_method = "dcpl", tr_out, tr_model;
    std::uint64_t tr_seed = fallback_seed();
    tr->add_option("--config", tr_config, "run config JSON")->required();
    tr->add_option("--method", tr_method, "dcpl, nc-1, nc-n, nc-tr, nc-pf, rnd, c-net, km-r, km-s");
    tr->add_option("--seed", tr_seed);
    tr->add_option("--model", tr_model, "skip fitting, use this model");
    tr->add_option("--out", tr_out, "run directory")->required();

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "roll out SED with and without the learned policy");
    std::string ev_run;
    ev->add_option("--run", ev_run, "run directory produced by train")->required();

    // compare
    auto* cmp = app.add_subcommand("compare", "train and evaluate several methods across seeds");
    std::string cmp_config, cmp_methods, cmp_seeds = "1..5", cmp_out;
    int cmp_jobs = 0;
    cmp->add_option("--config", cmp_config)->required();
    cmp->add_option("--methods", cmp_methods, "comma list");
    cmp->add_option("--seeds", cmp_seeds, "range like 1..10 or list");
    cmp->add_option("--jobs", cmp_jobs, "worker pool size (default: cores)");
    cmp->add_option("--out", cmp_out)->required();

    // fixture
    auto* fx = app.add_subcommand("fixture", "write the bundled 20-user synthetic instance");
    std::string fx_out = "data/fixture";
    std::uint64_t fx_seed = 4242;
    fx->add_option("--out", fx_out);
    fx->add_option("--seed", fx_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*fit) {
            Network net = load_network(fit_network, fit_users);
            EventLog events = load_events(fit_events, net.n_users());
            FitConfig cfg;
            cfg.retweet_rank = fit_rank;
            cfg.max_iterations = fit_iters;
            if (!fit_grid.empty()) cfg.omega_grid = parse_double_list(fit_grid);
            if (fit_end < 0.0) fit_end = events.empty() ? 1.0 : events.back().t + 1e-9;
            FitReport report;
            const HawkesModel model = fit_hawkes(events, net, fit_begin, fit_end, cfg, &report);
            save_model(fit_out, model);
            for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
            std::cout << "fit: " << events.size() << " events over [" << fit_begin << ", "
                      << fit_end << ") -> " << fit_out << "\n";
        } else if (*sim) {
            Network net = load_network(sim_network);
            const HawkesModel model = load_model(sim_model);
            const StagePartition part = partition_stages(sim_window[0], sim_window[1], sim_dt);
            std::vector<InterventionPlan> plans;
            if (!sim_plans.empty()) {
                plans = load_plans(sim_plans);
                if (static_cast<int>(plans.size()) != part.n_stages)
                    throw ValidationError("interventions must cover every stage of the window");
            }
            SimulateOptions options;
            options.seed = sim_seed;
            const EventLog log =
                simulate(model, net, part, {}, plans.empty() ? nullptr : &plans, options);
            save_events(sim_out, log);
            std::cout << "simulate: " << log.size() << " events over [" << sim_window[0] << ", "
                      << sim_window[1] << ") seed=" << sim_seed << " -> " << sim_out << "\n";
        } else if (*clu) {
            Network net = load_network(clu_network);
            EventLog events = load_events(clu_events, net.n_users());
            const StagePartition part = partition_stages(clu_begin, clu_end, clu_dt);
            const Mat features = standardize(initial_reward_features(events, net, part));
            Rng sel_rng = make_rng(clu_seed, 104);
            const ClusterSelection sel =
                select_num_clusters(features, parse_int_range(clu_candidates), sel_rng);
            fs::create_directories(clu_out);
            write_scree_csv(clu_out + "/scree.csv", sel);
            std::cout << "cluster: chose C=" << sel.chosen << " -> " << clu_out
                      << "/scree.csv\n";
        } else if (*tr) {
            RunConfig cfg = load_run_config(tr_config);
            const Method method = parse_method(tr_method);
            const LoadedData data = load_data(cfg);
            const HawkesModel model = fit_or_load(cfg, data, tr_model);
            const Experiment exp = prepare_experiment(cfg, data.net, model, data.events, tr_seed);
            const TrainResult result = run_training(cfg, exp, method, tr_seed);
            persist_run(tr_out, cfg, exp, method, tr_seed, result);
            std::cout << "train: method=" << method_name(method) << " seed=" << tr_seed
                      << " epochs=" << result.epochs.size()
                      << (result.converged ? " (converged)" : "") << " -> " << tr_out << "\n";
        } else if (*ev) {
            return evaluate_run_dir(ev_run);
        } else if (*cmp) {
            RunConfig cfg = load_run_config(cmp_config);
            if (!cmp_methods.empty()) cfg.methods = parse_list(cmp_methods);
            cfg.seeds.clear();
            for (int s : parse_int_range(cmp_seeds)) cfg.seeds.push_back(s);
            cfg.jobs = cmp_jobs;
            return run_compare(cfg, cmp_out);
        } else if (*fx) {
            write_fixture(fx_out, fx_seed);
            std::cout << "fixture: 20-user instance -> " << fx_out << "\n";
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
