#include "dcpl/json_io.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace dcpl {

using nlohmann::json;

namespace {

json matrix_to_json(const Mat& m) {
    json rows = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat matrix_from_json(const json& j) {
    const int rows = static_cast<int>(j.size());
    const int cols = rows > 0 ? static_cast<int>(j[0].size()) : 0;
    Mat m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols)
            throw ValidationError("ragged matrix in JSON document");
        for (int c = 0; c < cols; ++c) m(i, c) = j[i][c].get<double>();
    }
    return m;
}

json vector_to_json(const Vec& v) {
    json out = json::array();
    for (int i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vec vector_from_json(const json& j) {
    Vec v(static_cast<int>(j.size()));
    for (int i = 0; i < v.size(); ++i) v(i) = j[i].get<double>();
    return v;
}

json kernel_to_json(const Kernel& k) {
    json out;
    if (k.is_low_rank()) {
        out["rank"] = k.rank();
        out["U"] = matrix_to_json(k.factor_u());
        out["V"] = matrix_to_json(k.factor_v());
    } else {
        out["dense"] = matrix_to_json(k.dense_matrix());
    }
    return out;
}

Kernel kernel_from_json(const json& j) {
    if (j.contains("dense")) return Kernel::dense(matrix_from_json(j["dense"]));
    return Kernel::low_rank(matrix_from_json(j["U"]), matrix_from_json(j["V"]));
}

json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ValidationError(path + ": malformed JSON (" + e.what() + ")");
    }
    return j;
}

void write_json_file(const std::string& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << j.dump(2) << '\n';
}

bool kernels_match(const Kernel& a, const Kernel& b) {
    return (a.materialize() - b.materialize()).cwiseAbs().maxCoeff() <= 1e-9;
}

}  // namespace

void save_model(const std::string& path, const HawkesModel& model) {
    json processes;
    for (Process p : kAllProcesses) {
        const int i = static_cast<int>(p);
        json proc;
        proc["mu"] = vector_to_json(model.mu[i]);
        proc["omega"] = model.omega[i];
        proc["kernel"] = kernel_to_json(model.kernel_for(p));
        processes[process_name(p)] = std::move(proc);
    }
    json doc;
    doc["processes"] = std::move(processes);
    write_json_file(path, doc);
}

HawkesModel load_model(const std::string& path) {
    const json doc = load_json_file(path);
    if (!doc.contains("processes")) throw ValidationError(path + ": missing 'processes'");
    const json& processes = doc["processes"];

    HawkesModel model;
    for (Process p : kAllProcesses) {
        const char* name = process_name(p);
        if (!processes.contains(name))
            throw ValidationError(path + ": missing process '" + name + "'");
        const json& proc = processes[name];
        const int i = static_cast<int>(p);
        model.mu[i] = vector_from_json(proc.at("mu"));
        model.omega[i] = proc.at("omega").get<double>();
        Kernel k = kernel_from_json(proc.at("kernel"));
        const int z = static_cast<int>(activity_of(p));
        if (model.kernels[z].dim() == 0) {
            model.kernels[z] = std::move(k);
        } else if (!kernels_match(model.kernels[z], k)) {
            throw ValidationError(path + ": label pair kernels differ for activity of '" +
                                  name + "'");
        }
    }
    model.n_users = static_cast<int>(model.mu[0].size());
    model.validate();
    return model;
}

namespace {

json mlp_to_json(const Mlp& net) {
    json layers = json::array();
    for (const auto& layer : net.layers) {
        json l;
        l["W"] = matrix_to_json(layer.weight);
        l["b"] = vector_to_json(layer.bias);
        layers.push_back(std::move(l));
    }
    json out;
    out["layers"] = std::move(layers);
    out["head"] = net.head == OutputHead::Softplus ? "softplus" : "linear";
    return out;
}

Mlp mlp_from_json(const json& j) {
    Mlp net;
    net.head = j.at("head").get<std::string>() == "softplus" ? OutputHead::Softplus
                                                             : OutputHead::Linear;
    for (const json& l : j.at("layers")) {
        Mlp::Layer layer;
        layer.weight = matrix_from_json(l.at("W"));
        layer.bias = vector_from_json(l.at("b"));
        net.layers.push_back(std::move(layer));
    }
    return net;
}

}  // namespace

void save_checkpoint(const std::string& path, const Mlp& policy, const Mlp& value,
                     const CheckpointMeta& meta) {
    json doc;
    doc["theta"] = mlp_to_json(policy);
    doc["phi"] = mlp_to_json(value);
    doc["meta"] = {{"C", meta.n_clusters},
                   {"N", meta.n_users},
                   {"seed", meta.seed},
                   {"epoch", meta.epoch},
                   {"method", meta.method}};
    write_json_file(path, doc);
}

void load_checkpoint(const std::string& path, Mlp& policy, Mlp& value, CheckpointMeta& meta) {
    const json doc = load_json_file(path);
    policy = mlp_from_json(doc.at("theta"));
    value = mlp_from_json(doc.at("phi"));
    const json& m = doc.at("meta");
    meta.n_clusters = m.at("C").get<int>();
    meta.n_users = m.at("N").get<int>();
    meta.seed = m.at("seed").get<std::uint64_t>();
    meta.epoch = m.at("epoch").get<int>();
    meta.method = m.value("method", "");
}

void save_plans(const std::string& path, const std::vector<InterventionPlan>& plans) {
    json stages = json::array();
    for (const auto& plan : plans) {
        json p;
        p["stage"] = plan.stage;
        p["a_tweet"] = vector_to_json(plan.tweet);
        p["a_retweet"] = vector_to_json(plan.retweet);
        p["budget_tweet"] = plan.tweet_budget;
        p["budget_retweet"] = plan.retweet_budget;
        stages.push_back(std::move(p));
    }
    json doc;
    doc["stages"] = std::move(stages);
    write_json_file(path, doc);
}

std::vector<InterventionPlan> load_plans(const std::string& path) {
    const json doc = load_json_file(path);
    std::vector<InterventionPlan> plans;
    for (const json& p : doc.at("stages")) {
        InterventionPlan plan;
        plan.stage = p.at("stage").get<int>();
        plan.tweet = vector_from_json(p.at("a_tweet"));
        plan.retweet = vector_from_json(p.at("a_retweet"));
        plan.tweet_budget = p.value("budget_tweet", plan.tweet.sum());
        plan.retweet_budget = p.value("budget_retweet", plan.retweet.sum());
        plans.push_back(std::move(plan));
    }
    return plans;
}

void save_run_config(const std::string& path, const RunConfig& cfg) {
    json doc;
    doc["data"] = {{"events", cfg.events_path},
                   {"network", cfg.network_path},
                   {"n_users", cfg.n_users},
                   {"windows",
                    {{"train_begin", cfg.windows.train_begin},
                     {"train_end", cfg.windows.train_end},
                     {"std_end", cfg.windows.std_end},
                     {"sed_end", cfg.windows.sed_end},
                     {"heldout_end", cfg.windows.heldout_end},
                     {"dt", cfg.windows.dt}}}};
    doc["hawkes"] = {{"omega_grid", cfg.fit.omega_grid},
                     {"rank", cfg.fit.retweet_rank},
                     {"max_iterations", cfg.fit.max_iterations},
                     {"mu_floor", cfg.fit.mu_floor},
                     {"stability_limit", cfg.fit.stability_limit}};
    doc["clustering"] = {{"n_clusters", cfg.train_base.n_clusters},
                         {"candidates", cfg.candidates},
                         {"eps1", cfg.train_base.eps1},
                         {"eps2", cfg.train_base.eps2},
                         {"tolerance", cfg.train_base.cluster_tol}};
    doc["policy"] = {{"hidden", cfg.train_base.policy_hidden},
                     {"value_hidden", cfg.train_base.value_hidden},
                     {"grad_clip", cfg.train_base.grad_clip}};
    json spans = json::array();
    for (auto [last, period] : cfg.train_base.schedule.spans)
        spans.push_back({last, period});
    doc["trainer"] = {{"gamma", cfg.train_base.gamma},
                      {"eta_theta", cfg.train_base.eta_theta},
                      {"eta_phi", cfg.train_base.eta_phi},
                      {"delta", cfg.train_base.delta},
                      {"max_epochs", cfg.train_base.max_epochs},
                      {"recluster_never", cfg.train_base.schedule.never},
                      {"recluster_spans", spans},
                      {"methods", cfg.methods},
                      {"seeds", cfg.seeds}};
    doc["eval"] = {{"impact_gaps", cfg.impact_gaps}, {"impact_deltas", cfg.impact_deltas}};
    write_json_file(path, doc);
}

RunConfig load_run_config(const std::string& path) {
    const json doc = load_json_file(path);
    RunConfig cfg;

    // relative data paths resolve against the config file's directory
    std::string base;
    if (const auto slash = path.find_last_of('/'); slash != std::string::npos)
        base = path.substr(0, slash + 1);
    auto resolve = [&base](const std::string& p) {
        if (p.empty() || p.front() == '/' || base.empty()) return p;
        return base + p;
    };

    if (doc.contains("data")) {
        const json& d = doc["data"];
        cfg.events_path = resolve(d.value("events", cfg.events_path));
        cfg.network_path = resolve(d.value("network", cfg.network_path));
        cfg.n_users = d.value("n_users", cfg.n_users);
        if (d.contains("windows")) {
            const json& w = d["windows"];
            cfg.windows.train_begin = w.value("train_begin", cfg.windows.train_begin);
            cfg.windows.train_end = w.value("train_end", cfg.windows.train_end);
            cfg.windows.std_end = w.value("std_end", cfg.windows.std_end);
            cfg.windows.sed_end = w.value("sed_end", cfg.windows.sed_end);
            cfg.windows.heldout_end = w.value("heldout_end", cfg.windows.heldout_end);
            cfg.windows.dt = w.value("dt", cfg.windows.dt);
        }
    }
    if (doc.contains("hawkes")) {
        const json& h = doc["hawkes"];
        if (h.contains("omega_grid")) cfg.fit.omega_grid = h["omega_grid"].get<std::vector<double>>();
        cfg.fit.retweet_rank = h.value("rank", cfg.fit.retweet_rank);
        cfg.fit.max_iterations = h.value("max_iterations", cfg.fit.max_iterations);
        cfg.fit.mu_floor = h.value("mu_floor", cfg.fit.mu_floor);
        cfg.fit.stability_limit = h.value("stability_limit", cfg.fit.stability_limit);
    }
    if (doc.contains("clustering")) {
        const json& c = doc["clustering"];
        cfg.train_base.n_clusters = c.value("n_clusters", cfg.train_base.n_clusters);
        if (c.contains("candidates")) cfg.candidates = c["candidates"].get<std::vector<int>>();
        cfg.train_base.eps1 = c.value("eps1", cfg.train_base.eps1);
        cfg.train_base.eps2 = c.value("eps2", cfg.train_base.eps2);
        cfg.train_base.cluster_tol = c.value("tolerance", cfg.train_base.cluster_tol);
    }
    if (doc.contains("policy")) {
        const json& p = doc["policy"];
        if (p.contains("hidden")) cfg.train_base.policy_hidden = p["hidden"].get<std::vector<int>>();
        if (p.contains("value_hidden"))
            cfg.train_base.value_hidden = p["value_hidden"].get<std::vector<int>>();
        cfg.train_base.grad_clip = p.value("grad_clip", cfg.train_base.grad_clip);
    }
    if (doc.contains("trainer")) {
        const json& t = doc["trainer"];
        cfg.train_base.gamma = t.value("gamma", cfg.train_base.gamma);
        cfg.train_base.eta_theta = t.value("eta_theta", cfg.train_base.eta_theta);
        cfg.train_base.eta_phi = t.value("eta_phi", cfg.train_base.eta_phi);
        cfg.train_base.delta = t.value("delta", cfg.train_base.delta);
        cfg.train_base.max_epochs = t.value("max_epochs", cfg.train_base.max_epochs);
        if (t.value("recluster_never", false)) {
            cfg.train_base.schedule = ReclusterSchedule::none();
        } else if (t.contains("recluster_spans")) {
            cfg.train_base.schedule.never = false;
            cfg.train_base.schedule.spans.clear();
            for (const json& s : t["recluster_spans"])
                cfg.train_base.schedule.spans.emplace_back(s[0].get<int>(), s[1].get<int>());
        }
        if (t.contains("methods")) cfg.methods = t["methods"].get<std::vector<std::string>>();
        if (t.contains("seeds")) cfg.seeds = t["seeds"].get<std::vector<std::uint64_t>>();
    }
    if (doc.contains("eval")) {
        const json& e = doc["eval"];
        if (e.contains("impact_gaps")) cfg.impact_gaps = e["impact_gaps"].get<std::vector<int>>();
        if (e.contains("impact_deltas"))
            cfg.impact_deltas = e["impact_deltas"].get<std::vector<double>>();
    }
    return cfg;
}

void save_assignment_csv(const std::string& path, const VecI& assignment) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    out << "user,cluster\n";
    for (int i = 0; i < assignment.size(); ++i) out << i << ',' << assignment(i) << '\n';
}

VecI load_assignment_csv(const std::string& path, int n_users) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path);
    std::string line;
    std::getline(in, line);  // header
    VecI assignment = VecI::Zero(n_users);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        std::getline(ss, a, ',');
        std::getline(ss, b);
        const int user = std::stoi(a);
        if (user < 0 || user >= n_users) throw ValidationError(path + ": user out of range");
        assignment(user) = std::stoi(b);
    }
    return assignment;
}

}  // namespace dcpl
