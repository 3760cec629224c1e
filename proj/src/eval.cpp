#include "dcpl/eval.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace dcpl {

using nlohmann::json;

StageRewards empirical_rewards(const EventLog& log, const Network& net,
                               const StagePartition& part) {
    const int n = net.n_users();
    StageRewards out;
    for (int k = 1; k <= part.n_stages; ++k) {
        const Mat counts = stage_counts(log, n, part.boundary(k - 1), part.boundary(k));
        const double r_tweet =
            counts.col(0).dot(net.gram() * counts.col(1)) / n;
        const double r_retweet =
            counts.col(2).dot(net.gram() * counts.col(3)) / n;
        out.tweet.push_back(r_tweet);
        out.retweet.push_back(r_retweet);
        out.total.push_back(r_tweet + r_retweet);
    }
    return out;
}

PerformanceBreakdown performance(const EventLog& log, const Network& net,
                                 const StagePartition& part) {
    const int n = net.n_users();
    const StageRewards rewards = empirical_rewards(log, net, part);

    PerformanceBreakdown out;
    for (int k = 1; k <= part.n_stages; ++k) {
        const Mat counts = stage_counts(log, n, part.boundary(k - 1), part.boundary(k));
        const Vec true_posts = counts.col(0) + counts.col(2);
        const Vec fake_posts = counts.col(1) + counts.col(3);
        const Vec exp_true = net.exposure(true_posts);
        const Vec exp_fake = net.exposure(fake_posts);

        int fake_exposed = 0, both = 0, true_exposed = 0;
        for (int i = 0; i < n; ++i) {
            const bool f = exp_fake(i) > 0.0;
            const bool t = exp_true(i) > 0.0;
            if (f) ++fake_exposed;
            if (t) ++true_exposed;
            if (f && t) ++both;
        }
        const double fraction =
            fake_exposed == 0 ? 1.0 : static_cast<double>(both) / fake_exposed;
        out.stage_reward.push_back(rewards.total[k - 1]);
        out.fraction.push_back(fraction);
        out.fake_exposed.push_back(fake_exposed);
        out.true_exposed.push_back(true_exposed);
        out.total += rewards.total[k - 1] * fraction;
    }
    return out;
}

std::vector<ImpactRow> impact_analysis(const EventLog& sed_log, const EventLog& continuation,
                                       const StagePartition& sed_part, double heldout_start,
                                       double heldout_end, const std::vector<int>& gaps,
                                       const std::vector<double>& deltas) {
    if (heldout_start < sed_part.end() - 1e-9)
        throw ValidationError("impact_analysis: held-out window overlaps the SED window");
    if (deltas.empty()) throw ValidationError("impact_analysis: need at least one delta");

    const double dt = sed_part.dt;
    std::vector<ImpactRow> rows;
    for (int g : gaps) {
        ImpactRow row;
        row.gap = g;
        for (int k = 1; k <= sed_part.n_stages; ++k) {
            const double tau = sed_part.boundary(k);
            std::set<int> selected;
            for (const Event& ev : sed_log)
                if (ev.is_post() && *ev.label == NewsLabel::True && ev.t >= sed_part.start &&
                    ev.t < tau)
                    selected.insert(ev.user);

            for (double delta : deltas) {
                const double w0 = tau + g * dt;
                const double w1 = std::min(w0 + delta * dt, heldout_end);
                for (const Event& ev : continuation) {
                    if (ev.kind != EventKind::Retweet || !ev.target) continue;
                    if (ev.t < w0 || ev.t >= w1) continue;
                    const bool hit = selected.count(*ev.target) > 0;
                    const bool true_news = *ev.label == NewsLabel::True;
                    if (hit) {
                        row.selected_any += 1.0;
                        if (true_news) row.selected_true += 1.0;
                    } else {
                        row.missed_any += 1.0;
                        if (true_news) row.missed_true += 1.0;
                    }
                }
            }
        }
        const double scale = 1.0 / static_cast<double>(deltas.size());
        row.selected_any *= scale;
        row.missed_any *= scale;
        row.selected_true *= scale;
        row.missed_true *= scale;
        rows.push_back(row);
    }
    return rows;
}

double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / v.size();
}

double standard_error(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / (v.size() - 1)) / std::sqrt(static_cast<double>(v.size()));
}

double sign_test_p(int wins, int n) {
    if (n <= 0) return 1.0;
    // P(X >= wins) under Binomial(n, 1/2)
    double p = 0.0;
    double log_half = std::log(0.5);
    for (int k = wins; k <= n; ++k) {
        double log_choose = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
        p += std::exp(log_choose + n * log_half);
    }
    return std::min(p, 1.0);
}

std::vector<AlignmentRow> cluster_alignment(const std::vector<VecI>& stage_assignments) {
    std::vector<AlignmentRow> rows;
    for (std::size_t k = 1; k < stage_assignments.size(); ++k) {
        AlignmentRow row;
        row.stage = static_cast<int>(k) + 1;
        row.ari = adjusted_rand_index(stage_assignments[k - 1], stage_assignments[k]);
        row.nmi = normalized_mutual_information(stage_assignments[k - 1], stage_assignments[k]);
        rows.push_back(row);
    }
    return rows;
}

TransitionStats cluster_transitions(const std::vector<VecI>& stage_assignments) {
    TransitionStats stats;
    if (stage_assignments.empty()) return stats;
    const int n = static_cast<int>(stage_assignments.front().size());
    for (int i = 0; i < n; ++i) {
        std::set<int> seen;
        int changes = 0;
        for (std::size_t k = 0; k < stage_assignments.size(); ++k) {
            seen.insert(stage_assignments[k](i));
            if (k > 0 && stage_assignments[k](i) != stage_assignments[k - 1](i)) ++changes;
        }
        stats.unique_clusters.push_back(static_cast<int>(seen.size()));
        stats.transition_counts.push_back(changes);
    }
    return stats;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write " + path);
    return out;
}

}  // namespace

void write_alignment_csv(const std::string& path, const std::vector<AlignmentRow>& rows) {
    auto out = open_out(path);
    out << "stage,ari,nmi\n";
    for (const auto& r : rows) out << r.stage << ',' << r.ari << ',' << r.nmi << '\n';
}

void write_scree_csv(const std::string& path, const ClusterSelection& sel) {
    auto out = open_out(path);
    out << "candidate_c,wcssd,bic,chosen\n";
    for (std::size_t i = 0; i < sel.candidates.size(); ++i)
        out << sel.candidates[i] << ',' << sel.wcssd[i] << ',' << sel.bic[i] << ','
            << (sel.candidates[i] == sel.chosen ? 1 : 0) << '\n';
}

void write_transitions_csv(const std::string& path, const TransitionStats& stats) {
    auto out = open_out(path);
    out << "user,unique_clusters,transitions\n";
    for (std::size_t i = 0; i < stats.unique_clusters.size(); ++i)
        out << i << ',' << stats.unique_clusters[i] << ',' << stats.transition_counts[i] << '\n';
}

void write_impact_csv(const std::string& path, const std::vector<ImpactRow>& rows) {
    auto out = open_out(path);
    out << "gap,selected_any,missed_any,selected_true,missed_true\n";
    for (const auto& r : rows)
        out << r.gap << ',' << r.selected_any << ',' << r.missed_any << ',' << r.selected_true
            << ',' << r.missed_true << '\n';
}

void write_stage_rewards_csv(const std::string& path, const PerformanceBreakdown& with_plan,
                             const PerformanceBreakdown& without_plan) {
    auto out = open_out(path);
    out << "stage,reward_with,fraction_with,reward_without,fraction_without\n";
    for (std::size_t k = 0; k < with_plan.stage_reward.size(); ++k)
        out << (k + 1) << ',' << with_plan.stage_reward[k] << ',' << with_plan.fraction[k] << ','
            << without_plan.stage_reward[k] << ',' << without_plan.fraction[k] << '\n';
}

void write_assignments_csv(const std::string& path, const std::vector<VecI>& stage_assignments) {
    auto out = open_out(path);
    out << "user,stage,cluster\n";
    for (std::size_t k = 0; k < stage_assignments.size(); ++k)
        for (int i = 0; i < stage_assignments[k].size(); ++i)
            out << i << ',' << (k + 1) << ',' << stage_assignments[k](i) << '\n';
}

void write_comparison_report(const std::string& path,
                             const std::vector<MethodPerformance>& methods) {
    json report;
    double best = 0.0;
    for (const auto& m : methods) best = std::max(best, mean_of(m.perf_with));

    json rows = json::array();
    for (const auto& m : methods) {
        json row;
        row["method"] = m.method;
        row["seeds"] = m.perf_with.size();
        row["performance_mean"] = mean_of(m.perf_with);
        if (m.perf_with.size() > 1) row["performance_se"] = standard_error(m.perf_with);
        if (best > 0.0) row["relative_to_best"] = 100.0 * mean_of(m.perf_with) / best;
        if (!m.perf_without.empty()) {
            row["no_intervention_mean"] = mean_of(m.perf_without);
            int wins = 0, ties = 0;
            for (std::size_t s = 0; s < m.perf_with.size() && s < m.perf_without.size(); ++s) {
                if (m.perf_with[s] > m.perf_without[s]) ++wins;
                else if (m.perf_with[s] == m.perf_without[s]) ++ties;
            }
            const int trials = static_cast<int>(m.perf_with.size()) - ties;
            row["intervention_wins"] = wins;
            row["intervention_sign_p"] = sign_test_p(wins, trials);
        }
        rows.push_back(row);
    }
    report["methods"] = rows;

    auto out = open_out(path);
    out << report.dump(2) << '\n';
}

}  // namespace dcpl
