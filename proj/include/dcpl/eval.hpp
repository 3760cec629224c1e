#pragma once

#include "dcpl/clustering.hpp"
#include "dcpl/data.hpp"

#include <string>
#include <vector>

namespace dcpl {

struct StageRewards {
    std::vector<double> tweet;
    std::vector<double> retweet;
    std::vector<double> total;  // R_k = R_𝒯 + R_ℛ
};

// Realized per-stage rewards R_{z,k} = (1/N)·n_k(T,z)ᵀGᵀG·n_k(F,z).
StageRewards empirical_rewards(const EventLog& log, const Network& net,
                               const StagePartition& part);

struct PerformanceBreakdown {
    double total = 0.0;
    std::vector<double> stage_reward;
    std::vector<double> fraction;  // |L_T ∩ L_F| / |L_F|; 1 when no fake exposure
    std::vector<int> fake_exposed;
    std::vector<int> true_exposed;
};

// 𝒫 = Σ_k R_k · (fraction of fake-exposed users also true-exposed).
PerformanceBreakdown performance(const EventLog& log, const Network& net,
                                 const StagePartition& part);

struct ImpactRow {
    int gap = 0;
    double selected_any = 0.0;  // retweets of any label landing on selected users
    double missed_any = 0.0;
    double selected_true = 0.0;  // true-news retweets only
    double missed_true = 0.0;
};

// Retweets-of-selected-users analysis: S(τ) collects users who shared true news
// in the SED log by τ; counts are over the real continuation, summed over the
// stage ends τ and averaged over the Δ horizons.
std::vector<ImpactRow> impact_analysis(const EventLog& sed_log, const EventLog& continuation,
                                       const StagePartition& sed_part, double heldout_start,
                                       double heldout_end, const std::vector<int>& gaps,
                                       const std::vector<double>& deltas);

double mean_of(const std::vector<double>& v);
double standard_error(const std::vector<double>& v);

// One-sided sign test: P(Binomial(n, 1/2) ≥ wins).
double sign_test_p(int wins, int n);

// --- report emission ---

struct AlignmentRow {
    int stage = 0;  // compared with stage-1
    double ari = 0.0;
    double nmi = 0.0;
};

std::vector<AlignmentRow> cluster_alignment(const std::vector<VecI>& stage_assignments);

struct TransitionStats {
    std::vector<int> unique_clusters;   // histogram over users: # distinct clusters
    std::vector<int> transition_counts; // histogram over users: # membership changes
};

TransitionStats cluster_transitions(const std::vector<VecI>& stage_assignments);

void write_alignment_csv(const std::string& path, const std::vector<AlignmentRow>& rows);
void write_scree_csv(const std::string& path, const ClusterSelection& sel);
void write_transitions_csv(const std::string& path, const TransitionStats& stats);
void write_impact_csv(const std::string& path, const std::vector<ImpactRow>& rows);
void write_stage_rewards_csv(const std::string& path, const PerformanceBreakdown& with_plan,
                             const PerformanceBreakdown& without_plan);
void write_assignments_csv(const std::string& path, const std::vector<VecI>& stage_assignments);

struct MethodPerformance {
    std::string method;
    std::vector<double> perf_with;     // per seed
    std::vector<double> perf_without;  // paired no-intervention runs
};

// report.json-style summary: mean ± standard error (omitted for single seeds)
// plus values rescaled so the best method reads 100.
void write_comparison_report(const std::string& path,
                             const std::vector<MethodPerformance>& methods);

}  // namespace dcpl
