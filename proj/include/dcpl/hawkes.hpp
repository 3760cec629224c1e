#pragma once

#include "dcpl/data.hpp"
#include "dcpl/linalg.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dcpl {

enum class Activity { Tweet = 0, Retweet = 1, Like = 2 };

// The five event streams: tweets and retweets split by label, likes unlabeled.
enum class Process { FakeTweet = 0, TrueTweet = 1, FakeRetweet = 2, TrueRetweet = 3, Like = 4 };
constexpr int kNumProcesses = 5;
constexpr std::array<Process, kNumProcesses> kAllProcesses = {
    Process::FakeTweet, Process::TrueTweet, Process::FakeRetweet, Process::TrueRetweet,
    Process::Like};

Activity activity_of(Process p);
std::optional<NewsLabel> label_of(Process p);
bool is_intervened(Process p);  // only true-news tweet/retweet receive interventions
const char* process_name(Process p);

// Stream index of an event: the acting user for posts, the receiving user for
// likes (the like streams count likes received).
int stream_user(const Event& ev);
Process process_of(const Event& ev);

// Excitation kernel Φ: dense N×N, or the low-rank factorization Φ = U Vᵀ used
// for the retweet activity. Entry Φ_ji weights the influence of j's events on
// i's intensity.
class Kernel {
public:
    Kernel() = default;
    static Kernel dense(Mat phi);
    static Kernel low_rank(Mat u, Mat v);

    bool is_low_rank() const { return low_rank_; }
    int dim() const;
    int rank() const { return low_rank_ ? static_cast<int>(u_.cols()) : dim(); }

    const Mat& dense_matrix() const;
    const Mat& factor_u() const;
    const Mat& factor_v() const;

    Mat materialize() const;             // Φ
    Vec apply_transpose(const Vec& x) const;  // Φᵀ x
    double entry(int j, int i) const;    // Φ_ji
    double spectral_radius() const;
    void scale(double s);

private:
    Mat phi_;
    Mat u_, v_;
    bool low_rank_ = false;
};

// Every parameter of the five interacting streams. Kernels are per activity
// (shared across the fake/true label pair); μ and ω are per process.
struct HawkesModel {
    int n_users = 0;
    std::array<Vec, kNumProcesses> mu;
    std::array<double, kNumProcesses> omega = {1.0, 1.0, 1.0, 1.0, 1.0};
    std::array<Kernel, 3> kernels;  // indexed by Activity

    const Kernel& kernel_for(Process p) const { return kernels[static_cast<int>(activity_of(p))]; }
    Kernel& kernel_for(Process p) { return kernels[static_cast<int>(activity_of(p))]; }

    double branching_radius(Activity z) const { return kernels[static_cast<int>(z)].spectral_radius(); }
    void validate() const;  // nonnegativity, ω > 0, spectral radius < 1
};

// Per-stage intervention: nonnegative rate boosts added to the true-news tweet
// and retweet base intensities, L1-normalized to the stage budgets.
struct InterventionPlan {
    Vec tweet;
    Vec retweet;
    int stage = 0;
    double tweet_budget = 0.0;
    double retweet_budget = 0.0;

    const Vec& for_process(Process p) const;
};

// Accumulated kernel-weighted excitation h_i(τ) = Σ_j Φ_ji Σ_{t_e<τ} ω e^{−ω(τ−t_e)}.
Vec residual_excitation(const HawkesModel& model, Process p, const EventLog& log, double tau);

// λ = μ (+ plan for true-news processes) + excitation.
Vec intensity_at(const HawkesModel& model, Process p, const Vec& excitation,
                 const InterventionPlan* plan = nullptr);

struct SimulateOptions {
    std::uint64_t seed = 0;
    long max_events_per_stage = 1'000'000;
};

// Ogata thinning over the stages of `part`, interleaving per stage: tweets
// (fake then true), retweets, likes. `history` supplies all events before the
// window; `plans` (when present) must cover part.n_stages entries.
EventLog simulate(const HawkesModel& model, const Network& net, const StagePartition& part,
                  const EventLog& history, const std::vector<InterventionPlan>* plans,
                  const SimulateOptions& options);

// Closed-form first moments of one stage of length dt. With baseline b = μ + a
// and entering excitation g₀:
//   E[n]   = response·b + integral·g₀
//   g_next = decay·g₀ + integral·(ωΦᵀ b)
struct StageMoments {
    double dt = 0.0;
    double omega = 0.0;
    Mat decay;      // e^{A dt},  A = ω(Φᵀ − I)
    Mat integral;   // ∫ e^{A s} ds
    Mat response;   // dt·I + ω·(∫(dt−s)e^{As}ds)·Φᵀ  — Jacobian ∂E[n]/∂a
    Mat excite;     // ωΦᵀ

    Vec expected_counts(const Vec& baseline, const Vec& excitation) const;
    Vec next_excitation(const Vec& baseline, const Vec& excitation) const;
};

StageMoments stage_moments(const HawkesModel& model, Process p, double dt);

// --- estimation ---

struct FitConfig {
    std::vector<double> omega_grid = {1.0};
    int retweet_rank = 2;
    int max_iterations = 500;
    double mu_floor = 1e-4;          // assigned when a process has no events
    double holdout_fraction = 0.2;   // tail share used for ω selection
    double stability_limit = 0.95;
    std::uint64_t seed = 0;
};

struct FitReport {
    std::array<double, kNumProcesses> log_likelihood = {0, 0, 0, 0, 0};
    std::array<double, kNumProcesses> chosen_omega = {1, 1, 1, 1, 1};
    std::vector<std::string> warnings;
};

HawkesModel fit_hawkes(const EventLog& log, const Network& net, double t_begin, double t_end,
                       const FitConfig& cfg, FitReport* report = nullptr);

// Exact exponential-kernel log-likelihood of one stream over [t_begin, t_end);
// events before t_begin contribute history excitation only.
double hawkes_log_likelihood(const Vec& mu, const Kernel& kernel, double omega,
                             const std::vector<std::pair<double, int>>& events, int n_users,
                             double t_begin, double t_end);

}  // namespace dcpl
