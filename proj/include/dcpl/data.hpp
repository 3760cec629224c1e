#pragma once

#include "dcpl/common.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dcpl {

enum class EventKind { Tweet, Retweet, Like };
enum class NewsLabel { True, Fake };

// One timestamped tweet/retweet/like. Times are hours, users dense 0-based.
struct Event {
    double t = 0.0;
    int user = 0;
    EventKind kind = EventKind::Tweet;
    std::optional<NewsLabel> label;   // absent for likes
    std::optional<int> target;        // author whose post is retweeted/liked

    bool is_post() const { return kind != EventKind::Like; }
};

using EventLog = std::vector<Event>;

const char* kind_name(EventKind k);
const char* label_name(NewsLabel l);

// Throws ValidationError when the event violates its invariants.
void validate_event(const Event& ev, int n_users, const std::string& context = {});

// JSON-Lines ingestion: one object per line, fields {t, user, kind, label?, target?}.
// Events are sorted ascending by t on load; malformed lines report their line number.
EventLog load_events(const std::string& path, int n_users = 0);
void save_events(const std::string& path, const EventLog& log);

void sort_events(EventLog& log);

// Follower adjacency: G_ij = 1 iff j follows i. Immutable once constructed.
class Network {
public:
    Network() = default;
    explicit Network(Mat adjacency);

    int n_users() const { return static_cast<int>(adjacency_.rows()); }
    const Mat& adjacency() const { return adjacency_; }

    // followers of i: the js with G_ij = 1 (they see i's posts)
    const std::vector<int>& followers(int user) const { return followers_[user]; }
    // followees of j: the is with G_ij = 1 (j sees their posts)
    const std::vector<int>& followees(int user) const { return followees_[user]; }

    // per-user exposure to the posting counts n: entry i = Σ_j G_ji n_j
    Vec exposure(const Vec& counts) const;

    const Mat& gram() const { return gram_; }  // GᵀG

private:
    Mat adjacency_;
    Mat gram_;
    std::vector<std::vector<int>> followers_;
    std::vector<std::vector<int>> followees_;
};

// CSV edge list with header "src,dst"; row (i,j) sets G_ij = 1.
// declared_n = 0 infers N as max index + 1; otherwise indices ≥ declared_n are errors.
Network load_network(const std::string& path, int declared_n = 0);
void save_network(const std::string& path, const Network& net);

// Evenly spaced stage boundaries over [start, end); stage k ∈ [1, K] is
// [boundary(k-1), boundary(k)).
struct StagePartition {
    double start = 0.0;
    double dt = 1.0;
    int n_stages = 0;

    double end() const { return start + dt * n_stages; }
    double boundary(int k) const { return start + dt * k; }  // k in [0, n_stages]
};

StagePartition partition_stages(double start, double end, double dt);

// State feature columns: counts of (T-tweet, F-tweet, T-retweet, F-retweet,
// likes received) per user over one stage interval.
constexpr int kStateCols = 5;
int state_column(NewsLabel label, EventKind kind);

Mat stage_counts(const EventLog& log, int n_users, double t0, double t1);

// Stage-(k-1) counts for k in [2, K+1].
Mat compute_state(const EventLog& log, int n_users, const StagePartition& part, int k);

// States s_{U,1..K} for a training/evaluation window; the first stage draws its
// counts from the ΔT immediately before the window start (zeros when absent).
std::vector<Mat> window_states(const EventLog& log, int n_users, const StagePartition& part);

}  // namespace dcpl
