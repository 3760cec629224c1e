#include "dcpl/hawkes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dcpl {

Activity activity_of(Process p) {
    switch (p) {
        case Process::FakeTweet:
        case Process::TrueTweet: return Activity::Tweet;
        case Process::FakeRetweet:
        case Process::TrueRetweet: return Activity::Retweet;
        case Process::Like: return Activity::Like;
    }
    return Activity::Like;
}

std::optional<NewsLabel> label_of(Process p) {
    switch (p) {
        case Process::FakeTweet:
        case Process::FakeRetweet: return NewsLabel::Fake;
        case Process::TrueTweet:
        case Process::TrueRetweet: return NewsLabel::True;
        case Process::Like: return std::nullopt;
    }
    return std::nullopt;
}

bool is_intervened(Process p) {
    return p == Process::TrueTweet || p == Process::TrueRetweet;
}

const char* process_name(Process p) {
    switch (p) {
        case Process::FakeTweet: return "fake_tweet";
        case Process::TrueTweet: return "true_tweet";
        case Process::FakeRetweet: return "fake_retweet";
        case Process::TrueRetweet: return "true_retweet";
        case Process::Like: return "like";
    }
    return "?";
}

int stream_user(const Event& ev) {
    return ev.kind == EventKind::Like ? *ev.target : ev.user;
}

Process process_of(const Event& ev) {
    switch (ev.kind) {
        case EventKind::Tweet:
            return *ev.label == NewsLabel::True ? Process::TrueTweet : Process::FakeTweet;
        case EventKind::Retweet:
            return *ev.label == NewsLabel::True ? Process::TrueRetweet : Process::FakeRetweet;
        case EventKind::Like: return Process::Like;
    }
    return Process::Like;
}

Kernel Kernel::dense(Mat phi) {
    if (phi.rows() != phi.cols()) throw ValidationError("kernel must be square");
    if ((phi.array() < 0.0).any()) throw ValidationError("kernel entries must be nonnegative");
    Kernel k;
    k.phi_ = std::move(phi);
    k.low_rank_ = false;
    return k;
}

Kernel Kernel::low_rank(Mat u, Mat v) {
    if (u.rows() != v.rows() || u.cols() != v.cols())
        throw ValidationError("low-rank factors must share shape");
    if ((u.array() < 0.0).any() || (v.array() < 0.0).any())
        throw ValidationError("low-rank factors must be nonnegative");
    Kernel k;
    k.u_ = std::move(u);
    k.v_ = std::move(v);
    k.low_rank_ = true;
    return k;
}

int Kernel::dim() const {
    return low_rank_ ? static_cast<int>(u_.rows()) : static_cast<int>(phi_.rows());
}

const Mat& Kernel::dense_matrix() const {
    if (low_rank_) throw ValidationError("kernel is low-rank");
    return phi_;
}

const Mat& Kernel::factor_u() const {
    if (!low_rank_) throw ValidationError("kernel is dense");
    return u_;
}

const Mat& Kernel::factor_v() const {
    if (!low_rank_) throw ValidationError("kernel is dense");
    return v_;
}

Mat Kernel::materialize() const {
    return low_rank_ ? Mat(u_ * v_.transpose()) : phi_;
}

Vec Kernel::apply_transpose(const Vec& x) const {
    if (low_rank_) return v_ * (u_.transpose() * x);
    return phi_.transpose() * x;
}

double Kernel::entry(int j, int i) const {
    if (low_rank_) return u_.row(j).dot(v_.row(i));
    return phi_(j, i);
}

double Kernel::spectral_radius() const {
    if (low_rank_) {
        // ρ(UVᵀ) = ρ(VᵀU), an r×r problem
        return dcpl::spectral_radius(v_.transpose() * u_);
    }
    return dcpl::spectral_radius(phi_);
}

void Kernel::scale(double s) {
    if (s < 0.0) throw ValidationError("kernel scale must be nonnegative");
    if (low_rank_) {
        const double r = std::sqrt(s);
        u_ *= r;
        v_ *= r;
    } else {
        phi_ *= s;
    }
}

void HawkesModel::validate() const {
    if (n_users <= 0) throw ValidationError("model needs at least one user");
    for (Process p : kAllProcesses) {
        const int idx = static_cast<int>(p);
        if (mu[idx].size() != n_users)
            throw ValidationError(std::string("mu size mismatch for ") + process_name(p));
        if ((mu[idx].array() < 0.0).any())
            throw ValidationError(std::string("negative base intensity in ") + process_name(p));
        if (!(omega[idx] > 0.0))
            throw ValidationError(std::string("omega must be positive for ") + process_name(p));
    }
    for (const Kernel& k : kernels) {
        if (k.dim() != n_users) throw ValidationError("kernel dimension mismatch");
        if (k.spectral_radius() >= 1.0)
            throw ValidationError("kernel spectral radius must be below 1");
    }
}

const Vec& InterventionPlan::for_process(Process p) const {
    if (p == Process::TrueTweet) return tweet;
    if (p == Process::TrueRetweet) return retweet;
    throw ValidationError("plan only covers true-news tweet/retweet processes");
}

Vec residual_excitation(const HawkesModel& model, Process p, const EventLog& log, double tau) {
    const int idx = static_cast<int>(p);
    const double omega = model.omega[idx];
    const Kernel& kern = model.kernel_for(p);
    const int n = model.n_users;

    if (kern.is_low_rank()) {
        Vec s = Vec::Zero(kern.rank());
        double last = tau;
        bool first = true;
        for (const Event& ev : log) {
            if (process_of(ev) != p) continue;
            if (ev.t >= tau) throw ValidationError("residual_excitation: event at or after tau");
            if (!first) s *= std::exp(-omega * (ev.t - last));
            s += omega * kern.factor_u().row(stream_user(ev)).transpose();
            last = ev.t;
            first = false;
        }
        if (first) return Vec::Zero(n);
        s *= std::exp(-omega * (tau - last));
        return kern.factor_v() * s;
    }

    Vec h = Vec::Zero(n);
    double last = tau;
    bool first = true;
    for (const Event& ev : log) {
        if (process_of(ev) != p) continue;
        if (ev.t >= tau) throw ValidationError("residual_excitation: event at or after tau");
        if (!first) h *= std::exp(-omega * (ev.t - last));
        h += omega * kern.dense_matrix().row(stream_user(ev)).transpose();
        last = ev.t;
        first = false;
    }
    if (first) return h;
    h *= std::exp(-omega * (tau - last));
    return h;
}

Vec intensity_at(const HawkesModel& model, Process p, const Vec& excitation,
                 const InterventionPlan* plan) {
    const int idx = static_cast<int>(p);
    Vec lambda = model.mu[idx] + excitation;
    if (plan && is_intervened(p)) lambda += plan->for_process(p);
    return lambda;
}

Vec StageMoments::expected_counts(const Vec& baseline, const Vec& excitation) const {
    return response * baseline + integral * excitation;
}

Vec StageMoments::next_excitation(const Vec& baseline, const Vec& excitation) const {
    return decay * excitation + integral * (excite * baseline);
}

StageMoments stage_moments(const HawkesModel& model, Process p, double dt) {
    const int idx = static_cast<int>(p);
    const double omega = model.omega[idx];
    const Mat phi_t = model.kernel_for(p).materialize().transpose();
    const int n = model.n_users;

    if (model.kernel_for(p).spectral_radius() >= 1.0)
        throw ValidationError("stage_moments: unstable kernel");

    StageMoments m;
    m.dt = dt;
    m.omega = omega;
    m.excite = omega * phi_t;
    const Mat a = omega * (phi_t - Mat::Identity(n, n));
    StageOperators ops = stage_operators(a, dt);
    m.decay = std::move(ops.decay);
    m.integral = std::move(ops.integral);
    m.response = dt * Mat::Identity(n, n) + ops.weighted * m.excite;
    return m;
}

namespace {

// Running excitation of one stream during simulation. Dense kernels carry the
// per-target vector h; low-rank kernels carry the rank-space accumulator.
struct RunningExcitation {
    const Kernel* kernel = nullptr;
    double omega = 0.0;
    Vec h;          // dense path
    Vec s;          // low-rank path
    Vec row_total;  // dense: Σ_i Φ_ji per j; low-rank: column sums of V
    double sum = 0.0;

    void init(const HawkesModel& model, Process p, const EventLog& history, double tau) {
        kernel = &model.kernel_for(p);
        omega = model.omega[static_cast<int>(p)];
        if (kernel->is_low_rank()) {
            s = Vec::Zero(kernel->rank());
            double last = tau;
            bool first = true;
            for (const Event& ev : history) {
                if (process_of(ev) != p) continue;
                if (!first) s *= std::exp(-omega * (ev.t - last));
                s += omega * kernel->factor_u().row(stream_user(ev)).transpose();
                last = ev.t;
                first = false;
            }
            if (!first) s *= std::exp(-omega * (tau - last));
            row_total = kernel->factor_v().colwise().sum().transpose();
            sum = row_total.dot(s);
        } else {
            h = residual_excitation(model, p, history, tau);
            row_total = kernel->dense_matrix().rowwise().sum();
            sum = h.sum();
        }
    }

    void decay(double span) {
        if (span <= 0.0) return;
        const double f = std::exp(-omega * span);
        if (kernel->is_low_rank()) s *= f; else h *= f;
        sum *= f;
    }

    void add_event(int source) {
        if (kernel->is_low_rank()) {
            s += omega * kernel->factor_u().row(source).transpose();
            sum = row_total.dot(s);
        } else {
            h += omega * kernel->dense_matrix().row(source).transpose();
            sum += omega * row_total(source);
        }
    }

    double value(int i) const {
        if (kernel->is_low_rank()) return kernel->factor_v().row(i).dot(s);
        return h(i);
    }
};

struct RecentPosts {
    // (t, user) per label, each kept sorted by time
    std::array<std::vector<std::pair<double, int>>, 2> by_label;

    static int label_index(NewsLabel l) { return l == NewsLabel::True ? 0 : 1; }

    void add(double t, int user, NewsLabel label) {
        auto& v = by_label[label_index(label)];
        v.emplace_back(t, user);
        if (v.size() > 1 && v[v.size() - 2].first > t)
            std::inplace_merge(v.begin(), v.end() - 1, v.end(),
                               [](auto& a, auto& b) { return a.first < b.first; });
    }

    void restore_order(int label_idx) {
        auto& v = by_label[label_idx];
        std::stable_sort(v.begin(), v.end(), [](auto& a, auto& b) { return a.first < b.first; });
    }

    template <typename Fn>
    void for_window(int label_idx, double t0, double t1, Fn&& fn) const {
        const auto& v = by_label[label_idx];
        auto lo = std::lower_bound(v.begin(), v.end(), t0,
                                   [](const auto& p, double t) { return p.first < t; });
        for (auto it = lo; it != v.end() && it->first < t1; ++it) fn(it->second);
    }
};

int most_followed(const Network& net, const std::vector<int>& candidates, int exclude) {
    int best = -1;
    std::size_t best_count = 0;
    for (int u : candidates) {
        if (u == exclude) continue;
        const std::size_t c = net.followers(u).size();
        if (best < 0 || c > best_count) {
            best = u;
            best_count = c;
        }
    }
    return best;
}

}  // namespace

EventLog simulate(const HawkesModel& model, const Network& net, const StagePartition& part,
                  const EventLog& history, const std::vector<InterventionPlan>* plans,
                  const SimulateOptions& options) {
    model.validate();
    if (net.n_users() != model.n_users) throw ValidationError("simulate: network size mismatch");
    if (plans && static_cast<int>(plans->size()) != part.n_stages)
        throw ValidationError("simulate: plans must cover every stage");
    for (const Event& ev : history)
        if (ev.t >= part.start)
            throw ValidationError("simulate: history extends into the simulation window");

    const int n = model.n_users;
    // independent stream per process: paired runs that only perturb the
    // true-news intensities leave every other process's realization untouched
    std::array<Rng, kNumProcesses> rngs;
    for (Process p : kAllProcesses)
        rngs[static_cast<int>(p)] = make_rng(options.seed, static_cast<std::uint64_t>(p));
    std::uniform_real_distribution<double> uniform(0.0, 1.0);

    std::array<RunningExcitation, kNumProcesses> excitation;
    for (Process p : kAllProcesses)
        excitation[static_cast<int>(p)].init(model, p, history, part.start);

    RecentPosts posts;
    for (const Event& ev : history)
        if (ev.is_post() && ev.t >= part.start - part.dt)
            posts.add(ev.t, ev.user, *ev.label);

    std::vector<int> all_users(n);
    for (int i = 0; i < n; ++i) all_users[i] = i;

    auto attribute_retweet = [&](Rng& rng, int user, NewsLabel label, double t) -> int {
        const Kernel& kern = model.kernels[static_cast<int>(Activity::Retweet)];
        const int li = RecentPosts::label_index(label);
        std::vector<int> authors;
        std::vector<double> counts;
        posts.for_window(li, t - part.dt, t, [&](int author) {
            if (author == user) return;
            auto it = std::find(authors.begin(), authors.end(), author);
            if (it == authors.end()) {
                authors.push_back(author);
                counts.push_back(1.0);
            } else {
                counts[it - authors.begin()] += 1.0;
            }
        });
        if (!authors.empty()) {
            double total = 0.0;
            std::vector<double> weights(authors.size());
            for (std::size_t a = 0; a < authors.size(); ++a) {
                weights[a] = kern.entry(authors[a], user) * counts[a];
                total += weights[a];
            }
            const double draw = uniform(rng);
            if (total > 0.0) {
                double acc = 0.0;
                for (std::size_t a = 0; a < authors.size(); ++a) {
                    acc += weights[a] / total;
                    if (draw <= acc) return authors[a];
                }
                return authors.back();
            }
            return authors[static_cast<std::size_t>(draw * authors.size()) % authors.size()];
        }
        // nobody recently posted this label: fall back to recent posters of any
        // label by follower count, then to the most-followed user overall
        std::vector<int> any;
        for (int li2 = 0; li2 < 2; ++li2)
            posts.for_window(li2, t - part.dt, t, [&](int author) {
                if (author != user) any.push_back(author);
            });
        int pick = most_followed(net, any, user);
        if (pick >= 0) return pick;
        return most_followed(net, all_users, user);
    };

    EventLog out;
    for (int k = 0; k < part.n_stages; ++k) {
        const double t0 = part.boundary(k);
        const double t1 = part.boundary(k + 1);
        const InterventionPlan* plan = plans ? &(*plans)[k] : nullptr;
        long stage_events = 0;

        for (Process p : kAllProcesses) {
            const int idx = static_cast<int>(p);
            Rng& rng = rngs[idx];
            auto positive_uniform = [&]() { return 1.0 - uniform(rng); };  // (0, 1]
            Vec baseline = model.mu[idx];
            if (plan && is_intervened(p)) baseline += plan->for_process(p);
            const double base_sum = baseline.sum();
            RunningExcitation& exc = excitation[idx];

            const std::size_t first_emitted = out.size();
            double t = t0;
            while (true) {
                const double bound = base_sum + exc.sum;
                if (bound <= 1e-14) {
                    exc.decay(t1 - t);
                    t = t1;
                    break;
                }
                const double wait = -std::log(positive_uniform()) / bound;
                const double tc = t + wait;
                if (tc >= t1) {
                    exc.decay(t1 - t);
                    t = t1;
                    break;
                }
                exc.decay(tc - t);
                t = tc;
                const double actual = base_sum + exc.sum;
                if (uniform(rng) * bound > actual) continue;  // thinned

                // choose the emitting stream dimension
                const double pick = uniform(rng) * actual;
                int dim = n - 1;
                double acc = 0.0;
                for (int i = 0; i < n; ++i) {
                    acc += baseline(i) + exc.value(i);
                    if (pick <= acc) {
                        dim = i;
                        break;
                    }
                }

                if (++stage_events > options.max_events_per_stage)
                    throw SimulationError("event cap exceeded in stage " + std::to_string(k + 1) +
                                          " (" + process_name(p) + "): unstable model?");

                exc.add_event(dim);

                Event ev;
                ev.t = t;
                switch (activity_of(p)) {
                    case Activity::Tweet:
                        ev.user = dim;
                        ev.kind = EventKind::Tweet;
                        ev.label = *label_of(p);
                        out.push_back(ev);
                        break;
                    case Activity::Retweet: {
                        ev.user = dim;
                        ev.kind = EventKind::Retweet;
                        ev.label = *label_of(p);
                        const int target = attribute_retweet(rng, dim, *ev.label, t);
                        if (target >= 0) {
                            ev.target = target;
                            out.push_back(ev);
                        }
                        break;
                    }
                    case Activity::Like: {
                        // dim is the receiving author; the liker is one of their followers
                        const auto& fol = net.followers(dim);
                        if (!fol.empty()) {
                            ev.kind = EventKind::Like;
                            ev.target = dim;
                            ev.user = fol[static_cast<std::size_t>(uniform(rng) * fol.size()) %
                                          fol.size()];
                            out.push_back(ev);
                        }
                        break;
                    }
                }
            }
            // register fresh posts for attribution by later processes
            if (activity_of(p) != Activity::Like) {
                for (std::size_t e = first_emitted; e < out.size(); ++e)
                    posts.add(out[e].t, out[e].user, *out[e].label);
            }
        }
    }

    sort_events(out);
    return out;
}

}  // namespace dcpl
