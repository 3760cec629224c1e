#include "dcpl/hawkes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace dcpl {

namespace {

using Stream = std::vector<std::pair<double, int>>;  // (t, stream user), sorted

Stream extract_stream(const EventLog& log, Process p, double t_end) {
    Stream s;
    for (const Event& ev : log) {
        if (ev.t >= t_end) break;
        if (process_of(ev) == p) s.emplace_back(ev.t, stream_user(ev));
    }
    return s;
}

long count_in_window(const Stream& s, double a, double b) {
    return std::count_if(s.begin(), s.end(),
                         [&](const auto& e) { return e.first >= a && e.first < b; });
}

// D_j = Σ_{events of j before b} e^{−ω(max(a,t)−t)} − e^{−ω(b−t)}: the mass the
// exponential kernel of one past event places inside the window [a, b).
Vec compensator_weights(const Stream& s, int n, double omega, double a, double b) {
    Vec d = Vec::Zero(n);
    for (const auto& [t, u] : s) {
        if (t >= b) break;  // events past the window contribute nothing inside it
        const double head = t >= a ? 1.0 : std::exp(-omega * (a - t));
        d(u) += head - std::exp(-omega * (b - t));
    }
    return d;
}

// Lazily decayed per-source counters S_j(t) = Σ_{t_e<t, j} ω e^{−ω(t−t_e)}.
struct DecayedCounters {
    Vec value;
    Vec last;
    double omega;

    DecayedCounters(int n, double omega_) : value(Vec::Zero(n)), last(Vec::Zero(n)), omega(omega_) {}

    double at(int j, double t) const { return value(j) * std::exp(-omega * (t - last(j))); }

    void bump(int j, double t) {
        value(j) = at(j, t) + omega;
        last(j) = t;
    }
};

constexpr double kIntensityFloor = 1e-12;

// Log-likelihood (and optional gradient) of streams sharing a masked dense
// kernel. Parameter layout: [mu per stream (N each) | phi over mask entries].
struct MaskedObjective {
    int n;
    std::vector<const Stream*> streams;
    std::vector<double> omegas;
    double a, b;
    std::vector<std::pair<int, int>> mask;             // (source j, target u)
    std::vector<std::vector<std::pair<int, int>>> in;  // per target: (source, mask index)
    std::vector<Vec> comp;                             // per stream compensator weights

    MaskedObjective(int n_users, std::vector<const Stream*> st, std::vector<double> om,
                    double t0, double t1, std::vector<std::pair<int, int>> mask_entries)
        : n(n_users), streams(std::move(st)), omegas(std::move(om)), a(t0), b(t1),
          mask(std::move(mask_entries)), in(n_users) {
        for (std::size_t e = 0; e < mask.size(); ++e)
            in[mask[e].second].emplace_back(mask[e].first, static_cast<int>(e));
        for (std::size_t s = 0; s < streams.size(); ++s)
            comp.push_back(compensator_weights(*streams[s], n, omegas[s], a, b));
    }

    int dim() const { return n * static_cast<int>(streams.size()) + static_cast<int>(mask.size()); }

    double operator()(const Vec& x, Vec* grad) const {
        const int ns = static_cast<int>(streams.size());
        const int m = static_cast<int>(mask.size());
        if (grad) grad->setZero(dim());
        double ll = 0.0;
        for (int s = 0; s < ns; ++s) {
            const auto mu = x.segment(s * n, n);
            const auto phi = x.segment(ns * n, m);
            ll -= mu.sum() * (b - a);
            for (int e = 0; e < m; ++e) ll -= phi(e) * comp[s](mask[e].first);
            if (grad) {
                grad->segment(s * n, n).array() -= (b - a);
                for (int e = 0; e < m; ++e) (*grad)(ns * n + e) -= comp[s](mask[e].first);
            }

            DecayedCounters counters(n, omegas[s]);
            for (const auto& [t, u] : *streams[s]) {
                if (t >= b) break;
                if (t >= a) {
                    double lambda = mu(u);
                    for (const auto& [j, e] : in[u]) lambda += phi(e) * counters.at(j, t);
                    const double lc = std::max(lambda, kIntensityFloor);
                    ll += std::log(lc);
                    if (grad) {
                        const double inv = 1.0 / lc;
                        (*grad)(s * n + u) += inv;
                        for (const auto& [j, e] : in[u])
                            (*grad)(ns * n + e) += counters.at(j, t) * inv;
                    }
                }
                counters.bump(u, t);
            }
        }
        return ll;
    }
};

// Shared low-rank kernel Φ = UVᵀ across streams. Layout:
// [mu per stream | U row-major | V row-major].
struct LowRankObjective {
    int n, rank;
    std::vector<const Stream*> streams;
    std::vector<double> omegas;
    double a, b;
    std::vector<Vec> comp;

    LowRankObjective(int n_users, int r, std::vector<const Stream*> st, std::vector<double> om,
                     double t0, double t1)
        : n(n_users), rank(r), streams(std::move(st)), omegas(std::move(om)), a(t0), b(t1) {
        for (std::size_t s = 0; s < streams.size(); ++s)
            comp.push_back(compensator_weights(*streams[s], n, omegas[s], a, b));
    }

    int dim() const { return n * static_cast<int>(streams.size()) + 2 * n * rank; }

    double operator()(const Vec& x, Vec* grad) const {
        const int ns = static_cast<int>(streams.size());
        Eigen::Map<const Mat> u(x.data() + ns * n, n, rank);
        Eigen::Map<const Mat> v(x.data() + ns * n + n * rank, n, rank);
        const Vec v_colsum = v.colwise().sum().transpose();

        if (grad) grad->setZero(dim());
        Mat gu = Mat::Zero(n, rank), gv = Mat::Zero(n, rank);
        double ll = 0.0;

        for (int s = 0; s < ns; ++s) {
            const auto mu = x.segment(s * n, n);
            ll -= mu.sum() * (b - a);
            ll -= (u * v_colsum).dot(comp[s]);  // Σ_{j,i} Φ_ji D_j
            if (grad) {
                grad->segment(s * n, n).array() -= (b - a);
                gu -= comp[s] * v_colsum.transpose();
                gv -= Vec::Ones(n) * (u.transpose() * comp[s]).transpose();
            }

            DecayedCounters counters(n, omegas[s]);
            Vec sigma = Vec::Zero(rank);  // Uᵀ S(t), decayed alongside
            double sigma_last = a;
            for (const auto& [t, w] : *streams[s]) {
                if (t >= b) break;
                sigma *= std::exp(-omegas[s] * (t - sigma_last));
                sigma_last = t;
                if (t >= a) {
                    const double lambda = mu(w) + v.row(w).dot(sigma);
                    const double lc = std::max(lambda, kIntensityFloor);
                    ll += std::log(lc);
                    if (grad) {
                        const double inv = 1.0 / lc;
                        (*grad)(s * n + w) += inv;
                        gv.row(w) += inv * sigma.transpose();
                        for (int j = 0; j < n; ++j) {
                            const double sj = counters.at(j, t);
                            if (sj > 1e-14) gu.row(j) += (inv * sj) * v.row(w);
                        }
                    }
                }
                counters.bump(w, t);
                sigma += omegas[s] * u.row(w).transpose();
            }
        }
        if (grad) {
            Eigen::Map<Mat>(grad->data() + ns * n, n, rank) += gu;
            Eigen::Map<Mat>(grad->data() + ns * n + n * rank, n, rank) += gv;
        }
        return ll;
    }
};

// Projected gradient ascent with backtracking onto the nonnegative orthant.
// `rebalance` may rewrite x between iterations as long as the objective value
// is unchanged (used to fix the scale gauge of factorized kernels).
double ascend(const std::function<double(const Vec&, Vec*)>& objective, Vec& x, int iterations,
              const std::function<void(Vec&)>& rebalance = nullptr) {
    double f = objective(x, nullptr);
    double step = 1e-2;
    Vec grad(x.size());
    int stalled = 0;
    for (int it = 0; it < iterations; ++it) {
        objective(x, &grad);
        bool accepted = false;
        for (int bt = 0; bt < 40; ++bt) {
            Vec trial = (x + step * grad).cwiseMax(0.0);
            const double ft = objective(trial, nullptr);
            if (std::isfinite(ft) && ft >= f + 1e-4 * grad.dot(trial - x)) {
                const double improvement = ft - f;
                x = std::move(trial);
                f = ft;
                step *= 1.6;
                accepted = true;
                stalled = improvement < 1e-12 * (1.0 + std::abs(f)) ? stalled + 1 : 0;
                break;
            }
            step *= 0.5;
            if (step < 1e-14) return f;
        }
        if (!accepted || stalled >= 5) return f;
        if (rebalance) rebalance(x);
    }
    return f;
}

std::vector<std::pair<int, int>> follower_mask(const Network& net) {
    std::vector<std::pair<int, int>> mask;
    const Mat& g = net.adjacency();
    for (int j = 0; j < g.rows(); ++j)
        for (int u = 0; u < g.cols(); ++u)
            if (g(j, u) == 1.0) mask.emplace_back(j, u);  // j's posts reach follower u
    return mask;
}

Vec initial_mu(const Stream& s, int n, double a, double b) {
    Vec counts = Vec::Zero(n);
    for (const auto& [t, u] : s)
        if (t >= a && t < b) counts(u) += 1.0;
    return (0.7 / std::max(b - a, 1e-9)) * counts + Vec::Constant(n, 1e-3);
}

}  // namespace

double hawkes_log_likelihood(const Vec& mu, const Kernel& kernel, double omega,
                             const std::vector<std::pair<double, int>>& events, int n_users,
                             double t_begin, double t_end) {
    if (kernel.is_low_rank()) {
        LowRankObjective obj(n_users, kernel.rank(), {&events}, {omega}, t_begin, t_end);
        Vec x(obj.dim());
        x.segment(0, n_users) = mu;
        Eigen::Map<Mat>(x.data() + n_users, n_users, kernel.rank()) = kernel.factor_u();
        Eigen::Map<Mat>(x.data() + n_users + n_users * kernel.rank(), n_users, kernel.rank()) =
            kernel.factor_v();
        return obj(x, nullptr);
    }
    const Mat& phi = kernel.dense_matrix();
    std::vector<std::pair<int, int>> mask;
    for (int j = 0; j < n_users; ++j)
        for (int u = 0; u < n_users; ++u)
            if (phi(j, u) != 0.0) mask.emplace_back(j, u);
    MaskedObjective obj(n_users, {&events}, {omega}, t_begin, t_end, mask);
    Vec x(obj.dim());
    x.segment(0, n_users) = mu;
    for (std::size_t e = 0; e < mask.size(); ++e)
        x(n_users + static_cast<int>(e)) = phi(mask[e].first, mask[e].second);
    return obj(x, nullptr);
}

namespace {

struct ActivityFit {
    std::vector<Vec> mu;  // per participating stream
    Kernel kernel;
    double log_likelihood = 0.0;
};

ActivityFit fit_masked_activity(int n, const std::vector<const Stream*>& streams,
                                const std::vector<double>& omegas,
                                const std::vector<std::pair<int, int>>& mask, double a, double b,
                                int iterations) {
    MaskedObjective obj(n, streams, omegas, a, b, mask);
    Vec x = Vec::Zero(obj.dim());
    const int ns = static_cast<int>(streams.size());
    for (int s = 0; s < ns; ++s) x.segment(s * n, n) = initial_mu(*streams[s], n, a, b);

    Mat mask_mat = Mat::Zero(n, n);
    for (auto [j, u] : mask) mask_mat(j, u) = 1.0;
    const double rho = spectral_radius(mask_mat);
    const double init_phi = mask.empty() ? 0.0 : 0.3 / std::max(1.0, rho);
    x.segment(ns * n, mask.size()).setConstant(init_phi);

    ActivityFit fit;
    fit.log_likelihood = ascend([&obj](const Vec& v, Vec* g) { return obj(v, g); }, x, iterations);
    for (int s = 0; s < ns; ++s) fit.mu.push_back(x.segment(s * n, n));
    Mat phi = Mat::Zero(n, n);
    for (std::size_t e = 0; e < mask.size(); ++e)
        phi(mask[e].first, mask[e].second) = x(ns * n + static_cast<int>(e));
    fit.kernel = Kernel::dense(std::move(phi));
    return fit;
}

ActivityFit fit_lowrank_activity(int n, int rank, const std::vector<const Stream*>& streams,
                                 const std::vector<double>& omegas, double a, double b,
                                 int iterations, Rng& rng) {
    LowRankObjective obj(n, rank, streams, omegas, a, b);
    Vec x = Vec::Zero(obj.dim());
    const int ns = static_cast<int>(streams.size());
    for (int s = 0; s < ns; ++s) x.segment(s * n, n) = initial_mu(*streams[s], n, a, b);

    std::uniform_real_distribution<double> jitter(0.5, 1.5);
    const double scale = std::sqrt(0.3 / (static_cast<double>(n) * rank));
    for (int i = 0; i < 2 * n * rank; ++i) x(ns * n + i) = scale * jitter(rng);

    // equalize the factor norms per component: Φ = UVᵀ is invariant under
    // U·c, V/c, and the gauge drift otherwise slows the ascent
    auto rebalance = [n, ns, rank](Vec& v) {
        Eigen::Map<Mat> u(v.data() + ns * n, n, rank);
        Eigen::Map<Mat> w(v.data() + ns * n + n * rank, n, rank);
        for (int r = 0; r < rank; ++r) {
            const double nu = u.col(r).norm(), nw = w.col(r).norm();
            if (nu < 1e-12 || nw < 1e-12) continue;
            const double c = std::sqrt(nw / nu);
            u.col(r) *= c;
            w.col(r) /= c;
        }
    };

    ActivityFit fit;
    fit.log_likelihood =
        ascend([&obj](const Vec& v, Vec* g) { return obj(v, g); }, x, iterations, rebalance);
    for (int s = 0; s < ns; ++s) fit.mu.push_back(x.segment(s * n, n));
    Mat u = Eigen::Map<Mat>(x.data() + ns * n, n, rank);
    Mat v = Eigen::Map<Mat>(x.data() + ns * n + n * rank, n, rank);
    fit.kernel = Kernel::low_rank(std::move(u), std::move(v));
    return fit;
}

double select_omega(int n, const Stream& stream, bool low_rank, int rank,
                    const std::vector<std::pair<int, int>>& mask, const FitConfig& cfg,
                    double a, double b, Rng& rng) {
    if (cfg.omega_grid.size() <= 1) return cfg.omega_grid.empty() ? 1.0 : cfg.omega_grid[0];
    const double split = a + (1.0 - cfg.holdout_fraction) * (b - a);
    const int iters = std::min(cfg.max_iterations, 150);
    double best_omega = cfg.omega_grid[0];
    double best_ll = -std::numeric_limits<double>::infinity();
    for (double omega : cfg.omega_grid) {
        ActivityFit f = low_rank
            ? fit_lowrank_activity(n, rank, {&stream}, {omega}, a, split, iters, rng)
            : fit_masked_activity(n, {&stream}, {omega}, mask, a, split, iters);
        const double holdout =
            hawkes_log_likelihood(f.mu[0], f.kernel, omega, stream, n, split, b);
        if (holdout > best_ll) {
            best_ll = holdout;
            best_omega = omega;
        }
    }
    return best_omega;
}

}  // namespace

HawkesModel fit_hawkes(const EventLog& log, const Network& net, double t_begin, double t_end,
                       const FitConfig& cfg, FitReport* report) {
    const int n = net.n_users();
    Rng rng = make_rng(cfg.seed, 71);
    FitReport local;
    FitReport& rep = report ? *report : local;

    std::array<Stream, kNumProcesses> streams;
    std::array<long, kNumProcesses> window_counts;
    for (Process p : kAllProcesses) {
        const int i = static_cast<int>(p);
        streams[i] = extract_stream(log, p, t_end);
        window_counts[i] = count_in_window(streams[i], t_begin, t_end);
    }

    const auto mask = follower_mask(net);

    HawkesModel model;
    model.n_users = n;

    for (Process p : kAllProcesses) {
        const int i = static_cast<int>(p);
        if (window_counts[i] == 0) {
            rep.warnings.push_back(std::string(process_name(p)) +
                                   ": no events in the fit window; using floor base intensity");
            rep.chosen_omega[i] = cfg.omega_grid.empty() ? 1.0 : cfg.omega_grid[0];
            continue;
        }
        const bool low_rank = activity_of(p) == Activity::Retweet;
        rep.chosen_omega[i] = select_omega(n, streams[i], low_rank, cfg.retweet_rank, mask, cfg,
                                           t_begin, t_end, rng);
    }

    auto fit_pair = [&](Process fake, Process truth, Activity z, bool low_rank) {
        const int fi = static_cast<int>(fake), ti = static_cast<int>(truth);
        std::vector<const Stream*> active;
        std::vector<double> omegas;
        std::vector<int> order;
        if (window_counts[fi] > 0) { active.push_back(&streams[fi]); omegas.push_back(rep.chosen_omega[fi]); order.push_back(fi); }
        if (window_counts[ti] > 0) { active.push_back(&streams[ti]); omegas.push_back(rep.chosen_omega[ti]); order.push_back(ti); }

        if (active.empty()) {
            model.mu[fi] = Vec::Constant(n, cfg.mu_floor);
            model.mu[ti] = Vec::Constant(n, cfg.mu_floor);
            model.kernels[static_cast<int>(z)] =
                low_rank ? Kernel::low_rank(Mat::Zero(n, cfg.retweet_rank), Mat::Zero(n, cfg.retweet_rank))
                         : Kernel::dense(Mat::Zero(n, n));
            return;
        }
        ActivityFit fit = low_rank
            ? fit_lowrank_activity(n, cfg.retweet_rank, active, omegas, t_begin, t_end,
                                   cfg.max_iterations, rng)
            : fit_masked_activity(n, active, omegas, mask, t_begin, t_end, cfg.max_iterations);
        for (std::size_t s = 0; s < order.size(); ++s) {
            model.mu[order[s]] = fit.mu[s];
            rep.log_likelihood[order[s]] = fit.log_likelihood;
        }
        if (window_counts[fi] == 0) model.mu[fi] = Vec::Constant(n, cfg.mu_floor);
        if (window_counts[ti] == 0) model.mu[ti] = Vec::Constant(n, cfg.mu_floor);
        model.kernels[static_cast<int>(z)] = std::move(fit.kernel);
    };

    fit_pair(Process::FakeTweet, Process::TrueTweet, Activity::Tweet, false);
    fit_pair(Process::FakeRetweet, Process::TrueRetweet, Activity::Retweet, true);

    {
        const int li = static_cast<int>(Process::Like);
        if (window_counts[li] == 0) {
            model.mu[li] = Vec::Constant(n, cfg.mu_floor);
            model.kernels[static_cast<int>(Activity::Like)] = Kernel::dense(Mat::Zero(n, n));
        } else {
            ActivityFit fit = fit_masked_activity(n, {&streams[li]}, {rep.chosen_omega[li]}, mask,
                                                  t_begin, t_end, cfg.max_iterations);
            model.mu[li] = fit.mu[0];
            rep.log_likelihood[li] = fit.log_likelihood;
            model.kernels[static_cast<int>(Activity::Like)] = std::move(fit.kernel);
        }
    }

    for (Process p : kAllProcesses) model.omega[static_cast<int>(p)] = rep.chosen_omega[static_cast<int>(p)];

    for (Kernel& k : model.kernels) {
        const double rho = k.spectral_radius();
        if (rho > cfg.stability_limit) {
            k.scale(cfg.stability_limit / rho);
            rep.warnings.push_back("kernel rescaled for stability (spectral radius " +
                                   std::to_string(rho) + ")");
        }
    }

    model.validate();
    return model;
}

}  // namespace dcpl
