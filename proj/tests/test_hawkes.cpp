#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dcpl/fixture.hpp"
#include "dcpl/hawkes.hpp"

#include <cmath>

using namespace dcpl;

namespace {

HawkesModel flat_model(int n, double mu, const Mat& phi_tweet) {
    HawkesModel model;
    model.n_users = n;
    for (Process p : kAllProcesses) {
        model.mu[static_cast<int>(p)] = Vec::Constant(n, mu);
        model.omega[static_cast<int>(p)] = 1.0;
    }
    model.kernels[static_cast<int>(Activity::Tweet)] = Kernel::dense(phi_tweet);
    model.kernels[static_cast<int>(Activity::Retweet)] =
        Kernel::dense(Mat::Zero(n, n));
    model.kernels[static_cast<int>(Activity::Like)] = Kernel::dense(Mat::Zero(n, n));
    return model;
}

Network ring_network(int n) {
    Mat g = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) g(i, (i + 1) % n) = 1.0;
    return Network(g);
}

Event tweet_at(double t, int user, NewsLabel label = NewsLabel::True) {
    Event ev;
    ev.t = t;
    ev.user = user;
    ev.kind = EventKind::Tweet;
    ev.label = label;
    return ev;
}

}  // namespace

TEST_CASE("intensity with zero kernel is the baseline") {
    HawkesModel model = flat_model(3, 0.7, Mat::Zero(3, 3));
    Vec lambda = intensity_at(model, Process::TrueTweet, Vec::Zero(3));
    CHECK((lambda - Vec::Constant(3, 0.7)).norm() == doctest::Approx(0.0));
}

TEST_CASE("plan raises only true-news intensities") {
    HawkesModel model = flat_model(2, 0.0, Mat::Zero(2, 2));
    InterventionPlan plan;
    plan.tweet = Vec::Zero(2);
    plan.tweet << 1.0, 0.0;
    plan.retweet = Vec::Zero(2);
    Vec lt = intensity_at(model, Process::TrueTweet, Vec::Zero(2), &plan);
    CHECK(lt(0) == doctest::Approx(1.0));
    CHECK(lt(1) == doctest::Approx(0.0));
    Vec lf = intensity_at(model, Process::FakeTweet, Vec::Zero(2), &plan);
    CHECK(lf.norm() == doctest::Approx(0.0));
}

TEST_CASE("single past event excitation decays exponentially") {
    Mat phi = Mat::Zero(2, 2);
    phi(0, 1) = 0.5;
    HawkesModel model = flat_model(2, 0.3, phi);
    model.omega[static_cast<int>(Process::TrueTweet)] = 2.0;

    const double age = 0.8;
    EventLog history = {tweet_at(1.0, 0)};
    Vec exc = residual_excitation(model, Process::TrueTweet, history, 1.0 + age);
    CHECK(exc(1) == doctest::Approx(0.5 * 2.0 * std::exp(-2.0 * age)));
    CHECK(exc(0) == doctest::Approx(0.0));

    Vec lambda = intensity_at(model, Process::TrueTweet, exc);
    CHECK(lambda(1) == doctest::Approx(0.3 + 0.5 * 2.0 * std::exp(-2.0 * age)));
}

TEST_CASE("no events give zero excitation") {
    HawkesModel model = flat_model(4, 0.1, Mat::Zero(4, 4));
    CHECK(residual_excitation(model, Process::FakeTweet, {}, 5.0).norm() == 0.0);
}

TEST_CASE("excitation recursion equals the naive double sum") {
    Rng rng(17);
    std::uniform_real_distribution<double> draw(0.0, 1.0);
    const int n = 4;
    Mat phi(n, n);
    for (int i = 0; i < n * n; ++i) phi(i / n, i % n) = 0.2 * draw(rng);
    HawkesModel model = flat_model(n, 0.2, phi);
    const double omega = 1.7;
    model.omega[static_cast<int>(Process::TrueTweet)] = omega;

    EventLog history;
    for (int e = 0; e < 60; ++e) history.push_back(tweet_at(5.0 * draw(rng), e % n));
    sort_events(history);

    const double tau = 5.5;
    const Vec fast = residual_excitation(model, Process::TrueTweet, history, tau);
    Vec naive = Vec::Zero(n);
    for (int i = 0; i < n; ++i)
        for (const Event& ev : history)
            naive(i) += phi(ev.user, i) * omega * std::exp(-omega * (tau - ev.t));
    CHECK((fast - naive).cwiseAbs().maxCoeff() < 1e-10);

    CHECK_THROWS_AS(residual_excitation(model, Process::TrueTweet, history, 2.0),
                    ValidationError);
}

TEST_CASE("low-rank excitation matches its dense materialization") {
    Rng rng(23);
    std::uniform_real_distribution<double> draw(0.1, 0.5);
    const int n = 5;
    Mat u(n, 2), v(n, 2);
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < 2; ++r) {
            u(i, r) = draw(rng);
            v(i, r) = draw(rng);
        }
    HawkesModel model = flat_model(n, 0.2, Mat::Zero(n, n));
    model.kernels[static_cast<int>(Activity::Retweet)] = Kernel::low_rank(u, v);
    Kernel k = model.kernel_for(Process::TrueRetweet);
    k.scale(0.5 / k.spectral_radius());
    model.kernels[static_cast<int>(Activity::Retweet)] = k;

    EventLog history;
    for (int e = 0; e < 30; ++e) {
        Event ev;
        ev.t = 3.0 * draw(rng) * (e + 1) / 31.0;
        ev.user = e % n;
        ev.kind = EventKind::Retweet;
        ev.label = NewsLabel::True;
        ev.target = (e + 1) % n;
        history.push_back(ev);
    }
    sort_events(history);

    const Vec fast = residual_excitation(model, Process::TrueRetweet, history, 3.2);
    const Mat phi = model.kernel_for(Process::TrueRetweet).materialize();
    Vec naive = Vec::Zero(n);
    for (int i = 0; i < n; ++i)
        for (const Event& ev : history)
            naive(i) += phi(ev.user, i) * std::exp(-(3.2 - ev.t));
    CHECK((fast - naive).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("simulation is reproducible and empty when silent") {
    const int n = 5;
    Network net = ring_network(n);
    HawkesModel model = flat_model(n, 0.4, Mat::Zero(n, n));
    StagePartition part = partition_stages(0, 5, 1);

    SimulateOptions options;
    options.seed = 99;
    EventLog a = simulate(model, net, part, {}, nullptr, options);
    EventLog b = simulate(model, net, part, {}, nullptr, options);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].t == b[i].t);
        CHECK(a[i].user == b[i].user);
        CHECK(a[i].kind == b[i].kind);
    }

    HawkesModel silent = flat_model(n, 0.0, Mat::Zero(n, n));
    CHECK(simulate(silent, net, part, {}, nullptr, options).empty());
}

TEST_CASE("zero-kernel simulation matches Poisson counts") {
    const int n = 5;
    Network net = ring_network(n);
    HawkesModel model = flat_model(n, 1.0, Mat::Zero(n, n));
    StagePartition part = partition_stages(0, 200, 1);

    SimulateOptions options;
    options.seed = 4;
    EventLog log = simulate(model, net, part, {}, nullptr, options);
    // each process/user is Poisson(1/hr): expect 200 ± 4·√200 per user/process
    Vec counts = Vec::Zero(n);
    for (const Event& ev : log)
        if (ev.kind == EventKind::Tweet && *ev.label == NewsLabel::True) counts(ev.user) += 1.0;
    for (int i = 0; i < n; ++i) CHECK(std::abs(counts(i) - 200.0) < 4.0 * std::sqrt(200.0));
}

TEST_CASE("event cap aborts with stage diagnostics") {
    const int n = 3;
    Network net = ring_network(n);
    HawkesModel model = flat_model(n, 50.0, Mat::Zero(n, n));
    StagePartition part = partition_stages(0, 2, 1);
    SimulateOptions options;
    options.seed = 5;
    options.max_events_per_stage = 10;
    CHECK_THROWS_AS(simulate(model, net, part, {}, nullptr, options), SimulationError);
}

TEST_CASE("interventions raise true-news counts on paired seeds") {
    const int n = 6;
    Network net = ring_network(n);
    Rng rng(31);
    Mat phi = Mat::Zero(n, n);
    HawkesModel model = flat_model(n, 0.3, phi);
    StagePartition part = partition_stages(0, 4, 1);

    std::vector<InterventionPlan> plans;
    for (int k = 0; k < part.n_stages; ++k) {
        InterventionPlan plan;
        plan.stage = k + 1;
        plan.tweet = Vec::Constant(n, 0.5);
        plan.retweet = Vec::Constant(n, 0.5);
        plan.tweet_budget = plan.tweet.sum();
        plan.retweet_budget = plan.retweet.sum();
        plans.push_back(plan);
    }

    int wins = 0;
    const int reps = 20;
    for (int r = 0; r < reps; ++r) {
        SimulateOptions options;
        options.seed = 1000 + r;
        const EventLog with = simulate(model, net, part, {}, &plans, options);
        const EventLog without = simulate(model, net, part, {}, nullptr, options);
        auto count_true = [](const EventLog& log) {
            long c = 0;
            for (const Event& ev : log)
                if (ev.is_post() && *ev.label == NewsLabel::True) ++c;
            return c;
        };
        if (count_true(with) > count_true(without)) ++wins;
    }
    CHECK(wins >= 17);  // sign test at α=0.05 needs ≥ 15 of 20
}

TEST_CASE("expected counts are exact for the Poisson case") {
    const int n = 3;
    HawkesModel model = flat_model(n, 0.8, Mat::Zero(n, n));
    const StageMoments m = stage_moments(model, Process::TrueTweet, 1.0);
    Vec a = Vec::Zero(n);
    a << 0.5, 0.0, 0.1;
    const Vec counts = m.expected_counts(model.mu[1] + a, Vec::Zero(n));
    CHECK(counts(0) == doctest::Approx(1.3));
    CHECK(counts(1) == doctest::Approx(0.8));
    CHECK(counts(2) == doctest::Approx(0.9));
}

TEST_CASE("stage mean rate approaches the stationary Hawkes mean") {
    Mat phi(1, 1);
    phi(0, 0) = 0.5;
    HawkesModel model = flat_model(1, 1.0, phi);
    const StageMoments m = stage_moments(model, Process::TrueTweet, 1.0);
    Vec g = Vec::Zero(1);
    Vec counts;
    for (int k = 0; k < 60; ++k) {
        counts = m.expected_counts(model.mu[1], g);
        g = m.next_excitation(model.mu[1], g);
    }
    CHECK(counts(0) == doctest::Approx(2.0).epsilon(1e-6));  // μ/(1−φ)
}

TEST_CASE("matrix-exponential moments agree with fine RK4") {
    Network net = random_network(6, 0.4, 51);
    HawkesModel model = random_stable_model(net, 0.5, 52);
    const StageMoments m = stage_moments(model, Process::TrueTweet, 1.0);

    Rng rng(53);
    std::uniform_real_distribution<double> draw(0.0, 1.0);
    Vec g0(6), baseline(6);
    for (int i = 0; i < 6; ++i) {
        g0(i) = draw(rng);
        baseline(i) = 0.3 + draw(rng);
    }

    // g' = ωΦᵀb + ω(Φᵀ−I)g, integrate m(t) = b + g(t)
    const double omega = model.omega[1];
    const Mat phi_t = model.kernel_for(Process::TrueTweet).materialize().transpose();
    const Mat a = omega * (phi_t - Mat::Identity(6, 6));
    const Vec c = omega * (phi_t * baseline);
    auto deriv = [&](const Vec& g) { return Vec(a * g + c); };

    Vec g = g0;
    Vec integral = Vec::Zero(6);
    const int steps = 4000;
    const double h = 1.0 / steps;
    for (int s = 0; s < steps; ++s) {
        // Simpson on m(t) = baseline + g(t) while stepping g with RK4
        const Vec k1 = deriv(g);
        const Vec k2 = deriv(g + 0.5 * h * k1);
        const Vec k3 = deriv(g + 0.5 * h * k2);
        const Vec k4 = deriv(g + h * k3);
        const Vec g_next = g + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
        integral += 0.5 * h * (g + g_next) + h * baseline;
        g = g_next;
    }
    const Vec expected = m.expected_counts(baseline, g0);
    CHECK((expected - integral).cwiseAbs().maxCoeff() < 1e-5);
    const Vec g_end = m.next_excitation(baseline, g0);
    CHECK((g_end - g).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("expected counts are additive and monotone in the plan") {
    Network net = random_network(5, 0.5, 61);
    HawkesModel model = random_stable_model(net, 0.6, 62);
    const StageMoments m = stage_moments(model, Process::TrueTweet, 1.0);
    const Vec mu = model.mu[1];
    Rng rng(63);
    std::uniform_real_distribution<double> draw(0.0, 1.0);
    Vec g0(5), a1(5), a2(5);
    for (int i = 0; i < 5; ++i) {
        g0(i) = draw(rng);
        a1(i) = draw(rng);
        a2(i) = draw(rng);
    }
    const Vec base = m.expected_counts(mu, g0);
    const Vec e1 = m.expected_counts(mu + a1, g0) - base;
    const Vec e2 = m.expected_counts(mu + a2, g0) - base;
    const Vec e12 = m.expected_counts(mu + a1 + a2, g0) - base;
    CHECK((e12 - e1 - e2).cwiseAbs().maxCoeff() < 1e-10);

    CHECK((e1.array() >= -1e-12).all());  // monotone: a1 ≥ 0 componentwise
    CHECK((m.response.array() >= -1e-12).all());
}

TEST_CASE("expected counts match a Monte Carlo mean") {
    const int n = 6;
    Network net = random_network(n, 0.4, 71);
    HawkesModel model = random_stable_model(net, 0.5, 72);
    const StageMoments m = stage_moments(model, Process::FakeTweet, 1.0);
    const Vec mu = model.mu[0];

    StagePartition part = partition_stages(0, 1, 1);
    Vec mc = Vec::Zero(n);
    const int reps = 1500;
    for (int r = 0; r < reps; ++r) {
        SimulateOptions options;
        options.seed = 9000 + r;
        const EventLog log = simulate(model, net, part, {}, nullptr, options);
        for (const Event& ev : log)
            if (ev.kind == EventKind::Tweet && *ev.label == NewsLabel::Fake) mc(ev.user) += 1.0;
    }
    mc /= reps;
    const Vec expected = m.expected_counts(mu, Vec::Zero(n));
    CHECK((expected - mc).norm() / expected.norm() < 0.08);
}

TEST_CASE("fit recovers a pure Poisson process") {
    const int n = 4;
    Network net = ring_network(n);
    HawkesModel truth = flat_model(n, 2.0, Mat::Zero(n, n));
    StagePartition part = partition_stages(0, 500, 1);
    SimulateOptions options;
    options.seed = 81;
    EventLog log = simulate(truth, net, part, {}, nullptr, options);

    FitConfig cfg;
    cfg.max_iterations = 250;
    const HawkesModel fitted = fit_hawkes(log, net, 0, 500, cfg);
    const Vec mu = fitted.mu[static_cast<int>(Process::TrueTweet)];
    for (int i = 0; i < n; ++i) CHECK(std::abs(mu(i) - 2.0) / 2.0 < 0.1);
    CHECK(fitted.kernel_for(Process::TrueTweet).materialize().norm() < 0.08);
}

TEST_CASE("fit flags processes with no events") {
    const int n = 3;
    Network net = ring_network(n);
    EventLog log = {tweet_at(0.5, 0, NewsLabel::Fake), tweet_at(1.5, 1, NewsLabel::Fake),
                    tweet_at(2.5, 2, NewsLabel::Fake), tweet_at(3.5, 0, NewsLabel::Fake)};
    FitConfig cfg;
    cfg.max_iterations = 50;
    FitReport report;
    const HawkesModel fitted = fit_hawkes(log, net, 0, 5, cfg, &report);
    CHECK(fitted.mu[static_cast<int>(Process::TrueTweet)](0) == doctest::Approx(cfg.mu_floor));
    CHECK(!report.warnings.empty());
}

TEST_CASE("log-likelihood prefers the generating parameters") {
    const int n = 3;
    Network net = ring_network(n);
    HawkesModel truth = flat_model(n, 1.0, Mat::Zero(n, n));
    StagePartition part = partition_stages(0, 300, 1);
    SimulateOptions options;
    options.seed = 91;
    EventLog log = simulate(truth, net, part, {}, nullptr, options);

    std::vector<std::pair<double, int>> stream;
    for (const Event& ev : log)
        if (process_of(ev) == Process::TrueTweet) stream.emplace_back(ev.t, ev.user);

    const Kernel zero = Kernel::dense(Mat::Zero(n, n));
    const double at_truth =
        hawkes_log_likelihood(Vec::Constant(n, 1.0), zero, 1.0, stream, n, 0, 300);
    const double too_low =
        hawkes_log_likelihood(Vec::Constant(n, 0.5), zero, 1.0, stream, n, 0, 300);
    const double too_high =
        hawkes_log_likelihood(Vec::Constant(n, 2.0), zero, 1.0, stream, n, 0, 300);
    CHECK(at_truth > too_low);
    CHECK(at_truth > too_high);
}

TEST_CASE("low-rank fit recovers a rank-1 retweet kernel") {
    const int n = 6;
    Rng rng(101);
    std::uniform_real_distribution<double> draw(0.3, 1.0);
    Vec u(n), v(n);
    for (int i = 0; i < n; ++i) {
        u(i) = draw(rng);
        v(i) = draw(rng);
    }
    Kernel truth_kernel = Kernel::low_rank(u, v);
    truth_kernel.scale(0.6 / truth_kernel.spectral_radius());
    const Mat truth_phi = truth_kernel.materialize();

    Network net = ring_network(n);
    HawkesModel truth = flat_model(n, 0.5, Mat::Zero(n, n));
    truth.kernels[static_cast<int>(Activity::Retweet)] = truth_kernel;
    // only the retweet pair is active
    truth.mu[static_cast<int>(Process::FakeTweet)].setZero();
    truth.mu[static_cast<int>(Process::TrueTweet)].setZero();
    truth.mu[static_cast<int>(Process::Like)].setZero();

    StagePartition part = partition_stages(0, 6000, 1);
    SimulateOptions options;
    options.seed = 102;
    const EventLog log = simulate(truth, net, part, {}, nullptr, options);

    FitConfig cfg;
    cfg.retweet_rank = 1;
    cfg.max_iterations = 400;
    const HawkesModel fitted = fit_hawkes(log, net, 0, 6000, cfg);
    const Mat phi_hat = fitted.kernel_for(Process::TrueRetweet).materialize();
    CHECK((phi_hat - truth_phi).norm() / truth_phi.norm() < 0.1);
}

TEST_CASE("decay grid selection prefers the generating omega") {
    const int n = 3;
    Network net = ring_network(n);
    Mat phi = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) phi(i, (i + 1) % n) = 0.45;
    HawkesModel truth = flat_model(n, 0.6, phi);
    for (Process p : kAllProcesses) truth.omega[static_cast<int>(p)] = 2.0;

    StagePartition part = partition_stages(0, 800, 1);
    SimulateOptions options;
    options.seed = 105;
    const EventLog log = simulate(truth, net, part, {}, nullptr, options);

    FitConfig cfg;
    cfg.omega_grid = {0.5, 2.0, 8.0};
    cfg.max_iterations = 150;
    FitReport report;
    fit_hawkes(log, net, 0, 800, cfg, &report);
    CHECK(report.chosen_omega[static_cast<int>(Process::TrueTweet)] == doctest::Approx(2.0));
    CHECK(report.chosen_omega[static_cast<int>(Process::FakeTweet)] == doctest::Approx(2.0));
}
