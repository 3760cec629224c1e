#include "dcpl/fixture.hpp"

#include "dcpl/json_io.hpp"

#include <filesystem>

namespace dcpl {

namespace {

Mat masked_kernel(const Network& net, double target_radius, Rng& rng, double jitter = 0.3) {
    const int n = net.n_users();
    std::uniform_real_distribution<double> uniform(1.0 - jitter, 1.0 + jitter);
    Mat phi = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j : net.followers(i)) phi(i, j) = uniform(rng);
    const double rho = spectral_radius(phi);
    if (rho > 0.0) phi *= target_radius / rho;
    return phi;
}

Kernel low_rank_kernel(int n, int rank, double target_radius, Rng& rng) {
    std::uniform_real_distribution<double> uniform(0.1, 1.0);
    Mat u(n, rank), v(n, rank);
    for (int i = 0; i < n; ++i)
        for (int r = 0; r < rank; ++r) {
            u(i, r) = uniform(rng);
            v(i, r) = uniform(rng);
        }
    Kernel k = Kernel::low_rank(std::move(u), std::move(v));
    const double rho = k.spectral_radius();
    if (rho > 0.0) k.scale(target_radius / rho);
    return k;
}

}  // namespace

Network random_network(int n_users, double edge_probability, std::uint64_t seed) {
    Rng rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Mat g = Mat::Zero(n_users, n_users);
    for (int i = 0; i < n_users; ++i)
        for (int j = 0; j < n_users; ++j)
            if (i != j && uniform(rng) < edge_probability) g(i, j) = 1.0;
    // keep every user followed by someone so likes always find a liker
    for (int i = 0; i < n_users; ++i) {
        bool followed = false;
        for (int j = 0; j < n_users; ++j)
            if (g(i, j) == 1.0) { followed = true; break; }
        if (!followed && n_users > 1) g(i, (i + 1) % n_users) = 1.0;
    }
    return Network(g);
}

HawkesModel random_stable_model(const Network& net, double target_radius, std::uint64_t seed) {
    const int n = net.n_users();
    Rng rng(seed);
    std::uniform_real_distribution<double> mu_draw(0.2, 1.2);

    HawkesModel model;
    model.n_users = n;
    for (Process p : kAllProcesses) {
        Vec mu(n);
        for (int i = 0; i < n; ++i) mu(i) = mu_draw(rng);
        model.mu[static_cast<int>(p)] = mu;
        model.omega[static_cast<int>(p)] = 1.0;
    }
    model.kernels[static_cast<int>(Activity::Tweet)] =
        Kernel::dense(masked_kernel(net, target_radius, rng));
    model.kernels[static_cast<int>(Activity::Retweet)] =
        low_rank_kernel(n, 2, target_radius, rng);
    model.kernels[static_cast<int>(Activity::Like)] =
        Kernel::dense(masked_kernel(net, 0.6 * target_radius, rng));
    model.validate();
    return model;
}

namespace {

// users 12..19 are four mutually-following pairs of active accounts; users
// 0..11 are a quiet periphery that follows nobody, so their reward share is
// identically zero and they cluster as one stable block
constexpr int kFixtureUsers = 20;
constexpr int kFixtureQuiet = 12;

bool fixture_active(int user) { return user >= kFixtureQuiet; }

}  // namespace

Network fixture_network(std::uint64_t /*seed*/) {
    const int n = kFixtureUsers;
    Mat g = Mat::Zero(n, n);
    for (int a = kFixtureQuiet; a < n; a += 2) {  // mutually following pairs
        g(a, a + 1) = 1.0;
        g(a + 1, a) = 1.0;
    }
    return Network(g);
}

HawkesModel fixture_model(const Network& net, std::uint64_t seed) {
    const int n = net.n_users();
    Rng rng(seed + 1);
    std::uniform_real_distribution<double> jitter(0.99, 1.01);

    // pair corners in the (tweet, retweet) activity plane; pair members sit at
    // deterministic radial offsets so their centroid distances are stable
    const double corner_tweet[4] = {6.0, 1.5, 5.0, 2.5};
    const double corner_retweet[4] = {1.5, 6.0, 5.0, 2.5};
    const double member_offset[2] = {0.98, 1.02};

    HawkesModel model;
    model.n_users = n;
    auto fill_mu = [&](Process p, double base, const double* corner) {
        Vec mu(n);
        for (int i = 0; i < n; ++i) {
            double mult = 0.02;
            if (fixture_active(i)) {
                const int a = i - kFixtureQuiet;
                mult = corner[a / 2] * member_offset[a % 2];
            }
            mu(i) = base * mult * jitter(rng);
        }
        model.mu[static_cast<int>(p)] = mu;
        model.omega[static_cast<int>(p)] = 1.0;
    };
    fill_mu(Process::FakeTweet, 3.6, corner_tweet);
    fill_mu(Process::TrueTweet, 3.0, corner_tweet);
    fill_mu(Process::FakeRetweet, 1.3, corner_retweet);
    fill_mu(Process::TrueRetweet, 1.1, corner_retweet);
    const double like_corner[4] = {1.2, 1.5, 1.3, 1.4};
    fill_mu(Process::Like, 0.12, like_corner);

    auto block_kernel = [&](double rho) {
        Mat phi = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i)
            for (int j : net.followers(i)) phi(i, j) = 1.0;
        const double sr = spectral_radius(phi);
        if (sr > 0.0) phi *= rho / sr;
        return Kernel::dense(phi);
    };
    model.kernels[static_cast<int>(Activity::Tweet)] = block_kernel(0.1);

    Mat u(n, 2), v(n, 2);
    for (int i = 0; i < n; ++i) {
        const double boost = fixture_active(i) ? 1.0 : 0.05;
        u(i, 0) = boost;
        u(i, 1) = 0.4 * boost;
        v(i, 0) = boost;
        v(i, 1) = 0.5 * boost;
    }
    Kernel retweet = Kernel::low_rank(std::move(u), std::move(v));
    retweet.scale(0.12 / retweet.spectral_radius());
    model.kernels[static_cast<int>(Activity::Retweet)] = retweet;

    model.kernels[static_cast<int>(Activity::Like)] = block_kernel(0.08);
    model.validate();
    return model;
}

EventLog fixture_events(const HawkesModel& model, const Network& net, double horizon,
                        std::uint64_t seed) {
    const StagePartition part = partition_stages(0.0, horizon, 1.0);
    SimulateOptions options;
    options.seed = mix_seed(seed, 7);
    return simulate(model, net, part, {}, nullptr, options);
}

void write_fixture(const std::string& dir, std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    const Network net = fixture_network(seed);
    const HawkesModel model = fixture_model(net, seed);
    const EventLog events = fixture_events(model, net, 40.0, seed);

    save_network(dir + "/network.csv", net);
    save_events(dir + "/events.jsonl", events);

    RunConfig cfg;
    cfg.events_path = "events.jsonl";   // resolved against the config location
    cfg.network_path = "network.csv";
    cfg.n_users = net.n_users();
    cfg.train_base.n_clusters = 5;
    cfg.train_base.max_epochs = 30;
    cfg.candidates = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};
    save_run_config(dir + "/config.json", cfg);
}

Network two_block_network(int n_users, std::uint64_t seed) {
    // two communities of four sub-blocks each; co-follow mass concentrates
    // inside sub-blocks so target values are lumpy at sub-block granularity
    Rng rng(seed);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    const int sub = n_users / 8;
    Mat g = Mat::Zero(n_users, n_users);
    for (int i = 0; i < n_users; ++i) {
        const int sub_i = std::min(i / sub, 7);
        for (int j = 0; j < n_users; ++j) {
            if (i == j) continue;
            const int sub_j = std::min(j / sub, 7);
            double p = 0.008;
            if (sub_i == sub_j) p = 0.35;
            else if (sub_i / 4 == sub_j / 4) p = 0.03;
            if (uniform(rng) < p) g(i, j) = 1.0;
        }
    }
    for (int i = 0; i < n_users; ++i) {
        bool followed = false;
        for (int j = 0; j < n_users; ++j)
            if (g(i, j) == 1.0) { followed = true; break; }
        if (!followed) g(i, (i + 1) % n_users) = 1.0;
    }
    return Network(g);
}

HawkesModel two_block_model(const Network& net, std::uint64_t seed) {
    const int n = net.n_users();
    const int sub = n / 8;
    Rng rng(seed + 9);
    std::uniform_real_distribution<double> jitter(0.9, 1.1);

    // sub-block fake-activity levels set the targeting value of each group;
    // block 0 leans fake-active, block 1 true-responsive
    const double fake_level[8] = {8.0, 4.5, 2.5, 1.4, 1.0, 0.7, 0.45, 0.3};
    const double true_level[8] = {0.5, 0.7, 0.9, 1.1, 1.4, 1.7, 2.1, 2.5};

    HawkesModel model;
    model.n_users = n;
    auto fill = [&](Process p, double base, const double* level) {
        Vec mu(n);
        for (int i = 0; i < n; ++i)
            mu(i) = base * level[std::min(i / sub, 7)] * jitter(rng);
        model.mu[static_cast<int>(p)] = mu;
        model.omega[static_cast<int>(p)] = 1.0;
    };
    fill(Process::FakeTweet, 0.06, fake_level);
    fill(Process::TrueTweet, 0.06, true_level);
    fill(Process::FakeRetweet, 0.04, fake_level);
    fill(Process::TrueRetweet, 0.045, true_level);
    const double like_level[8] = {1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0};
    fill(Process::Like, 0.04, like_level);

    model.kernels[static_cast<int>(Activity::Tweet)] =
        Kernel::dense(masked_kernel(net, 0.25, rng));
    model.kernels[static_cast<int>(Activity::Retweet)] = low_rank_kernel(n, 2, 0.3, rng);
    model.kernels[static_cast<int>(Activity::Like)] =
        Kernel::dense(masked_kernel(net, 0.15, rng));
    model.validate();
    return model;
}

}  // namespace dcpl
