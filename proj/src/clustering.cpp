#include "dcpl/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace dcpl {

Mat Standardization::apply(const Mat& x) const {
    Mat out = x;
    for (int c = 0; c < x.cols(); ++c) {
        const double s = sigma(c) > 1e-12 ? sigma(c) : 1.0;
        out.col(c) = (x.col(c).array() - mean(c)) / s;
    }
    return out;
}

Standardization fit_standardization(const Mat& x) {
    Standardization st;
    st.mean = x.colwise().mean();
    st.sigma.resize(x.cols());
    for (int c = 0; c < x.cols(); ++c) {
        const double var = (x.col(c).array() - st.mean(c)).square().mean();
        st.sigma(c) = std::sqrt(var);
    }
    return st;
}

Mat standardize(const Mat& x) { return fit_standardization(x).apply(x); }

Mat ClusterModel::membership_matrix() const {
    Mat m = Mat::Zero(assignment.size(), n_clusters);
    for (int i = 0; i < assignment.size(); ++i) m(i, assignment(i)) = 1.0;
    return m;
}

Mat group_means(const VecI& assignment, int n_clusters, const Mat& rows) {
    Mat sums = Mat::Zero(n_clusters, rows.cols());
    Vec counts = Vec::Zero(n_clusters);
    for (int i = 0; i < assignment.size(); ++i) {
        sums.row(assignment(i)) += rows.row(i);
        counts(assignment(i)) += 1.0;
    }
    for (int m = 0; m < n_clusters; ++m)
        if (counts(m) > 0.0) sums.row(m) /= counts(m);
    return sums;
}

namespace {

int nearest_row(const Mat& centroids, const Eigen::RowVectorXd& point) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int m = 0; m < centroids.rows(); ++m) {
        const double d = (centroids.row(m) - point).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = m;
        }
    }
    return best;
}

double wcssd_of(const Mat& x, const VecI& assignment, const Mat& centroids) {
    double total = 0.0;
    for (int i = 0; i < x.rows(); ++i)
        total += (x.row(i) - centroids.row(assignment(i))).squaredNorm();
    return total;
}

VecI lloyd(const Mat& x, Mat& centroids, int max_iter, double tol) {
    const int n = static_cast<int>(x.rows());
    VecI assignment(n);
    for (int it = 0; it < max_iter; ++it) {
        for (int i = 0; i < n; ++i) assignment(i) = nearest_row(centroids, x.row(i));
        Mat next = group_means(assignment, static_cast<int>(centroids.rows()), x);
        for (int m = 0; m < centroids.rows(); ++m) {
            bool empty = true;
            for (int i = 0; i < n; ++i)
                if (assignment(i) == m) { empty = false; break; }
            if (empty) next.row(m) = centroids.row(m);
        }
        const double shift = (next - centroids).norm();
        centroids = std::move(next);
        if (shift < tol) break;
    }
    for (int i = 0; i < n; ++i) assignment(i) = nearest_row(centroids, x.row(i));
    return assignment;
}

}  // namespace

ClusterModel kmeans_pp(const Mat& x, int n_clusters, Rng& rng, int max_iter, double tol) {
    const int n = static_cast<int>(x.rows());
    if (n_clusters < 1) throw ValidationError("kmeans: need at least one cluster");
    if (n_clusters > n) throw ValidationError("kmeans: more clusters than points");

    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    Mat centroids(n_clusters, x.cols());
    centroids.row(0) = x.row(static_cast<int>(uniform(rng) * n) % n);

    Vec dist2 = Vec::Zero(n);
    for (int i = 0; i < n; ++i) dist2(i) = (x.row(i) - centroids.row(0)).squaredNorm();
    for (int m = 1; m < n_clusters; ++m) {
        const double total = dist2.sum();
        int pick = 0;
        if (total > 0.0) {
            const double draw = uniform(rng) * total;
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                acc += dist2(i);
                if (draw <= acc) { pick = i; break; }
                pick = i;
            }
        } else {
            pick = static_cast<int>(uniform(rng) * n) % n;
        }
        centroids.row(m) = x.row(pick);
        for (int i = 0; i < n; ++i)
            dist2(i) = std::min(dist2(i), (x.row(i) - centroids.row(m)).squaredNorm());
    }

    ClusterModel model;
    model.n_clusters = n_clusters;
    model.assignment = lloyd(x, centroids, max_iter, tol);
    model.centroids = std::move(centroids);
    return model;
}

ClusterModel update_clusters(const Mat& prev_centroids, const VecI& prev_assignment,
                             const Mat& x_next, double delta, double eps1, double eps2,
                             int max_iter) {
    if (std::abs(eps1 + eps2 - 1.0) > 1e-9)
        throw ValidationError("update_clusters: eps1 + eps2 must equal 1");
    const int c = static_cast<int>(prev_centroids.rows());
    const int n = static_cast<int>(x_next.rows());
    if (prev_assignment.size() != n)
        throw ValidationError("update_clusters: assignment/features size mismatch");

    VecI assignment = prev_assignment;
    Mat mixed = prev_centroids;
    for (int it = 0; it < max_iter; ++it) {
        const Mat before = mixed;
        const Mat fresh = group_means(assignment, c, x_next);
        for (int m = 0; m < c; ++m) {
            bool empty = true;
            for (int i = 0; i < n; ++i)
                if (assignment(i) == m) { empty = false; break; }
            if (empty) continue;  // keeps its previous mixed centroid
            mixed.row(m) = eps1 * fresh.row(m) + eps2 * prev_centroids.row(m);
        }
        for (int i = 0; i < n; ++i) assignment(i) = nearest_row(mixed, x_next.row(i));
        if ((before - mixed).norm() < delta) break;
    }

    ClusterModel model;
    model.n_clusters = c;
    model.assignment = std::move(assignment);
    model.centroids = std::move(mixed);
    model.eps_current = eps1;
    model.eps_previous = eps2;
    return model;
}

Mat initial_reward_features(const EventLog& log, const Network& net, const StagePartition& part) {
    const int n = net.n_users();
    Mat features = Mat::Zero(n, 4);
    for (int k = 1; k <= part.n_stages; ++k) {
        const Mat counts = stage_counts(log, n, part.boundary(k - 1), part.boundary(k));
        for (int z = 0; z < 2; ++z) {  // 0: tweet, 1: retweet
            const Vec n_true = counts.col(2 * z);
            const Vec n_fake = counts.col(2 * z + 1);
            const Vec share = n_true.cwiseProduct(net.gram() * n_fake) / n;
            features.col(z) += share;      // payoff column
            features.col(2 + z) += share;  // contribution column
        }
    }
    return features;
}

InitialClusters initial_clusters(const EventLog& log, const Network& net,
                                 const StagePartition& part, int n_clusters, Rng& rng) {
    if (part.n_stages < 3) throw ValidationError("initial_clusters: need at least 3 stages");
    InitialClusters init;
    init.features_raw = initial_reward_features(log, net, part);
    init.scaler = fit_standardization(init.features_raw);
    init.features = init.scaler.apply(init.features_raw);
    init.model = kmeans_pp(init.features, n_clusters, rng);
    return init;
}

ClusterSelection select_num_clusters(const Mat& x, const std::vector<int>& candidates, Rng& rng) {
    const int n = static_cast<int>(x.rows());
    const int d = static_cast<int>(x.cols());
    ClusterSelection sel;
    sel.candidates = candidates;

    Mat warm_centroids;
    VecI warm_assignment;

    for (int c : candidates) {
        if (c < 1 || c > n) throw ValidationError("select_num_clusters: candidate out of range");
        ClusterModel fresh = kmeans_pp(x, c, rng);
        double best = wcssd_of(x, fresh.assignment, fresh.centroids);
        Mat best_centroids = fresh.centroids;
        VecI best_assignment = fresh.assignment;

        if (warm_centroids.rows() > 0 && warm_centroids.rows() < c) {
            // previous solution plus the farthest points as extra seeds: WC-SSD
            // can only improve, which keeps the scree monotone
            Mat seeded(c, d);
            seeded.topRows(warm_centroids.rows()) = warm_centroids;
            Vec dist2(n);
            for (int i = 0; i < n; ++i)
                dist2(i) = (x.row(i) - warm_centroids.row(warm_assignment(i))).squaredNorm();
            for (int extra = static_cast<int>(warm_centroids.rows()); extra < c; ++extra) {
                int far_idx = 0;
                dist2.maxCoeff(&far_idx);
                seeded.row(extra) = x.row(far_idx);
                for (int i = 0; i < n; ++i)
                    dist2(i) = std::min(dist2(i), (x.row(i) - seeded.row(extra)).squaredNorm());
            }
            VecI assignment = lloyd(x, seeded, 300, 1e-8);
            const double w = wcssd_of(x, assignment, seeded);
            if (w < best) {
                best = w;
                best_centroids = std::move(seeded);
                best_assignment = std::move(assignment);
            }
        }
        sel.wcssd.push_back(best);
        warm_centroids = best_centroids;
        warm_assignment = best_assignment;

        // spherical-Gaussian BIC (shared variance MLE); smaller is better
        const double variance = std::max(best / std::max(1, n * d), 1e-12);
        const double ll = -0.5 * n * d * (std::log(2.0 * M_PI * variance) + 1.0);
        const double params = c * d + (c - 1) + 1;
        sel.bic.push_back(params * std::log(static_cast<double>(n)) - 2.0 * ll);
    }

    if (candidates.size() >= 3) {
        double best_curve = 0.0;
        for (std::size_t j = 1; j + 1 < candidates.size(); ++j) {
            const double curve = sel.wcssd[j - 1] - 2.0 * sel.wcssd[j] + sel.wcssd[j + 1];
            if (curve > best_curve + 1e-12) {
                best_curve = curve;
                sel.chosen = candidates[j];
            }
        }
    }
    return sel;
}

namespace {

Mat contingency(const VecI& a, const VecI& b, int& ca, int& cb) {
    ca = a.size() ? a.maxCoeff() + 1 : 0;
    cb = b.size() ? b.maxCoeff() + 1 : 0;
    Mat table = Mat::Zero(std::max(ca, 1), std::max(cb, 1));
    for (int i = 0; i < a.size(); ++i) table(a(i), b(i)) += 1.0;
    return table;
}

double choose2(double x) { return x * (x - 1.0) / 2.0; }

}  // namespace

double adjusted_rand_index(const VecI& a, const VecI& b) {
    if (a.size() != b.size()) throw ValidationError("ari: labeling length mismatch");
    const int n = static_cast<int>(a.size());
    if (n < 2) return 1.0;
    int ca = 0, cb = 0;
    const Mat table = contingency(a, b, ca, cb);

    double index = 0.0;
    for (int i = 0; i < table.rows(); ++i)
        for (int j = 0; j < table.cols(); ++j) index += choose2(table(i, j));
    double sum_a = 0.0, sum_b = 0.0;
    for (int i = 0; i < table.rows(); ++i) sum_a += choose2(table.row(i).sum());
    for (int j = 0; j < table.cols(); ++j) sum_b += choose2(table.col(j).sum());

    const double total = choose2(static_cast<double>(n));
    const double expected = sum_a * sum_b / total;
    const double maximum = 0.5 * (sum_a + sum_b);
    if (std::abs(maximum - expected) < 1e-12) return 1.0;  // both partitions trivial
    return (index - expected) / (maximum - expected);
}

double normalized_mutual_information(const VecI& a, const VecI& b) {
    if (a.size() != b.size()) throw ValidationError("nmi: labeling length mismatch");
    const int n = static_cast<int>(a.size());
    if (n == 0) return 1.0;
    int ca = 0, cb = 0;
    const Mat table = contingency(a, b, ca, cb);

    double h_a = 0.0, h_b = 0.0, mutual = 0.0;
    for (int i = 0; i < table.rows(); ++i) {
        const double p = table.row(i).sum() / n;
        if (p > 0.0) h_a -= p * std::log(p);
    }
    for (int j = 0; j < table.cols(); ++j) {
        const double p = table.col(j).sum() / n;
        if (p > 0.0) h_b -= p * std::log(p);
    }
    for (int i = 0; i < table.rows(); ++i)
        for (int j = 0; j < table.cols(); ++j) {
            const double pij = table(i, j) / n;
            if (pij > 0.0)
                mutual += pij * std::log(pij * n * n / (table.row(i).sum() * table.col(j).sum()));
        }
    const double denom = 0.5 * (h_a + h_b);
    if (denom < 1e-12) return 1.0;  // both labelings constant
    return mutual / denom;
}

Mat network_features(const Network& net) {
    const int n = net.n_users();
    // undirected projection
    std::vector<std::vector<int>> adj(n);
    const Mat& g = net.adjacency();
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j && (g(i, j) == 1.0 || g(j, i) == 1.0)) adj[i].push_back(j);

    Mat features = Mat::Zero(n, 3);
    for (int i = 0; i < n; ++i) features(i, 0) = static_cast<double>(adj[i].size());

    // harmonic closeness via BFS
    std::vector<int> depth(n);
    std::vector<int> queue(n);
    for (int s = 0; s < n; ++s) {
        std::fill(depth.begin(), depth.end(), -1);
        int head = 0, tail = 0;
        queue[tail++] = s;
        depth[s] = 0;
        double sum = 0.0;
        while (head < tail) {
            const int u = queue[head++];
            for (int v : adj[u])
                if (depth[v] < 0) {
                    depth[v] = depth[u] + 1;
                    sum += 1.0 / depth[v];
                    queue[tail++] = v;
                }
        }
        features(s, 1) = n > 1 ? sum / (n - 1) : 0.0;
    }

    for (int i = 0; i < n; ++i) {
        const auto& nb = adj[i];
        const int deg = static_cast<int>(nb.size());
        if (deg < 2) continue;
        int links = 0;
        for (std::size_t p = 0; p < nb.size(); ++p)
            for (std::size_t q = p + 1; q < nb.size(); ++q) {
                const int u = nb[p], v = nb[q];
                if (g(u, v) == 1.0 || g(v, u) == 1.0) ++links;
            }
        features(i, 2) = 2.0 * links / (static_cast<double>(deg) * (deg - 1));
    }
    return features;
}

}  // namespace dcpl
