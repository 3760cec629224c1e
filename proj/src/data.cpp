#include "dcpl/data.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace dcpl {

using nlohmann::json;

const char* kind_name(EventKind k) {
    switch (k) {
        case EventKind::Tweet: return "tweet";
        case EventKind::Retweet: return "retweet";
        case EventKind::Like: return "like";
    }
    return "?";
}

const char* label_name(NewsLabel l) {
    return l == NewsLabel::True ? "T" : "F";
}

void validate_event(const Event& ev, int n_users, const std::string& context) {
    auto fail = [&](const std::string& msg) {
        throw ValidationError(context.empty() ? msg : context + ": " + msg);
    };
    if (!std::isfinite(ev.t) || ev.t < 0.0) fail("event time must be finite and nonnegative");
    if (ev.user < 0) fail("negative user index");
    if (n_users > 0 && ev.user >= n_users) fail("user index out of range");
    if (ev.target) {
        if (*ev.target < 0) fail("negative target index");
        if (n_users > 0 && *ev.target >= n_users) fail("target index out of range");
        if (*ev.target == ev.user) fail("target must differ from acting user");
    }
    switch (ev.kind) {
        case EventKind::Tweet:
            if (!ev.label) fail("tweet requires label");
            if (ev.target) fail("tweet must not carry a target");
            break;
        case EventKind::Retweet:
            if (!ev.label) fail("retweet requires label");
            if (!ev.target) fail("retweet requires target");
            break;
        case EventKind::Like:
            if (ev.label) fail("like must not carry a label");
            if (!ev.target) fail("like requires target");
            break;
    }
}

void sort_events(EventLog& log) {
    std::stable_sort(log.begin(), log.end(),
                     [](const Event& a, const Event& b) { return a.t < b.t; });
}

namespace {

EventKind parse_kind(const std::string& s, const std::string& context) {
    if (s == "tweet") return EventKind::Tweet;
    if (s == "retweet") return EventKind::Retweet;
    if (s == "like") return EventKind::Like;
    throw ValidationError(context + ": unknown kind '" + s + "'");
}

NewsLabel parse_label(const std::string& s, const std::string& context) {
    if (s == "T") return NewsLabel::True;
    if (s == "F") return NewsLabel::Fake;
    throw ValidationError(context + ": unknown label '" + s + "'");
}

}  // namespace

EventLog load_events(const std::string& path, int n_users) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open event log: " + path);

    EventLog log;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string context = path + ":" + std::to_string(line_no);
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw ValidationError(context + ": malformed JSON (" + e.what() + ")");
        }
        Event ev;
        try {
            ev.t = j.at("t").get<double>();
            ev.user = j.at("user").get<int>();
            ev.kind = parse_kind(j.at("kind").get<std::string>(), context);
            if (j.contains("label")) ev.label = parse_label(j["label"].get<std::string>(), context);
            if (j.contains("target")) ev.target = j["target"].get<int>();
        } catch (const json::exception& e) {
            throw ValidationError(context + ": missing or mistyped field (" + e.what() + ")");
        }
        validate_event(ev, n_users, context);
        log.push_back(ev);
    }
    sort_events(log);
    return log;
}

void save_events(const std::string& path, const EventLog& log) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write event log: " + path);
    for (const Event& ev : log) {
        json j;
        j["t"] = ev.t;
        j["user"] = ev.user;
        j["kind"] = kind_name(ev.kind);
        if (ev.label) j["label"] = label_name(*ev.label);
        if (ev.target) j["target"] = *ev.target;
        out << j.dump() << '\n';
    }
}

Network::Network(Mat adjacency) : adjacency_(std::move(adjacency)) {
    const int n = static_cast<int>(adjacency_.rows());
    if (adjacency_.cols() != n) throw ValidationError("adjacency must be square");
    followers_.resize(n);
    followees_.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double v = adjacency_(i, j);
            if (v != 0.0 && v != 1.0) throw ValidationError("adjacency entries must be 0 or 1");
            if (v == 1.0) {
                if (i == j) throw ValidationError("self-loop in adjacency");
                followers_[i].push_back(j);
                followees_[j].push_back(i);
            }
        }
    }
    gram_ = adjacency_.transpose() * adjacency_;
}

Vec Network::exposure(const Vec& counts) const {
    if (counts.size() != adjacency_.rows())
        throw ValidationError("exposure: count vector size mismatch");
    return adjacency_.transpose() * counts;
}

Network load_network(const std::string& path, int declared_n) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open network: " + path);

    std::string line;
    if (!std::getline(in, line)) throw ValidationError(path + ": empty network file");
    // header "src,dst" required
    if (line.find("src") == std::string::npos)
        throw ValidationError(path + ": expected header 'src,dst'");

    std::vector<std::pair<int, int>> edges;
    int max_index = -1;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string a, b;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b)) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": malformed edge row");
        }
        int src = 0, dst = 0;
        try {
            src = std::stoi(a);
            dst = std::stoi(b);
        } catch (const std::exception&) {
            throw ValidationError(path + ":" + std::to_string(line_no) + ": non-integer edge row");
        }
        if (src < 0 || dst < 0)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": negative index");
        if (src == dst)
            throw ValidationError(path + ":" + std::to_string(line_no) + ": self-loop");
        if (declared_n > 0 && (src >= declared_n || dst >= declared_n))
            throw ValidationError(path + ":" + std::to_string(line_no) +
                                  ": index >= declared N (" + std::to_string(declared_n) + ")");
        edges.emplace_back(src, dst);
        max_index = std::max(max_index, std::max(src, dst));
    }
    const int n = declared_n > 0 ? declared_n : max_index + 1;
    Mat G = Mat::Zero(n, n);
    for (auto [src, dst] : edges) G(src, dst) = 1.0;
    return Network(G);
}

void save_network(const std::string& path, const Network& net) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write network: " + path);
    out << "src,dst\n";
    const Mat& G = net.adjacency();
    for (int i = 0; i < G.rows(); ++i)
        for (int j = 0; j < G.cols(); ++j)
            if (G(i, j) == 1.0) out << i << ',' << j << '\n';
}

StagePartition partition_stages(double start, double end, double dt) {
    if (dt <= 0.0) throw ValidationError("stage length must be positive");
    if (end <= start) throw ValidationError("window must have positive length");
    const double ratio = (end - start) / dt;
    const double rounded = std::round(ratio);
    if (std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
        throw ValidationError("window is not an integer multiple of the stage length");
    StagePartition part;
    part.start = start;
    part.dt = dt;
    part.n_stages = static_cast<int>(rounded);
    return part;
}

int state_column(NewsLabel label, EventKind kind) {
    if (kind == EventKind::Like) return 4;
    const int base = (kind == EventKind::Tweet) ? 0 : 2;
    return base + (label == NewsLabel::True ? 0 : 1);
}

Mat stage_counts(const EventLog& log, int n_users, double t0, double t1) {
    Mat counts = Mat::Zero(n_users, kStateCols);
    for (const Event& ev : log) {
        if (ev.t < t0 || ev.t >= t1) continue;
        if (ev.kind == EventKind::Like) {
            if (ev.target) counts(*ev.target, 4) += 1.0;  // likes received
        } else {
            counts(ev.user, state_column(*ev.label, ev.kind)) += 1.0;
        }
    }
    return counts;
}

Mat compute_state(const EventLog& log, int n_users, const StagePartition& part, int k) {
    if (k < 2 || k > part.n_stages + 1)
        throw ValidationError("compute_state: stage index out of range");
    return stage_counts(log, n_users, part.boundary(k - 2), part.boundary(k - 1));
}

std::vector<Mat> window_states(const EventLog& log, int n_users, const StagePartition& part) {
    std::vector<Mat> states;
    states.reserve(part.n_stages);
    states.push_back(stage_counts(log, n_users, part.start - part.dt, part.start));
    for (int k = 2; k <= part.n_stages; ++k) states.push_back(compute_state(log, n_users, part, k));
    return states;
}

}  // namespace dcpl
