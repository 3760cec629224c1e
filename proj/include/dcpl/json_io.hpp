#pragma once

#include "dcpl/pipeline.hpp"

#include <string>

namespace dcpl {

// Model document: {"processes": {<name>: {"mu": [...], "omega": w,
// "kernel": {"dense": [[...]]} | {"rank": r, "U": [[...]], "V": [[...]]}}}}.
// The activity kernel is written under both label processes; load verifies
// the pair matches.
void save_model(const std::string& path, const HawkesModel& model);
HawkesModel load_model(const std::string& path);

// Checkpoints: {"theta": {"layers": [{"W": [[...]], "b": [...]}, ...]},
// "phi": {...}, "meta": {...}}.
struct CheckpointMeta {
    int n_clusters = 0;
    int n_users = 0;
    std::uint64_t seed = 0;
    int epoch = 0;
    std::string method;
};

void save_checkpoint(const std::string& path, const Mlp& policy, const Mlp& value,
                     const CheckpointMeta& meta);
void load_checkpoint(const std::string& path, Mlp& policy, Mlp& value, CheckpointMeta& meta);

void save_plans(const std::string& path, const std::vector<InterventionPlan>& plans);
std::vector<InterventionPlan> load_plans(const std::string& path);

void save_run_config(const std::string& path, const RunConfig& cfg);
RunConfig load_run_config(const std::string& path);

void save_assignment_csv(const std::string& path, const VecI& assignment);
VecI load_assignment_csv(const std::string& path, int n_users);

}  // namespace dcpl
