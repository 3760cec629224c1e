#pragma once

#include "dcpl/hawkes.hpp"

#include <string>

namespace dcpl {

// The bundled 20-user synthetic instance: a handful of behavioral archetypes
// with distinct base rates and follower patterns, stable kernels, ω = 1.
Network fixture_network(std::uint64_t seed = 4242);
HawkesModel fixture_model(const Network& net, std::uint64_t seed = 4242);
EventLog fixture_events(const HawkesModel& model, const Network& net, double horizon,
                        std::uint64_t seed = 4242);

// Writes network.csv, events.jsonl and config.json under dir.
void write_fixture(const std::string& dir, std::uint64_t seed = 4242);

// Two-community instance for method comparisons: one block leans fake-active,
// the other true-responsive, with hub users in both.
Network two_block_network(int n_users, std::uint64_t seed);
HawkesModel two_block_model(const Network& net, std::uint64_t seed);

// Small random stable models for oracles and property tests.
HawkesModel random_stable_model(const Network& net, double target_radius, std::uint64_t seed);
Network random_network(int n_users, double edge_probability, std::uint64_t seed);

}  // namespace dcpl
