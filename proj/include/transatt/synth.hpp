#pragma once

#include "transatt/kb.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace transatt {

struct SynthConfig {
    int num_root_classes = 5;
    int branching_min = 2;       // first-level children per root
    int branching_max = 3;
    int depth_min = 3;           // classes per path, including the root
    int depth_max = 5;
    int num_attributes = 50;
    int attrs_per_path_min = 5;
    int attrs_per_path_max = 8;
    int num_entities = 1000;
    double paths_per_entity_mean = 2.0; // truncated geometric over {1..4}
    // Fraction of a path's planted attributes drawn from the class signatures
    // shared with sibling paths; the rest are exclusive draws. Zero makes the
    // planted sets of paths within a tree pairwise disjoint.
    double attr_overlap_fraction = 0.8;
    double holdout_path_fraction = 0.15;
    std::uint64_t seed = 42;

    void validate() const;
};

struct SynthResult {
    KbSubset kb; // r3 populated with the planted truth
    std::vector<std::string> train_entities;
    std::vector<std::string> test_entities;
    std::vector<ClassPath> holdout_paths; // never attached to a train entity
};

// Deterministic by seed. Entities attach to terminal classes; an entity's r2
// attributes are the union of its paths' planted sets, which is exactly the
// ambiguity the attention model has to resolve.
SynthResult generate(const SynthConfig& cfg);

// TSV files in the kb-core formats plus split lists, the holdout path list,
// and a manifest echoing the config. Byte-stable for a given seed.
void export_kb(const SynthResult& result, const SynthConfig& cfg, const std::string& dir);

// Truncated geometric success probability giving the requested mean over
// {1..k_max}; exposed for tests.
double trunc_geom_param(double mean, int k_max);

} // namespace transatt
