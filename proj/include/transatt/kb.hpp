#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace transatt {

// Ordered root-first sequence of class words along hypernym-hyponym edges.
struct ClassPath {
    std::vector<std::string> classes;

    int length() const { return static_cast<int>(classes.size()); }
    bool operator==(const ClassPath& o) const = default;
    auto operator<=>(const ClassPath& o) const = default;
};

std::string join_path(const ClassPath& p);          // "root/x/y"
ClassPath parse_path(const std::string& s);         // accepts an optional leading '/'

// All class-paths of one entity, ordered lexicographically by class sequence.
struct PathSet {
    std::string entity;
    std::vector<ClassPath> paths;

    bool empty() const { return paths.empty(); }
};

struct TrainingTuple {
    PathSet path_set;
    std::string attribute;
};

// The knowledge-base subset: entities, classes, attributes, the is-a edges at
// class and entity level, entity-attribute pairs, and (synthetic data only)
// the planted path-attribute ground truth.
struct KbSubset {
    std::set<std::string> entities;
    std::set<std::string> classes;
    std::set<std::string> attributes;
    std::set<std::pair<std::string, std::string>> r1_class_edges;  // (hyponym, hypernym)
    std::set<std::pair<std::string, std::string>> r1_entity_edges; // (class, entity)
    std::set<std::pair<std::string, std::string>> r2;              // (entity, attribute)
    std::optional<std::set<std::pair<std::string, std::string>>> r3; // (joined path, attribute)

    bool operator==(const KbSubset& o) const = default;
};

struct Violation {
    std::string kind;   // "cycle", "self-loop", "dangling", "path-too-long"
    std::string detail;
};

struct KbOptions {
    int max_path_length = 16;
};

// Empty report iff every structural invariant holds.
std::vector<Violation> validate_kb(const KbSubset& kb, const KbOptions& opts = {});

// All maximal root-to-direct-class paths of `entity`. An entity with no class
// yields an empty PathSet; an unknown entity is a data error.
PathSet extract_class_paths(const KbSubset& kb, const std::string& entity,
                            const KbOptions& opts = {});

struct Dataset {
    std::vector<TrainingTuple> tuples;
    std::set<std::string> retained_attributes;
};

// Drops entities without attributes, then attributes supported by fewer than
// min_attr_support distinct entities, then emits one tuple per surviving
// (entity, attribute) pair whose entity has a non-empty PathSet.
Dataset build_dataset(const KbSubset& kb, int min_attr_support, const KbOptions& opts = {});

// --- file formats ---------------------------------------------------------
// taxonomy.tsv       hyponym-class <TAB> hypernym-class
// entity_class.tsv   entity <TAB> class
// entity_attr.tsv    entity <TAB> attribute
// ground_truth_r3.tsv  slash-joined-class-path <TAB> attribute   (optional)
// Lines starting with '#' are comments; blank lines ignored; duplicates
// deduplicated silently.

KbSubset load_kb_dir(const std::string& dir);
void save_kb_dir(const KbSubset& kb, const std::string& dir);

// Entity list files: one entity id per line (same comment/blank rules).
std::vector<std::string> load_id_list(const std::string& path);

// Same taxonomy and attribute inventory, entities restricted to `keep`.
KbSubset restrict_entities(const KbSubset& kb, const std::set<std::string>& keep);

} // namespace transatt
