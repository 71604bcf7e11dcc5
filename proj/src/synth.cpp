#include "transatt/synth.hpp"

#include "transatt/error.hpp"
#include "transatt/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

namespace transatt {

namespace {

constexpr int kMaxPathsPerEntity = 4;
constexpr int kDiamondsPerTree = 5;

const char* kRootNames[] = {"thing", "abstraction", "person", "organism",
                            "artifact", "event", "place", "substance"};

struct TreeNode {
    std::string name;
    int depth = 1; // root = 1; every hypernym edge decreases depth by one
    std::vector<int> parents;
};

struct Tree {
    int root = -1;
    std::vector<int> nodes;  // indices into the global node table
    std::vector<int> leaves; // filled after growth
};

struct Taxonomy {
    std::vector<TreeNode> table;
    std::vector<Tree> trees;
    std::map<int, int> tree_of; // node -> tree index

    int add_node(int tree, const std::string& name, int depth, int parent) {
        TreeNode n;
        n.name = name;
        n.depth = depth;
        if (parent >= 0) n.parents.push_back(parent);
        table.push_back(std::move(n));
        int id = static_cast<int>(table.size()) - 1;
        trees[tree].nodes.push_back(id);
        tree_of[id] = tree;
        return id;
    }
};

double trunc_geom_mean(double q, int k_max) {
    double num = 0.0, den = 0.0, w = 1.0;
    for (int k = 1; k <= k_max; ++k) {
        num += k * w;
        den += w;
        w *= 1.0 - q;
    }
    return num / den;
}

int draw_trunc_geom(double q, int k_max, SplitMix64& rng) {
    double w = 1.0, den = 0.0;
    std::vector<double> probs;
    for (int k = 1; k <= k_max; ++k) {
        probs.push_back(w);
        den += w;
        w *= 1.0 - q;
    }
    double u = rng.uniform01() * den;
    double acc = 0.0;
    for (int k = 1; k <= k_max; ++k) {
        acc += probs[k - 1];
        if (u < acc) return k;
    }
    return k_max;
}

std::string root_name(int t) {
    if (t < static_cast<int>(std::size(kRootNames))) return kRootNames[t];
    return "domain" + std::to_string(t);
}

// All root-to-node walks (root-first), sorted lexicographically.
std::vector<ClassPath> paths_to(const Taxonomy& tax, int node) {
    std::vector<ClassPath> out;
    std::vector<int> chain;
    auto ascend = [&](auto&& self, int n) -> void {
        chain.push_back(n);
        if (tax.table[n].parents.empty()) {
            ClassPath p;
            for (auto it = chain.rbegin(); it != chain.rend(); ++it)
                p.classes.push_back(tax.table[*it].name);
            out.push_back(std::move(p));
        } else {
            for (int parent : tax.table[n].parents) self(self, parent);
        }
        chain.pop_back();
    };
    ascend(ascend, node);
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace

double trunc_geom_param(double mean, int k_max) {
    // Weights (1-q)^(k-1) over {1..k_max}; q < 0 tilts the distribution
    // upward, which is needed for means above the uniform midpoint.
    if (mean <= 1.0) return 1.0;
    double lo = -50.0, hi = 1.0 - 1e-12;
    if (mean >= k_max - 1e-9) return lo;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (trunc_geom_mean(mid, k_max) > mean)
            lo = mid; // larger q -> smaller mean
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

void SynthConfig::validate() const {
    if (num_root_classes < 1) fail_config("num_root_classes must be >= 1");
    if (branching_min < 1 || branching_max < branching_min)
        fail_config("branching range must satisfy 1 <= min <= max");
    if (depth_min < 2 || depth_max > 8 || depth_max < depth_min)
        fail_config("depth range must lie within [2, 8]");
    if (num_attributes < 1 || num_entities < 1) fail_config("counts must be >= 1");
    if (attrs_per_path_min < 1 || attrs_per_path_max < attrs_per_path_min)
        fail_config("attrs_per_path range must satisfy 1 <= min <= max");
    if (attrs_per_path_max > num_attributes)
        fail_config("attrs_per_path exceeds the number of attributes");
    if (paths_per_entity_mean < 1.0 || paths_per_entity_mean > kMaxPathsPerEntity)
        fail_config("paths_per_entity_mean must be within [1, 4]");
    if (attr_overlap_fraction < 0.0 || attr_overlap_fraction > 1.0)
        fail_config("attr_overlap_fraction must be in [0, 1]");
    if (holdout_path_fraction < 0.0 || holdout_path_fraction > 1.0)
        fail_config("holdout_path_fraction must be in [0, 1]");
}

SynthResult generate(const SynthConfig& cfg) {
    cfg.validate();
    SplitMix64 rng(cfg.seed);

    // Attribute pools: one contiguous slice of the attribute universe per
    // tree, so attribute identity correlates with the taxonomy subtree.
    std::vector<std::vector<std::string>> pools(cfg.num_root_classes);
    {
        int per = cfg.num_attributes / cfg.num_root_classes;
        int extra = cfg.num_attributes % cfg.num_root_classes;
        int next = 0;
        for (int t = 0; t < cfg.num_root_classes; ++t) {
            int take = per + (t < extra ? 1 : 0);
            for (int k = 0; k < take; ++k)
                pools[t].push_back(root_name(t) + "_attr" + std::to_string(next++));
        }
        for (int t = 0; t < cfg.num_root_classes; ++t)
            if (static_cast<int>(pools[t].size()) < cfg.attrs_per_path_max)
                fail_config("infeasible config: subtree attribute pool smaller than attrs_per_path_max");
    }

    // Taxonomy growth: per tree, a trunk to the tree's depth plus chains
    // branching off existing nodes.
    Taxonomy tax;
    tax.trees.resize(cfg.num_root_classes);
    for (int t = 0; t < cfg.num_root_classes; ++t) {
        Tree& tree = tax.trees[t];
        int counter = 0;
        auto fresh = [&](int depth, int parent) {
            return tax.add_node(t, root_name(t) + "_c" + std::to_string(counter++), depth, parent);
        };
        int depth_target = cfg.depth_min +
                           static_cast<int>(rng.below(cfg.depth_max - cfg.depth_min + 1));
        tree.root = tax.add_node(t, root_name(t), 1, -1);
        std::map<int, std::vector<int>> by_depth;
        by_depth[1].push_back(tree.root);

        int chains = cfg.branching_min + 1 +
                     static_cast<int>(rng.below(cfg.branching_max - cfg.branching_min + 2));
        for (int l = 0; l < chains; ++l) {
            int d_leaf, branch_depth;
            if (l == 0) {
                d_leaf = depth_target;
                branch_depth = 1;
            } else {
                d_leaf = cfg.depth_min + static_cast<int>(rng.below(depth_target - cfg.depth_min + 1));
                // bias branch points deep: short twigs off shared trunks
                int d1 = 1 + static_cast<int>(rng.below(d_leaf - 1));
                int d2 = 1 + static_cast<int>(rng.below(d_leaf - 1));
                branch_depth = std::max(d1, d2);
            }
            const auto& anchors = by_depth[branch_depth];
            int anchor = anchors[rng.below(anchors.size())];
            int node = anchor;
            for (int d = branch_depth + 1; d <= d_leaf; ++d) {
                node = fresh(d, node);
                by_depth[d].push_back(node);
            }
        }

        // Diamond edges: give some non-root classes a second hypernym at the
        // same depth so their leaves carry multiple class-paths.
        // Alternative parents must already be internal nodes, otherwise a
        // diamond would silently consume a leaf.
        std::set<int> internal;
        for (int n : tree.nodes)
            for (int p : tax.table[n].parents) internal.insert(p);
        for (int d = 0; d < kDiamondsPerTree; ++d) {
            // Prefer upper-mid nodes: their whole subtree gains a second walk.
            std::vector<int> targets;
            for (int pass = 0; pass < 2 && targets.empty(); ++pass) {
                for (int n : tree.nodes) {
                    int nd = tax.table[n].depth;
                    if (nd < 3) continue;
                    if (pass == 0 && nd > 3) continue;
                    std::vector<int> alt;
                    for (int u : by_depth[nd - 1])
                        if (internal.count(u) &&
                            std::find(tax.table[n].parents.begin(), tax.table[n].parents.end(), u) ==
                                tax.table[n].parents.end())
                            alt.push_back(u);
                    if (alt.empty()) continue;
                    targets.push_back(n);
                }
            }
            if (targets.empty()) break;
            int v = targets[rng.below(targets.size())];
            std::vector<int> alt;
            for (int u : by_depth[tax.table[v].depth - 1])
                if (internal.count(u) &&
                    std::find(tax.table[v].parents.begin(), tax.table[v].parents.end(), u) ==
                        tax.table[v].parents.end())
                    alt.push_back(u);
            tax.table[v].parents.push_back(alt[rng.below(alt.size())]);
            std::sort(tax.table[v].parents.begin(), tax.table[v].parents.end());
        }
    }

    // Leaves = classes with no hyponym class below them.
    auto recompute_leaves = [&] {
        std::set<int> has_child;
        for (const auto& tree : tax.trees)
            for (int n : tree.nodes)
                for (int p : tax.table[n].parents) has_child.insert(p);
        for (auto& tree : tax.trees) {
            tree.leaves.clear();
            for (int n : tree.nodes)
                if (!has_child.count(n)) tree.leaves.push_back(n);
        }
    };
    recompute_leaves();

    // Single-walk leaves serve two populations: the holdout pool and the
    // preferred attachment points for entities. Grow extra twig leaves off
    // single-walk internal nodes so every tree keeps a reserve of them even
    // after the holdout is carved out.
    std::map<int, long> walks; // node -> number of root walks
    {
        std::vector<int> order_nodes;
        for (const auto& tree : tax.trees)
            for (int n : tree.nodes) order_nodes.push_back(n);
        // parents always sit at strictly smaller depth
        std::sort(order_nodes.begin(), order_nodes.end(), [&](int a, int b) {
            if (tax.table[a].depth != tax.table[b].depth) return tax.table[a].depth < tax.table[b].depth;
            return a < b;
        });
        for (int n : order_nodes) {
            if (tax.table[n].parents.empty()) {
                walks[n] = 1;
                continue;
            }
            long w = 0;
            for (int p : tax.table[n].parents) w += walks[p];
            walks[n] = w;
        }
        std::map<int, int> children;
        for (const auto& tree : tax.trees)
            for (int n : tree.nodes)
                for (int p : tax.table[n].parents) ++children[p];
        long walks_total = 0;
        for (const auto& tree : tax.trees)
            for (int n : tree.leaves) walks_total += walks[n];
        long quota = std::llround(cfg.holdout_path_fraction * static_cast<double>(walks_total));
        long need_per_tree = 2 + (quota + cfg.num_root_classes - 1) / cfg.num_root_classes;
        int twig_id = 0;
        for (int t = 0; t < cfg.num_root_classes; ++t) {
            long singles = 0;
            for (int n : tax.trees[t].leaves)
                if (walks[n] == 1) ++singles;
            while (singles < need_per_tree) {
                std::vector<int> anchors;
                for (int n : tax.trees[t].nodes)
                    if (children[n] > 0 && walks[n] == 1 && tax.table[n].depth >= cfg.depth_min - 1 &&
                        tax.table[n].depth < cfg.depth_max)
                        anchors.push_back(n);
                if (anchors.empty()) break;
                int anchor = anchors[rng.below(anchors.size())];
                int leaf = tax.add_node(t, root_name(t) + "_t" + std::to_string(twig_id++),
                                        tax.table[anchor].depth + 1, anchor);
                walks[leaf] = 1;
                ++children[anchor];
                ++singles;
            }
        }
        recompute_leaves();
    }

    // Class signatures: two attributes of the subtree pool per class, three
    // for the root. Shared planting walks these root-first, so even short
    // paths inherit enough ancestor attributes to fill their shared quota.
    std::map<int, std::vector<std::string>> sig;
    for (int t = 0; t < cfg.num_root_classes; ++t) {
        const auto& pool = pools[t];
        for (int n : tax.trees[t].nodes) {
            int want = tax.table[n].parents.empty() ? 3 : 2;
            want = std::min<int>(want, static_cast<int>(pool.size()));
            std::set<std::string> chosen;
            while (static_cast<int>(chosen.size()) < want)
                chosen.insert(pool[rng.below(pool.size())]);
            sig[n].assign(chosen.begin(), chosen.end());
        }
    }

    // Plant one attribute set per root-to-leaf path.
    std::map<std::string, std::vector<std::string>> planted; // joined path -> attrs
    std::map<int, std::vector<ClassPath>> leaf_paths;
    std::map<int, std::map<std::string, int>> class_index; // per tree: name -> node
    for (int t = 0; t < cfg.num_root_classes; ++t)
        for (int n : tax.trees[t].nodes) class_index[t][tax.table[n].name] = n;

    for (int t = 0; t < cfg.num_root_classes; ++t) {
        const auto& pool = pools[t];
        std::set<std::string> used_in_tree;
        std::vector<std::pair<std::string, ClassPath>> tree_paths;
        for (int leaf : tax.trees[t].leaves) {
            leaf_paths[leaf] = paths_to(tax, leaf);
            for (const auto& p : leaf_paths[leaf]) tree_paths.emplace_back(join_path(p), p);
        }
        std::sort(tree_paths.begin(), tree_paths.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });

        for (const auto& [joined, path] : tree_paths) {
            int k_p = cfg.attrs_per_path_min +
                      static_cast<int>(rng.below(cfg.attrs_per_path_max - cfg.attrs_per_path_min + 1));
            int shared_quota = static_cast<int>(std::llround(cfg.attr_overlap_fraction * k_p));
            std::vector<std::string> attrs;
            std::set<std::string> in_path;
            // Shared attributes are inherited from the ancestor classes,
            // root-first; the terminal class only contributes exclusives.
            for (std::size_t ci = 0; ci + 1 < path.classes.size(); ++ci) {
                if (static_cast<int>(attrs.size()) >= shared_quota) break;
                for (const auto& a : sig.at(class_index[t].at(path.classes[ci]))) {
                    if (static_cast<int>(attrs.size()) >= shared_quota) break;
                    if (in_path.insert(a).second) attrs.push_back(a);
                }
            }
            while (static_cast<int>(attrs.size()) < k_p) {
                std::vector<std::string> unused;
                for (const auto& a : pool)
                    if (!used_in_tree.count(a) && !in_path.count(a)) unused.push_back(a);
                if (!unused.empty()) {
                    const std::string& a = unused[rng.below(unused.size())];
                    used_in_tree.insert(a);
                    in_path.insert(a);
                    attrs.push_back(a);
                    continue;
                }
                if (cfg.attr_overlap_fraction == 0.0)
                    fail_config("infeasible config: attr_overlap_fraction=0 needs " +
                                std::to_string(k_p) + " unused attributes per path in tree " +
                                root_name(t));
                std::vector<std::string> fallback;
                for (const auto& a : pool)
                    if (!in_path.count(a)) fallback.push_back(a);
                if (fallback.empty()) break; // path already holds the whole pool
                const std::string& a = fallback[rng.below(fallback.size())];
                in_path.insert(a);
                attrs.push_back(a);
            }
            std::sort(attrs.begin(), attrs.end());
            planted[joined] = std::move(attrs);
        }
    }

    // Holdout selection: only leaves whose non-terminal classes all appear on
    // some other leaf's path, so an unseen path differs from the training
    // vocabulary in its terminal word only.
    std::map<std::string, std::set<int>> class_leaves;
    long total_paths = 0;
    std::vector<int> all_leaves;
    for (const auto& [leaf, paths] : leaf_paths) {
        all_leaves.push_back(leaf);
        total_paths += static_cast<long>(paths.size());
        for (const auto& p : paths)
            for (const auto& c : p.classes) class_leaves[c].insert(leaf);
    }
    long holdout_target = std::llround(cfg.holdout_path_fraction * static_cast<double>(total_paths));
    std::set<int> holdout_leaves;
    {
        std::map<int, long> retained_singles; // per tree
        for (int leaf : all_leaves)
            if (leaf_paths[leaf].size() == 1) ++retained_singles[tax.tree_of.at(leaf)];
        std::vector<int> shuffled = all_leaves;
        shuffle(shuffled, rng);
        long taken = 0;
        for (int leaf : shuffled) {
            if (taken >= holdout_target) break;
            // Only single-walk leaves whose ancestors all appear on other
            // retained paths qualify: the unseen path then differs from the
            // training vocabulary in its terminal word alone. Each tree also
            // keeps a reserve of single-walk leaves for entity attachment.
            if (leaf_paths[leaf].size() != 1) continue;
            if (retained_singles[tax.tree_of.at(leaf)] <= 2) continue;
            bool eligible = true;
            for (const auto& p : leaf_paths[leaf]) {
                for (std::size_t i = 0; i + 1 < p.classes.size() && eligible; ++i) {
                    const auto& owners = class_leaves[p.classes[i]];
                    if (owners.size() == 1 && owners.count(leaf)) eligible = false;
                }
            }
            if (!eligible) continue;
            holdout_leaves.insert(leaf);
            --retained_singles[tax.tree_of.at(leaf)];
            taken += static_cast<long>(leaf_paths[leaf].size());
        }
    }

    // Entities: draw a target path count, then terminal classes from distinct
    // trees. Train entities never touch holdout leaves.
    SynthResult result;
    KbSubset& kb = result.kb;
    kb.r3.emplace();
    for (const auto& [joined, attrs] : planted)
        for (const auto& a : attrs) kb.r3->insert({joined, a});
    for (const auto& node : tax.table) kb.classes.insert(node.name);
    for (const auto& node : tax.table)
        for (int p : node.parents) kb.r1_class_edges.insert({node.name, tax.table[p].name});
    // The attribute inventory is whatever got planted; pool slots that no
    // path drew simply do not exist in the kb.
    for (const auto& [joined, attrs] : planted)
        for (const auto& a : attrs) kb.attributes.insert(a);

    std::vector<int> train_pool, full_pool;
    for (int leaf : all_leaves) {
        full_pool.push_back(leaf);
        if (!holdout_leaves.count(leaf)) train_pool.push_back(leaf);
    }
    if (train_pool.empty()) fail_config("holdout fraction leaves no trainable leaves");

    const double geom_q = trunc_geom_param(cfg.paths_per_entity_mean, kMaxPathsPerEntity);
    const int digits = static_cast<int>(std::to_string(cfg.num_entities - 1).size());

    for (int e = 0; e < cfg.num_entities; ++e) {
        std::string id = "e" + std::to_string(e);
        while (static_cast<int>(id.size()) < digits + 1) id.insert(1, "0");
        bool is_test = rng.uniform01() < 0.2;
        const std::vector<int>& pool = is_test ? full_pool : train_pool;

        int target = draw_trunc_geom(geom_q, kMaxPathsPerEntity, rng);
        std::set<int> trees_used;
        std::vector<int> chosen;
        int paths_have = 0;
        while (paths_have < target) {
            std::vector<int> candidates;
            for (int leaf : pool) {
                if (trees_used.count(tax.tree_of.at(leaf))) continue;
                candidates.push_back(leaf);
            }
            if (candidates.empty()) break;
            int remaining = target - paths_have;
            // Multi-role entities span terminal classes; prefer single-walk
            // leaves and fall back to diamond leaves only when necessary.
            std::vector<int> single, fitting;
            for (int leaf : candidates) {
                if (static_cast<int>(leaf_paths[leaf].size()) > remaining) continue;
                fitting.push_back(leaf);
                if (leaf_paths[leaf].size() == 1) single.push_back(leaf);
            }
            const std::vector<int>& from =
                !single.empty() ? single : (!fitting.empty() ? fitting : candidates);
            int leaf = from[rng.below(from.size())];
            chosen.push_back(leaf);
            trees_used.insert(tax.tree_of.at(leaf));
            paths_have += static_cast<int>(leaf_paths[leaf].size());
        }
        if (chosen.empty()) chosen.push_back(pool[rng.below(pool.size())]);

        kb.entities.insert(id);
        for (int leaf : chosen) {
            kb.r1_entity_edges.insert({tax.table[leaf].name, id});
            for (const auto& p : leaf_paths[leaf])
                for (const auto& a : planted.at(join_path(p))) kb.r2.insert({id, a});
        }
        (is_test ? result.test_entities : result.train_entities).push_back(id);
    }
    std::sort(result.train_entities.begin(), result.train_entities.end());
    std::sort(result.test_entities.begin(), result.test_entities.end());

    for (int leaf : holdout_leaves)
        for (const auto& p : leaf_paths[leaf]) result.holdout_paths.push_back(p);
    std::sort(result.holdout_paths.begin(), result.holdout_paths.end());
    return result;
}

void export_kb(const SynthResult& result, const SynthConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    auto report = validate_kb(result.kb);
    if (!report.empty()) fail_data("generated knowledge base failed validation: " + report[0].detail);
    save_kb_dir(result.kb, dir);

    auto write_lines = [&](const std::string& name, const std::vector<std::string>& lines,
                           const std::string& header) {
        std::ofstream out(fs::path(dir) / name);
        if (!out) fail_data("cannot write " + name + " in " + dir);
        out << "# " << header << "\n";
        for (const auto& l : lines) out << l << "\n";
    };
    write_lines("split_train.txt", result.train_entities, "training entities");
    write_lines("split_test.txt", result.test_entities, "test entities");
    std::vector<std::string> holdout;
    for (const auto& p : result.holdout_paths) holdout.push_back(join_path(p));
    write_lines("holdout_paths.txt", holdout, "class-paths never seen by training entities");

    long paths = 0;
    std::set<std::string> leaves;
    for (const auto& [cls, ent] : result.kb.r1_entity_edges) leaves.insert(cls);
    std::set<std::string> r3_paths;
    if (result.kb.r3)
        for (const auto& [p, a] : *result.kb.r3) r3_paths.insert(p);
    paths = static_cast<long>(r3_paths.size());

    nlohmann::json manifest;
    manifest["format"] = "transatt-synth-v1";
    manifest["config"] = {{"num_root_classes", cfg.num_root_classes},
                          {"branching_min", cfg.branching_min},
                          {"branching_max", cfg.branching_max},
                          {"depth_min", cfg.depth_min},
                          {"depth_max", cfg.depth_max},
                          {"num_attributes", cfg.num_attributes},
                          {"attrs_per_path_min", cfg.attrs_per_path_min},
                          {"attrs_per_path_max", cfg.attrs_per_path_max},
                          {"num_entities", cfg.num_entities},
                          {"paths_per_entity_mean", cfg.paths_per_entity_mean},
                          {"attr_overlap_fraction", cfg.attr_overlap_fraction},
                          {"holdout_path_fraction", cfg.holdout_path_fraction},
                          {"seed", cfg.seed}};
    manifest["stats"] = {{"classes", result.kb.classes.size()},
                         {"class_edges", result.kb.r1_class_edges.size()},
                         {"attributes", result.kb.attributes.size()},
                         {"entities", result.kb.entities.size()},
                         {"terminal_classes", leaves.size()},
                         {"class_paths", paths},
                         {"r2_pairs", result.kb.r2.size()},
                         {"r3_pairs", result.kb.r3 ? result.kb.r3->size() : 0},
                         {"holdout_paths", result.holdout_paths.size()},
                         {"train_entities", result.train_entities.size()},
                         {"test_entities", result.test_entities.size()}};
    std::ofstream out(fs::path(dir) / "manifest.json");
    if (!out) fail_data("cannot write manifest.json in " + dir);
    out << manifest.dump(1) << "\n";
}

} // namespace transatt
