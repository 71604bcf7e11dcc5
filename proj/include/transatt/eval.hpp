#pragma once

#include "transatt/kb.hpp"
#include "transatt/model.hpp"

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace transatt {

struct RankedResult {
    std::string query; // entity id or slash-joined path
    std::vector<RankedAttribute> ranked;
    std::optional<Mat> attention;
};

// One evaluated query for metric computation: the ranked attribute indices
// (ascending score) and the relevant set.
struct QueryRelevance {
    std::vector<int> ranked;
    std::set<int> relevant;
};

// |top-k intersect relevant| / k. The denominator stays k even when fewer
// than k results exist.
double precision_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k);

// Mean of per-query P@k over Q >= 1 queries.
double mean_precision_at_k(std::span<const QueryRelevance> queries, int k);

// Fraction of queries whose top-k contains at least one relevant attribute.
double hits_at_k(std::span<const QueryRelevance> queries, int k);

struct CategoryMetrics {
    int query_count = 0;
    std::map<int, double> hits_at_k;
    std::map<int, double> mean_p_at_k;
};

struct EvalReport {
    std::string task; // "APE" or "APC"
    std::vector<int> ks;
    std::string truth_source;
    CategoryMetrics overall;
    std::map<std::string, CategoryMetrics> per_category; // keyed by root class
    int skipped = 0;  // APE: test entities with no class-path
    int all_oov = 0;  // APC: paths whose every class word is out of vocabulary
};

inline const std::vector<int> kDefaultKs = {1, 5, 10, 15, 20};

// Pluggable rankers so the harness can run against an oracle in tests.
using EntityRankerFn = std::function<std::vector<RankedAttribute>(const PathSet&, int k,
                                                                  const std::set<int>& filter)>;
using PathRankerFn = std::function<std::vector<RankedAttribute>(const ClassPath&, int k)>;

// Attribute prediction for entities: rank candidates (minus the common
// attribute filter) per test entity, relevance against its r2 attributes.
EvalReport run_ape(const ModelCheckpoint& m, const KbSubset& test_kb,
                   const std::vector<int>& ks, const std::set<std::string>& filter_names);
EvalReport run_ape_with(const EntityRankerFn& ranker, const std::vector<std::string>& attr_names,
                        const KbSubset& test_kb, const std::vector<int>& ks,
                        const std::set<std::string>& filter_names);

// Attribute prediction for class-paths: rank every attribute per path,
// relevance from the planted r3 ground truth.
EvalReport run_apc(const ModelCheckpoint& m, const std::vector<ClassPath>& paths,
                   const std::set<std::pair<std::string, std::string>>& r3,
                   const std::vector<int>& ks);
EvalReport run_apc_with(const PathRankerFn& ranker, const std::vector<std::string>& attr_names,
                        const std::function<bool(const ClassPath&)>& all_oov,
                        const std::vector<ClassPath>& paths,
                        const std::set<std::pair<std::string, std::string>>& r3,
                        const std::vector<int>& ks);

std::string report_to_json(const EvalReport& r);
EvalReport report_from_json(const std::string& json_text);
// Aligned plain-text table: one column per category plus Overall.
std::string report_to_table(const EvalReport& r);

} // namespace transatt
