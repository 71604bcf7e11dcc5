#include "transatt/eval.hpp"

#include "transatt/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace transatt {

namespace {

using nlohmann::json;

int max_k(const std::vector<int>& ks) {
    if (ks.empty()) fail_config("empty k list");
    int mx = 0;
    for (int k : ks) {
        if (k < 1) fail_config("k values must be >= 1");
        mx = std::max(mx, k);
    }
    return mx;
}

struct Query {
    std::string category;
    QueryRelevance qr;
};

CategoryMetrics metrics_for(std::span<const QueryRelevance> queries, const std::vector<int>& ks) {
    CategoryMetrics cm;
    cm.query_count = static_cast<int>(queries.size());
    for (int k : ks) {
        cm.hits_at_k[k] = hits_at_k(queries, k);
        cm.mean_p_at_k[k] = mean_precision_at_k(queries, k);
    }
    return cm;
}

EvalReport aggregate_report(const std::string& task, const std::vector<int>& ks,
                            const std::vector<Query>& queries) {
    if (queries.empty()) fail_data("no queries to evaluate");
    EvalReport r;
    r.task = task;
    r.ks = ks;

    std::vector<QueryRelevance> all;
    std::map<std::string, std::vector<QueryRelevance>> by_cat;
    for (const auto& q : queries) {
        all.push_back(q.qr);
        by_cat[q.category].push_back(q.qr);
    }
    r.overall = metrics_for(all, ks);
    for (const auto& [cat, qs] : by_cat) r.per_category[cat] = metrics_for(qs, ks);
    return r;
}

json metrics_to_json(const CategoryMetrics& cm) {
    json hits = json::object(), meanp = json::object();
    for (const auto& [k, v] : cm.hits_at_k) hits[std::to_string(k)] = v;
    for (const auto& [k, v] : cm.mean_p_at_k) meanp[std::to_string(k)] = v;
    return json{{"query_count", cm.query_count}, {"hits_at_k", hits}, {"mean_p_at_k", meanp}};
}

CategoryMetrics metrics_from_json(const json& j) {
    CategoryMetrics cm;
    cm.query_count = j.at("query_count").get<int>();
    for (const auto& [k, v] : j.at("hits_at_k").items()) cm.hits_at_k[std::stoi(k)] = v.get<double>();
    for (const auto& [k, v] : j.at("mean_p_at_k").items()) cm.mean_p_at_k[std::stoi(k)] = v.get<double>();
    return cm;
}

} // namespace

double precision_at_k(const std::vector<int>& ranked, const std::set<int>& relevant, int k) {
    if (k < 1) fail_config("k must be >= 1");
    int hits = 0;
    int upto = std::min<int>(k, static_cast<int>(ranked.size()));
    for (int i = 0; i < upto; ++i)
        if (relevant.count(ranked[i])) ++hits;
    return static_cast<double>(hits) / static_cast<double>(k);
}

double mean_precision_at_k(std::span<const QueryRelevance> queries, int k) {
    if (queries.empty()) fail_data("mean P@k over zero queries");
    double sum = 0.0;
    for (const auto& q : queries) sum += precision_at_k(q.ranked, q.relevant, k);
    return sum / static_cast<double>(queries.size());
}

double hits_at_k(std::span<const QueryRelevance> queries, int k) {
    if (queries.empty()) fail_data("Hits@k over zero queries");
    int hit = 0;
    for (const auto& q : queries) {
        int upto = std::min<int>(k, static_cast<int>(q.ranked.size()));
        for (int i = 0; i < upto; ++i) {
            if (q.relevant.count(q.ranked[i])) {
                ++hit;
                break;
            }
        }
    }
    return static_cast<double>(hit) / static_cast<double>(queries.size());
}

EvalReport run_ape_with(const EntityRankerFn& ranker, const std::vector<std::string>& attr_names,
                        const KbSubset& test_kb, const std::vector<int>& ks,
                        const std::set<std::string>& filter_names) {
    int mk = max_k(ks);
    std::map<std::string, int> attr_index;
    for (std::size_t i = 0; i < attr_names.size(); ++i) attr_index[attr_names[i]] = static_cast<int>(i);

    std::set<int> filter;
    for (const auto& name : filter_names) {
        auto it = attr_index.find(name);
        if (it != attr_index.end()) filter.insert(it->second);
    }
    if (static_cast<int>(filter.size()) >= static_cast<int>(attr_names.size()))
        fail_data("common-attribute filter removes every candidate attribute");

    std::map<std::string, std::set<int>> gold;
    for (const auto& [e, a] : test_kb.r2) {
        auto it = attr_index.find(a);
        if (it != attr_index.end()) gold[e].insert(it->second);
    }

    std::vector<Query> queries;
    int skipped = 0;
    for (const auto& entity : test_kb.entities) {
        PathSet ps = extract_class_paths(test_kb, entity);
        if (ps.empty()) {
            ++skipped;
            continue;
        }
        std::vector<RankedAttribute> ranked = ranker(ps, mk, filter);
        Query q;
        q.category = ps.paths.front().classes.front();
        for (const auto& ra : ranked) q.qr.ranked.push_back(ra.attr);
        auto git = gold.find(entity);
        if (git != gold.end()) q.qr.relevant = git->second;
        queries.push_back(std::move(q));
    }

    EvalReport r = aggregate_report("APE", ks, queries);
    r.skipped = skipped;
    r.truth_source = test_kb.r3 ? "planted-r2" : "observed-r2";
    return r;
}

EvalReport run_ape(const ModelCheckpoint& m, const KbSubset& test_kb,
                   const std::vector<int>& ks, const std::set<std::string>& filter_names) {
    EntityRankerFn ranker = [&m](const PathSet& ps, int k, const std::set<int>& filter) {
        return rank_attributes_for_entity(ps.paths, m, k, filter).ranked;
    };
    return run_ape_with(ranker, m.attrs.names, test_kb, ks, filter_names);
}

EvalReport run_apc_with(const PathRankerFn& ranker, const std::vector<std::string>& attr_names,
                        const std::function<bool(const ClassPath&)>& all_oov,
                        const std::vector<ClassPath>& paths,
                        const std::set<std::pair<std::string, std::string>>& r3,
                        const std::vector<int>& ks) {
    int mk = max_k(ks);
    if (paths.empty()) fail_data("no class-paths to evaluate");
    std::map<std::string, int> attr_index;
    for (std::size_t i = 0; i < attr_names.size(); ++i) attr_index[attr_names[i]] = static_cast<int>(i);

    std::map<std::string, std::set<int>> truth;
    for (const auto& [path, attr] : r3) {
        auto it = attr_index.find(attr);
        if (it != attr_index.end()) truth[path].insert(it->second);
    }

    std::vector<Query> queries;
    int oov_count = 0;
    for (const auto& p : paths) {
        Query q;
        q.category = p.classes.front();
        if (all_oov && all_oov(p)) ++oov_count;
        for (const auto& ra : ranker(p, mk)) q.qr.ranked.push_back(ra.attr);
        auto tit = truth.find(join_path(p));
        if (tit != truth.end()) q.qr.relevant = tit->second;
        queries.push_back(std::move(q));
    }

    EvalReport r = aggregate_report("APC", ks, queries);
    r.all_oov = oov_count;
    r.truth_source = "planted-r3";
    return r;
}

EvalReport run_apc(const ModelCheckpoint& m, const std::vector<ClassPath>& paths,
                   const std::set<std::pair<std::string, std::string>>& r3,
                   const std::vector<int>& ks) {
    PathRankerFn ranker = [&m](const ClassPath& p, int k) { return rank_attributes_for_path(p, m, k); };
    auto all_oov = [&m](const ClassPath& p) {
        for (const auto& c : p.classes)
            if (m.encoder.table.row_of(c) >= 0) return false;
        return true;
    };
    return run_apc_with(ranker, m.attrs.names, all_oov, paths, r3, ks);
}

std::string report_to_json(const EvalReport& r) {
    json j;
    j["task"] = r.task;
    j["ks"] = r.ks;
    j["truth_source"] = r.truth_source;
    j["skipped"] = r.skipped;
    j["all_oov"] = r.all_oov;
    j["overall"] = metrics_to_json(r.overall);
    json cats = json::object();
    for (const auto& [name, cm] : r.per_category) cats[name] = metrics_to_json(cm);
    j["categories"] = std::move(cats);
    return j.dump(1);
}

EvalReport report_from_json(const std::string& text) {
    json j = json::parse(text);
    EvalReport r;
    r.task = j.at("task").get<std::string>();
    r.ks = j.at("ks").get<std::vector<int>>();
    r.truth_source = j.at("truth_source").get<std::string>();
    r.skipped = j.at("skipped").get<int>();
    r.all_oov = j.at("all_oov").get<int>();
    r.overall = metrics_from_json(j.at("overall"));
    for (const auto& [name, cm] : j.at("categories").items()) r.per_category[name] = metrics_from_json(cm);
    return r;
}

std::string report_to_table(const EvalReport& r) {
    std::vector<std::string> cats;
    for (const auto& [name, _] : r.per_category) cats.push_back(name);

    auto cell = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", 100.0 * v);
        return std::string(buf);
    };
    auto head = [](const std::string& name, int q) {
        return name + " (" + std::to_string(q) + ")";
    };

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"metric"};
    for (const auto& c : cats) header.push_back(head(c, r.per_category.at(c).query_count));
    header.push_back(head("Overall", r.overall.query_count));
    rows.push_back(header);

    bool ape = r.task == "APE";
    for (int pass = 0; pass < 2; ++pass) {
        bool use_hits = ape ? pass == 0 : pass == 1;
        for (int k : r.ks) {
            std::vector<std::string> row;
            row.push_back((use_hits ? "Hits@" : "mean P@") + std::to_string(k));
            for (const auto& c : cats) {
                const CategoryMetrics& cm = r.per_category.at(c);
                row.push_back(cell(use_hits ? cm.hits_at_k.at(k) : cm.mean_p_at_k.at(k)));
            }
            row.push_back(cell(use_hits ? r.overall.hits_at_k.at(k) : r.overall.mean_p_at_k.at(k)));
            rows.push_back(std::move(row));
        }
    }

    std::vector<std::size_t> width(rows[0].size(), 0);
    for (const auto& row : rows)
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

    std::ostringstream out;
    out << r.task << " evaluation (truth: " << r.truth_source << ", values x100)\n";
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) out << "  ";
            out << row[c];
            for (std::size_t pad = row[c].size(); pad < width[c]; ++pad) out << ' ';
        }
        out << "\n";
    }
    if (r.skipped) out << "skipped entities without class-paths: " << r.skipped << "\n";
    if (r.all_oov) out << "paths with every class word out of vocabulary: " << r.all_oov << "\n";
    return out.str();
}

} // namespace transatt
