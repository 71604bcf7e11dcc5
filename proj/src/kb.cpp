#include "transatt/kb.hpp"

#include "transatt/error.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

namespace transatt {

namespace {

namespace fs = std::filesystem;

// children[c] = classes whose hypernym is c; parents[c] = hypernyms of c.
struct ClassGraph {
    std::map<std::string, std::vector<std::string>> parents;

    explicit ClassGraph(const KbSubset& kb) {
        for (const auto& [hypo, hyper] : kb.r1_class_edges) parents[hypo].push_back(hyper);
        for (auto& [_, v] : parents) std::sort(v.begin(), v.end());
    }

    bool is_root(const std::string& c) const { return parents.find(c) == parents.end(); }
};

// Longest hypernym chain ending at each class, in classes counted (>= 1).
// Returns -1 on cycle.
int longest_chain(const KbSubset& kb) {
    std::map<std::string, int> memo;
    std::map<std::string, int> state; // 0 unvisited, 1 in progress, 2 done
    ClassGraph g(kb);
    bool cycle = false;
    std::function<int(const std::string&)> depth = [&](const std::string& c) -> int {
        if (cycle) return 0;
        if (state[c] == 1) { cycle = true; return 0; }
        if (state[c] == 2) return memo[c];
        state[c] = 1;
        int best = 1;
        auto it = g.parents.find(c);
        if (it != g.parents.end())
            for (const auto& p : it->second) best = std::max(best, depth(p) + 1);
        state[c] = 2;
        memo[c] = best;
        return best;
    };
    int longest = 0;
    for (const auto& c : kb.classes) {
        longest = std::max(longest, depth(c));
        if (cycle) return -1;
    }
    return longest;
}

std::vector<std::string> find_cycle(const KbSubset& kb) {
    ClassGraph g(kb);
    std::map<std::string, int> state;
    std::vector<std::string> stack;
    std::vector<std::string> cycle;
    std::function<bool(const std::string&)> dfs = [&](const std::string& c) -> bool {
        state[c] = 1;
        stack.push_back(c);
        auto it = g.parents.find(c);
        if (it != g.parents.end()) {
            for (const auto& p : it->second) {
                if (state[p] == 1) {
                    auto at = std::find(stack.begin(), stack.end(), p);
                    cycle.assign(at, stack.end());
                    return true;
                }
                if (state[p] == 0 && dfs(p)) return true;
            }
        }
        state[c] = 2;
        stack.pop_back();
        return false;
    };
    for (const auto& c : kb.classes)
        if (state[c] == 0 && dfs(c)) break;
    return cycle;
}

std::string pair_str(const std::pair<std::string, std::string>& e) {
    return "(" + e.first + ", " + e.second + ")";
}

std::vector<std::string> split_tsv(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t tab = line.find('\t', start);
        if (tab == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, tab - start));
        start = tab + 1;
    }
    return fields;
}

void read_pairs(const fs::path& file, bool required,
                const std::function<void(const std::string&, const std::string&, int)>& sink) {
    std::ifstream in(file);
    if (!in) {
        if (required) fail_data("cannot open " + file.string());
        return;
    }
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_tsv(line);
        if (fields.size() != 2 || fields[0].empty() || fields[1].empty())
            fail_data(file.string() + ":" + std::to_string(lineno) + ": expected two tab-separated fields");
        sink(fields[0], fields[1], lineno);
    }
}

void write_pairs(const fs::path& file, const std::set<std::pair<std::string, std::string>>& pairs,
                 const std::string& header) {
    std::ofstream out(file);
    if (!out) fail_data("cannot write " + file.string());
    out << "# " << header << "\n";
    for (const auto& [a, b] : pairs) out << a << "\t" << b << "\n";
}

} // namespace

std::string join_path(const ClassPath& p) {
    std::string s;
    for (std::size_t i = 0; i < p.classes.size(); ++i) {
        if (i) s += '/';
        s += p.classes[i];
    }
    return s;
}

ClassPath parse_path(const std::string& s) {
    std::string body = (!s.empty() && s.front() == '/') ? s.substr(1) : s;
    ClassPath p;
    std::size_t start = 0;
    while (start <= body.size()) {
        std::size_t slash = body.find('/', start);
        std::string part = slash == std::string::npos ? body.substr(start) : body.substr(start, slash - start);
        if (part.empty()) fail_data("malformed class-path '" + s + "'");
        p.classes.push_back(part);
        if (slash == std::string::npos) break;
        start = slash + 1;
    }
    if (p.classes.empty()) fail_data("empty class-path");
    return p;
}

std::vector<Violation> validate_kb(const KbSubset& kb, const KbOptions& opts) {
    std::vector<Violation> report;

    for (const auto& e : kb.r1_class_edges) {
        if (e.first == e.second)
            report.push_back({"self-loop", "r1 class edge " + pair_str(e)});
        if (!kb.classes.count(e.first))
            report.push_back({"dangling", "r1 class edge " + pair_str(e) + " references unknown class " + e.first});
        if (!kb.classes.count(e.second))
            report.push_back({"dangling", "r1 class edge " + pair_str(e) + " references unknown class " + e.second});
    }
    for (const auto& e : kb.r1_entity_edges) {
        if (!kb.classes.count(e.first))
            report.push_back({"dangling", "r1 entity edge " + pair_str(e) + " references unknown class " + e.first});
        if (!kb.entities.count(e.second))
            report.push_back({"dangling", "r1 entity edge " + pair_str(e) + " references unknown entity " + e.second});
    }
    for (const auto& e : kb.r2) {
        if (!kb.entities.count(e.first))
            report.push_back({"dangling", "r2 pair " + pair_str(e) + " references unknown entity " + e.first});
        if (!kb.attributes.count(e.second))
            report.push_back({"dangling", "r2 pair " + pair_str(e) + " references unknown attribute " + e.second});
    }
    if (kb.r3) {
        for (const auto& e : *kb.r3) {
            if (!kb.attributes.count(e.second))
                report.push_back({"dangling", "r3 pair " + pair_str(e) + " references unknown attribute " + e.second});
            ClassPath p = parse_path(e.first);
            for (const auto& c : p.classes)
                if (!kb.classes.count(c))
                    report.push_back({"dangling", "r3 path '" + e.first + "' references unknown class " + c});
        }
    }

    auto cycle = find_cycle(kb);
    if (!cycle.empty()) {
        std::string detail = "r1 class edges contain a cycle:";
        for (const auto& c : cycle) detail += " " + c;
        report.push_back({"cycle", detail});
    } else {
        int longest = longest_chain(kb);
        if (longest > opts.max_path_length)
            report.push_back({"path-too-long", "longest hypernym chain has " + std::to_string(longest) +
                                                   " classes, cap is " + std::to_string(opts.max_path_length)});
    }
    return report;
}

PathSet extract_class_paths(const KbSubset& kb, const std::string& entity, const KbOptions& opts) {
    if (!kb.entities.count(entity)) fail_data("unknown entity '" + entity + "'");
    ClassGraph g(kb);

    std::vector<std::string> direct;
    for (const auto& [cls, ent] : kb.r1_entity_edges)
        if (ent == entity) direct.push_back(cls);
    std::sort(direct.begin(), direct.end());

    PathSet out;
    out.entity = entity;
    std::vector<std::string> chain; // terminal-first while walking up
    std::function<void(const std::string&)> ascend = [&](const std::string& c) {
        chain.push_back(c);
        if (static_cast<int>(chain.size()) > opts.max_path_length)
            fail_data("class-path through '" + c + "' exceeds maximum length " +
                      std::to_string(opts.max_path_length));
        auto it = g.parents.find(c);
        if (it == g.parents.end() || it->second.empty()) {
            ClassPath p;
            p.classes.assign(chain.rbegin(), chain.rend());
            out.paths.push_back(std::move(p));
        } else {
            for (const auto& parent : it->second) ascend(parent);
        }
        chain.pop_back();
    };
    for (const auto& c : direct) ascend(c);

    std::sort(out.paths.begin(), out.paths.end());
    out.paths.erase(std::unique(out.paths.begin(), out.paths.end()), out.paths.end());
    return out;
}

Dataset build_dataset(const KbSubset& kb, int min_attr_support, const KbOptions& opts) {
    if (min_attr_support < 1) fail_config("min_attr_support must be >= 1");

    // Step 1: drop entities without attributes.
    std::map<std::string, std::set<std::string>> entity_attrs;
    for (const auto& [e, a] : kb.r2) entity_attrs[e].insert(a);

    // Step 2: attribute support counted by distinct entities.
    std::map<std::string, std::set<std::string>> attr_entities;
    for (const auto& [e, attrs] : entity_attrs)
        for (const auto& a : attrs) attr_entities[a].insert(e);

    Dataset ds;
    for (const auto& [a, ents] : attr_entities)
        if (static_cast<int>(ents.size()) >= min_attr_support) ds.retained_attributes.insert(a);

    // Step 3: one tuple per surviving pair; entities without paths dropped.
    for (const auto& [e, attrs] : entity_attrs) {
        PathSet ps = extract_class_paths(kb, e, opts);
        if (ps.empty()) continue;
        for (const auto& a : attrs) {
            if (!ds.retained_attributes.count(a)) continue;
            ds.tuples.push_back({ps, a});
        }
    }
    if (ds.tuples.empty())
        fail_data("dataset is empty after filtering (min_attr_support=" + std::to_string(min_attr_support) + ")");
    return ds;
}

KbSubset load_kb_dir(const std::string& dir) {
    fs::path base(dir);
    if (!fs::is_directory(base)) fail_data("not a data directory: " + dir);
    KbSubset kb;
    read_pairs(base / "taxonomy.tsv", true, [&](const std::string& hypo, const std::string& hyper, int) {
        kb.classes.insert(hypo);
        kb.classes.insert(hyper);
        kb.r1_class_edges.insert({hypo, hyper});
    });
    read_pairs(base / "entity_class.tsv", true, [&](const std::string& ent, const std::string& cls, int) {
        kb.entities.insert(ent);
        kb.classes.insert(cls);
        kb.r1_entity_edges.insert({cls, ent});
    });
    read_pairs(base / "entity_attr.tsv", true, [&](const std::string& ent, const std::string& attr, int) {
        kb.entities.insert(ent);
        kb.attributes.insert(attr);
        kb.r2.insert({ent, attr});
    });
    if (fs::exists(base / "ground_truth_r3.tsv")) {
        kb.r3.emplace();
        read_pairs(base / "ground_truth_r3.tsv", false, [&](const std::string& path, const std::string& attr, int) {
            kb.attributes.insert(attr);
            kb.r3->insert({path, attr});
        });
    }
    return kb;
}

void save_kb_dir(const KbSubset& kb, const std::string& dir) {
    fs::path base(dir);
    std::error_code ec;
    fs::create_directories(base, ec);
    if (!fs::is_directory(base)) fail_data("cannot create directory " + dir);
    write_pairs(base / "taxonomy.tsv", kb.r1_class_edges, "hyponym-class\thypernym-class");
    write_pairs(base / "entity_class.tsv",
                [&] {
                    std::set<std::pair<std::string, std::string>> flipped;
                    for (const auto& [cls, ent] : kb.r1_entity_edges) flipped.insert({ent, cls});
                    return flipped;
                }(),
                "entity\tclass");
    write_pairs(base / "entity_attr.tsv", kb.r2, "entity\tattribute");
    if (kb.r3) write_pairs(base / "ground_truth_r3.tsv", *kb.r3, "class-path\tattribute");
}

std::vector<std::string> load_id_list(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_data("cannot open " + path);
    std::vector<std::string> ids;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        ids.push_back(line);
    }
    return ids;
}

KbSubset restrict_entities(const KbSubset& kb, const std::set<std::string>& keep) {
    KbSubset out;
    out.classes = kb.classes;
    out.attributes = kb.attributes;
    out.r1_class_edges = kb.r1_class_edges;
    out.r3 = kb.r3;
    for (const auto& e : kb.entities)
        if (keep.count(e)) out.entities.insert(e);
    for (const auto& edge : kb.r1_entity_edges)
        if (keep.count(edge.second)) out.r1_entity_edges.insert(edge);
    for (const auto& pair : kb.r2)
        if (keep.count(pair.first)) out.r2.insert(pair);
    return out;
}

} // namespace transatt
