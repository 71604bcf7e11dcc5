// transatt command-line front end. Talks to the core exclusively through the
// shared library's C API (transatt/transatt.h).

#include "transatt/transatt.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

struct KbHandle {
    ta_kb* kb = nullptr;
    ~KbHandle() { ta_kb_close(kb); }
};
struct ModelHandle {
    ta_model* m = nullptr;
    ~ModelHandle() { ta_model_close(m); }
};

std::string take_string(char* s) {
    std::string out = s ? s : "";
    ta_string_free(s);
    return out;
}

int fail_status(ta_status st, const std::string& what) {
    std::cerr << "error: " << what << ": " << ta_last_error() << "\n";
    return static_cast<int>(st);
}

std::vector<std::string> read_list_file(const std::string& path, bool* ok) {
    std::vector<std::string> out;
    std::ifstream in(path);
    if (!in) {
        *ok = false;
        return out;
    }
    *ok = true;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        out.push_back(line);
    }
    return out;
}

std::optional<std::vector<int>> parse_k_list(const std::string& text) {
    std::vector<int> ks;
    std::size_t start = 0;
    while (start <= text.size()) {
        std::size_t comma = text.find(',', start);
        std::string tok = comma == std::string::npos ? text.substr(start)
                                                     : text.substr(start, comma - start);
        if (tok.empty()) return std::nullopt;
        try {
            std::size_t used = 0;
            int k = std::stoi(tok, &used);
            if (used != tok.size() || k < 1) return std::nullopt;
            ks.push_back(k);
        } catch (...) {
            return std::nullopt;
        }
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (ks.empty()) return std::nullopt;
    return ks;
}

void print_ranking(const json& result) {
    for (const auto& row : result.at("ranking")) {
        std::printf("%s\t%.6f\n", row.at("attribute").get<std::string>().c_str(),
                    row.at("score").get<double>());
    }
}

void epoch_logger(const char* line, void*) {
    std::printf("%s\n", line);
    std::fflush(stdout);
}

struct GenArgs {
    std::string out;
    std::uint64_t seed = 42;
    int num_roots = 5;
    int branching_min = 2, branching_max = 3;
    int depth_min = 3, depth_max = 5;
    int num_attributes = 50;
    int attrs_per_path_min = 5, attrs_per_path_max = 8;
    int num_entities = 1000;
    double paths_per_entity_mean = 2.0;
    double attr_overlap = 0.8;
    double holdout_fraction = 0.15;
};

struct TrainArgs {
    std::string data, checkpoint;
    std::uint64_t seed = 42;
    int word_dim = 100, path_dim = 100, attr_dim = 100;
    double margin = 1.0;
    std::string norm = "l2";
    bool no_renormalize = false, peepholes = false, shared_attention_neg = false;
    int epochs = 100, batch_size = 64;
    double rho = 0.95, eps = 1e-6;
    int negatives = 1;
    bool no_shuffle = false, allow_gold_negatives = false, freeze_embeddings = false;
    int patience = 10;
    double validation_fraction = 0.1;
    int min_attr_support = 20;
    std::string embeddings, train_entities_file;
    int threads = 1, save_every = 0;
};

struct PredictArgs {
    std::string checkpoint, data, path, entity, emit_attention, filter_file;
    int topk = 10;
};

struct EvalArgs {
    std::string checkpoint, data, task, k_list = "1,5,10,15,20";
    std::string filter_file, paths_file, entities_file, json_out;
};

int run_gen(const GenArgs& a) {
    json cfg{{"seed", a.seed},
             {"num_root_classes", a.num_roots},
             {"branching_min", a.branching_min},
             {"branching_max", a.branching_max},
             {"depth_min", a.depth_min},
             {"depth_max", a.depth_max},
             {"num_attributes", a.num_attributes},
             {"attrs_per_path_min", a.attrs_per_path_min},
             {"attrs_per_path_max", a.attrs_per_path_max},
             {"num_entities", a.num_entities},
             {"paths_per_entity_mean", a.paths_per_entity_mean},
             {"attr_overlap_fraction", a.attr_overlap},
             {"holdout_path_fraction", a.holdout_fraction}};
    char* manifest = nullptr;
    ta_status st = ta_synth_generate(cfg.dump().c_str(), a.out.c_str(), &manifest);
    if (st != TA_OK) return fail_status(st, "gen-synth");
    std::cout << take_string(manifest);
    return 0;
}

int run_build_dataset(const std::string& data, int min_attr_support) {
    KbHandle kb;
    ta_status st = ta_kb_open(data.c_str(), &kb.kb);
    if (st != TA_OK) return fail_status(st, "build-dataset");
    char* report = nullptr;
    st = ta_kb_validate(kb.kb, &report);
    if (st != TA_OK) return fail_status(st, "build-dataset");
    json violations = json::parse(take_string(report));
    if (!violations.empty()) {
        std::cerr << "knowledge base failed validation:\n";
        for (const auto& v : violations)
            std::cerr << "  [" << v.at("kind").get<std::string>() << "] "
                      << v.at("detail").get<std::string>() << "\n";
        return kExitData;
    }
    char* summary = nullptr;
    st = ta_kb_dataset_summary(kb.kb, min_attr_support, &summary);
    if (st != TA_OK) return fail_status(st, "build-dataset");
    std::cout << take_string(summary) << "\n";
    return 0;
}

int run_train(const TrainArgs& a) {
    KbHandle kb;
    ta_status st = ta_kb_open(a.data.c_str(), &kb.kb);
    if (st != TA_OK) return fail_status(st, "train");

    json opts;
    opts["model"] = {{"word_dim", a.word_dim},
                     {"path_dim", a.path_dim},
                     {"attr_dim", a.attr_dim},
                     {"margin", a.margin},
                     {"norm", a.norm},
                     {"renormalize_attrs", !a.no_renormalize},
                     {"peepholes", a.peepholes},
                     {"shared_attention_neg", a.shared_attention_neg},
                     {"seed", a.seed}};
    opts["train"] = {{"epochs", a.epochs},
                     {"batch_size", a.batch_size},
                     {"adadelta_rho", a.rho},
                     {"adadelta_eps", a.eps},
                     {"negatives_per_positive", a.negatives},
                     {"shuffle", !a.no_shuffle},
                     {"early_stop_patience", a.patience},
                     {"validation_fraction", a.validation_fraction},
                     {"allow_gold_negatives", a.allow_gold_negatives},
                     {"seed", a.seed}};
    opts["min_attr_support"] = a.min_attr_support;
    opts["trainable_embeddings"] = !a.freeze_embeddings;
    opts["threads"] = a.threads;
    opts["save_every"] = a.save_every;
    if (!a.embeddings.empty()) opts["embeddings_file"] = a.embeddings;
    if (!a.train_entities_file.empty()) {
        bool ok = false;
        opts["entities"] = read_list_file(a.train_entities_file, &ok);
        if (!ok) {
            std::cerr << "error: cannot read " << a.train_entities_file << "\n";
            return kExitData;
        }
    }

    st = ta_train(kb.kb, opts.dump().c_str(), a.checkpoint.c_str(), epoch_logger, nullptr);
    if (st != TA_OK) return fail_status(st, "train");
    std::cerr << "checkpoint written to " << a.checkpoint << "\n";
    return 0;
}

int run_predict(const PredictArgs& a) {
    if (a.path.empty() == a.entity.empty()) {
        std::cerr << "error: predict needs exactly one of --path or --entity\n";
        return kExitUsage;
    }
    ModelHandle m;
    ta_status st = ta_model_open(a.checkpoint.c_str(), &m.m);
    if (st != TA_OK) return fail_status(st, "predict");

    if (!a.path.empty()) {
        char* out = nullptr;
        st = ta_predict_path(m.m, a.path.c_str(), a.topk, &out);
        if (st != TA_OK) return fail_status(st, "predict");
        print_ranking(json::parse(take_string(out)));
        return 0;
    }

    if (a.data.empty()) {
        std::cerr << "error: --entity prediction needs --data\n";
        return kExitUsage;
    }
    KbHandle kb;
    st = ta_kb_open(a.data.c_str(), &kb.kb);
    if (st != TA_OK) return fail_status(st, "predict");

    json opts = json::object();
    if (!a.emit_attention.empty()) opts["attention_csv"] = a.emit_attention;
    if (!a.filter_file.empty()) {
        bool ok = false;
        opts["filter"] = read_list_file(a.filter_file, &ok);
        if (!ok) {
            std::cerr << "error: cannot read " << a.filter_file << "\n";
            return kExitData;
        }
    }
    char* out = nullptr;
    st = ta_predict_entity(m.m, kb.kb, a.entity.c_str(), a.topk, opts.dump().c_str(), &out);
    if (st != TA_OK) return fail_status(st, "predict");
    print_ranking(json::parse(take_string(out)));
    return 0;
}

int run_eval(const EvalArgs& a) {
    auto ks = parse_k_list(a.k_list);
    if (!ks) {
        std::cerr << "error: malformed --k list '" << a.k_list << "'\n";
        return kExitUsage;
    }
    if (a.task != "ape" && a.task != "apc") {
        std::cerr << "error: --task must be ape or apc\n";
        return kExitUsage;
    }
    ModelHandle m;
    ta_status st = ta_model_open(a.checkpoint.c_str(), &m.m);
    if (st != TA_OK) return fail_status(st, "eval");
    KbHandle kb;
    st = ta_kb_open(a.data.c_str(), &kb.kb);
    if (st != TA_OK) return fail_status(st, "eval");

    json opts{{"task", a.task}, {"k", *ks}};
    auto attach_list = [&](const std::string& file, const char* key) -> int {
        if (file.empty()) return 0;
        bool ok = false;
        opts[key] = read_list_file(file, &ok);
        if (!ok) {
            std::cerr << "error: cannot read " << file << "\n";
            return kExitData;
        }
        return 0;
    };
    if (int rc = attach_list(a.filter_file, "filter")) return rc;
    if (int rc = attach_list(a.paths_file, "paths")) return rc;
    if (int rc = attach_list(a.entities_file, "entities")) return rc;

    char* report = nullptr;
    st = ta_evaluate(m.m, kb.kb, opts.dump().c_str(), &report);
    if (st != TA_OK) return fail_status(st, "eval");
    std::string report_json = take_string(report);

    char* table = nullptr;
    st = ta_report_render(report_json.c_str(), &table);
    if (st != TA_OK) return fail_status(st, "eval");
    std::cout << take_string(table) << "\n" << report_json << "\n";

    if (!a.json_out.empty()) {
        std::ofstream out(a.json_out);
        if (!out) {
            std::cerr << "error: cannot write " << a.json_out << "\n";
            return kExitData;
        }
        out << report_json << "\n";
    }
    return 0;
}

int run_inspect_attention(const std::string& checkpoint, const std::string& data,
                          const std::string& entity, const std::string& out_csv, int topk) {
    PredictArgs p;
    p.checkpoint = checkpoint;
    p.data = data;
    p.entity = entity;
    p.emit_attention = out_csv;
    p.topk = topk;
    int rc = run_predict(p);
    if (rc == 0) std::cerr << "attention matrix written to " << out_csv << "\n";
    return rc;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"TransAtt: attribute acquisition over hierarchical class-paths"};
    app.require_subcommand(0, 1);
    app.set_config("--config", "",
                   "Read defaults from a TOML-like config file (sections per subcommand)");
    app.allow_config_extras(false);
    bool print_config = false;
    app.add_flag("--print-config", print_config, "Print the effective configuration and exit");
    app.set_version_flag("--version", ta_version());

    GenArgs gen;
    CLI::App* cgen = app.add_subcommand("gen-synth", "Generate a synthetic knowledge base");
    cgen->add_option("--out", gen.out, "Output directory")->required();
    cgen->add_option("--seed", gen.seed, "Generator seed")->capture_default_str();
    cgen->add_option("--num-roots", gen.num_roots, "Root classes / subtrees")->capture_default_str();
    cgen->add_option("--branching-min", gen.branching_min)->capture_default_str();
    cgen->add_option("--branching-max", gen.branching_max)->capture_default_str();
    cgen->add_option("--depth-min", gen.depth_min, "Min classes per path")->capture_default_str();
    cgen->add_option("--depth-max", gen.depth_max, "Max classes per path")->capture_default_str();
    cgen->add_option("--num-attributes", gen.num_attributes)->capture_default_str();
    cgen->add_option("--attrs-per-path-min", gen.attrs_per_path_min)->capture_default_str();
    cgen->add_option("--attrs-per-path-max", gen.attrs_per_path_max)->capture_default_str();
    cgen->add_option("--num-entities", gen.num_entities)->capture_default_str();
    cgen->add_option("--paths-per-entity-mean", gen.paths_per_entity_mean)->capture_default_str();
    cgen->add_option("--attr-overlap", gen.attr_overlap, "Shared fraction of planted attributes")
        ->capture_default_str();
    cgen->add_option("--holdout-fraction", gen.holdout_fraction, "Paths reserved for APC")
        ->capture_default_str();

    std::string bd_data;
    int bd_support = 20;
    CLI::App* cbd =
        app.add_subcommand("build-dataset", "Validate a knowledge base and print dataset statistics");
    cbd->add_option("--data", bd_data, "Data directory")->required();
    cbd->add_option("--min-attr-support", bd_support, "Minimum distinct-entity support")
        ->capture_default_str();

    TrainArgs tr;
    CLI::App* ctr = app.add_subcommand("train", "Train a model and write a checkpoint");
    ctr->add_option("--data", tr.data, "Data directory")->required();
    ctr->add_option("--checkpoint", tr.checkpoint, "Checkpoint output path")->required();
    ctr->add_option("--seed", tr.seed, "Seed for init and sampling")->capture_default_str();
    ctr->add_option("--word-dim", tr.word_dim)->capture_default_str();
    ctr->add_option("--path-dim", tr.path_dim)->capture_default_str();
    ctr->add_option("--attr-dim", tr.attr_dim)->capture_default_str();
    ctr->add_option("--margin", tr.margin, "Ranking margin, must be > 0")->capture_default_str();
    ctr->add_option("--norm", tr.norm, "Energy norm: l1 or l2")->capture_default_str();
    ctr->add_flag("--no-renormalize-attrs", tr.no_renormalize,
                  "Skip unit-norm projection of attribute embeddings");
    ctr->add_flag("--peepholes", tr.peepholes, "Peephole connections in the LSTM cell");
    ctr->add_flag("--shared-attention-neg", tr.shared_attention_neg,
                  "Reuse positive-attribute attention for the corrupted term");
    ctr->add_option("--epochs", tr.epochs)->capture_default_str();
    ctr->add_option("--batch-size", tr.batch_size)->capture_default_str();
    ctr->add_option("--rho", tr.rho, "Adadelta decay")->capture_default_str();
    ctr->add_option("--eps", tr.eps, "Adadelta epsilon")->capture_default_str();
    ctr->add_option("--negatives", tr.negatives, "Corrupted attributes per tuple")
        ->capture_default_str();
    ctr->add_flag("--no-shuffle", tr.no_shuffle, "Keep tuple order fixed across epochs");
    ctr->add_flag("--allow-gold-negatives", tr.allow_gold_negatives,
                  "Corrupt with any attribute except the positive itself");
    ctr->add_option("--patience", tr.patience, "Early-stop patience in epochs")->capture_default_str();
    ctr->add_option("--validation-fraction", tr.validation_fraction)->capture_default_str();
    ctr->add_option("--min-attr-support", tr.min_attr_support)->capture_default_str();
    ctr->add_option("--embeddings", tr.embeddings, "Pre-trained word2vec text vectors");
    ctr->add_flag("--freeze-embeddings", tr.freeze_embeddings, "Do not fine-tune word vectors");
    ctr->add_option("--train-entities", tr.train_entities_file,
                    "Entity list file (default: split_train.txt when present)");
    ctr->add_option("--threads", tr.threads, "Parallel tuple-gradient workers")->capture_default_str();
    ctr->add_option("--save-every", tr.save_every, "Checkpoint every N epochs")->capture_default_str();

    PredictArgs pr;
    CLI::App* cpr = app.add_subcommand("predict", "Rank attributes for a class-path or an entity");
    cpr->add_option("--checkpoint", pr.checkpoint)->required();
    cpr->add_option("--path", pr.path, "Slash-joined class-path, e.g. root/x/y");
    cpr->add_option("--entity", pr.entity, "Entity id (needs --data)");
    cpr->add_option("--data", pr.data, "Data directory for entity lookups");
    cpr->add_option("--topk", pr.topk)->capture_default_str();
    cpr->add_option("--emit-attention", pr.emit_attention, "Write the attention matrix CSV here");
    cpr->add_option("--filter", pr.filter_file, "Common-attribute filter file (one name per line)");

    EvalArgs ev;
    CLI::App* cev = app.add_subcommand("eval", "Evaluate a checkpoint (APE or APC)");
    cev->add_option("--checkpoint", ev.checkpoint)->required();
    cev->add_option("--data", ev.data, "Data directory")->required();
    cev->add_option("--task", ev.task, "ape or apc")->required();
    cev->add_option("--k", ev.k_list, "Comma-separated cutoffs")->capture_default_str();
    cev->add_option("--filter", ev.filter_file, "Common-attribute filter file (APE)");
    cev->add_option("--paths", ev.paths_file, "Class-path list file (APC)");
    cev->add_option("--entities", ev.entities_file, "Entity list file (APE)");
    cev->add_option("--json-out", ev.json_out, "Also write the JSON report here");

    std::string ia_checkpoint, ia_data, ia_entity, ia_out;
    int ia_topk = 10;
    CLI::App* cia = app.add_subcommand("inspect-attention",
                                       "Export the attention matrix of an entity's ranking");
    cia->add_option("--checkpoint", ia_checkpoint)->required();
    cia->add_option("--data", ia_data)->required();
    cia->add_option("--entity", ia_entity)->required();
    cia->add_option("--out", ia_out, "CSV output path")->required();
    cia->add_option("--topk", ia_topk)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForVersion&) {
        std::cout << ta_version() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    if (print_config) {
        std::cout << app.config_to_str(true, true);
        return 0;
    }

    try {
        if (cgen->parsed()) return run_gen(gen);
        if (cbd->parsed()) return run_build_dataset(bd_data, bd_support);
        if (ctr->parsed()) return run_train(tr);
        if (cpr->parsed()) return run_predict(pr);
        if (cev->parsed()) return run_eval(ev);
        if (cia->parsed())
            return run_inspect_attention(ia_checkpoint, ia_data, ia_entity, ia_out, ia_topk);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    std::cout << app.help();
    return 0;
}
