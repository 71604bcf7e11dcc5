#include "transatt/transatt.h"

#include "transatt/error.hpp"
#include "transatt/eval.hpp"
#include "transatt/kb.hpp"
#include "transatt/model.hpp"
#include "transatt/synth.hpp"
#include "transatt/trainer.hpp"

#include <json.hpp>

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>

namespace {

using nlohmann::json;
using namespace transatt;

thread_local std::string g_last_error;

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

ta_status status_of(const Error& e) {
    switch (e.code()) {
        case ErrorCode::config: return TA_ERR_CONFIG;
        case ErrorCode::data: return TA_ERR_DATA;
        case ErrorCode::numeric: return TA_ERR_NUMERIC;
        default: return TA_ERR_INTERNAL;
    }
}

template <typename Fn>
ta_status guarded(Fn&& fn) {
    try {
        fn();
        return TA_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e);
    } catch (const json::exception& e) {
        g_last_error = std::string("bad JSON options: ") + e.what();
        return TA_ERR_CONFIG;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return TA_ERR_INTERNAL;
    }
}

json parse_options(const char* options_json) {
    if (!options_json || !*options_json) return json::object();
    json j = json::parse(options_json);
    if (!j.is_object()) fail_config("options must be a JSON object");
    return j;
}

SynthConfig synth_config_from(const json& j) {
    SynthConfig cfg;
    cfg.num_root_classes = j.value("num_root_classes", cfg.num_root_classes);
    cfg.branching_min = j.value("branching_min", cfg.branching_min);
    cfg.branching_max = j.value("branching_max", cfg.branching_max);
    cfg.depth_min = j.value("depth_min", cfg.depth_min);
    cfg.depth_max = j.value("depth_max", cfg.depth_max);
    cfg.num_attributes = j.value("num_attributes", cfg.num_attributes);
    cfg.attrs_per_path_min = j.value("attrs_per_path_min", cfg.attrs_per_path_min);
    cfg.attrs_per_path_max = j.value("attrs_per_path_max", cfg.attrs_per_path_max);
    cfg.num_entities = j.value("num_entities", cfg.num_entities);
    cfg.paths_per_entity_mean = j.value("paths_per_entity_mean", cfg.paths_per_entity_mean);
    cfg.attr_overlap_fraction = j.value("attr_overlap_fraction", cfg.attr_overlap_fraction);
    cfg.holdout_path_fraction = j.value("holdout_path_fraction", cfg.holdout_path_fraction);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

ModelConfig model_config_from(const json& j) {
    ModelConfig cfg;
    cfg.word_dim = j.value("word_dim", cfg.word_dim);
    cfg.path_dim = j.value("path_dim", cfg.path_dim);
    cfg.attr_dim = j.value("attr_dim", cfg.attr_dim);
    cfg.margin = j.value("margin", cfg.margin);
    if (j.contains("norm")) cfg.norm = parse_norm(j.at("norm").get<std::string>());
    cfg.renormalize_attrs = j.value("renormalize_attrs", cfg.renormalize_attrs);
    cfg.peepholes = j.value("peepholes", cfg.peepholes);
    cfg.shared_attention_neg = j.value("shared_attention_neg", cfg.shared_attention_neg);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

TrainConfig train_config_from(const json& j) {
    TrainConfig cfg;
    cfg.epochs = j.value("epochs", cfg.epochs);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.adadelta_rho = j.value("adadelta_rho", cfg.adadelta_rho);
    cfg.adadelta_eps = j.value("adadelta_eps", cfg.adadelta_eps);
    cfg.negatives_per_positive = j.value("negatives_per_positive", cfg.negatives_per_positive);
    cfg.shuffle = j.value("shuffle", cfg.shuffle);
    cfg.early_stop_patience = j.value("early_stop_patience", cfg.early_stop_patience);
    cfg.validation_fraction = j.value("validation_fraction", cfg.validation_fraction);
    cfg.allow_gold_negatives = j.value("allow_gold_negatives", cfg.allow_gold_negatives);
    cfg.seed = j.value("seed", cfg.seed);
    return cfg;
}

json ranking_json(const std::vector<RankedAttribute>& ranked, const std::vector<std::string>& names) {
    json arr = json::array();
    for (const auto& r : ranked) arr.push_back({{"attribute", names[r.attr]}, {"score", r.score}});
    return arr;
}

} // namespace

struct ta_kb {
    transatt::KbSubset kb;
    std::string dir;
    std::vector<std::string> split_train, split_test;
    std::vector<transatt::ClassPath> holdout_paths;
};

struct ta_model {
    transatt::ModelCheckpoint m;
};

extern "C" {

const char* ta_version(void) { return "transatt 1.0 (checkpoint format 1)"; }

const char* ta_last_error(void) { return g_last_error.c_str(); }

void ta_string_free(char* s) { std::free(s); }

ta_status ta_synth_generate(const char* config_json, const char* out_dir, char** manifest_json_out) {
    return guarded([&] {
        if (!out_dir || !*out_dir) fail_config("output directory required");
        SynthConfig cfg = synth_config_from(parse_options(config_json));
        SynthResult result = generate(cfg);
        export_kb(result, cfg, out_dir);
        if (manifest_json_out) {
            std::ifstream in(std::filesystem::path(out_dir) / "manifest.json");
            std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
            *manifest_json_out = dup_string(text);
        }
    });
}

ta_status ta_kb_open(const char* data_dir, ta_kb** out) {
    return guarded([&] {
        if (!data_dir || !out) fail_config("data_dir and out handle required");
        auto handle = std::make_unique<ta_kb>();
        handle->kb = load_kb_dir(data_dir);
        handle->dir = data_dir;
        namespace fs = std::filesystem;
        if (fs::exists(fs::path(data_dir) / "split_train.txt"))
            handle->split_train = load_id_list((fs::path(data_dir) / "split_train.txt").string());
        if (fs::exists(fs::path(data_dir) / "split_test.txt"))
            handle->split_test = load_id_list((fs::path(data_dir) / "split_test.txt").string());
        if (fs::exists(fs::path(data_dir) / "holdout_paths.txt"))
            for (const auto& line : load_id_list((fs::path(data_dir) / "holdout_paths.txt").string()))
                handle->holdout_paths.push_back(parse_path(line));
        *out = handle.release();
    });
}

void ta_kb_close(ta_kb* kb) { delete kb; }

ta_status ta_kb_validate(const ta_kb* kb, char** report_json_out) {
    return guarded([&] {
        if (!kb || !report_json_out) fail_config("kb handle and output required");
        json arr = json::array();
        for (const auto& v : validate_kb(kb->kb)) arr.push_back({{"kind", v.kind}, {"detail", v.detail}});
        *report_json_out = dup_string(arr.dump(1));
    });
}

ta_status ta_kb_dataset_summary(const ta_kb* kb, int min_attr_support, char** summary_json_out) {
    return guarded([&] {
        if (!kb || !summary_json_out) fail_config("kb handle and output required");
        Dataset ds = build_dataset(kb->kb, min_attr_support);
        std::set<std::string> entities;
        std::size_t paths = 0;
        for (const auto& t : ds.tuples) {
            if (entities.insert(t.path_set.entity).second) paths += t.path_set.paths.size();
        }
        json j{{"tuples", ds.tuples.size()},
               {"entities", entities.size()},
               {"class_paths", paths},
               {"retained_attributes", ds.retained_attributes.size()},
               {"min_attr_support", min_attr_support},
               {"attributes", json(ds.retained_attributes)}};
        *summary_json_out = dup_string(j.dump(1));
    });
}

ta_status ta_train(const ta_kb* kb, const char* options_json, const char* checkpoint_path,
                   ta_log_fn log, void* user) {
    return guarded([&] {
        if (!kb || !checkpoint_path) fail_config("kb handle and checkpoint path required");
        json opts = parse_options(options_json);
        ModelConfig mcfg = model_config_from(opts.value("model", json::object()));
        TrainConfig tcfg = train_config_from(opts.value("train", json::object()));

        // Training population: explicit list, else the train split, else all.
        KbSubset train_kb = kb->kb;
        std::vector<std::string> keep;
        if (opts.contains("entities"))
            keep = opts.at("entities").get<std::vector<std::string>>();
        else if (!kb->split_train.empty())
            keep = kb->split_train;
        if (!keep.empty())
            train_kb = restrict_entities(kb->kb, std::set<std::string>(keep.begin(), keep.end()));

        int min_support = opts.value("min_attr_support", 20);
        Dataset ds = build_dataset(train_kb, min_support);

        WordEmbeddingTable pretrained;
        TrainOptions topts;
        if (opts.contains("embeddings_file")) {
            pretrained = WordEmbeddingTable::load(opts.at("embeddings_file").get<std::string>());
            topts.pretrained = &pretrained;
        }
        topts.trainable_embeddings = opts.value("trainable_embeddings", true);
        topts.threads = opts.value("threads", 1);
        topts.save_every = opts.value("save_every", 0);
        topts.checkpoint_path = checkpoint_path;
        if (log) {
            topts.on_epoch = [log, user](const EpochRecord& r) {
                json j{{"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"seconds", r.seconds}};
                j["val_hits1"] = r.val_hits1 ? json(*r.val_hits1) : json(nullptr);
                std::string line = j.dump();
                log(line.c_str(), user);
            };
        }

        TrainResult result = train(ds, mcfg, tcfg, topts);
        save_checkpoint(result.checkpoint, checkpoint_path);
    });
}

ta_status ta_model_open(const char* checkpoint_path, ta_model** out) {
    return guarded([&] {
        if (!checkpoint_path || !out) fail_config("checkpoint path and out handle required");
        auto handle = std::make_unique<ta_model>();
        handle->m = load_checkpoint(checkpoint_path);
        *out = handle.release();
    });
}

void ta_model_close(ta_model* m) { delete m; }

ta_status ta_model_info(const ta_model* m, char** info_json_out) {
    return guarded([&] {
        if (!m || !info_json_out) fail_config("model handle and output required");
        const ModelCheckpoint& ck = m->m;
        json j{{"format_version", ck.format_version},
               {"word_dim", ck.config.word_dim},
               {"path_dim", ck.config.path_dim},
               {"attr_dim", ck.config.attr_dim},
               {"norm", norm_name(ck.config.norm)},
               {"margin", ck.config.margin},
               {"vocab_size", ck.encoder.table.vocab.size()},
               {"attributes", ck.attrs.names.size()},
               {"epochs", ck.meta.epochs},
               {"final_loss", ck.meta.final_loss},
               {"best_val_hits1", ck.meta.best_val_hits1},
               {"best_epoch", ck.meta.best_epoch}};
        *info_json_out = dup_string(j.dump(1));
    });
}

ta_status ta_predict_path(const ta_model* m, const char* slash_path, int top_k,
                          char** ranking_json_out) {
    return guarded([&] {
        if (!m || !slash_path || !ranking_json_out) fail_config("model, path, and output required");
        ClassPath p = parse_path(slash_path);
        auto ranked = rank_attributes_for_path(p, m->m, top_k);
        json j{{"query", join_path(p)}, {"ranking", ranking_json(ranked, m->m.attrs.names)}};
        *ranking_json_out = dup_string(j.dump(1));
    });
}

ta_status ta_predict_entity(const ta_model* m, const ta_kb* kb, const char* entity, int top_k,
                            const char* options_json, char** ranking_json_out) {
    return guarded([&] {
        if (!m || !kb || !entity || !ranking_json_out)
            fail_config("model, kb, entity, and output required");
        json opts = parse_options(options_json);
        PathSet ps = extract_class_paths(kb->kb, entity);
        if (ps.empty()) fail_data("entity '" + std::string(entity) + "' has no class-paths");

        std::set<int> filter;
        for (const auto& name : opts.value("filter", std::vector<std::string>{})) {
            auto it = m->m.attrs.attr_index.find(name);
            if (it != m->m.attrs.attr_index.end()) filter.insert(it->second);
        }
        EntityRanking er = rank_attributes_for_entity(ps.paths, m->m, top_k, filter);

        if (opts.contains("attention_csv"))
            write_attention_csv(opts.at("attention_csv").get<std::string>(), ps.paths, m->m, er);

        json paths = json::array();
        for (const auto& p : ps.paths) paths.push_back(join_path(p));
        json attention = json::array();
        for (int r = 0; r < er.attention.rows; ++r) {
            json row = json::array();
            for (int c = 0; c < er.attention.cols; ++c) row.push_back(er.attention(r, c));
            attention.push_back(std::move(row));
        }
        json j{{"query", entity},
               {"paths", std::move(paths)},
               {"ranking", ranking_json(er.ranked, m->m.attrs.names)},
               {"attention", std::move(attention)}};
        *ranking_json_out = dup_string(j.dump(1));
    });
}

ta_status ta_evaluate(const ta_model* m, const ta_kb* kb, const char* options_json,
                      char** report_json_out) {
    return guarded([&] {
        if (!m || !kb || !report_json_out) fail_config("model, kb, and output required");
        json opts = parse_options(options_json);
        std::string task = opts.value("task", std::string("ape"));
        std::vector<int> ks = opts.value("k", kDefaultKs);

        EvalReport report;
        if (task == "ape") {
            std::set<std::string> filter;
            for (const auto& f : opts.value("filter", std::vector<std::string>{})) filter.insert(f);
            std::vector<std::string> entities;
            if (opts.contains("entities"))
                entities = opts.at("entities").get<std::vector<std::string>>();
            else if (!kb->split_test.empty())
                entities = kb->split_test;
            KbSubset test_kb = entities.empty()
                                   ? kb->kb
                                   : restrict_entities(kb->kb, std::set<std::string>(entities.begin(),
                                                                                     entities.end()));
            report = run_ape(m->m, test_kb, ks, filter);
        } else if (task == "apc") {
            if (!kb->kb.r3) fail_data("apc evaluation needs ground_truth_r3.tsv");
            std::vector<ClassPath> paths;
            if (opts.contains("paths")) {
                for (const auto& s : opts.at("paths").get<std::vector<std::string>>())
                    paths.push_back(parse_path(s));
            } else if (!kb->holdout_paths.empty()) {
                paths = kb->holdout_paths;
            } else {
                std::set<std::string> joined;
                for (const auto& [p, a] : *kb->kb.r3) joined.insert(p);
                for (const auto& s : joined) paths.push_back(parse_path(s));
            }
            report = run_apc(m->m, paths, *kb->kb.r3, ks);
        } else {
            fail_config("unknown task '" + task + "' (expected ape or apc)");
        }
        *report_json_out = dup_string(report_to_json(report));
    });
}

ta_status ta_report_render(const char* report_json, char** table_text_out) {
    return guarded([&] {
        if (!report_json || !table_text_out) fail_config("report JSON and output required");
        EvalReport r = report_from_json(report_json);
        *table_text_out = dup_string(report_to_table(r));
    });
}

} // extern "C"
