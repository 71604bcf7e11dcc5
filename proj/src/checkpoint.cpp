#include "transatt/error.hpp"
#include "transatt/model.hpp"

#include <json.hpp>

#include <fstream>

namespace transatt {

namespace {

using nlohmann::json;

json mat_to_json(const Mat& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
}

Mat mat_from_json(const json& j, const std::string& what) {
    Mat m(j.at("rows").get<int>(), j.at("cols").get<int>());
    const auto& data = j.at("data");
    if (data.size() != m.a.size()) fail_data("checkpoint: bad tensor size for " + what);
    m.a = data.get<Vec>();
    require_finite(m.a, "checkpoint tensor " + what);
    return m;
}

json vec_to_json(const Vec& v) { return json(v); }

Vec vec_from_json(const json& j, const std::string& what) {
    Vec v = j.get<Vec>();
    require_finite(v, "checkpoint vector " + what);
    return v;
}

json lstm_to_json(const LstmWeights& w) {
    json j{{"input_dim", w.input_dim},
           {"hidden_dim", w.hidden_dim},
           {"w_i", mat_to_json(w.w_i)}, {"w_f", mat_to_json(w.w_f)},
           {"w_o", mat_to_json(w.w_o)}, {"w_g", mat_to_json(w.w_g)},
           {"u_i", mat_to_json(w.u_i)}, {"u_f", mat_to_json(w.u_f)},
           {"u_o", mat_to_json(w.u_o)}, {"u_g", mat_to_json(w.u_g)},
           {"b_i", vec_to_json(w.b_i)}, {"b_f", vec_to_json(w.b_f)},
           {"b_o", vec_to_json(w.b_o)}, {"b_g", vec_to_json(w.b_g)}};
    if (w.peepholes()) {
        j["p_i"] = vec_to_json(w.p_i);
        j["p_f"] = vec_to_json(w.p_f);
        j["p_o"] = vec_to_json(w.p_o);
    }
    return j;
}

LstmWeights lstm_from_json(const json& j) {
    LstmWeights w;
    w.input_dim = j.at("input_dim").get<int>();
    w.hidden_dim = j.at("hidden_dim").get<int>();
    w.w_i = mat_from_json(j.at("w_i"), "w_i");
    w.w_f = mat_from_json(j.at("w_f"), "w_f");
    w.w_o = mat_from_json(j.at("w_o"), "w_o");
    w.w_g = mat_from_json(j.at("w_g"), "w_g");
    w.u_i = mat_from_json(j.at("u_i"), "u_i");
    w.u_f = mat_from_json(j.at("u_f"), "u_f");
    w.u_o = mat_from_json(j.at("u_o"), "u_o");
    w.u_g = mat_from_json(j.at("u_g"), "u_g");
    w.b_i = vec_from_json(j.at("b_i"), "b_i");
    w.b_f = vec_from_json(j.at("b_f"), "b_f");
    w.b_o = vec_from_json(j.at("b_o"), "b_o");
    w.b_g = vec_from_json(j.at("b_g"), "b_g");
    if (j.contains("p_i")) {
        w.p_i = vec_from_json(j.at("p_i"), "p_i");
        w.p_f = vec_from_json(j.at("p_f"), "p_f");
        w.p_o = vec_from_json(j.at("p_o"), "p_o");
    }
    return w;
}

} // namespace

void save_checkpoint(const ModelCheckpoint& m, const std::string& path) {
    json j;
    j["format_version"] = m.format_version;
    j["config"] = {{"word_dim", m.config.word_dim},
                   {"path_dim", m.config.path_dim},
                   {"attr_dim", m.config.attr_dim},
                   {"margin", m.config.margin},
                   {"norm", norm_name(m.config.norm)},
                   {"renormalize_attrs", m.config.renormalize_attrs},
                   {"peepholes", m.config.peepholes},
                   {"shared_attention_neg", m.config.shared_attention_neg},
                   {"seed", m.config.seed}};

    std::vector<std::string> vocab(m.encoder.table.vocab.size());
    for (const auto& [word, row] : m.encoder.table.vocab) vocab[row] = word;
    j["vocab"] = vocab;
    j["attributes"] = m.attrs.names;
    j["embeddings_trainable"] = m.encoder.table.trainable;

    json params;
    params["word_embeddings"] = mat_to_json(m.encoder.table.vectors);
    params["oov_vector"] = vec_to_json(m.encoder.table.oov_vector);
    params["lstm"] = lstm_to_json(m.encoder.lstm);
    params["attr_embeddings"] = mat_to_json(m.attrs.embeddings);
    json mappings = json::array();
    for (const auto& mp : m.attrs.mappings) mappings.push_back(mat_to_json(mp));
    params["attr_mappings"] = std::move(mappings);
    params["attention_bilinear"] = mat_to_json(m.attention.bilinear);
    j["params"] = std::move(params);

    j["training"] = {{"epochs", m.meta.epochs},
                     {"final_loss", m.meta.final_loss},
                     {"best_val_hits1", m.meta.best_val_hits1},
                     {"best_epoch", m.meta.best_epoch}};

    std::ofstream out(path);
    if (!out) fail_data("cannot write checkpoint " + path);
    out << j.dump(1) << "\n";
}

ModelCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_data("cannot open checkpoint " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        fail_data("checkpoint " + path + " is not valid JSON: " + e.what());
    }
    try {
        ModelCheckpoint m;
        m.format_version = j.at("format_version").get<int>();
        if (m.format_version != kCheckpointFormatVersion)
            fail_data("checkpoint " + path + " has unsupported format_version " +
                      std::to_string(m.format_version));
        const json& c = j.at("config");
        m.config.word_dim = c.at("word_dim").get<int>();
        m.config.path_dim = c.at("path_dim").get<int>();
        m.config.attr_dim = c.at("attr_dim").get<int>();
        m.config.margin = c.at("margin").get<double>();
        m.config.norm = parse_norm(c.at("norm").get<std::string>());
        m.config.renormalize_attrs = c.at("renormalize_attrs").get<bool>();
        m.config.peepholes = c.at("peepholes").get<bool>();
        m.config.shared_attention_neg = c.at("shared_attention_neg").get<bool>();
        m.config.seed = c.at("seed").get<std::uint64_t>();

        auto vocab = j.at("vocab").get<std::vector<std::string>>();
        m.encoder.table.vectors = mat_from_json(j.at("params").at("word_embeddings"), "word_embeddings");
        if (static_cast<int>(vocab.size()) != m.encoder.table.vectors.rows)
            fail_data("checkpoint: vocab size does not match embedding rows");
        for (std::size_t i = 0; i < vocab.size(); ++i)
            m.encoder.table.vocab[vocab[i]] = static_cast<int>(i);
        m.encoder.table.oov_vector = vec_from_json(j.at("params").at("oov_vector"), "oov_vector");
        m.encoder.table.trainable = j.at("embeddings_trainable").get<bool>();
        m.encoder.lstm = lstm_from_json(j.at("params").at("lstm"));

        m.attrs.names = j.at("attributes").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < m.attrs.names.size(); ++i)
            m.attrs.attr_index[m.attrs.names[i]] = static_cast<int>(i);
        m.attrs.embeddings = mat_from_json(j.at("params").at("attr_embeddings"), "attr_embeddings");
        for (const auto& mp : j.at("params").at("attr_mappings"))
            m.attrs.mappings.push_back(mat_from_json(mp, "attr_mapping"));
        if (m.attrs.mappings.size() != m.attrs.names.size())
            fail_data("checkpoint: one mapping matrix per attribute required");
        m.attention.bilinear = mat_from_json(j.at("params").at("attention_bilinear"), "attention_bilinear");

        const json& t = j.at("training");
        m.meta.epochs = t.at("epochs").get<int>();
        m.meta.final_loss = t.at("final_loss").get<double>();
        m.meta.best_val_hits1 = t.at("best_val_hits1").get<double>();
        m.meta.best_epoch = t.at("best_epoch").get<int>();

        // Cross-checks against the recorded config.
        if (m.encoder.table.vectors.cols != m.config.word_dim ||
            m.encoder.lstm.input_dim != m.config.word_dim ||
            m.encoder.lstm.hidden_dim != m.config.path_dim ||
            m.attrs.embeddings.cols != m.config.attr_dim ||
            m.attention.bilinear.rows != m.config.path_dim ||
            m.attention.bilinear.cols != m.config.attr_dim)
            fail_data("checkpoint: tensor shapes disagree with config");
        for (const auto& mp : m.attrs.mappings)
            if (mp.rows != m.config.path_dim || mp.cols != m.config.attr_dim)
                fail_data("checkpoint: mapping matrix shape disagrees with config");
        return m;
    } catch (const json::exception& e) {
        fail_data("checkpoint " + path + " is malformed: " + e.what());
    }
}

} // namespace transatt
