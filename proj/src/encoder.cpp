#include "transatt/encoder.hpp"

#include "transatt/error.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

namespace transatt {

void WordEmbeddingTable::recompute_oov() {
    oov_vector.assign(vectors.cols, 0.0);
    if (vectors.rows == 0) return;
    for (int r = 0; r < vectors.rows; ++r)
        axpy(1.0, vectors.row(r), oov_vector);
    scale(oov_vector, 1.0 / vectors.rows);
}

WordEmbeddingTable WordEmbeddingTable::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail_data("cannot open embeddings file " + path);

    auto parse_fail = [&](int lineno, const std::string& why) {
        fail_data(path + ":" + std::to_string(lineno) + ": " + why);
    };

    std::string line;
    if (!std::getline(in, line)) parse_fail(1, "missing header");
    std::istringstream header(line);
    long vocab_size = -1, dim = -1;
    if (!(header >> vocab_size >> dim) || vocab_size < 1 || dim < 1)
        parse_fail(1, "malformed header (expected 'vocab_size dim')");
    std::string extra;
    if (header >> extra) parse_fail(1, "malformed header (expected 'vocab_size dim')");

    std::vector<std::string> words;
    std::vector<Vec> rows;
    std::map<std::string, int> seen;
    int lineno = 1;
    long rows_read = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ++rows_read;
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) parse_fail(lineno, "missing word");
        Vec row;
        row.reserve(dim);
        std::string tok;
        while (ls >> tok) {
            char* end = nullptr;
            double v = std::strtod(tok.c_str(), &end);
            if (end == tok.c_str() || *end != '\0')
                parse_fail(lineno, "non-numeric token '" + tok + "'");
            row.push_back(v);
        }
        if (static_cast<long>(row.size()) != dim)
            parse_fail(lineno, "expected " + std::to_string(dim) + " floats, got " + std::to_string(row.size()));
        require_finite(row, "embedding row at line " + std::to_string(lineno));
        auto it = seen.find(word);
        if (it != seen.end()) {
            std::cerr << "warning: duplicate word '" << word << "' at " << path << ":" << lineno
                      << ", last occurrence wins\n";
            rows[it->second] = std::move(row);
        } else {
            seen[word] = static_cast<int>(words.size());
            words.push_back(word);
            rows.push_back(std::move(row));
        }
    }
    if (rows_read != vocab_size)
        parse_fail(lineno, "header promises " + std::to_string(vocab_size) + " rows, file has " +
                               std::to_string(rows_read));

    WordEmbeddingTable table;
    table.vectors = Mat(static_cast<int>(words.size()), static_cast<int>(dim));
    for (std::size_t r = 0; r < words.size(); ++r) {
        table.vocab[words[r]] = static_cast<int>(r);
        std::copy(rows[r].begin(), rows[r].end(), table.vectors.row(static_cast<int>(r)).begin());
    }
    table.recompute_oov();
    return table;
}

WordEmbeddingTable WordEmbeddingTable::random_init(const std::vector<std::string>& words, int dim,
                                                   SplitMix64& rng) {
    if (dim < 1) fail_config("word dim must be >= 1");
    std::vector<std::string> sorted = words;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    WordEmbeddingTable table;
    table.vectors = Mat(static_cast<int>(sorted.size()), dim);
    const double bound = 0.5 / dim;
    for (int r = 0; r < table.vectors.rows; ++r) {
        table.vocab[sorted[r]] = r;
        for (double& v : table.vectors.row(r)) v = rng.uniform(-bound, bound);
    }
    table.recompute_oov();
    return table;
}

Vec encode_path(const ClassPath& path, const EncoderParams& enc, PathEncodeCache* cache) {
    if (path.classes.empty()) fail_config("cannot encode an empty class-path");
    const int hd = enc.lstm.hidden_dim;
    Vec h(hd, 0.0), c(hd, 0.0);
    if (cache) {
        cache->steps.clear();
        cache->word_rows.clear();
        cache->steps.resize(path.classes.size());
        cache->word_rows.reserve(path.classes.size());
    }
    for (std::size_t t = 0; t < path.classes.size(); ++t) {
        int row = enc.table.row_of(path.classes[t]);
        std::span<const double> x =
            row >= 0 ? enc.table.vectors.row(row) : std::span<const double>(enc.table.oov_vector);
        Vec h_next, c_next;
        lstm_cell_forward(x, h, c, enc.lstm, h_next, c_next, cache ? &cache->steps[t] : nullptr);
        h = std::move(h_next);
        c = std::move(c_next);
        if (cache) cache->word_rows.push_back(row);
    }
    return h;
}

void encode_path_backward(const PathEncodeCache& cache, const EncoderParams& enc,
                          const Vec& d_path_vec, LstmWeights& lstm_grads,
                          std::map<int, Vec>* word_grads) {
    if (cache.steps.empty() || cache.steps.size() != cache.word_rows.size())
        fail_config("encode_path_backward: missing or inconsistent cache");
    if (static_cast<int>(d_path_vec.size()) != enc.lstm.hidden_dim)
        fail_config("encode_path_backward: upstream gradient dim mismatch");

    Vec dh = d_path_vec;
    Vec dc(enc.lstm.hidden_dim, 0.0);
    for (std::size_t t = cache.steps.size(); t-- > 0;) {
        LstmStepGrads g = lstm_cell_backward(dh, dc, cache.steps[t], enc.lstm, lstm_grads);
        if (enc.table.trainable && word_grads && cache.word_rows[t] >= 0) {
            auto [it, inserted] = word_grads->try_emplace(cache.word_rows[t], Vec(g.dx.size(), 0.0));
            axpy(1.0, g.dx, it->second);
        }
        dh = std::move(g.dh_prev);
        dc = std::move(g.dc_prev);
    }
}

} // namespace transatt
