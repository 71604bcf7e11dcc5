#pragma once

#include "transatt/kb.hpp"
#include "transatt/lstm.hpp"
#include "transatt/rng.hpp"
#include "transatt/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace transatt {

struct WordEmbeddingTable {
    std::map<std::string, int> vocab; // word -> row in vectors
    Mat vectors;                      // vocab_size x word_dim
    Vec oov_vector;                   // componentwise mean of the rows at build time
    bool trainable = true;

    int word_dim() const { return vectors.cols; }

    // Row index for a word, -1 when out of vocabulary.
    int row_of(const std::string& word) const {
        auto it = vocab.find(word);
        return it == vocab.end() ? -1 : it->second;
    }

    void recompute_oov();

    // word2vec text format: header "vocab_size dim", then one
    // "word v1 ... v_dim" line per word. Duplicate words: last wins (warning
    // on stderr). Malformed input is a data error naming the line.
    static WordEmbeddingTable load(const std::string& path);

    // Rows uniform in [-0.5/dim, +0.5/dim], one per word, rows in the sorted
    // word order.
    static WordEmbeddingTable random_init(const std::vector<std::string>& words, int dim, SplitMix64& rng);
};

struct EncoderParams {
    LstmWeights lstm;         // input_dim = word_dim, hidden_dim = path_dim
    WordEmbeddingTable table;

    int path_dim() const { return lstm.hidden_dim; }
};

struct PathEncodeCache {
    std::vector<LstmStepCache> steps;
    std::vector<int> word_rows; // -1 where the OOV vector was fed
};

// Runs the class words of `path` through the LSTM from zero state and returns
// the final hidden state.
Vec encode_path(const ClassPath& path, const EncoderParams& enc, PathEncodeCache* cache = nullptr);

// Backpropagation through time. Accumulates LSTM weight gradients into
// `lstm_grads` and, when the table is trainable, the gradients of the
// embedding rows actually used into `word_grads` (row -> grad). OOV steps
// contribute no embedding gradient.
void encode_path_backward(const PathEncodeCache& cache, const EncoderParams& enc,
                          const Vec& d_path_vec, LstmWeights& lstm_grads,
                          std::map<int, Vec>* word_grads);

} // namespace transatt
