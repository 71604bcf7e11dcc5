#pragma once

#include "transatt/encoder.hpp"
#include "transatt/kb.hpp"
#include "transatt/tensor.hpp"

#include <map>
#include <set>
#include <string>
#include <vector>

namespace transatt {

struct ModelConfig {
    int word_dim = 100;
    int path_dim = 100;
    int attr_dim = 100;
    double margin = 1.0;
    Norm norm = Norm::L2;
    bool renormalize_attrs = true;
    bool peepholes = false;
    // When true the hinge's negative term reuses the attention weights
    // computed for the positive attribute instead of re-attending toward the
    // corrupted one.
    bool shared_attention_neg = false;
    std::uint64_t seed = 42;

    void validate() const;
};

// Per-attribute embedding vectors plus one mapping matrix per attribute.
struct AttributeSpace {
    std::vector<std::string> names;          // index order
    std::map<std::string, int> attr_index;
    Mat embeddings;                          // num_attrs x attr_dim
    std::vector<Mat> mappings;               // each path_dim x attr_dim

    int count() const { return static_cast<int>(names.size()); }
    std::span<const double> embedding(int idx) const { return embeddings.row(idx); }
    int index_of(const std::string& name) const;
};

struct AttentionParams {
    Mat bilinear; // path_dim x attr_dim
};

struct TrainingMeta {
    int epochs = 0;
    double final_loss = 0.0;
    double best_val_hits1 = -1.0;
    int best_epoch = -1;
};

inline constexpr int kCheckpointFormatVersion = 1;

struct ModelCheckpoint {
    int format_version = kCheckpointFormatVersion;
    ModelConfig config;
    EncoderParams encoder;
    AttributeSpace attrs;
    AttentionParams attention;
    TrainingMeta meta;
};

void save_checkpoint(const ModelCheckpoint& m, const std::string& path);
ModelCheckpoint load_checkpoint(const std::string& path);

// Fresh randomly initialized model over the given vocabulary and attribute
// inventory (sorted, deduplicated). Used by the trainer.
ModelCheckpoint init_model(const ModelConfig& cfg, const std::vector<std::string>& vocab_words,
                           const std::vector<std::string>& attributes,
                           const WordEmbeddingTable* pretrained);

// --- scoring primitives ----------------------------------------------------

// s_i = p_i^T A a for every path vector.
Vec attention_scores(const std::vector<Vec>& path_vecs, std::span<const double> a, const Mat& A);
// softmax of the bilinear scores.
Vec attention_weights(const std::vector<Vec>& path_vecs, std::span<const double> a, const Mat& A);
// p_e = sum_i alpha_i p_i
Vec aggregate(const std::vector<Vec>& path_vecs, const Vec& alpha);

// Translation energy d(p M_a, a); lower is better.
double score(std::span<const double> p, const Mat& mapping, std::span<const double> a, Norm norm);
double score(std::span<const double> p, int attr, const AttributeSpace& space, Norm norm);

struct EntityScore {
    double value = 0.0;
    Vec attention; // per-path weights used
};

// Attention toward `attr`, weighted aggregation, then the translation energy.
EntityScore score_entity(const std::vector<Vec>& path_vecs, int attr, const AttributeSpace& space,
                         const AttentionParams& attention, Norm norm);

// --- margin ranking loss ----------------------------------------------------

struct MarginLossGrads {
    std::vector<Vec> d_paths;       // per input path vector
    Mat d_bilinear;
    std::map<int, Vec> d_attr_emb;  // attr index -> gradient
    std::map<int, Mat> d_attr_map;

    void clear();
};

// Hinge loss [margin + d_pos - d_neg]_+ over one tuple. The positive term
// attends toward `pos`; the negative term re-attends toward `neg` unless
// shared_attention_neg is set. Zero-loss instances produce zero gradients.
double margin_loss(const std::vector<Vec>& path_vecs, int pos, int neg,
                   const AttributeSpace& space, const AttentionParams& attention,
                   double margin, Norm norm, bool shared_attention_neg,
                   MarginLossGrads* grads);

// --- ranking ----------------------------------------------------------------

struct RankedAttribute {
    int attr = -1;
    double score = 0.0;
};

// Scores every attribute for a single path, ascending by score, ties broken
// by attribute index. Returns min(k, |A|) entries.
std::vector<RankedAttribute> rank_attributes_for_path(const ClassPath& path,
                                                      const ModelCheckpoint& m, int k);

struct EntityRanking {
    std::vector<RankedAttribute> ranked;
    Mat attention; // rows align with `ranked`, cols with the input paths
};

// Scores every candidate attribute (those not filtered) with selective
// attention over the entity's paths.
EntityRanking rank_attributes_for_entity(const std::vector<ClassPath>& paths,
                                         const ModelCheckpoint& m, int k,
                                         const std::set<int>& filtered_attrs);

// Attention matrix CSV: header row of slash-joined paths, one row per ranked
// attribute, weights with 6 decimal places.
void write_attention_csv(const std::string& path, const std::vector<ClassPath>& paths,
                         const ModelCheckpoint& m, const EntityRanking& ranking);

} // namespace transatt
