#include "transatt/model.hpp"

#include "transatt/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace transatt {

void ModelConfig::validate() const {
    if (word_dim < 1 || path_dim < 1 || attr_dim < 1) fail_config("model dims must be >= 1");
    if (!(margin > 0.0)) fail_config("margin must be > 0");
}

int AttributeSpace::index_of(const std::string& name) const {
    auto it = attr_index.find(name);
    if (it == attr_index.end()) fail_data("unknown attribute '" + name + "'");
    return it->second;
}

ModelCheckpoint init_model(const ModelConfig& cfg, const std::vector<std::string>& vocab_words,
                           const std::vector<std::string>& attributes,
                           const WordEmbeddingTable* pretrained) {
    cfg.validate();
    if (attributes.empty()) fail_data("cannot initialize a model with no attributes");

    ModelCheckpoint m;
    m.config = cfg;
    SplitMix64 rng(cfg.seed);

    if (pretrained) {
        if (pretrained->word_dim() != cfg.word_dim)
            fail_config("pretrained embedding dim " + std::to_string(pretrained->word_dim()) +
                        " != configured word_dim " + std::to_string(cfg.word_dim));
        m.encoder.table = *pretrained;
    } else {
        m.encoder.table = WordEmbeddingTable::random_init(vocab_words, cfg.word_dim, rng);
    }
    m.encoder.lstm = LstmWeights::random_init(cfg.word_dim, cfg.path_dim, cfg.peepholes, rng);

    std::vector<std::string> attrs = attributes;
    std::sort(attrs.begin(), attrs.end());
    attrs.erase(std::unique(attrs.begin(), attrs.end()), attrs.end());
    m.attrs.names = attrs;
    for (std::size_t i = 0; i < attrs.size(); ++i) m.attrs.attr_index[attrs[i]] = static_cast<int>(i);

    // Attribute vectors start on the unit sphere; A and every M_a use the
    // uniform fan-in/fan-out bound.
    m.attrs.embeddings = Mat(static_cast<int>(attrs.size()), cfg.attr_dim);
    for (int r = 0; r < m.attrs.embeddings.rows; ++r) {
        auto row = m.attrs.embeddings.row(r);
        double nrm = 0.0;
        while (nrm == 0.0) {
            for (double& v : row) v = rng.gaussian();
            nrm = l2_norm(row);
        }
        scale(row, 1.0 / nrm);
    }
    const double bound = std::sqrt(6.0 / (cfg.path_dim + cfg.attr_dim));
    m.attrs.mappings.reserve(attrs.size());
    for (std::size_t i = 0; i < attrs.size(); ++i) {
        Mat mp(cfg.path_dim, cfg.attr_dim);
        for (double& v : mp.a) v = rng.uniform(-bound, bound);
        m.attrs.mappings.push_back(std::move(mp));
    }
    m.attention.bilinear = Mat(cfg.path_dim, cfg.attr_dim);
    for (double& v : m.attention.bilinear.a) v = rng.uniform(-bound, bound);
    return m;
}

Vec attention_scores(const std::vector<Vec>& path_vecs, std::span<const double> a, const Mat& A) {
    if (path_vecs.empty()) fail_config("attention over an empty path set");
    Vec aa = matvec(A, a); // A a, reused across paths
    Vec s(path_vecs.size(), 0.0);
    for (std::size_t i = 0; i < path_vecs.size(); ++i) s[i] = dot(path_vecs[i], aa);
    return s;
}

Vec attention_weights(const std::vector<Vec>& path_vecs, std::span<const double> a, const Mat& A) {
    return softmax(attention_scores(path_vecs, a, A));
}

Vec aggregate(const std::vector<Vec>& path_vecs, const Vec& alpha) {
    if (path_vecs.size() != alpha.size()) fail_config("aggregate: weight/path count mismatch");
    if (path_vecs.empty()) fail_config("aggregate over an empty path set");
    Vec p(path_vecs[0].size(), 0.0);
    for (std::size_t i = 0; i < path_vecs.size(); ++i) axpy(alpha[i], path_vecs[i], p);
    return p;
}

double score(std::span<const double> p, const Mat& mapping, std::span<const double> a, Norm norm) {
    Vec u = rowvec_mat(p, mapping);
    return distance(u, a, norm);
}

double score(std::span<const double> p, int attr, const AttributeSpace& space, Norm norm) {
    if (attr < 0 || attr >= space.count()) fail_data("attribute index out of range");
    return score(p, space.mappings[attr], space.embedding(attr), norm);
}

EntityScore score_entity(const std::vector<Vec>& path_vecs, int attr, const AttributeSpace& space,
                         const AttentionParams& attention, Norm norm) {
    if (attr < 0 || attr >= space.count()) fail_data("attribute index out of range");
    EntityScore out;
    out.attention = attention_weights(path_vecs, space.embedding(attr), attention.bilinear);
    Vec p_e = aggregate(path_vecs, out.attention);
    out.value = score(p_e, attr, space, norm);
    return out;
}

void MarginLossGrads::clear() {
    d_paths.clear();
    d_bilinear.zero();
    d_attr_emb.clear();
    d_attr_map.clear();
}

namespace {

// Forward pieces of one branch: attention toward `att_attr`, translation
// energy toward `dist_attr`.
struct Branch {
    Vec alpha;
    Vec p_e;
    Vec u;      // p_e M
    Vec q;      // d dist / d u
    double dist = 0.0;
};

Branch branch_forward(const std::vector<Vec>& paths, int att_attr, int dist_attr,
                      const AttributeSpace& space, const AttentionParams& att, Norm norm) {
    Branch b;
    b.alpha = attention_weights(paths, space.embedding(att_attr), att.bilinear);
    b.p_e = aggregate(paths, b.alpha);
    b.u = rowvec_mat(b.p_e, space.mappings[dist_attr]);
    b.dist = distance(b.u, space.embedding(dist_attr), norm);
    b.q = distance_grad(b.u, space.embedding(dist_attr), norm);
    return b;
}

// Backward of the attention + aggregation stage for gradient g_pe arriving at
// p_e. `factor` multiplies every contribution.
void attention_backward(const std::vector<Vec>& paths, int att_attr, const Vec& alpha,
                        const Vec& g_pe, double factor, const AttributeSpace& space,
                        const AttentionParams& att, MarginLossGrads& g) {
    std::span<const double> a = space.embedding(att_attr);
    Vec aa = matvec(att.bilinear, a);

    Vec t(paths.size(), 0.0);
    double mean = 0.0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        t[i] = dot(g_pe, paths[i]);
        mean += alpha[i] * t[i];
    }
    Vec ds(paths.size(), 0.0);
    for (std::size_t i = 0; i < paths.size(); ++i) ds[i] = alpha[i] * (t[i] - mean);

    Vec da_att(a.size(), 0.0);
    for (std::size_t i = 0; i < paths.size(); ++i) {
        // direct path through the weighted sum plus the score path p_i^T A a
        axpy(factor * alpha[i], g_pe, g.d_paths[i]);
        axpy(factor * ds[i], aa, g.d_paths[i]);
        add_outer(g.d_bilinear, paths[i], a, factor * ds[i]);
        axpy(ds[i], matTvec(att.bilinear, paths[i]), da_att);
    }
    auto [it, _] = g.d_attr_emb.try_emplace(att_attr, Vec(a.size(), 0.0));
    axpy(factor, da_att, it->second);
}

void distance_backward(const Branch& b, int dist_attr, double factor, const AttributeSpace& space,
                       MarginLossGrads& g) {
    auto [mit, minserted] = g.d_attr_map.try_emplace(dist_attr, Mat(space.mappings[dist_attr].rows,
                                                                    space.mappings[dist_attr].cols));
    add_outer(mit->second, b.p_e, b.q, factor);
    auto [eit, einserted] = g.d_attr_emb.try_emplace(dist_attr, Vec(b.q.size(), 0.0));
    axpy(-factor, b.q, eit->second);
}

} // namespace

double margin_loss(const std::vector<Vec>& path_vecs, int pos, int neg,
                   const AttributeSpace& space, const AttentionParams& attention,
                   double margin, Norm norm, bool shared_attention_neg,
                   MarginLossGrads* grads) {
    if (pos == neg) fail_config("margin_loss: corrupted attribute equals the positive one");
    if (pos < 0 || pos >= space.count() || neg < 0 || neg >= space.count())
        fail_data("margin_loss: attribute index out of range");
    if (path_vecs.empty()) fail_config("margin_loss over an empty path set");

    Branch bpos = branch_forward(path_vecs, pos, pos, space, attention, norm);
    Branch bneg;
    if (shared_attention_neg) {
        bneg.alpha = bpos.alpha;
        bneg.p_e = bpos.p_e;
        bneg.u = rowvec_mat(bneg.p_e, space.mappings[neg]);
        bneg.dist = distance(bneg.u, space.embedding(neg), norm);
        bneg.q = distance_grad(bneg.u, space.embedding(neg), norm);
    } else {
        bneg = branch_forward(path_vecs, neg, neg, space, attention, norm);
    }

    double loss = margin + bpos.dist - bneg.dist;
    if (loss <= 0.0) {
        if (grads) {
            grads->clear();
            grads->d_paths.assign(path_vecs.size(), Vec(path_vecs[0].size(), 0.0));
            grads->d_bilinear = Mat(attention.bilinear.rows, attention.bilinear.cols);
        }
        return 0.0;
    }
    if (!grads) return loss;

    grads->clear();
    grads->d_paths.assign(path_vecs.size(), Vec(path_vecs[0].size(), 0.0));
    grads->d_bilinear = Mat(attention.bilinear.rows, attention.bilinear.cols);

    distance_backward(bpos, pos, +1.0, space, *grads);
    distance_backward(bneg, neg, -1.0, space, *grads);

    if (shared_attention_neg) {
        // One attention stage (toward pos) feeds both energies.
        Vec g_pe = matvec(space.mappings[pos], bpos.q);
        Vec g_neg = matvec(space.mappings[neg], bneg.q);
        axpy(-1.0, g_neg, g_pe);
        attention_backward(path_vecs, pos, bpos.alpha, g_pe, +1.0, space, attention, *grads);
    } else {
        Vec g_pos = matvec(space.mappings[pos], bpos.q);
        attention_backward(path_vecs, pos, bpos.alpha, g_pos, +1.0, space, attention, *grads);
        Vec g_negv = matvec(space.mappings[neg], bneg.q);
        attention_backward(path_vecs, neg, bneg.alpha, g_negv, -1.0, space, attention, *grads);
    }
    return loss;
}

std::vector<RankedAttribute> rank_attributes_for_path(const ClassPath& path,
                                                      const ModelCheckpoint& m, int k) {
    if (k < 1) fail_config("k must be >= 1");
    Vec p = encode_path(path, m.encoder);
    std::vector<RankedAttribute> ranked;
    ranked.reserve(m.attrs.count());
    for (int a = 0; a < m.attrs.count(); ++a)
        ranked.push_back({a, score(p, a, m.attrs, m.config.norm)});
    std::stable_sort(ranked.begin(), ranked.end(), [](const RankedAttribute& x, const RankedAttribute& y) {
        if (x.score != y.score) return x.score < y.score;
        return x.attr < y.attr;
    });
    if (static_cast<int>(ranked.size()) > k) ranked.resize(k);
    return ranked;
}

EntityRanking rank_attributes_for_entity(const std::vector<ClassPath>& paths,
                                         const ModelCheckpoint& m, int k,
                                         const std::set<int>& filtered_attrs) {
    if (k < 1) fail_config("k must be >= 1");
    if (paths.empty()) fail_data("entity has no class-paths");

    std::vector<Vec> path_vecs;
    path_vecs.reserve(paths.size());
    for (const auto& p : paths) path_vecs.push_back(encode_path(p, m.encoder));

    struct Row {
        RankedAttribute ra;
        Vec alpha;
    };
    std::vector<Row> rows;
    for (int a = 0; a < m.attrs.count(); ++a) {
        if (filtered_attrs.count(a)) continue;
        EntityScore es = score_entity(path_vecs, a, m.attrs, m.attention, m.config.norm);
        rows.push_back({{a, es.value}, std::move(es.attention)});
    }
    if (rows.empty()) fail_data("no candidate attributes left after filtering");
    std::stable_sort(rows.begin(), rows.end(), [](const Row& x, const Row& y) {
        if (x.ra.score != y.ra.score) return x.ra.score < y.ra.score;
        return x.ra.attr < y.ra.attr;
    });
    if (static_cast<int>(rows.size()) > k) rows.resize(k);

    EntityRanking out;
    out.attention = Mat(static_cast<int>(rows.size()), static_cast<int>(paths.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        out.ranked.push_back(rows[r].ra);
        std::copy(rows[r].alpha.begin(), rows[r].alpha.end(), out.attention.row(static_cast<int>(r)).begin());
    }
    return out;
}

void write_attention_csv(const std::string& path, const std::vector<ClassPath>& paths,
                         const ModelCheckpoint& m, const EntityRanking& ranking) {
    std::ofstream out(path);
    if (!out) fail_data("cannot write " + path);
    out << "attribute";
    for (const auto& p : paths) out << "," << join_path(p);
    out << "\n";
    char buf[32];
    for (std::size_t r = 0; r < ranking.ranked.size(); ++r) {
        out << m.attrs.names[ranking.ranked[r].attr];
        for (int c = 0; c < ranking.attention.cols; ++c) {
            std::snprintf(buf, sizeof buf, "%.6f", ranking.attention(static_cast<int>(r), c));
            out << "," << buf;
        }
        out << "\n";
    }
}

} // namespace transatt
