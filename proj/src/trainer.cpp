#include "transatt/trainer.hpp"

#include "transatt/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

namespace transatt {

void TrainConfig::validate() const {
    if (epochs < 1) fail_config("epochs must be >= 1");
    if (batch_size < 1) fail_config("batch_size must be >= 1");
    if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0)) fail_config("adadelta_rho must be in (0, 1)");
    if (!(adadelta_eps > 0.0)) fail_config("adadelta_eps must be > 0");
    if (negatives_per_positive < 1) fail_config("negatives_per_positive must be >= 1");
    if (early_stop_patience < 1) fail_config("early_stop_patience must be >= 1");
    if (validation_fraction < 0.0 || validation_fraction >= 1.0)
        fail_config("validation_fraction must be in [0, 1)");
}

void adadelta_step(std::span<double> value, std::span<double> grad,
                   std::span<double> acc_grad_sq, std::span<double> acc_delta_sq,
                   double rho, double eps, const std::string& name) {
    for (std::size_t k = 0; k < value.size(); ++k) {
        double g = grad[k];
        if (!std::isfinite(g))
            fail_numeric("non-finite gradient in parameter '" + name + "'");
        acc_grad_sq[k] = rho * acc_grad_sq[k] + (1.0 - rho) * g * g;
        double dx = -(std::sqrt(acc_delta_sq[k] + eps) / std::sqrt(acc_grad_sq[k] + eps)) * g;
        acc_delta_sq[k] = rho * acc_delta_sq[k] + (1.0 - rho) * dx * dx;
        value[k] += dx;
        grad[k] = 0.0;
    }
}

void adadelta_step(Param& p, double rho, double eps) {
    adadelta_step(p.value.a, p.grad.a, p.acc_grad_sq.a, p.acc_delta_sq.a, rho, eps, p.name);
}

int sample_corrupted(int num_attrs, const std::set<int>& excluded, SplitMix64& rng) {
    int candidates = num_attrs;
    for (int a : excluded)
        if (a >= 0 && a < num_attrs) --candidates;
    if (candidates <= 0) fail_data("no corrupted-attribute candidates left");
    int pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(candidates)));
    for (int a : excluded) {
        if (a < 0) continue;
        if (a >= num_attrs) break;
        if (pick >= a) ++pick; // skip over excluded slots, in ascending order
    }
    return pick;
}

namespace {

using Clock = std::chrono::steady_clock;

// Flat view of every trainable tensor, in a fixed order shared by the
// gradient bank and the optimizer.
struct Slots {
    std::vector<std::span<double>> value;
    std::vector<std::string> name;
    int word_emb = -1;    // slot indices
    int attr_emb = -1;
    int bilinear = -1;
    int mapping_base = -1;
    std::vector<int> lstm; // in enumeration order of lstm_tensors()

    static std::vector<std::pair<std::string, Vec*>> lstm_vecs(LstmWeights& w) {
        std::vector<std::pair<std::string, Vec*>> v = {
            {"lstm.b_i", &w.b_i}, {"lstm.b_f", &w.b_f}, {"lstm.b_o", &w.b_o}, {"lstm.b_g", &w.b_g}};
        if (w.peepholes()) {
            v.push_back({"lstm.p_i", &w.p_i});
            v.push_back({"lstm.p_f", &w.p_f});
            v.push_back({"lstm.p_o", &w.p_o});
        }
        return v;
    }
    static std::vector<std::pair<std::string, Mat*>> lstm_mats(LstmWeights& w) {
        return {{"lstm.w_i", &w.w_i}, {"lstm.w_f", &w.w_f}, {"lstm.w_o", &w.w_o}, {"lstm.w_g", &w.w_g},
                {"lstm.u_i", &w.u_i}, {"lstm.u_f", &w.u_f}, {"lstm.u_o", &w.u_o}, {"lstm.u_g", &w.u_g}};
    }

    explicit Slots(ModelCheckpoint& m) {
        auto add = [&](const std::string& n, std::span<double> s) {
            name.push_back(n);
            value.push_back(s);
            return static_cast<int>(value.size()) - 1;
        };
        if (m.encoder.table.trainable) word_emb = add("word_embeddings", m.encoder.table.vectors.a);
        for (auto& [n, mat] : lstm_mats(m.encoder.lstm)) lstm.push_back(add(n, mat->a));
        for (auto& [n, vec] : lstm_vecs(m.encoder.lstm)) lstm.push_back(add(n, *vec));
        attr_emb = add("attr_embeddings", m.attrs.embeddings.a);
        mapping_base = static_cast<int>(value.size());
        for (std::size_t i = 0; i < m.attrs.mappings.size(); ++i)
            add("mapping." + m.attrs.names[i], m.attrs.mappings[i].a);
        bilinear = add("attention_bilinear", m.attention.bilinear.a);
    }
};

struct Bank {
    std::vector<Vec> grad, acc_g, acc_d;

    explicit Bank(const Slots& slots) {
        for (const auto& v : slots.value) {
            grad.emplace_back(v.size(), 0.0);
            acc_g.emplace_back(v.size(), 0.0);
            acc_d.emplace_back(v.size(), 0.0);
        }
    }
};

// Gradients of one tuple against every parameter it touches.
struct TupleGrads {
    double loss_sum = 0.0;
    LstmWeights lstm;
    Mat bilinear;
    std::map<int, Vec> attr_emb;
    std::map<int, Mat> attr_map;
    std::map<int, Vec> word_emb;
};

struct TupleWork {
    const TrainingTuple* tuple = nullptr;
    int pos_attr = -1;
    std::vector<int> neg_attrs;
};

TupleGrads compute_tuple_grads(const TupleWork& work, const ModelCheckpoint& m) {
    TupleGrads tg;
    tg.lstm = LstmWeights::zeros(m.encoder.lstm.input_dim, m.encoder.lstm.hidden_dim,
                                 m.encoder.lstm.peepholes());
    tg.bilinear = Mat(m.attention.bilinear.rows, m.attention.bilinear.cols);

    const auto& paths = work.tuple->path_set.paths;
    std::vector<PathEncodeCache> caches(paths.size());
    std::vector<Vec> path_vecs(paths.size());
    for (std::size_t i = 0; i < paths.size(); ++i)
        path_vecs[i] = encode_path(paths[i], m.encoder, &caches[i]);

    std::vector<Vec> d_paths(paths.size(), Vec(m.encoder.lstm.hidden_dim, 0.0));
    MarginLossGrads mg;
    bool any_active = false;
    for (int neg : work.neg_attrs) {
        double loss = margin_loss(path_vecs, work.pos_attr, neg, m.attrs, m.attention,
                                  m.config.margin, m.config.norm, m.config.shared_attention_neg, &mg);
        tg.loss_sum += loss;
        if (loss == 0.0) continue;
        any_active = true;
        for (std::size_t i = 0; i < paths.size(); ++i) axpy(1.0, mg.d_paths[i], d_paths[i]);
        axpy(1.0, mg.d_bilinear.a, tg.bilinear.a);
        for (auto& [idx, g] : mg.d_attr_emb) {
            auto [it, _] = tg.attr_emb.try_emplace(idx, Vec(g.size(), 0.0));
            axpy(1.0, g, it->second);
        }
        for (auto& [idx, g] : mg.d_attr_map) {
            auto [it, _] = tg.attr_map.try_emplace(idx, Mat(g.rows, g.cols));
            axpy(1.0, g.a, it->second.a);
        }
    }
    if (any_active) {
        for (std::size_t i = 0; i < paths.size(); ++i)
            encode_path_backward(caches[i], m.encoder, d_paths[i], tg.lstm, &tg.word_emb);
    }
    return tg;
}

void reduce_tuple(TupleGrads& tg, const Slots& slots, Bank& bank, const ModelCheckpoint& m) {
    int li = 0;
    for (auto& [n, mat] : Slots::lstm_mats(tg.lstm)) axpy(1.0, mat->a, bank.grad[slots.lstm[li++]]);
    for (auto& [n, vec] : Slots::lstm_vecs(tg.lstm)) axpy(1.0, *vec, bank.grad[slots.lstm[li++]]);
    axpy(1.0, tg.bilinear.a, bank.grad[slots.bilinear]);
    const int ad = m.config.attr_dim;
    for (const auto& [idx, g] : tg.attr_emb) {
        std::span<double> dst(bank.grad[slots.attr_emb].data() + static_cast<std::size_t>(idx) * ad,
                              static_cast<std::size_t>(ad));
        axpy(1.0, g, dst);
    }
    for (const auto& [idx, g] : tg.attr_map)
        axpy(1.0, g.a, bank.grad[slots.mapping_base + idx]);
    if (slots.word_emb >= 0) {
        const int wd = m.config.word_dim;
        for (const auto& [row, g] : tg.word_emb) {
            std::span<double> dst(bank.grad[slots.word_emb].data() + static_cast<std::size_t>(row) * wd,
                                  static_cast<std::size_t>(wd));
            axpy(1.0, g, dst);
        }
    }
}

void renormalize_attr_embeddings(Mat& embeddings) {
    for (int r = 0; r < embeddings.rows; ++r) {
        auto row = embeddings.row(r);
        double nrm = l2_norm(row);
        // Skip rows that are already unit so untouched parameters stay
        // bit-identical across steps.
        if (nrm > 0.0 && std::fabs(nrm - 1.0) > 1e-12) scale(row, 1.0 / nrm);
    }
}

double validation_hits1(const ModelCheckpoint& m,
                        const std::map<std::string, const PathSet*>& entity_paths,
                        const std::map<std::string, std::set<int>>& entity_gold,
                        const std::vector<std::string>& val_entities) {
    if (val_entities.empty()) return 0.0;
    int hits = 0;
    for (const auto& e : val_entities) {
        const PathSet* ps = entity_paths.at(e);
        EntityRanking r = rank_attributes_for_entity(ps->paths, m, 1, {});
        if (!r.ranked.empty() && entity_gold.at(e).count(r.ranked[0].attr)) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(val_entities.size());
}

} // namespace

TrainResult train(const Dataset& dataset, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const TrainOptions& opts) {
    mcfg.validate();
    tcfg.validate();
    if (dataset.tuples.empty()) fail_data("training dataset is empty");

    // Vocabulary: class words of the training paths.
    std::vector<std::string> words;
    for (const auto& t : dataset.tuples)
        for (const auto& p : t.path_set.paths)
            for (const auto& c : p.classes) words.push_back(c);
    std::vector<std::string> attrs(dataset.retained_attributes.begin(), dataset.retained_attributes.end());

    ModelCheckpoint model = init_model(mcfg, words, attrs, opts.pretrained);
    model.encoder.table.trainable = opts.trainable_embeddings;
    if (mcfg.renormalize_attrs) renormalize_attr_embeddings(model.attrs.embeddings);

    // Per-entity views used for sampling exclusions and validation.
    std::map<std::string, const PathSet*> entity_paths;
    std::map<std::string, std::set<int>> entity_gold;
    for (const auto& t : dataset.tuples) {
        entity_paths.emplace(t.path_set.entity, &t.path_set);
        entity_gold[t.path_set.entity].insert(model.attrs.index_of(t.attribute));
    }

    SplitMix64 rng(tcfg.seed);

    // Validation split by entity, never by tuple.
    std::vector<std::string> entities;
    for (const auto& [e, _] : entity_paths) entities.push_back(e);
    std::set<std::string> val_set;
    std::vector<std::string> val_entities;
    if (tcfg.validation_fraction > 0.0) {
        std::vector<std::string> pool = entities;
        shuffle(pool, rng);
        auto n_val = static_cast<std::size_t>(std::llround(tcfg.validation_fraction *
                                                           static_cast<double>(pool.size())));
        n_val = std::min(n_val, pool.size() > 1 ? pool.size() - 1 : std::size_t{0});
        val_entities.assign(pool.begin(), pool.begin() + n_val);
        std::sort(val_entities.begin(), val_entities.end());
        val_set.insert(val_entities.begin(), val_entities.end());
    }

    std::vector<const TrainingTuple*> train_tuples;
    for (const auto& t : dataset.tuples)
        if (!val_set.count(t.path_set.entity)) train_tuples.push_back(&t);
    if (train_tuples.empty()) fail_data("no training tuples left after the validation split");

    Slots slots(model);
    Bank bank(slots);

    const int num_attrs = model.attrs.count();
    const int threads = std::max(1, opts.threads);

    TrainResult result;
    ModelCheckpoint best = model;
    bool have_best = false;
    int since_best = 0;

    std::vector<std::size_t> order(train_tuples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
        auto t0 = Clock::now();
        if (tcfg.shuffle) shuffle(order, rng);

        double loss_total = 0.0;
        long hinge_evals = 0;
        long skipped_tuples = 0;

        std::vector<TupleWork> batch;
        std::vector<TupleGrads> grads;
        for (std::size_t start = 0; start < order.size(); start += tcfg.batch_size) {
            std::size_t end = std::min(order.size(), start + tcfg.batch_size);
            batch.clear();
            // Negatives are drawn sequentially before any gradient work so the
            // random stream does not depend on the thread count.
            for (std::size_t i = start; i < end; ++i) {
                const TrainingTuple* t = train_tuples[order[i]];
                TupleWork w;
                w.tuple = t;
                w.pos_attr = model.attrs.index_of(t->attribute);
                const std::set<int>& gold = entity_gold.at(t->path_set.entity);
                std::set<int> excluded = tcfg.allow_gold_negatives ? std::set<int>{w.pos_attr} : gold;
                if (static_cast<int>(excluded.size()) >= num_attrs) {
                    // Every attribute is gold for this entity: no corrupted
                    // tuple exists, so it contributes nothing to the ranking
                    // objective.
                    ++skipped_tuples;
                    continue;
                }
                for (int n = 0; n < tcfg.negatives_per_positive; ++n)
                    w.neg_attrs.push_back(sample_corrupted(num_attrs, excluded, rng));
                batch.push_back(std::move(w));
            }
            if (batch.empty()) continue;

            grads.assign(batch.size(), {});
            if (threads == 1) {
                for (std::size_t i = 0; i < batch.size(); ++i)
                    grads[i] = compute_tuple_grads(batch[i], model);
            } else {
                std::vector<std::thread> pool;
                std::size_t chunk = (batch.size() + threads - 1) / threads;
                for (int w = 0; w < threads; ++w) {
                    std::size_t lo = w * chunk, hi = std::min(batch.size(), lo + chunk);
                    if (lo >= hi) break;
                    pool.emplace_back([&, lo, hi] {
                        for (std::size_t i = lo; i < hi; ++i)
                            grads[i] = compute_tuple_grads(batch[i], model);
                    });
                }
                for (auto& th : pool) th.join();
            }

            for (std::size_t i = 0; i < batch.size(); ++i) {
                reduce_tuple(grads[i], slots, bank, model);
                loss_total += grads[i].loss_sum;
                hinge_evals += tcfg.negatives_per_positive;
            }

            for (std::size_t s = 0; s < slots.value.size(); ++s)
                adadelta_step(slots.value[s], bank.grad[s], bank.acc_g[s], bank.acc_d[s],
                              tcfg.adadelta_rho, tcfg.adadelta_eps, slots.name[s]);
            if (mcfg.renormalize_attrs) renormalize_attr_embeddings(model.attrs.embeddings);
        }

        if (hinge_evals == 0)
            fail_data("no trainable tuples: every entity already holds every retained attribute "
                      "(" + std::to_string(skipped_tuples) + " tuples skipped)");
        double mean_loss = loss_total / static_cast<double>(hinge_evals);
        if (!std::isfinite(mean_loss))
            fail_numeric("training diverged: mean loss at epoch " + std::to_string(epoch) +
                         " is non-finite");

        EpochRecord rec;
        rec.epoch = epoch;
        rec.mean_loss = mean_loss;
        if (!val_entities.empty()) {
            rec.val_hits1 = validation_hits1(model, entity_paths, entity_gold, val_entities);
            if (*rec.val_hits1 > result.state.best_val_hits1) {
                result.state.best_val_hits1 = *rec.val_hits1;
                result.state.best_epoch = epoch;
                best = model;
                best.meta.best_val_hits1 = *rec.val_hits1;
                best.meta.best_epoch = epoch;
                have_best = true;
                since_best = 0;
            } else {
                ++since_best;
            }
        }
        rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
        result.state.loss_history.push_back(mean_loss);
        result.state.epoch = epoch;
        result.log.push_back(rec);
        if (opts.on_epoch) opts.on_epoch(rec);

        if (opts.save_every > 0 && !opts.checkpoint_path.empty() && epoch % opts.save_every == 0) {
            ModelCheckpoint snap = model;
            snap.meta.epochs = epoch;
            snap.meta.final_loss = mean_loss;
            save_checkpoint(snap, opts.checkpoint_path);
        }

        if (!val_entities.empty() && since_best >= tcfg.early_stop_patience) {
            result.state.stopped_early = true;
            break;
        }
    }

    result.state.rng_state = rng.state();
    result.checkpoint = have_best ? std::move(best) : std::move(model);
    result.checkpoint.meta.epochs = result.state.epoch;
    result.checkpoint.meta.final_loss = result.state.loss_history.back();
    result.checkpoint.meta.best_val_hits1 = result.state.best_val_hits1;
    result.checkpoint.meta.best_epoch = result.state.best_epoch;
    return result;
}

} // namespace transatt
