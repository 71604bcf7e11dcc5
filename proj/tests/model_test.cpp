#include "transatt/error.hpp"
#include "transatt/gradcheck.hpp"
#include "transatt/model.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace transatt;

namespace {

Vec random_vec(int n, SplitMix64& rng, double bound = 1.0) {
    Vec v(n);
    for (double& e : v) e = rng.uniform(-bound, bound);
    return v;
}

Mat random_mat(int r, int c, SplitMix64& rng, double bound = 1.0) {
    Mat m(r, c);
    for (double& e : m.a) e = rng.uniform(-bound, bound);
    return m;
}

// A small random model over `n_attrs` attributes with path_dim pd and
// attr_dim ad.
ModelCheckpoint toy_model(int n_attrs, int wd, int pd, int ad, std::uint64_t seed) {
    ModelConfig cfg;
    cfg.word_dim = wd;
    cfg.path_dim = pd;
    cfg.attr_dim = ad;
    cfg.seed = seed;
    std::vector<std::string> attrs;
    for (int i = 0; i < n_attrs; ++i) attrs.push_back("attr" + std::to_string(i));
    return init_model(cfg, {"root", "x", "y", "z"}, attrs, nullptr);
}

AttributeSpace toy_space(int n_attrs, int pd, int ad, SplitMix64& rng) {
    AttributeSpace space;
    space.embeddings = Mat(n_attrs, ad);
    for (int i = 0; i < n_attrs; ++i) {
        space.names.push_back("attr" + std::to_string(i));
        space.attr_index[space.names.back()] = i;
        for (double& v : space.embeddings.row(i)) v = rng.uniform(-1, 1);
        space.mappings.push_back(random_mat(pd, ad, rng));
    }
    return space;
}

} // namespace

TEST_CASE("attention over a single path is the unit weight") {
    SplitMix64 rng(1);
    Mat A = random_mat(3, 2, rng);
    Vec a = random_vec(2, rng);
    Vec alpha = attention_weights({random_vec(3, rng)}, a, A);
    REQUIRE(alpha.size() == 1);
    CHECK(alpha[0] == 1.0);
}

TEST_CASE("a zero bilinear matrix yields uniform attention") {
    SplitMix64 rng(2);
    Mat A(4, 3);
    Vec a = random_vec(3, rng);
    std::vector<Vec> paths{random_vec(4, rng), random_vec(4, rng), random_vec(4, rng)};
    Vec alpha = attention_weights(paths, a, A);
    for (double w : alpha) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("attention matches the explicit-loop oracle") {
    SplitMix64 rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        Mat A = random_mat(3, 2, rng);
        Vec a = random_vec(2, rng);
        std::vector<Vec> paths{random_vec(3, rng), random_vec(3, rng)};
        Vec alpha = attention_weights(paths, a, A);
        std::vector<double> expect = oracle::attention({paths[0], paths[1]}, a, A);
        for (int i = 0; i < 2; ++i) CHECK(std::fabs(alpha[i] - expect[i]) < 1e-12);
    }
}

TEST_CASE("attention ignores constant score shifts and positive path scaling keeps the order") {
    SplitMix64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        Mat A = random_mat(3, 3, rng);
        Vec a = random_vec(3, rng);
        std::vector<Vec> paths;
        int n = 2 + static_cast<int>(rng.below(3));
        for (int i = 0; i < n; ++i) paths.push_back(random_vec(3, rng));

        Vec s = attention_scores(paths, a, A);
        Vec alpha = softmax(s);
        double shift = rng.uniform(-40, 40);
        Vec shifted = s;
        for (double& v : shifted) v += shift;
        Vec alpha2 = softmax(shifted);
        for (int i = 0; i < n; ++i) CHECK(std::fabs(alpha[i] - alpha2[i]) < 1e-12);

        // common positive scaling of all path vectors preserves the full order
        double factor = rng.uniform(0.1, 5.0);
        std::vector<Vec> scaled = paths;
        for (auto& p : scaled)
            for (double& v : p) v *= factor;
        Vec beta = attention_weights(scaled, a, A);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                if (alpha[i] < alpha[j]) CHECK(beta[i] <= beta[j]);
    }
}

TEST_CASE("aggregate basics") {
    Vec p1{4.0, 0.0}, p2{0.0, 4.0};
    Vec got = aggregate({p1, p2}, Vec{0.25, 0.75});
    CHECK(got[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(got[1] == doctest::Approx(3.0).epsilon(1e-15));

    Vec single = aggregate({p1}, Vec{1.0});
    CHECK(single == p1); // bitwise: 1.0 * x + 0 = x

    SplitMix64 rng(5);
    Vec v = random_vec(3, rng);
    Vec same = aggregate({v, v}, Vec{0.3, 0.7});
    for (int k = 0; k < 3; ++k) CHECK(same[k] == doctest::Approx(v[k]).epsilon(1e-14));

    CHECK_THROWS_AS(aggregate({p1, p2}, Vec{1.0}), Error);
}

TEST_CASE("score with an identity mapping and p == a is zero") {
    SplitMix64 rng(6);
    Mat identity(3, 3);
    for (int i = 0; i < 3; ++i) identity(i, i) = 1.0;
    Vec a = random_vec(3, rng);
    CHECK(score(a, identity, a, Norm::L2) == 0.0);
    CHECK(score(a, identity, a, Norm::L1) == 0.0);
}

TEST_CASE("the zero vector scores the norm of the attribute embedding") {
    SplitMix64 rng(7);
    Mat M = random_mat(3, 2, rng);
    Vec a = random_vec(2, rng);
    Vec zero(3, 0.0);
    CHECK(score(zero, M, a, Norm::L2) == doctest::Approx(l2_norm(a)).epsilon(1e-14));
    double l1 = std::fabs(a[0]) + std::fabs(a[1]);
    CHECK(score(zero, M, a, Norm::L1) == doctest::Approx(l1).epsilon(1e-14));
}

TEST_CASE("score matches the scalar oracle") {
    SplitMix64 rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        Mat M = random_mat(4, 3, rng);
        Vec p = random_vec(4, rng), a = random_vec(3, rng);
        for (Norm n : {Norm::L1, Norm::L2})
            CHECK(std::fabs(score(p, M, a, n) - oracle::translate_score(p, M, a, n)) < 1e-12);
    }
}

TEST_CASE("score_entity composes attention, aggregation, and translation") {
    SplitMix64 rng(9);
    AttributeSpace space = toy_space(3, 3, 2, rng);
    AttentionParams att{random_mat(3, 2, rng)};

    // single path reduces to the plain score
    Vec p = random_vec(3, rng);
    EntityScore single = score_entity({p}, 1, space, att, Norm::L2);
    CHECK(single.value == score(p, 1, space, Norm::L2));
    CHECK(single.attention == Vec{1.0});

    // two identical paths: convexity makes the aggregate equal the path
    EntityScore twin = score_entity({p, p}, 2, space, att, Norm::L2);
    CHECK(twin.value == doctest::Approx(score(p, 2, space, Norm::L2)).epsilon(1e-12));

    // random instance equals the manual composition
    std::vector<Vec> paths{random_vec(3, rng), random_vec(3, rng)};
    EntityScore es = score_entity(paths, 0, space, att, Norm::L2);
    Vec alpha = attention_weights(paths, space.embedding(0), att.bilinear);
    Vec agg = aggregate(paths, alpha);
    CHECK(es.value == score(agg, 0, space, Norm::L2));
    CHECK(es.attention == alpha);
}

TEST_CASE("margin loss hinge behavior") {
    // Engineered distances: identity-ish mappings, path equal to the positive
    // attribute embedding.
    SplitMix64 rng(10);
    AttributeSpace space = toy_space(2, 2, 2, rng);
    space.mappings[0] = Mat(2, 2);
    space.mappings[0](0, 0) = 1.0;
    space.mappings[0](1, 1) = 1.0;
    space.mappings[1] = space.mappings[0];
    space.embeddings.row(0)[0] = 0.0;
    space.embeddings.row(0)[1] = 0.0;
    space.embeddings.row(1)[0] = 10.0; // far away -> hinge inactive
    space.embeddings.row(1)[1] = 0.0;
    AttentionParams att{Mat(2, 2)};

    std::vector<Vec> paths{Vec{0.0, 0.0}};
    MarginLossGrads g;
    double loss = margin_loss(paths, 0, 1, space, att, 1.0, Norm::L2, false, &g);
    CHECK(loss == 0.0); // d_pos = 0, d_neg = 10, margin 1
    for (const auto& dp : g.d_paths)
        for (double v : dp) CHECK(v == 0.0);
    for (double v : g.d_bilinear.a) CHECK(v == 0.0);
    CHECK(g.d_attr_emb.empty());
    CHECK(g.d_attr_map.empty());

    // d_pos = 1.0, d_neg = 1.2, margin 1 -> loss 0.8
    space.embeddings.row(0)[0] = 1.0;  // d_pos = |(0,0) - (1,0)| = 1
    space.embeddings.row(1)[0] = 1.2;  // d_neg = 1.2
    double active = margin_loss(paths, 0, 1, space, att, 1.0, Norm::L2, false, nullptr);
    CHECK(active == doctest::Approx(0.8).epsilon(1e-12));

    CHECK_THROWS_AS(margin_loss(paths, 1, 1, space, att, 1.0, Norm::L2, false, nullptr), Error);
}

TEST_CASE("margin loss gradients pass the finite-difference check") {
    for (bool shared : {false, true}) {
        CAPTURE(shared);
        for (Norm norm : {Norm::L2, Norm::L1}) {
            CAPTURE(norm == Norm::L1 ? "L1" : "L2");
            SplitMix64 rng(shared ? 21u : 20u);
            const int pd = 3, ad = 3;
            AttributeSpace space = toy_space(3, pd, ad, rng);
            AttentionParams att{random_mat(pd, ad, rng)};
            Mat paths_mat = random_mat(2, pd, rng); // rows are path vectors

            auto paths_of = [&] {
                std::vector<Vec> out;
                for (int r = 0; r < 2; ++r)
                    out.emplace_back(paths_mat.row(r).begin(), paths_mat.row(r).end());
                return out;
            };
            const int pos = 0, neg = 2;
            auto loss_fn = [&] {
                return margin_loss(paths_of(), pos, neg, space, att, 2.5, norm, shared, nullptr);
            };
            double base = loss_fn();
            REQUIRE(base > 0.05); // hinge must be active for a meaningful check

            MarginLossGrads g;
            margin_loss(paths_of(), pos, neg, space, att, 2.5, norm, shared, &g);

            Mat d_paths(2, pd);
            for (int r = 0; r < 2; ++r)
                for (int c = 0; c < pd; ++c) d_paths(r, c) = g.d_paths[r][c];
            Mat d_emb(space.embeddings.rows, space.embeddings.cols);
            for (const auto& [idx, vec] : g.d_attr_emb)
                for (int c = 0; c < ad; ++c) d_emb(idx, c) = vec[c];
            Mat d_map_pos = g.d_attr_map.count(pos) ? g.d_attr_map.at(pos) : Mat(pd, ad);
            Mat d_map_neg = g.d_attr_map.count(neg) ? g.d_attr_map.at(neg) : Mat(pd, ad);

            std::vector<GradCheckItem> items = {
                {paths_mat.a, d_paths.a, "paths"},
                {space.embeddings.a, d_emb.a, "attr_embeddings"},
                {space.mappings[pos].a, d_map_pos.a, "mapping_pos"},
                {space.mappings[neg].a, d_map_neg.a, "mapping_neg"},
                {att.bilinear.a, g.d_bilinear.a, "bilinear"}};
            GradCheckResult r = grad_check(loss_fn, items, 1e-5);
            CHECK(r.max_rel_err < 1e-4);
        }
    }
}

TEST_CASE("rank_attributes_for_path orders every attribute with deterministic ties") {
    ModelCheckpoint m = toy_model(6, 3, 3, 3, 77);
    ClassPath p;
    p.classes = {"root", "x", "y"};
    auto all = rank_attributes_for_path(p, m, m.attrs.count());
    REQUIRE(static_cast<int>(all.size()) == m.attrs.count());
    for (std::size_t i = 0; i + 1 < all.size(); ++i) {
        bool ordered = all[i].score < all[i + 1].score ||
                       (all[i].score == all[i + 1].score && all[i].attr < all[i + 1].attr);
        CHECK(ordered);
    }

    // brute force: score every attribute via the public primitive and sort
    Vec pv = encode_path(p, m.encoder);
    std::vector<RankedAttribute> brute;
    for (int a = 0; a < m.attrs.count(); ++a) brute.push_back({a, score(pv, a, m.attrs, m.config.norm)});
    std::stable_sort(brute.begin(), brute.end(), [](auto& x, auto& y) {
        if (x.score != y.score) return x.score < y.score;
        return x.attr < y.attr;
    });
    for (int i = 0; i < m.attrs.count(); ++i) {
        CHECK(all[i].attr == brute[i].attr);
        CHECK(all[i].score == brute[i].score); // bit-equal
    }

    auto top2 = rank_attributes_for_path(p, m, 2);
    REQUIRE(top2.size() == 2);
    CHECK(top2[0].attr == all[0].attr);
    CHECK(top2[1].attr == all[1].attr);
}

TEST_CASE("tied scores break by attribute index") {
    // Identical embeddings and mappings for every attribute force exact ties.
    ModelCheckpoint m = toy_model(4, 2, 2, 2, 78);
    for (int a = 1; a < 4; ++a) {
        m.attrs.mappings[a] = m.attrs.mappings[0];
        for (int c = 0; c < 2; ++c) m.attrs.embeddings(a, c) = m.attrs.embeddings(0, c);
    }
    ClassPath p;
    p.classes = {"root"};
    auto ranked = rank_attributes_for_path(p, m, 4);
    for (int i = 0; i < 4; ++i) CHECK(ranked[i].attr == i);
}

TEST_CASE("entity ranking matches the exhaustive composition oracle") {
    ModelCheckpoint m = toy_model(8, 3, 3, 3, 79);
    std::vector<ClassPath> paths(2);
    paths[0].classes = {"root", "x"};
    paths[1].classes = {"root", "y", "z"};

    EntityRanking er = rank_attributes_for_entity(paths, m, m.attrs.count(), {});
    REQUIRE(static_cast<int>(er.ranked.size()) == m.attrs.count());

    std::vector<Vec> pv;
    for (const auto& p : paths) pv.push_back(encode_path(p, m.encoder));
    std::vector<std::pair<RankedAttribute, Vec>> brute;
    for (int a = 0; a < m.attrs.count(); ++a) {
        EntityScore es = score_entity(pv, a, m.attrs, m.attention, m.config.norm);
        brute.push_back({{a, es.value}, es.attention});
    }
    std::stable_sort(brute.begin(), brute.end(), [](auto& x, auto& y) {
        if (x.first.score != y.first.score) return x.first.score < y.first.score;
        return x.first.attr < y.first.attr;
    });
    for (int i = 0; i < m.attrs.count(); ++i) {
        CHECK(er.ranked[i].attr == brute[i].first.attr);
        CHECK(er.ranked[i].score == brute[i].first.score);
        for (int c = 0; c < 2; ++c) CHECK(er.attention(i, c) == brute[i].second[c]);
    }

    // attention rows are distributions
    for (int r = 0; r < er.attention.rows; ++r) {
        double sum = 0.0;
        for (int c = 0; c < er.attention.cols; ++c) sum += er.attention(r, c);
        CHECK(std::fabs(sum - 1.0) < 1e-9);
    }

    // single path with empty filter reduces to the path ranking
    EntityRanking single = rank_attributes_for_entity({paths[0]}, m, m.attrs.count(), {});
    auto path_ranked = rank_attributes_for_path(paths[0], m, m.attrs.count());
    for (int i = 0; i < m.attrs.count(); ++i) {
        CHECK(single.ranked[i].attr == path_ranked[i].attr);
        CHECK(single.ranked[i].score == path_ranked[i].score);
    }
}

TEST_CASE("filtering every attribute is an error") {
    ModelCheckpoint m = toy_model(3, 2, 2, 2, 80);
    std::vector<ClassPath> paths(1);
    paths[0].classes = {"root"};
    CHECK_THROWS_AS(rank_attributes_for_entity(paths, m, 5, {0, 1, 2}), Error);
}

TEST_CASE("checkpoint round trip preserves rankings bitwise") {
    namespace fs = std::filesystem;
    ModelCheckpoint m = toy_model(5, 3, 4, 3, 81);
    m.meta.epochs = 17;
    m.meta.final_loss = 0.125;
    fs::path file = fs::temp_directory_path() / "transatt_ck_test.json";
    save_checkpoint(m, file.string());
    ModelCheckpoint loaded = load_checkpoint(file.string());

    CHECK(loaded.attrs.names == m.attrs.names);
    CHECK(loaded.encoder.table.vocab == m.encoder.table.vocab);
    CHECK(loaded.meta.epochs == 17);

    std::vector<ClassPath> probe(2);
    probe[0].classes = {"root", "x", "y"};
    probe[1].classes = {"z"};
    for (const auto& p : probe) {
        auto a = rank_attributes_for_path(p, m, 5);
        auto b = rank_attributes_for_path(p, loaded, 5);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a[i].attr == b[i].attr);
            CHECK(a[i].score == b[i].score); // bitwise through JSON
        }
    }
    EntityRanking ea = rank_attributes_for_entity(probe, m, 5, {});
    EntityRanking eb = rank_attributes_for_entity(probe, loaded, 5, {});
    CHECK(ea.attention.a == eb.attention.a);
    fs::remove(file);
}

TEST_CASE("unknown checkpoint format versions are rejected") {
    namespace fs = std::filesystem;
    ModelCheckpoint m = toy_model(2, 2, 2, 2, 82);
    fs::path file = fs::temp_directory_path() / "transatt_ck_vers.json";
    m.format_version = 999;
    save_checkpoint(m, file.string());
    CHECK_THROWS_AS(load_checkpoint(file.string()), Error);
    fs::remove(file);
}
