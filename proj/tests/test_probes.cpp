#include <cmath>
#include <sstream>

#include "doctest.h"
#include "test_util.hpp"
#include "vlaudit/evaluation.hpp"
#include "vlaudit/parallel.hpp"
#include "vlaudit/probes.hpp"
#include "vlaudit/report_json.hpp"

using namespace vlaudit;
using namespace vlaudit::probe;

namespace {

TokenFeatureSequence random_sequence(std::mt19937_64& rng, std::size_t len, std::size_t d) {
    std::normal_distribution<double> g;
    TokenFeatureSequence s;
    s.id = "s";
    s.tokens.assign(len, std::vector<double>(d));
    for (auto& t : s.tokens)
        for (auto& x : t) x = g(rng);
    return s;
}

ProbeModel randomised(ProbeKind kind, std::size_t d, std::uint64_t seed) {
    auto m = init_model(kind, d, 6, seed);
    if (kind == ProbeKind::AttentionPool) {
        auto rng = task_rng(seed, 77, 0);
        std::normal_distribution<double> g(0.0, 0.7);
        for (auto& q : m.query) q = g(rng);
    }
    return m;
}

Dataset blobs(std::uint64_t seed, std::size_t n, double gap, bool random_labels = false) {
    auto rng = task_rng(seed, 5, 0);
    std::normal_distribution<double> g;
    std::bernoulli_distribution coin(0.5);
    Dataset out;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        std::vector<double> x = {g(rng) + (label ? gap / 2 : -gap / 2), g(rng)};
        out.push_back({"b" + std::to_string(i), {x}, random_labels ? static_cast<int>(coin(rng)) : label});
    }
    return out;
}

double test_auc(const ProbeModel& m, const Dataset& data) {
    const auto p = predict(m, data);
    std::vector<double> pos, neg;
    for (std::size_t i = 0; i < data.size(); ++i) (*data[i].label ? pos : neg).push_back(p[i]);
    return eval::roc_auc(pos, neg);
}

// Only token 3 of 16 carries the label, along one marker dimension.
Dataset needle(std::uint64_t seed, std::size_t n) {
    auto rng = task_rng(seed, 6, 0);
    std::normal_distribution<double> g;
    Dataset out;
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        TokenFeatureSequence s;
        s.id = "n" + std::to_string(i);
        s.label = label;
        for (std::size_t t = 0; t < 16; ++t) {
            std::vector<double> h = {g(rng), g(rng), g(rng), 0.0};
            if (t == 3) {
                h[0] = (label ? 1.5 : -1.5) + g(rng);
                h[3] = 4.0;
            }
            s.tokens.push_back(h);
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace

TEST_SUITE("probes") {

TEST_CASE("mean pooling") {
    TokenFeatureSequence one{"a", {{1.0, -2.0}}, {}};
    CHECK(mean_pool(one) == std::vector<double>{1.0, -2.0});
    TokenFeatureSequence two{"b", {{0.0, 0.0}, {2.0, 4.0}}, {}};
    CHECK(mean_pool(two) == std::vector<double>{1.0, 2.0});
    TokenFeatureSequence swapped{"c", {{2.0, 4.0}, {0.0, 0.0}}, {}};
    CHECK(mean_pool(swapped) == mean_pool(two));
    CHECK_THROWS_AS(mean_pool(TokenFeatureSequence{"e", {}, {}}), DataError);
}

TEST_CASE("attention pooling") {
    std::mt19937_64 rng(1);
    const auto s = random_sequence(rng, 5, 3);
    const auto zero = attention_pool(s, std::vector<double>(3, 0.0));
    for (double a : zero.weights) CHECK(a == doctest::Approx(0.2));
    const auto mp = mean_pool(s);
    for (std::size_t j = 0; j < 3; ++j) CHECK(zero.pooled[j] == doctest::Approx(mp[j]).epsilon(1e-12));

    TokenFeatureSequence single{"x", {{4.0, 5.0}}, {}};
    const auto one = attention_pool(single, std::vector<double>{3.0, -1.0});
    CHECK(one.weights == std::vector<double>{1.0});
    CHECK(one.pooled == std::vector<double>{4.0, 5.0});

    TokenFeatureSequence pm{"y", {{10.0}, {-10.0}}, {}};
    const auto r = attention_pool(pm, std::vector<double>{1.0});
    CHECK(r.weights[0] == doctest::Approx(1.0));
    CHECK(r.weights[1] == doctest::Approx(2.06e-9).epsilon(0.01));
    CHECK(r.pooled[0] == doctest::Approx(10.0));

    // Weights sum to one; large logits stay finite.
    const auto big = attention_pool(s, std::vector<double>{500.0, -300.0, 200.0});
    double sum = 0.0;
    for (double a : big.weights) sum += a;
    CHECK(std::abs(sum - 1.0) <= 1e-12);
}

TEST_CASE("attention weights ignore a common logit offset") {
    // Append a constant coordinate to every token: q's last entry then adds
    // the same amount to every logit.
    std::mt19937_64 rng(2);
    auto s = random_sequence(rng, 6, 3);
    for (auto& t : s.tokens) t.push_back(1.0);
    const std::vector<double> q = {0.3, -0.8, 0.5, 0.0};
    std::vector<double> q2 = q;
    q2[3] = 17.0;
    const auto a = attention_pool(s, q), b = attention_pool(s, q2);
    for (std::size_t i = 0; i < a.weights.size(); ++i) CHECK(a.weights[i] == doctest::Approx(b.weights[i]).epsilon(1e-12));
}

TEST_CASE("probe forward") {
    TokenFeatureSequence s{"a", {{3.0, -1.0}}, {}};
    auto lin = init_model(ProbeKind::Linear, 2, 0, 0);
    lin.w = {0.0, 0.0};
    lin.b = 0.0;
    CHECK(probe_forward(lin, s) == 0.5);
    auto one = init_model(ProbeKind::Linear, 1, 0, 0);
    one.w = {1.0};
    one.b = 0.0;
    CHECK(probe_forward(one, TokenFeatureSequence{"z", {{0.0}}, {}}) == 0.5);
    CHECK(probe_forward(one, TokenFeatureSequence{"z", {{1e6}}, {}}) == doctest::Approx(1.0));
    CHECK(probe_forward(one, TokenFeatureSequence{"z", {{-1e6}}, {}}) >= 0.0);

    // Attention with q = 0 reduces to the linear probe on the mean.
    std::mt19937_64 rng(3);
    const auto seq = random_sequence(rng, 7, 4);
    auto att = init_model(ProbeKind::AttentionPool, 4, 0, 5);
    auto lin4 = init_model(ProbeKind::Linear, 4, 0, 5);
    lin4.w = att.w;
    lin4.b = att.b;
    CHECK(probe_forward(att, seq) == doctest::Approx(probe_forward(lin4, seq)).epsilon(1e-12));
    CHECK(probe_forward(att, seq) == probe_forward(att, seq));
    CHECK_THROWS_AS(probe_forward(lin4, random_sequence(rng, 2, 3)), DataError);
}

TEST_CASE("parameter layout round trips") {
    for (auto kind : {ProbeKind::Linear, ProbeKind::Mlp, ProbeKind::AttentionPool}) {
        auto m = randomised(kind, 5, 4);
        auto flat = m.flat();
        CHECK(flat.size() == m.parameter_count());
        for (auto& v : flat) v += 0.25;
        m.set_flat(flat);
        CHECK(m.flat() == flat);
        CHECK_THROWS_AS(m.set_flat(std::vector<double>(flat.size() + 1)), ParameterError);
        const auto back = report::probe_model_from_json(report::to_json(m));
        CHECK(back.flat() == m.flat());
        CHECK(back.kind == m.kind);
    }
    CHECK(init_model(ProbeKind::Mlp, 3, 4, 0).parameter_count() == 4 * 3 + 4 + 4 + 1);
    CHECK(init_model(ProbeKind::AttentionPool, 3, 0, 0).query == std::vector<double>(3, 0.0));
}

TEST_CASE("gradients match finite differences") {
    for (auto kind : {ProbeKind::Linear, ProbeKind::Mlp, ProbeKind::AttentionPool}) {
        for (std::uint64_t seed = 0; seed < 5; ++seed) {
            auto rng = task_rng(seed, 8, static_cast<std::uint64_t>(kind));
            const auto m = randomised(kind, 4, seed);
            const auto s = random_sequence(rng, 1 + seed % 5, 4);
            const auto r = grad_check(m, s, static_cast<int>(seed % 2), 1e-5);
            CHECK(r.max_relative_error < 1e-4);
        }
    }
    CHECK_THROWS_AS(grad_check(init_model(ProbeKind::Linear, 2, 0, 0), TokenFeatureSequence{"a", {{1.0, 2.0}}, 1}, 0, 1e-2),
                    ParameterError);
}

TEST_CASE("gradient vanishes at a balanced zero point") {
    auto m = init_model(ProbeKind::Linear, 2, 0, 0);
    m.w = {0.0, 0.0};
    m.b = 0.0;
    const TokenFeatureSequence pos{"p", {{1.0, 2.0}}, 1}, neg{"n", {{1.0, 2.0}}, 0};
    std::vector<double> gp, gn;
    loss_and_gradient(m, pos, 1, &gp);
    loss_and_gradient(m, neg, 0, &gn);
    for (std::size_t i = 0; i < gp.size(); ++i) CHECK(std::abs(gp[i] + gn[i]) < 1e-12);
    CHECK(grad_check(m, pos, 1, 1e-5).max_absolute_error < 1e-8);
}

TEST_CASE("linear probe separates blobs") {
    const auto data = blobs(1, 400, 5.0);
    const auto [train, val] = split_train_validation(data, 0.2, 1);
    Hyperparams hp;
    hp.learning_rate = 0.05;
    hp.max_epochs = 40;
    const auto [model, rep] = train_probe(train, val, ProbeKind::Linear, hp, 1);
    CHECK(rep.best_validation_auc >= 0.99);
    CHECK(test_auc(model, blobs(2, 400, 5.0)) >= 0.99);
    for (const auto& e : rep.epochs) {
        CHECK(std::isfinite(e.train_loss));
        CHECK(std::isfinite(e.validation_loss));
    }
}

TEST_CASE("frozen-query attention probe also separates blobs") {
    const auto data = blobs(3, 400, 5.0);
    const auto [train, val] = split_train_validation(data, 0.2, 3);
    Hyperparams hp;
    hp.learning_rate = 0.05;
    hp.max_epochs = 40;
    hp.freeze_query = true;
    const auto [model, rep] = train_probe(train, val, ProbeKind::AttentionPool, hp, 3);
    CHECK(model.query == std::vector<double>(2, 0.0));
    CHECK(test_auc(model, blobs(4, 400, 5.0)) >= 0.99);
    hp.freeze_query = false;
    const auto [mlp, mrep] = train_probe(train, val, ProbeKind::Mlp, hp, 3);
    CHECK(test_auc(mlp, blobs(4, 400, 5.0)) >= 0.99);
}

TEST_CASE("random labels give chance-level held-out AUC") {
    const auto data = blobs(5, 400, 5.0, true);
    const auto [train, val] = split_train_validation(data, 0.2, 5);
    Hyperparams hp;
    hp.learning_rate = 0.05;
    hp.max_epochs = 30;
    const auto [model, rep] = train_probe(train, val, ProbeKind::Linear, hp, 5);
    const double auc = test_auc(model, blobs(6, 1000, 5.0, true));
    CHECK(auc >= 0.4);
    CHECK(auc <= 0.6);
}

TEST_CASE("attention pooling finds a single informative token") {
    const auto data = needle(7, 600);
    const auto [train, val] = split_train_validation(data, 0.2, 7);
    Hyperparams hp;
    hp.learning_rate = 0.01;
    hp.max_epochs = 60;
    hp.patience = 15;
    const auto test = needle(8, 600);
    const auto [att, arep] = train_probe(train, val, ProbeKind::AttentionPool, hp, 7);
    const auto [lin, lrep] = train_probe(train, val, ProbeKind::Linear, hp, 7);
    const double a = test_auc(att, test), l = test_auc(lin, test);
    MESSAGE("attention AUC " << a << ", linear AUC " << l);
    CHECK(a - l >= 0.1);
}

TEST_CASE("training is reproducible") {
    const auto data = blobs(9, 200, 2.0);
    const auto [train, val] = split_train_validation(data, 0.25, 9);
    Hyperparams hp;
    hp.max_epochs = 8;
    hp.hidden = 8;
    const auto a = train_probe(train, val, ProbeKind::Mlp, hp, 11);
    const auto b = train_probe(train, val, ProbeKind::Mlp, hp, 11);
    REQUIRE(a.second.epochs.size() == b.second.epochs.size());
    for (std::size_t i = 0; i < a.second.epochs.size(); ++i) {
        CHECK(a.second.epochs[i].train_loss == b.second.epochs[i].train_loss);
        CHECK(a.second.epochs[i].validation_loss == b.second.epochs[i].validation_loss);
    }
    CHECK(a.first.flat() == b.first.flat());
}

TEST_CASE("standardisation statistics travel with the model") {
    auto data = blobs(12, 200, 5.0);
    for (auto& s : data)
        for (auto& t : s.tokens) {
            t[0] = t[0] * 1000.0 + 5e4;
            t[1] *= 1e-3;
        }
    const auto [train, val] = split_train_validation(data, 0.2, 1);
    Hyperparams hp;
    hp.standardize = true;
    hp.learning_rate = 0.05;
    hp.max_epochs = 30;
    const auto [model, rep] = train_probe(train, val, ProbeKind::Linear, hp, 1);
    CHECK(model.feature_mean.size() == 2);
    CHECK(test_auc(model, data) >= 0.99);
    const auto back = report::probe_model_from_json(report::to_json(model));
    CHECK(predict(back, data) == predict(model, data));
}

TEST_CASE("training errors") {
    Dataset single = blobs(1, 20, 3.0);
    for (auto& s : single) s.label = 1;
    CHECK_THROWS_AS(train_probe(single, blobs(2, 20, 3.0), ProbeKind::Linear, {}, 0), DataError);
    CHECK_THROWS_AS(train_probe(blobs(2, 20, 3.0), single, ProbeKind::Linear, {}, 0), DataError);

    // Inputs large enough to overflow the loss are reported with epoch and batch.
    Dataset huge = blobs(1, 40, 3.0);
    for (auto& s : huge) s.tokens[0][0] *= 1e308;
    Hyperparams hp;
    hp.learning_rate = 1.0;
    try {
        train_probe(huge, huge, ProbeKind::Linear, hp, 0);
        FAIL("expected error");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("epoch") != std::string::npos);
    }
}

TEST_CASE("stratified split") {
    const auto data = blobs(1, 100, 1.0);
    const auto [train, val] = split_train_validation(data, 0.2, 4);
    CHECK(train.size() == 80);
    CHECK(val.size() == 20);
    int pos = 0;
    for (const auto& s : val) pos += *s.label;
    CHECK(pos == 10);
    const auto again = split_train_validation(data, 0.2, 4);
    CHECK(again.second.front().id == val.front().id);
    CHECK_THROWS_AS(split_train_validation(data, 1.0, 0), ParameterError);
}

TEST_CASE("parallel and serial prediction agree") {
    const auto data = needle(1, 300);
    const auto m = randomised(ProbeKind::AttentionPool, 4, 2);
    const auto serial_p = serial::predict(m, data);
    for (int threads : {1, 2, 8}) {
        set_thread_count(threads);
        CHECK(predict(m, data) == serial_p);
    }
    set_thread_count(0);
}

TEST_CASE("sequence JSONL round trip") {
    Dataset d = needle(2, 6);
    d[1].label.reset();
    std::ostringstream out;
    write_sequences(out, d);
    std::istringstream in(out.str());
    const auto back = parse_sequences(in);
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back[i].id == d[i].id);
        CHECK(back[i].label == d[i].label);
        CHECK(back[i].tokens == d[i].tokens);
    }
    std::istringstream ragged(R"({"id":"a","label":1,"tokens":[[1,2],[3]]})");
    CHECK_THROWS_AS(parse_sequences(ragged), ParseError);
    std::istringstream empty(R"({"id":"a","label":1,"tokens":[]})");
    CHECK_THROWS_AS(parse_sequences(empty), ParseError);
}

TEST_CASE("embedding rows become one-token sequences") {
    EmbeddingSpace s("x", 2);
    s.add("a", {1.0, 2.0});
    s.add("b", {3.0, 4.0});
    s.add("c", {5.0, 6.0});
    LabeledDataset l;
    l.add("a", 1);
    l.add("c", 0);
    const auto d = from_embeddings(s, l);
    REQUIRE(d.size() == 2);
    CHECK(d[0].tokens.size() == 1);
    CHECK(d[1].id == "c");
    CHECK(*d[1].label == 0);
}

}  // TEST_SUITE
