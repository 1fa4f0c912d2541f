#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <thread>

#include "protocheck/context.hpp"

using namespace protocheck;

namespace {

Utterance utt(int idx, double ts, const std::string& text) {
    return {idx, idx, ts, Speaker::participant, text};
}

Transcript transcript_at(const std::vector<double>& timestamps) {
    Transcript t;
    t.session_id = "s";
    for (std::size_t i = 0; i < timestamps.size(); ++i)
        t.utterances.push_back(utt(static_cast<int>(i), timestamps[i], "utterance " + std::to_string(i)));
    return t;
}

/// Test-only provider returning pre-seeded vectors.
class ScriptedProvider final : public EmbeddingProvider {
public:
    explicit ScriptedProvider(std::map<std::string, std::vector<double>> table)
        : table_(std::move(table)) {}
    EmbeddingVector embed(const std::string& text) override {
        auto it = table_.find(text);
        REQUIRE(it != table_.end());
        return {it->second};
    }
    std::size_t dim() const override { return 2; }
    std::string id() const override { return "scripted"; }

private:
    std::map<std::string, std::vector<double>> table_;
};

}  // namespace

TEST_CASE("temporal_extract applies strict window bounds") {
    Transcript t = transcript_at({100.0, 115.0, 150.0, 185.0});
    ContextConfig cfg;
    cfg.delta_pre_s = 10.0;
    cfg.delta_post_s = 20.0;

    // bounds (110, 180) exclusive: keeps 115 and 150 only
    auto kept = temporal_extract(t, {"e", 120.0, 160.0}, cfg);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].timestamp_s == 115.0);
    CHECK(kept[1].timestamp_s == 150.0);

    SUBCASE("utterance exactly on the widened bound is excluded") {
        cfg.delta_pre_s = 0.0;
        cfg.delta_post_s = 0.0;
        auto exact = temporal_extract(t, {"e", 100.0, 115.0}, cfg);
        CHECK(exact.empty());
    }
    SUBCASE("window covering the whole session returns the full transcript") {
        cfg.delta_pre_s = 1000.0;
        cfg.delta_post_s = 1000.0;
        auto all = temporal_extract(t, {"e", 100.0, 185.0}, cfg);
        CHECK(all.size() == t.utterances.size());
    }
    SUBCASE("empty result is valid, not an error") {
        auto none = temporal_extract(t, {"e", 500.0, 600.0}, cfg);
        CHECK(none.empty());
    }
}

TEST_CASE("hashing provider is deterministic and unit norm") {
    HashingEmbeddingProvider provider(256);

    EmbeddingVector a = provider.embed("abc");
    EmbeddingVector b = provider.embed("abc");
    CHECK(a.values == b.values);
    CHECK(a.dim() == 256);
    CHECK(a.norm() == doctest::Approx(1.0).epsilon(1e-9));

    // single trigram lands in exactly one bucket
    int nonzero = 0;
    for (double v : a.values)
        if (v != 0.0) ++nonzero;
    CHECK(nonzero == 1);

    EmbeddingVector longer = provider.embed("Port Control, this is Adventurer");
    CHECK(longer.norm() == doctest::Approx(1.0).epsilon(1e-9));

    // case folding: embeddings of case variants coincide
    CHECK(provider.embed("HELLO WORLD").values == provider.embed("hello world").values);

    CHECK_THROWS_AS(provider.embed(""), EmbeddingError);

    SUBCASE("short texts fall back to a single gram") {
        CHECK(provider.embed("ab").norm() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(provider.embed("a").norm() == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("cosine_similarity matches closed forms") {
    EmbeddingVector e1{{1.0, 0.0}};
    EmbeddingVector e2{{0.0, 1.0}};
    EmbeddingVector diag{{1.0, 1.0}};

    CHECK(cosine_similarity(diag, diag) == doctest::Approx(1.0));
    CHECK(cosine_similarity(e1, e2) == doctest::Approx(0.0));
    CHECK(cosine_similarity(diag, e1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));

    SUBCASE("errors") {
        EmbeddingVector three{{1.0, 0.0, 0.0}};
        CHECK_THROWS_AS(cosine_similarity(e1, three), EmbeddingError);
        EmbeddingVector zero{{0.0, 0.0}};
        CHECK_THROWS_AS(cosine_similarity(e1, zero), EmbeddingError);
    }

    SUBCASE("agrees with a brute-force oracle on random vectors") {
        std::mt19937 rng(20250809);
        std::uniform_real_distribution<double> coord(-5.0, 5.0);
        std::uniform_int_distribution<int> dim_of(2, 64);
        for (int trial = 0; trial < 500; ++trial) {
            int dim = dim_of(rng);
            EmbeddingVector a, b;
            for (int i = 0; i < dim; ++i) {
                a.values.push_back(coord(rng));
                b.values.push_back(coord(rng));
            }
            if (a.norm() == 0.0 || b.norm() == 0.0) continue;

            double dot = 0.0, na = 0.0, nb = 0.0;
            for (int i = 0; i < dim; ++i) {
                dot += a.values[i] * b.values[i];
                na += a.values[i] * a.values[i];
                nb += b.values[i] * b.values[i];
            }
            double expected = dot / (std::sqrt(na) * std::sqrt(nb));

            CHECK(cosine_similarity(a, b) == doctest::Approx(expected).epsilon(1e-9));
            CHECK(cosine_similarity(a, b) == cosine_similarity(b, a));
            CHECK(cosine_similarity(a, b) <= 1.0);
            CHECK(cosine_similarity(a, b) >= -1.0);
        }
    }
}

TEST_CASE("semantic_refine keeps strictly-above-threshold candidates only") {
    // Pythagorean vectors make every similarity exact: (3,4) -> 3/5,
    // (4,3) -> 4/5, (20,21) -> 20/29 against the item axis (1,0).
    ScriptedProvider provider({{"item", {1.0, 0.0}},
                               {"low", {3.0, 4.0}},
                               {"mid", {20.0, 21.0}},
                               {"high", {4.0, 3.0}}});
    ChecklistItem item{"i1", "e1", "item", 1, VisibilityCondition::any};
    std::vector<Utterance> candidates = {utt(0, 1.0, "low"), utt(1, 2.0, "mid"),
                                         utt(2, 3.0, "high")};

    SUBCASE("similarity exactly equal to tau is excluded") {
        ContextConfig cfg;
        cfg.tau = 0.6;  // == sim("low") bit for bit
        auto kept = semantic_refine(candidates, item, cfg, provider);
        REQUIRE(kept.size() == 2);
        CHECK(kept[0].utterance.text == "mid");
        CHECK(kept[1].utterance.text == "high");
        CHECK(kept[0].similarity == doctest::Approx(20.0 / 29.0));
        CHECK(kept[1].similarity == doctest::Approx(0.8));

        cfg.tau = 20.0 / 29.0;  // boundary at the middle candidate (~0.690)
        auto stricter = semantic_refine(candidates, item, cfg, provider);
        REQUIRE(stricter.size() == 1);
        CHECK(stricter[0].utterance.text == "high");
    }
    SUBCASE("tau below the similarity range keeps everything") {
        ContextConfig cfg;
        cfg.tau = -1.0;
        CHECK(semantic_refine(candidates, item, cfg, provider).size() == 3);
    }
    SUBCASE("empty candidate list is a no-op") {
        ContextConfig cfg;
        CHECK(semantic_refine({}, item, cfg, provider).empty());
    }
}

namespace {

Session scripted_session(std::vector<Utterance> utterances) {
    Transcript t;
    t.session_id = "s1";
    t.utterances = std::move(utterances);
    Checklist c;
    c.scenario_id = "drill";
    c.items.push_back({"i1", "e1", "item", 2, VisibilityCondition::any});
    return assemble_session(t, c, {{"e1", 0.0, 1000.0}}, Visibility::daytime, std::nullopt, "s1");
}

}  // namespace

TEST_CASE("select_context composes both stages and applies fallbacks") {
    ScriptedProvider provider({{"item", {1.0, 0.0}},
                               {"low", {3.0, 4.0}},        // 0.6
                               {"low2", {6.0, 8.0}},       // 0.6, later timestamp
                               {"mid", {20.0, 21.0}},      // ~0.690
                               {"high", {4.0, 3.0}}});     // 0.8
    Session session = scripted_session(
        {utt(0, 10.0, "low"), utt(1, 20.0, "mid"), utt(2, 30.0, "high"), utt(3, 40.0, "low2")});
    const ChecklistItem& item = session.checklist.items[0];

    SUBCASE("threshold pass keeps transcript order, no fallback") {
        ContextConfig cfg;
        cfg.tau = 0.65;
        auto sel = select_context(session, item, cfg, provider);
        CHECK_FALSE(sel.fallback_used);
        REQUIRE(sel.selected.size() == 2);
        CHECK(sel.selected[0].text == "mid");
        CHECK(sel.selected[1].text == "high");
        CHECK(sel.temporal_candidates.size() == 4);
    }
    SUBCASE("auto_false leaves selection empty but flags the fallback") {
        ContextConfig cfg;
        cfg.tau = 0.9;
        cfg.empty_fallback = EmptyFallback::auto_false;
        auto sel = select_context(session, item, cfg, provider);
        CHECK(sel.fallback_used);
        CHECK(sel.selected.empty());
    }
    SUBCASE("top_k fallback ranks by similarity, ties to the earlier timestamp") {
        ContextConfig cfg;
        cfg.tau = 0.9;
        cfg.empty_fallback = EmptyFallback::top_k;
        cfg.top_k = 3;
        auto sel = select_context(session, item, cfg, provider);
        CHECK(sel.fallback_used);
        REQUIRE(sel.selected.size() == 3);
        // high (0.8), mid (~0.69), then the 0.6 tie resolved to "low" (t=10);
        // output returns to transcript order
        CHECK(sel.selected[0].text == "low");
        CHECK(sel.selected[1].text == "mid");
        CHECK(sel.selected[2].text == "high");
    }
    SUBCASE("top_k larger than the candidate set takes everything") {
        ContextConfig cfg;
        cfg.tau = 0.9;
        cfg.empty_fallback = EmptyFallback::top_k;
        cfg.top_k = 99;
        CHECK(select_context(session, item, cfg, provider).selected.size() == 4);
    }
}

TEST_CASE("select_context finds protocol-relevant radio calls") {
    // Real phrasing: the report-position item must pick up the port control
    // exchange (similarity 0.525 per the reference oracle) while galley
    // chatter stays below the threshold.
    HashingEmbeddingProvider provider(256);
    Transcript t;
    t.session_id = "s1";
    t.utterances.push_back({0, 27, 130.0, Speaker::participant,
                            "Port Control, Port Control, this is Adventurer, we are proceeding "
                            "towards Eastern Boarding Ground Charlie and we have a vessel crossing "
                            "ahead of us. Can you give us the name of that vessel?"});
    t.utterances.push_back({1, 30, 140.0, Speaker::other,
                            "Galley reports lunch will be served at twelve thirty."});
    t.utterances.push_back({2, 32, 150.0, Speaker::participant,
                            "Challenger, Challenger, this is Adventurer, can you please share your "
                            "intention and heading?"});

    Checklist c;
    c.scenario_id = "drill";
    c.items.push_back({"col-01", "collision",
                       "Report own vessel's current position and heading to port control", 4,
                       VisibilityCondition::any});
    Session session =
        assemble_session(t, c, {{"collision", 120.0, 240.0}}, Visibility::daytime, std::nullopt, "s1");

    ContextConfig cfg;
    cfg.tau = 0.35;
    auto sel = select_context(session, session.checklist.items[0], cfg, provider);

    bool has_27 = false, has_30 = false;
    for (const auto& u : sel.selected) {
        if (u.source_index == 27) has_27 = true;
        if (u.source_index == 30) has_30 = true;
    }
    CHECK(has_27);
    CHECK_FALSE(has_30);
}

TEST_CASE("selection properties hold on randomized transcripts") {
    HashingEmbeddingProvider base(256);
    MemoizedEmbeddingProvider provider(base);
    std::mt19937 rng(7);
    const std::vector<std::string> vocab = {
        "engine", "anchor", "port",  "control", "storm",   "vessel", "heading", "position",
        "report", "tug",    "radio", "bridge",  "lookout", "knots",  "channel", "standby"};
    auto random_text = [&](int words) {
        std::string text;
        for (int w = 0; w < words; ++w) {
            if (w) text += ' ';
            text += vocab[rng() % vocab.size()];
        }
        return text;
    };

    for (int trial = 0; trial < 25; ++trial) {
        Transcript t;
        t.session_id = "s";
        int n = 5 + static_cast<int>(rng() % 40);
        double ts = 0.0;
        for (int i = 0; i < n; ++i) {
            ts += static_cast<double>(rng() % 30);
            t.utterances.push_back(utt(i, ts, random_text(3 + rng() % 6)));
        }
        Checklist c;
        c.scenario_id = "drill";
        c.items.push_back({"i1", "e1", random_text(5), 3, VisibilityCondition::any});
        double start = static_cast<double>(rng() % 200);
        Session session = assemble_session(t, c, {{"e1", start, start + 120.0}},
                                           Visibility::daytime, std::nullopt, "s");

        ContextConfig cfg;
        std::vector<Utterance> previous;
        bool first = true;
        for (double tau : {0.0, 0.3, 0.5, 0.7, 0.9}) {
            cfg.tau = tau;
            auto sel = select_context(session, session.checklist.items[0], cfg, provider);

            // size chain: selected <= temporal <= transcript
            CHECK(sel.selected.size() <= sel.temporal_candidates.size());
            CHECK(sel.temporal_candidates.size() <= t.utterances.size());

            // order preservation: selected is a subsequence of the transcript
            int last_index = -1;
            for (const auto& u : sel.selected) {
                CHECK(u.index > last_index);
                last_index = u.index;
            }

            // tau-monotonicity: selections shrink as tau grows
            if (!first) {
                for (const auto& u : sel.selected) {
                    bool in_previous = false;
                    for (const auto& p : previous)
                        if (p.index == u.index) in_previous = true;
                    CHECK(in_previous);
                }
            }
            previous = sel.selected;
            first = false;
        }
    }
}

TEST_CASE("embedding memo is shared and thread safe") {
    HashingEmbeddingProvider base(64);
    MemoizedEmbeddingProvider provider(base);

    provider.embed("alpha");
    provider.embed("alpha");
    provider.embed("beta");
    CHECK(provider.cache_size() == 2);
    CHECK(provider.embed("alpha").values == base.embed("alpha").values);

    std::vector<std::thread> threads;
    for (int i = 0; i < 4; ++i)
        threads.emplace_back([&] {
            for (int k = 0; k < 50; ++k) provider.embed("text " + std::to_string(k % 10));
        });
    for (auto& th : threads) th.join();
    CHECK(provider.cache_size() == 12);
}
