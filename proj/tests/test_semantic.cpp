#include <catch_amalgamated.hpp>

#include <atomic>
#include <cmath>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "ideaspace/random.hpp"
#include "ideaspace/semantic.hpp"
#include "oracles.hpp"

using namespace ideaspace;
using Catch::Approx;

TEST_CASE("levenshtein matches the memoized recursive oracle", "[semantic][oracle]") {
    Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const std::string a = oracle::random_text(rng, 0, 24);
        const std::string b = oracle::random_text(rng, 0, 24);
        const auto ua = utf8_to_scalars(a), ub = utf8_to_scalars(b);
        INFO(a << " | " << b);
        REQUIRE(levenshtein(a, b) == oracle::levenshtein(ua, ub));
    }
}

TEST_CASE("levenshtein known values", "[semantic]") {
    CHECK(levenshtein("kitten", "sitting") == 3);
    CHECK(levenshtein("", "abc") == 3);
    CHECK(levenshtein("abc", "") == 3);
    CHECK(levenshtein("flaw", "lawn") == 2);
    // Multi-byte scalars count as one edit.
    CHECK(levenshtein("caf\xC3\xA9", "cafe") == 1);
}

TEST_CASE("normalized edit distance", "[semantic]") {
    CHECK(normalized_edit_distance("", "") == 0.0);
    CHECK(normalized_edit_distance("abc", "abc") == 0.0);
    CHECK(normalized_edit_distance("abc", "xyz") == 1.0);
    CHECK(normalized_edit_distance("kitten", "sitting") == Approx(3.0 / 7.0));
    CHECK(normalized_edit_distance("abc", "") == 1.0);
}

TEST_CASE("edit distance is a metric on random strings", "[semantic][property]") {
    Rng rng(5);
    for (int i = 0; i < 300; ++i) {
        const std::string a = oracle::random_text(rng, 0, 12);
        const std::string b = oracle::random_text(rng, 0, 12);
        const std::string c = oracle::random_text(rng, 0, 12);
        CHECK(levenshtein(a, b) == levenshtein(b, a));
        CHECK(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
        CHECK((levenshtein(a, b) == 0) == (a == b));
        const double d = normalized_edit_distance(a, b);
        CHECK(d >= 0.0);
        CHECK(d <= 1.0);
    }
}

TEST_CASE("malformed UTF-8 decodes to replacement characters", "[semantic]") {
    const auto s = utf8_to_scalars("a\xFF" "b");
    REQUIRE(s.size() == 3);
    CHECK(s[1] == U'\uFFFD');
    CHECK(utf8_to_scalars("\xE2\x82").size() == 2);  // truncated sequence: one per byte
}

TEST_CASE("cosine similarity", "[semantic]") {
    const Embedding a({1.0, 2.0, 3.0});
    const Embedding b({-2.0, 0.5, 4.0});
    CHECK(cosine_similarity(a, a) == Approx(1.0).margin(1e-12));
    CHECK(cosine_similarity(a, b) == cosine_similarity(b, a));
    CHECK(cosine_similarity(a, Embedding({-1.0, -2.0, -3.0})) == Approx(-1.0).margin(1e-12));
    CHECK(cosine_similarity(Embedding({1.0, 0.0}), Embedding({0.0, 1.0})) == Approx(0.0).margin(1e-15));
    CHECK_THROWS_AS(cosine_similarity(a, Embedding({1.0, 2.0})), ContractViolation);
    CHECK_THROWS_AS(cosine_similarity(a, Embedding({0.0, 0.0, 0.0})), DomainError);
}

TEST_CASE("cosine similarity is scale invariant and matches the oracle", "[semantic][property]") {
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> x(8), y(8);
        for (auto& v : x) v = rng.normal();
        for (auto& v : y) v = rng.normal();
        const double c = cosine_similarity(Embedding(x), Embedding(y));
        CHECK(c == Approx(oracle::cosine(x, y)).margin(1e-12));
        const double s = rng.uniform(0.01, 100.0);
        std::vector<double> xs = x;
        for (auto& v : xs) v *= s;
        CHECK(cosine_similarity(Embedding(xs), Embedding(y)) == Approx(c).margin(1e-12));
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
    }
}

TEST_CASE("mean_pairwise", "[semantic]") {
    const std::vector<double> xs{1.0, 2.0, 4.0};
    const auto st = mean_pairwise(xs, [](double a, double b) { return std::abs(a - b); });
    CHECK(st.pairs == 3);
    CHECK(st.mean == Approx(2.0));
    // |1-2|=1, |1-4|=3, |2-4|=2 -> population std sqrt(2/3)
    CHECK(st.std == Approx(std::sqrt(2.0 / 3.0)));
    CHECK_THROWS_AS(mean_pairwise(std::vector<double>{1.0}, [](double, double) { return 0.0; }), DomainError);

    const std::vector<std::string> same{"abc", "abc"};
    const auto zero = mean_pairwise(same, [](const std::string& a, const std::string& b) {
        return normalized_edit_distance(a, b);
    });
    CHECK(zero.mean == 0.0);
    CHECK(zero.std == 0.0);
}

// Duplicating an arbitrary item can raise the mean (an outlier's copy brings
// its large distances along); duplicating the most central item cannot.
TEST_CASE("duplicating the most central item lowers mean edit distance and raises mean cosine",
          "[semantic][property]") {
    Rng rng(21);
    HashingEmbedder emb(64);
    auto edit = [](const std::string& a, const std::string& b) { return normalized_edit_distance(a, b); };
    auto cos = [&](const std::string& a, const std::string& b) { return cosine_similarity(emb.embed(a), emb.embed(b)); };
    auto central = [](const std::vector<std::string>& xs, auto metric, bool smallest) {
        std::size_t best = 0;
        double best_sum = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < xs.size(); ++j) {
                if (i != j) sum += metric(xs[i], xs[j]);
            }
            if (i == 0 || (smallest ? sum < best_sum : sum > best_sum)) best = i, best_sum = sum;
        }
        return best;
    };
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<std::string> texts;
        for (int i = 0; i < 5; ++i) texts.push_back(oracle::random_words(rng, 3, 8));
        const auto e0 = mean_pairwise(texts, edit), c0 = mean_pairwise(texts, cos);
        if (e0.mean == 0.0 || c0.mean >= 1.0 - 1e-12) continue;
        auto with_e = texts, with_c = texts;
        with_e.push_back(texts[central(texts, edit, true)]);
        with_c.push_back(texts[central(texts, cos, false)]);
        CHECK(mean_pairwise(with_e, edit).mean < e0.mean);
        CHECK(mean_pairwise(with_c, cos).mean > c0.mean);
    }
}

TEST_CASE("duplicating an outlier can raise mean edit distance", "[semantic]") {
    auto edit = [](const std::string& a, const std::string& b) { return normalized_edit_distance(a, b); };
    std::vector<std::string> texts{"aaaa", "aaaa", "aaab", "zzzzzzzz"};  // mean 3.5/6, then 6.5/10
    const double before = mean_pairwise(texts, edit).mean;
    texts.push_back("zzzzzzzz");
    CHECK(mean_pairwise(texts, edit).mean > before);
}

TEST_CASE("hashing embedder", "[semantic]") {
    HashingEmbedder emb(128, 3);
    CHECK(emb.dim() == 128);
    CHECK(emb.id() == "hashing-bow-v1/d128/s3");
    const auto a = emb.embed("Customers churn without warning");
    CHECK(a == emb.embed("customers CHURN without warning!"));
    CHECK(cosine_similarity(a, emb.embed("customers churn quickly")) > cosine_similarity(a, emb.embed("solar panels")));
    CHECK(HashingEmbedder(128, 4).embed("Customers churn without warning") != a);
    CHECK_THROWS_AS(emb.embed("   "), DomainError);
}

namespace {
class WrongDim final : public Embedder {
public:
    std::size_t dim() const override { return 4; }
    std::string id() const override { return "wrong"; }

protected:
    Embedding compute(std::string_view) const override { return Embedding({1.0, 2.0}); }
};

class Counting final : public Embedder {
public:
    mutable std::atomic<int> calls{0};
    std::size_t dim() const override { return 2; }
    std::string id() const override { return "counting"; }

protected:
    Embedding compute(std::string_view) const override {
        ++calls;
        return Embedding({1.0, 1.0});
    }
};
}  // namespace

TEST_CASE("embedder contract is enforced on every implementation", "[semantic]") {
    CHECK_THROWS_AS(WrongDim().embed("x"), ContractViolation);
}

TEST_CASE("statements", "[semantic]") {
    CHECK_THROWS_AS(Statement::problem("   "), ContractViolation);
    CHECK_THROWS_AS(Statement::solution(""), ContractViolation);
    const auto p = Statement::problem("Costs are high.");
    CHECK(p.role() == Role::Problem);
    CHECK(opposite(p.role()) == Role::Solution);
    CHECK(p == Statement::problem("Costs are high."));
    CHECK_FALSE(p == Statement::solution("Costs are high."));
    CHECK_FALSE(p.has_embedding());
    CHECK_THROWS_AS(p.cached_embedding(), StateError);
}

TEST_CASE("statement embedding is computed once, even concurrently", "[semantic]") {
    Counting emb;
    const auto s = Statement::problem("shared");
    std::vector<std::thread> threads;
    for (int i = 0; i < 8; ++i) threads.emplace_back([&] { (void)s.embedding(emb); });
    for (auto& t : threads) t.join();
    CHECK(emb.calls == 1);
    CHECK(s.has_embedding());
    CHECK(s.embedder_id() == "counting");
    HashingEmbedder other(2);
    CHECK_THROWS_AS(s.embedding(other), ContractViolation);
}
