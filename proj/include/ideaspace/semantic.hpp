#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include "ideaspace/errors.hpp"
#include "ideaspace/random.hpp"

namespace ideaspace {

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

class Embedding {
public:
    Embedding() = default;
    explicit Embedding(std::vector<double> values) : values_(std::move(values)) {}
    Embedding(std::initializer_list<double> values) : values_(values) {}

    std::size_t dim() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    bool is_zero() const noexcept {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
    }

    double norm() const noexcept {
        double s = 0.0;
        for (double v : values_) s += v * v;
        return std::sqrt(s);
    }

    friend bool operator==(const Embedding&, const Embedding&) = default;

private:
    std::vector<double> values_;
};

// dot(a,b) / (|a| |b|).  Throws ContractViolation on dimension mismatch and
// DomainError when either side is the zero vector.
inline double cosine_similarity(const Embedding& a, const Embedding& b) {
    if (a.dim() != b.dim()) {
        throw ContractViolation("cosine_similarity: dimension mismatch (" + std::to_string(a.dim()) +
                                " vs " + std::to_string(b.dim()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        throw DomainError("cosine_similarity: zero vector");
    }
    const double c = dot / (std::sqrt(na) * std::sqrt(nb));
    return std::clamp(c, -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Text helpers
// ---------------------------------------------------------------------------

inline std::string_view trim(std::string_view s) {
    const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

// Decodes UTF-8 into Unicode scalar values. Malformed sequences decode to
// U+FFFD one byte at a time, so every input has a defined result.
inline std::u32string utf8_to_scalars(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        std::size_t len = 0;
        char32_t cp = 0;
        if (b0 < 0x80) {
            len = 1;
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        }
        bool ok = len > 0 && i + len <= s.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
            } else {
                cp = (cp << 6) | (b & 0x3F);
            }
        }
        if (ok) {
            // Reject overlong forms, surrogates and out-of-range values.
            static constexpr char32_t min_for_len[] = {0, 0, 0x80, 0x800, 0x10000};
            if (cp < min_for_len[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) ok = false;
        }
        if (!ok) {
            out.push_back(U'\uFFFD');
            i += 1;
        } else {
            out.push_back(cp);
            i += len;
        }
    }
    return out;
}

// Unit-cost Levenshtein distance over arbitrary sequences (two-row DP).
// Anything convertible to string_view goes through the UTF-8 overload below.
template <class Seq>
    requires(!std::is_convertible_v<const Seq&, std::string_view>)
std::size_t levenshtein(const Seq& a, const Seq& b) {
    const std::size_t n = a.size(), m = b.size();
    if (n == 0) return m;
    if (m == 0) return n;
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
    return levenshtein(utf8_to_scalars(a), utf8_to_scalars(b));
}

// levenshtein / max(len) over Unicode scalar values; 0 for two empty strings.
inline double normalized_edit_distance(std::string_view a, std::string_view b) {
    const auto ua = utf8_to_scalars(a);
    const auto ub = utf8_to_scalars(b);
    const std::size_t denom = std::max(ua.size(), ub.size());
    if (denom == 0) return 0.0;
    return static_cast<double>(levenshtein(ua, ub)) / static_cast<double>(denom);
}

// ---------------------------------------------------------------------------
// Pairwise statistics
// ---------------------------------------------------------------------------

struct PairwiseStats {
    double mean = 0.0;
    double std = 0.0;  // population
    std::size_t pairs = 0;
};

template <class T, class Metric>
PairwiseStats mean_pairwise(std::span<const T> items, Metric&& metric) {
    if (items.size() < 2) {
        throw DomainError("mean_pairwise: need at least 2 items, got " + std::to_string(items.size()));
    }
    std::vector<double> values;
    values.reserve(items.size() * (items.size() - 1) / 2);
    for (std::size_t i = 0; i < items.size(); ++i) {
        for (std::size_t j = i + 1; j < items.size(); ++j) {
            values.push_back(static_cast<double>(metric(items[i], items[j])));
        }
    }
    double sum = 0.0;
    for (double v : values) sum += v;
    const double mean = sum / static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / static_cast<double>(values.size())), values.size()};
}

template <class T, class Metric>
PairwiseStats mean_pairwise(const std::vector<T>& items, Metric&& metric) {
    return mean_pairwise(std::span<const T>(items), std::forward<Metric>(metric));
}

// ---------------------------------------------------------------------------
// Embedder
// ---------------------------------------------------------------------------

// Text -> embedding. Implementations must be deterministic and safe for
// concurrent calls. Callers go through embed(), which enforces the
// dimension and non-zero invariants on every implementation.
class Embedder {
public:
    virtual ~Embedder() = default;

    virtual std::size_t dim() const = 0;
    virtual std::string id() const = 0;

    Embedding embed(std::string_view text) const {
        Embedding e = compute(text);
        if (e.dim() != dim()) {
            throw ContractViolation("embedder " + id() + " produced dim " + std::to_string(e.dim()) +
                                    ", expected " + std::to_string(dim()));
        }
        if (e.is_zero()) {
            throw DomainError("embedder " + id() + " produced a zero vector");
        }
        return e;
    }

protected:
    virtual Embedding compute(std::string_view text) const = 0;
};

// Signed feature hashing over lowercased word unigrams and bigrams.
// No model, no vocabulary file; useful as a default for real text.
class HashingEmbedder final : public Embedder {
public:
    explicit HashingEmbedder(std::size_t dim = 256, std::uint64_t seed = 0) : dim_(dim), seed_(seed) {
        if (dim_ == 0) throw ContractViolation("HashingEmbedder: dim must be positive");
    }

    std::size_t dim() const override { return dim_; }
    std::string id() const override {
        return "hashing-bow-v1/d" + std::to_string(dim_) + "/s" + std::to_string(seed_);
    }

    static std::vector<std::string> tokenize(std::string_view text) {
        std::vector<std::string> tokens;
        std::string cur;
        for (char ch : text) {
            const auto c = static_cast<unsigned char>(ch);
            if (std::isalnum(c) || c >= 0x80) {
                cur.push_back(static_cast<char>(std::tolower(c)));
            } else if (!cur.empty()) {
                tokens.push_back(std::move(cur));
                cur.clear();
            }
        }
        if (!cur.empty()) tokens.push_back(std::move(cur));
        return tokens;
    }

protected:
    Embedding compute(std::string_view text) const override {
        const std::string_view body = trim(text);
        if (body.empty()) throw DomainError("HashingEmbedder: empty text");
        auto tokens = tokenize(body);
        if (tokens.empty()) tokens.emplace_back(body);

        std::vector<double> v(dim_, 0.0);
        auto add = [&](std::string_view feature, double weight) {
            const std::uint64_t h = mix_seed(seed_, fnv1a64(feature));
            const std::size_t idx = static_cast<std::size_t>(h % dim_);
            const double sign = ((h >> 63) & 1U) ? -1.0 : 1.0;
            v[idx] += sign * weight;
        };
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            add(tokens[i], 1.0);
            if (i + 1 < tokens.size()) add(tokens[i] + ' ' + tokens[i + 1], 0.5);
        }
        // Hash collisions can cancel exactly; fall back to a whole-text feature.
        if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) add(body, 1.0);
        return Embedding(std::move(v));
    }

private:
    std::size_t dim_;
    std::uint64_t seed_;
};

// ---------------------------------------------------------------------------
// Statement
// ---------------------------------------------------------------------------

enum class Role { Problem, Solution };

inline constexpr std::string_view to_string(Role r) noexcept {
    return r == Role::Problem ? "problem" : "solution";
}

inline Role opposite(Role r) noexcept { return r == Role::Problem ? Role::Solution : Role::Problem; }

// Problem or solution text with a lazily computed embedding. Copies share the
// embedding cache; the cache is filled at most once.
class Statement {
public:
    Statement(std::string text, Role role) : text_(std::move(text)), role_(role), cache_(std::make_shared<Cache>()) {
        if (trim(text_).empty()) throw ContractViolation("Statement text must be non-empty");
    }

    static Statement problem(std::string text) { return Statement(std::move(text), Role::Problem); }
    static Statement solution(std::string text) { return Statement(std::move(text), Role::Solution); }

    // Adopts a previously persisted embedding.
    static Statement with_embedding(std::string text, Role role, Embedding embedding, std::string embedder_id) {
        Statement s(std::move(text), role);
        std::call_once(s.cache_->once, [&] {
            s.cache_->embedder_id = std::move(embedder_id);
            s.cache_->value = std::move(embedding);
            s.cache_->ready.store(true, std::memory_order_release);
        });
        return s;
    }

    const std::string& text() const noexcept { return text_; }
    Role role() const noexcept { return role_; }

    bool has_embedding() const noexcept { return cache_->ready.load(std::memory_order_acquire); }

    std::optional<std::string> embedder_id() const {
        if (!has_embedding()) return std::nullopt;
        return cache_->embedder_id;
    }

    // Embedding under `embedder`, computed on first use.
    const Embedding& embedding(const Embedder& embedder) const {
        std::call_once(cache_->once, [&] {
            cache_->value = embedder.embed(text_);
            cache_->embedder_id = embedder.id();
            cache_->ready.store(true, std::memory_order_release);
        });
        if (cache_->embedder_id != embedder.id()) {
            throw ContractViolation("statement already embedded with " + cache_->embedder_id + ", not " +
                                    embedder.id());
        }
        return cache_->value;
    }

    // Only valid once has_embedding() is true.
    const Embedding& cached_embedding() const {
        if (!has_embedding()) throw StateError("statement has no embedding yet");
        return cache_->value;
    }

    friend bool operator==(const Statement& a, const Statement& b) {
        return a.role_ == b.role_ && a.text_ == b.text_;
    }

private:
    struct Cache {
        std::once_flag once;
        std::atomic<bool> ready{false};
        std::string embedder_id;
        Embedding value;
    };

    std::string text_;
    Role role_;
    std::shared_ptr<Cache> cache_;
};

}  // namespace ideaspace
