#pragma once

// Deterministic stand-in for the two fine-tuned mapping models.
//
// Statements live in a small latent space (the unit ball in R^d). A codec
// turns a latent point into d words, one per coordinate: level q of the
// quantized coordinate is written as the first q+1 letters of a fixed stem,
// so words for nearby levels are a few edits apart. The forward map is a fixed random
// rotation plus offset, the reverse map is its exact inverse, and each
// generation adds Gaussian noise of scale noise_scale * t^noise_exponent.
// Lexical distance therefore tracks latent distance, and both dispersion
// measures move monotonically with temperature.

#include <algorithm>
#include <array>
#include <atomic>
#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ideaspace/errors.hpp"
#include "ideaspace/generator.hpp"
#include "ideaspace/ideastore.hpp"
#include "ideaspace/random.hpp"
#include "ideaspace/semantic.hpp"

namespace ideaspace {

struct SyntheticConfig {
    std::size_t latent_dim = 12;
    std::size_t levels = 16;       // quantization levels per coordinate (<= stem length)
    std::uint64_t seed = 2024;     // fixes the maps and the free-text projection
    double noise_scale = 0.7;      // sigma(t) = noise_scale * t^noise_exponent
    double noise_exponent = 2.0;
    double offset_norm = 0.05;     // |b| in F(z) = A z + b
    double free_text_radius = 0.85;  // latent norm assigned to text outside the codec
};

class SyntheticWorld {
public:
    using Vec = std::vector<double>;

    explicit SyntheticWorld(SyntheticConfig config = {}) : cfg_(config), projector_(config.latent_dim, config.seed) {
        if (cfg_.latent_dim == 0) throw ContractViolation("latent_dim must be positive");
        if (cfg_.levels < 2 || cfg_.levels > stem().size()) {
            throw ContractViolation("levels must be in [2, " + std::to_string(stem().size()) + "]");
        }
        if (!(cfg_.noise_scale > 0.0)) throw ContractViolation("noise_scale must be positive");
        for (std::size_t i = 0; i < cfg_.levels; ++i) word_index_.emplace(word(i), i);
        build_maps();
    }

    const SyntheticConfig& config() const noexcept { return cfg_; }
    std::size_t dim() const noexcept { return cfg_.latent_dim; }

    static constexpr std::string_view stem() noexcept { return "bakotelimurasenovipadugezihoquwy"; }

    std::string_view word(std::size_t level) const { return stem().substr(0, level + 1); }

    double sigma(double temperature) const {
        return cfg_.noise_scale * std::pow(std::max(0.0, temperature), cfg_.noise_exponent);
    }

    // ----- codec ------------------------------------------------------------

    double step() const { return 2.0 / static_cast<double>(cfg_.levels); }

    std::size_t quantize(double x) const {
        const double clamped = std::clamp(x, -1.0, 1.0);
        const auto q = static_cast<long>(std::floor((clamped + 1.0) / step()));
        return static_cast<std::size_t>(std::clamp<long>(q, 0, static_cast<long>(cfg_.levels) - 1));
    }

    double level_value(std::size_t q) const { return -1.0 + (static_cast<double>(q) + 0.5) * step(); }

    std::string encode(const Vec& z) const {
        std::string out;
        for (std::size_t i = 0; i < dim(); ++i) {
            if (i) out.push_back(' ');
            out.append(word(quantize(z[i])));
        }
        return out;
    }

    // Exact inverse of encode() on codec text; other text is projected
    // through a feature-hashing embedder onto a sphere of fixed radius.
    Vec decode(std::string_view text) const {
        if (auto exact = decode_exact(text)) return *exact;
        const Embedding h = projector_.embed(text);
        Vec z(h.values().begin(), h.values().end());
        scale_to(z, cfg_.free_text_radius);
        return z;
    }

    std::optional<Vec> decode_exact(std::string_view text) const {
        Vec z;
        z.reserve(dim());
        std::size_t pos = 0;
        const std::string_view body = trim(text);
        while (pos < body.size()) {
            const std::size_t end = std::min(body.find(' ', pos), body.size());
            const auto it = word_index_.find(std::string(body.substr(pos, end - pos)));
            if (it == word_index_.end() || z.size() == dim()) return std::nullopt;
            z.push_back(level_value(it->second));
            pos = end + 1;
        }
        if (z.size() != dim()) return std::nullopt;
        return z;
    }

    // ----- maps -------------------------------------------------------------

    Vec forward(const Vec& z) const {
        Vec y(dim(), 0.0);
        for (std::size_t i = 0; i < dim(); ++i) {
            double s = offset_[i];
            for (std::size_t j = 0; j < dim(); ++j) s += rotation_[i][j] * z[j];
            y[i] = s;
        }
        return y;
    }

    Vec reverse(const Vec& y) const {
        Vec z(dim(), 0.0);
        for (std::size_t j = 0; j < dim(); ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < dim(); ++i) s += rotation_[i][j] * (y[i] - offset_[i]);
            z[j] = s;
        }
        return z;
    }

    Vec apply(Direction d, const Vec& z) const { return d == Direction::ProblemToSolution ? forward(z) : reverse(z); }

    // One noisy mapping: map, add N(0, sigma(t)^2 / d) per coordinate, and
    // pull the result back into the unit ball.
    Vec perturb(Direction d, const Vec& z, double temperature, Rng& rng) const {
        Vec y = apply(d, z);
        const double s = sigma(temperature) / std::sqrt(static_cast<double>(dim()));
        if (s > 0.0) {
            for (double& v : y) v += s * rng.normal();
        }
        const double n = norm(y);
        if (n > 1.0) scale_to(y, 1.0);
        return y;
    }

    static double norm(const Vec& v) {
        double s = 0.0;
        for (double x : v) s += x * x;
        return std::sqrt(s);
    }

    static void scale_to(Vec& v, double radius) {
        const double n = norm(v);
        if (n == 0.0) return;
        for (double& x : v) x *= radius / n;
    }

    Vec random_direction(Rng& rng, double radius) const {
        Vec v(dim());
        do {
            for (double& x : v) x = rng.normal();
        } while (norm(v) == 0.0);
        scale_to(v, radius);
        return v;
    }

private:
    void build_maps() {
        Rng rng(mix_seed(cfg_.seed, 0x6d617073ULL));
        const std::size_t d = dim();
        rotation_.assign(d, Vec(d, 0.0));
        // Modified Gram-Schmidt on a Gaussian matrix gives a random orthogonal matrix.
        for (std::size_t i = 0; i < d; ++i) {
            Vec row(d);
            double n = 0.0;
            do {
                for (double& x : row) x = rng.normal();
                for (std::size_t k = 0; k < i; ++k) {
                    double dot = 0.0;
                    for (std::size_t j = 0; j < d; ++j) dot += row[j] * rotation_[k][j];
                    for (std::size_t j = 0; j < d; ++j) row[j] -= dot * rotation_[k][j];
                }
                n = norm(row);
            } while (n < 1e-8);
            for (double& x : row) x /= n;
            rotation_[i] = row;
        }
        offset_ = random_direction(rng, cfg_.offset_norm);
    }

    SyntheticConfig cfg_;
    HashingEmbedder projector_;
    std::unordered_map<std::string, std::size_t> word_index_;
    std::vector<Vec> rotation_;
    Vec offset_;
};

// Embeds text as its decoded latent point, so cosine similarity is measured
// in the same space the synthetic maps act on.
class SyntheticEmbedder final : public Embedder {
public:
    explicit SyntheticEmbedder(std::shared_ptr<const SyntheticWorld> world) : world_(std::move(world)) {}

    std::size_t dim() const override { return world_->dim(); }
    std::string id() const override {
        const auto& c = world_->config();
        return "synthetic-latent-v2/d" + std::to_string(c.latent_dim) + "/L" + std::to_string(c.levels) + "/s" +
               std::to_string(c.seed);
    }

protected:
    Embedding compute(std::string_view text) const override { return Embedding(world_->decode(text)); }

private:
    std::shared_ptr<const SyntheticWorld> world_;
};

// ---------------------------------------------------------------------------
// Single-token sampler
// ---------------------------------------------------------------------------

// Softmax sampling of one next token over a fixed logit table: two dominant
// tokens ("enjoy" ahead of "eat") over a long tail of low-probability
// pseudo-words. At low temperature only the head appears; as temperature
// grows the distribution flattens towards uniform.
class TokenSampler {
public:
    explicit TokenSampler(std::size_t vocab_size = 2000, std::uint64_t seed = 7) {
        if (vocab_size < 2) throw ContractViolation("TokenSampler needs at least two tokens");
        tokens_.reserve(vocab_size);
        logits_.reserve(vocab_size);
        tokens_.emplace_back("enjoy");
        logits_.push_back(0.0);
        tokens_.emplace_back("eat");
        logits_.push_back(-0.32);  // about 5:1 against "enjoy" at t = 0.2
        Rng rng(seed);
        for (std::size_t i = 2; i < vocab_size; ++i) {
            tokens_.push_back(pseudo_word(i - 2));
            logits_.push_back(-4.0 - 4.0 * rng.uniform());
        }
    }

    std::size_t size() const noexcept { return tokens_.size(); }
    const std::string& token(std::size_t i) const { return tokens_[i]; }

    std::vector<double> probabilities(double temperature) const {
        std::vector<double> p(logits_.size(), 0.0);
        if (temperature <= 0.0) {
            p[static_cast<std::size_t>(std::max_element(logits_.begin(), logits_.end()) - logits_.begin())] = 1.0;
            return p;
        }
        const double mx = *std::max_element(logits_.begin(), logits_.end());
        double sum = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            p[i] = std::exp((logits_[i] - mx) / temperature);
            sum += p[i];
        }
        for (double& x : p) x /= sum;
        return p;
    }

    std::size_t sample_index(double temperature, Rng& rng) const {
        const auto p = probabilities(temperature);
        const double u = rng.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            acc += p[i];
            if (u < acc) return i;
        }
        return p.size() - 1;
    }

    const std::string& sample(double temperature, Rng& rng) const { return tokens_[sample_index(temperature, rng)]; }

private:
    static std::string pseudo_word(std::size_t i) {
        static constexpr std::array<std::string_view, 40> syl = {
            "ba", "be", "bi", "bo", "bu", "da", "de", "di", "do", "du", "ka", "ke", "ki", "ko",
            "ku", "la", "le", "li", "lo", "lu", "ma", "me", "mi", "mo", "mu", "na", "ne", "ni",
            "no", "nu", "ra", "re", "ri", "ro", "ru", "ta", "te", "ti", "to", "tu"};
        std::string w(syl[i % 40]);
        w.append(syl[(i / 40) % 40]);
        if (i >= 1600) w.append(syl[(i / 1600) % 40]);
        return w;
    }

    std::vector<std::string> tokens_;
    std::vector<double> logits_;
};

// ---------------------------------------------------------------------------
// Backend
// ---------------------------------------------------------------------------

class SyntheticBackend final : public GeneratorBackend {
public:
    enum class Mode { Statement, SingleToken };

    SyntheticBackend(std::shared_ptr<const SyntheticWorld> world, Direction direction)
        : world_(std::move(world)), direction_(direction), mode_(Mode::Statement) {}

    // Single-token mode: every generate() call returns one sampled token.
    static std::shared_ptr<SyntheticBackend> single_token(std::shared_ptr<const TokenSampler> sampler) {
        auto b = std::shared_ptr<SyntheticBackend>(new SyntheticBackend());
        b->sampler_ = std::move(sampler);
        b->mode_ = Mode::SingleToken;
        return b;
    }

    std::string id() const override {
        if (mode_ == Mode::SingleToken) return "synthetic/single-token";
        return "synthetic/" + std::string(to_string(direction_));
    }

    std::string generate(const std::string& prompt, double temperature,
                         std::optional<std::uint64_t> seed) const override {
        const std::uint64_t s = seed ? *seed : counter_.fetch_add(1, std::memory_order_relaxed);
        Rng rng(mix_seed(mix_seed(s, fnv1a64(prompt)), std::bit_cast<std::uint64_t>(temperature)));

        if (mode_ == Mode::SingleToken) return sampler_->sample(temperature, rng);

        const Sections sec = parse_sections(prompt);
        const auto& input = sec.get(input_role(direction_));
        if (!input || trim(*input).empty()) {
            throw GenerationError("synthetic backend: prompt has no " +
                                  std::string(to_string(input_role(direction_))) + " section");
        }
        const auto y = world_->perturb(direction_, world_->decode(*input), temperature, rng);
        const std::string_view header = direction_ == Direction::ProblemToSolution ? "SOLUTION:\n" : "PROBLEM:\n";
        return std::string(header) + world_->encode(y);
    }

private:
    SyntheticBackend() : direction_(Direction::ProblemToSolution), mode_(Mode::SingleToken) {}

    std::shared_ptr<const SyntheticWorld> world_;
    std::shared_ptr<const TokenSampler> sampler_;
    Direction direction_;
    Mode mode_;
    mutable std::atomic<std::uint64_t> counter_{0};
};

// Forward/reverse synthetic backends over one world, wrapped in a Generator.
inline std::shared_ptr<Generator> make_synthetic_generator(std::shared_ptr<const SyntheticWorld> world,
                                                           PromptTemplates templates = {}) {
    return std::make_shared<Generator>(std::make_shared<SyntheticBackend>(world, Direction::ProblemToSolution),
                                       std::make_shared<SyntheticBackend>(world, Direction::SolutionToProblem),
                                       std::move(templates));
}

// Synthetic (problem, solution) pairs. Problems are codec texts on the
// free-text sphere, either uniform (clusters = 0) or scattered around a few
// topic centres; solutions are their noise-free forward images.
inline std::vector<IdeaRecord> synthetic_records(const SyntheticWorld& world, std::size_t n, std::uint64_t seed,
                                                 std::size_t clusters = 0, double spread = 0.6) {
    Rng rng(mix_seed(seed, 0x7265636fULL));
    const double radius = world.config().free_text_radius;
    std::vector<SyntheticWorld::Vec> centres;
    for (std::size_t c = 0; c < clusters; ++c) centres.push_back(world.random_direction(rng, 1.0));
    std::vector<IdeaRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        SyntheticWorld::Vec z;
        if (centres.empty()) {
            z = world.random_direction(rng, radius);
        } else {
            z = centres[rng.below(centres.size())];
            const double s = spread / std::sqrt(static_cast<double>(world.dim()));
            for (double& x : z) x += s * rng.normal();
            SyntheticWorld::scale_to(z, radius);
        }
        const auto problem = world.encode(z);
        const auto solution = world.encode(world.forward(*world.decode_exact(problem)));
        char id[32];
        std::snprintf(id, sizeof id, "syn-%04zu", i);
        out.push_back(IdeaRecord::make(id, problem, solution, "synthetic"));
    }
    return out;
}

}  // namespace ideaspace
